"""Tests for log level resolution."""

import logging
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from rectiflow import logging_config  # noqa: E402


@pytest.mark.parametrize(
    "cli,env,expected",
    [(None, None, "ERROR"), ("debug", None, "DEBUG"), (None, "warning", "WARNING"),
     ("info", "trace", "INFO")],
)
def test_resolve_level_priority(monkeypatch, cli, env, expected):
    if env is None:
        monkeypatch.delenv(logging_config.ENV_VAR, raising=False)
    else:
        monkeypatch.setenv(logging_config.ENV_VAR, env)
    assert logging_config.resolve_level(cli) == expected


def test_setup_logging_sets_stdlib_root(monkeypatch):
    # setup_logging exports the level; setenv first so monkeypatch restores it
    monkeypatch.setenv(logging_config.ENV_VAR, "ERROR")
    assert logging_config.setup_logging("warning") == "WARNING"
    assert logging.getLogger().level == logging.WARNING


def test_trace_maps_to_stdlib_debug(monkeypatch):
    # setup_logging exports the level; setenv first so monkeypatch restores it
    monkeypatch.setenv(logging_config.ENV_VAR, "ERROR")
    assert logging_config.setup_logging("TRACE") == "TRACE"
    assert logging.getLogger().level == logging.DEBUG
