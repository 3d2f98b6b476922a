"""
Simple logging configuration - defaults to ERROR, respects CLI/env.
"""

import logging
import os
import sys

from loguru import logger

ENV_VAR = "RECTIFLOW_LOG_LEVEL"
FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | <cyan>{name}</cyan> - <level>{message}</level>"


def resolve_level(level=None) -> str:
    """Priority: CLI arg > env var > ERROR."""
    return (level or os.getenv(ENV_VAR) or "ERROR").upper()


def setup_logging(level=None):
    """Setup loguru and the standard logging root on stderr at the same level.

    stdout stays free for data; reports and CSVs go to files.
    """
    log_level = resolve_level(level)
    os.environ[ENV_VAR] = log_level

    logger.configure(
        handlers=[
            {
                "sink": sys.stderr,
                "format": FORMAT,
                "level": log_level,
                "colorize": True,
            }
        ]
    )

    # numpy/scipy and friends log through the standard library, which has no TRACE
    std_level = logging.DEBUG if log_level == "TRACE" else logging.getLevelName(log_level)
    root_logger = logging.getLogger()
    root_logger.setLevel(std_level)
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(std_level)
    console_handler.setFormatter(
        logging.Formatter("%(asctime)s | %(levelname)s | %(name)s - %(message)s", datefmt="%H:%M:%S")
    )
    root_logger.addHandler(console_handler)
    return log_level
