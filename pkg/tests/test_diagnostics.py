"""Tests for the hypothesis probes: Lipschitz estimates, invariance and uniqueness."""

import sys
from pathlib import Path
from unittest.mock import patch

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from rectiflow import diagnostics  # noqa: E402
from rectiflow.diagnostics import (  # noqa: E402
    check_candidate,
    estimate_lipschitz,
    estimate_lipschitz_growth,
    probe_invariance,
    probe_uniqueness,
)
from rectiflow.errors import EvalError, InvalidInput  # noqa: E402
from rectiflow.expr_core import parse  # noqa: E402
from rectiflow.integrator import Box, VectorFieldSpec  # noqa: E402

SQRT_FIELD = VectorFieldSpec.from_text(["2*sqrt(abs(x1))"])
LATE_START = "(t - 0.25)^2*(1 + sign(t - 0.25))/2"


# -- Lipschitz profile --------------------------------------------------------------


def test_linear_field_has_constant_profile():
    profile = estimate_lipschitz(VectorFieldSpec.from_text(["x1"]), (-1.0, 1.0),
                                 Box((-2.0,), (2.0,)))
    assert profile.estimates == pytest.approx([1.0] * 5)
    assert profile.sup_estimate == pytest.approx(1.0)
    assert not profile.flagged
    assert not profile.nondifferentiable


def test_quadratic_field_estimate():
    profile = estimate_lipschitz(VectorFieldSpec.from_text(["x1^2"]), (0.0, 2.0),
                                 Box((-1.0,), (1.0,)), space_samples=11)
    assert profile.sup_estimate == pytest.approx(2.0)
    assert profile.center[1] in ([-1.0], [1.0])
    assert not profile.flagged


def test_sqrt_field_is_flagged_at_origin():
    profile = estimate_lipschitz(SQRT_FIELD, (0.0, 1.0), Box((-1.0,), (1.0,)))
    assert profile.flagged
    assert profile.center[1] == [0.0]
    assert (0.0, [0.0]) in profile.nondifferentiable
    trend = profile.refinement_trend
    assert all(b / a == pytest.approx(10 ** 0.5, rel=1e-6) for a, b in zip(trend, trend[1:]))


def test_profile_to_dict_has_flag():
    profile = estimate_lipschitz(SQRT_FIELD, (0.0, 1.0), Box((-1.0,), (1.0,)))
    out = profile.to_dict()
    assert out["flagged_unbounded"] is True
    assert out["center"] == {"t": 0.0, "x": [0.0]}


def test_rotation_profile():
    field = VectorFieldSpec.from_text(["-x2", "x1"])
    profile = estimate_lipschitz(field, (0.0, 1.0), Box((-1.0, -1.0), (1.0, 1.0)),
                                 space_samples=5)
    assert profile.sup_estimate == pytest.approx(1.0)


@pytest.mark.parametrize(
    "kwargs",
    [{"radii": (1e-3, 1e-2)}, {"time_samples": 1}, {"space_samples": 1}],
)
def test_invalid_profile_arguments(kwargs):
    with pytest.raises(InvalidInput):
        estimate_lipschitz(SQRT_FIELD, (0.0, 1.0), Box((-1.0,), (1.0,)), **kwargs)


def test_region_must_be_inside_domain():
    field = VectorFieldSpec.from_text(["x1*(1 - x1)"], box=((0.0,), (1.0,)))
    with pytest.raises(InvalidInput):
        estimate_lipschitz(field, (0.0, 1.0), Box((-0.5,), (0.5,)))


# -- growth over nested boxes --------------------------------------------------------


def test_quadratic_field_is_not_globally_lipschitz():
    growth = estimate_lipschitz_growth(VectorFieldSpec.from_text(["x1^2"]), (0.0, 1.0), [0.0],
                                       [1.0, 10.0, 100.0, 1000.0])
    assert growth.sup_estimates == pytest.approx([2.0, 20.0, 200.0, 2000.0])
    assert growth.unbounded
    assert growth.verdict == "not globally Lipschitz on unbounded M"


def test_linear_field_growth_is_bounded():
    growth = estimate_lipschitz_growth(VectorFieldSpec.from_text(["3*x1"]), (0.0, 1.0), [0.0],
                                       [1.0, 10.0, 100.0, 1000.0])
    assert not growth.unbounded
    assert growth.sup_estimates == pytest.approx([3.0] * 4)


def test_growth_requires_increasing_widths():
    with pytest.raises(InvalidInput):
        estimate_lipschitz_growth(VectorFieldSpec.from_text(["x1"]), (0.0, 1.0), [0.0],
                                  [10.0, 1.0])


# -- invariance ------------------------------------------------------------------------


def test_logistic_interval_is_invariant():
    field = VectorFieldSpec.from_text(["x1*(1 - x1)"], box=((0.0,), (1.0,)))
    ics = [(0.0, [x]) for x in (0.1, 0.5, 0.9)]
    report = probe_invariance(field, (-5.0, 5.0), ics)
    assert report.probed == 3
    assert report.verdict == "invariant-on-probes"


def test_escape_is_recorded_with_face():
    field = VectorFieldSpec.from_text(["1"], box=((-1.0,), (1.0,)))
    report = probe_invariance(field, (0.0, 5.0), [(0.0, [0.0])])
    assert report.verdict == "violated"
    (escape,) = report.escapes
    assert escape.kind == "DomainEscape"
    assert escape.t_star == pytest.approx(1.0, abs=1e-10)
    assert escape.face == {"axis": 1, "side": "upper"}


def test_blow_up_is_recorded():
    report = probe_invariance(VectorFieldSpec.from_text(["x1^2"]), (0.0, 2.0), [(0.0, [1.0])])
    (escape,) = report.escapes
    assert escape.kind == "BlowUp"
    assert escape.t_star == pytest.approx(1.0, abs=1e-6)
    assert report.to_dict()["verdict"] == "violated"


def test_evaluation_error_is_recorded():
    field = VectorFieldSpec.from_text(["x1"])
    with patch.object(diagnostics, "integrate", side_effect=EvalError("log of negative")):
        report = probe_invariance(field, (0.0, 1.0), [(0.5, [1.0])])
    assert [e.kind for e in report.escapes] == ["EvalError", "EvalError"]


# -- uniqueness ------------------------------------------------------------------------


def test_sqrt_field_has_several_solutions_through_origin():
    report = probe_uniqueness(SQRT_FIELD, (0.0, [0.0]),
                              candidates=[["0"], ["t^2"], [LATE_START]])
    assert report.flagged
    assert report.distinct_solutions == 3
    out = report.to_dict()
    assert out["distinct_solutions"] == 3
    assert out["point"] == {"t": 0.0, "x": [0.0]}


def test_sqrt_field_is_unique_away_from_origin():
    report = probe_uniqueness(SQRT_FIELD, (0.0, [1.0]))
    assert not report.flagged
    assert report.distinct_solutions == 0


def test_smooth_field_is_not_flagged():
    report = probe_uniqueness(VectorFieldSpec.from_text(["x1^2"]), (0.0, [1.0]))
    assert not report.flagged


def test_candidate_through_wrong_point_is_rejected():
    check = check_candidate(SQRT_FIELD, [parse("(t + 1)^2", 1)], 0.0, [0.0])
    assert check.max_residual <= 1e-9
    assert check.initial_mismatch == pytest.approx(1.0)
    assert not check.is_solution


def test_non_solution_candidate_is_rejected():
    check = check_candidate(SQRT_FIELD, [parse("t", 1)], 0.0, [0.0])
    assert not check.is_solution
    assert check.max_residual > 0.1


def test_candidate_undefined_at_start_is_rejected():
    report = probe_uniqueness(SQRT_FIELD, (0.0, [0.0]), candidates=[["log(t)"], ["0"]])
    undefined, zero = report.evidence
    assert not undefined.is_solution
    assert undefined.initial_mismatch == float("inf")
    assert zero.is_solution


def test_uniqueness_point_outside_domain():
    field = VectorFieldSpec.from_text(["x1"], box=((0.0,), (1.0,)))
    with pytest.raises(InvalidInput):
        probe_uniqueness(field, (0.0, [2.0]))
