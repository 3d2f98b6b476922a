"""Tests for the adaptive integrator, its events and dense output."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from rectiflow.errors import DimensionError, InvalidInput, OutOfRange  # noqa: E402
from rectiflow.integrator import (  # noqa: E402
    Box,
    Interval,
    TerminationKind,
    Tolerances,
    VectorFieldSpec,
    integrate,
    integrate_with_variational,
    sample,
    solve_window,
)


def exponential():
    return VectorFieldSpec.from_text(["x1"])


def test_exponential_growth():
    curve = integrate(exponential(), 0.0, [1.0], 1.0)
    assert curve.termination.kind is TerminationKind.REACHED_TARGET
    assert curve.final_state[0] == pytest.approx(math.e, rel=1e-8)


def test_backward_integration():
    curve = integrate(exponential(), 0.0, [1.0], -1.0)
    assert curve.direction == "backward"
    assert curve.t_end == -1.0
    assert curve.final_state[0] == pytest.approx(math.exp(-1.0), rel=1e-8)


def test_zero_span_returns_single_node():
    curve = integrate(exponential(), 0.5, [2.0], 0.5)
    assert curve.termination.reached
    assert curve.nodes == [(0.5, (2.0,))]


def test_time_dependent_field():
    field = VectorFieldSpec.from_text(["cos(t)"])
    curve = integrate(field, 0.0, [0.0], math.pi / 2)
    assert curve.final_state[0] == pytest.approx(1.0, abs=1e-8)


def test_rotation_returns_after_full_turn():
    field = VectorFieldSpec.from_text(["-x2", "x1"])
    curve = integrate(field, 0.0, [1.0, 0.0], 2 * math.pi)
    assert np.linalg.norm(curve.final_state - [1.0, 0.0]) < 1e-7


@pytest.mark.parametrize("x0", [0.5, 1.0, 2.0])
def test_blow_up_is_reported_near_singularity(x0):
    field = VectorFieldSpec.from_text(["x1^2"])
    curve = integrate(field, 0.0, [x0], 3.0)
    assert curve.termination.kind is TerminationKind.BLOW_UP
    assert curve.termination.t_star == pytest.approx(1.0 / x0, abs=1e-6)
    assert curve.termination.t_star < 1.0 / x0


def test_field_with_sign_of_time_integrates_through_switch():
    curve = integrate(VectorFieldSpec.from_text(["sign(t - 0.5)"]), 0.0, [0.0], 1.0)
    assert curve.termination.reached
    assert curve.final_state[0] == pytest.approx(0.0, abs=1e-5)
    assert curve.sample(0.5)[0] == pytest.approx(-0.5, abs=1e-4)


def test_domain_escape_projects_onto_face():
    field = VectorFieldSpec.from_text(["1"], box=((-1.0,), (1.0,)))
    curve = integrate(field, 0.0, [0.0], 5.0)
    term = curve.termination
    assert term.kind is TerminationKind.DOMAIN_ESCAPE
    assert term.face == (0, "upper")
    assert term.t_star == pytest.approx(1.0, abs=1e-10)
    assert curve.final_state[0] == 1.0
    assert term.to_dict()["face"] == {"axis": 1, "side": "upper"}


def test_domain_escape_through_lower_face_backward():
    field = VectorFieldSpec.from_text(["1"], box=((-1.0,), (1.0,)))
    curve = integrate(field, 0.0, [0.0], -5.0)
    assert curve.termination.face == (0, "lower")
    assert curve.termination.t_star == pytest.approx(-1.0, abs=1e-10)


def test_dense_output_is_exact_at_nodes_and_accurate_between():
    curve = integrate(exponential(), 0.0, [1.0], 2.0)
    for t, x in curve.nodes:
        assert np.array_equal(sample(curve, t), np.array(x))
    for t in np.linspace(0.0, 2.0, 37):
        assert sample(curve, t)[0] == pytest.approx(math.exp(t), rel=1e-7)
        assert curve.derivative(t)[0] == pytest.approx(math.exp(t), rel=1e-5)


def test_sample_outside_curve_is_out_of_range():
    curve = integrate(exponential(), 0.0, [1.0], 1.0)
    with pytest.raises(OutOfRange):
        sample(curve, 1.5)


def test_tighter_tolerance_reduces_error():
    loose = integrate(exponential(), 0.0, [1.0], 1.0, Tolerances(rtol=1e-5, atol=1e-8))
    tight = integrate(exponential(), 0.0, [1.0], 1.0, Tolerances(rtol=1e-11, atol=1e-14))
    assert abs(tight.final_state[0] - math.e) < abs(loose.final_state[0] - math.e)
    assert len(tight.times) > len(loose.times)


@pytest.mark.parametrize(
    "t0,x0,target",
    [(0.0, [5.0], 1.0), (3.0, [0.5], 1.0), (0.0, [0.5], 4.0), (math.nan, [0.5], 1.0)],
)
def test_cauchy_data_outside_domain_is_rejected(t0, x0, target):
    field = VectorFieldSpec.from_text(["x1"], time_interval=(-1.0, 2.0), box=((0.0,), (1.0,)))
    with pytest.raises(InvalidInput):
        integrate(field, t0, x0, target)


def test_target_on_interval_boundary_is_allowed():
    field = VectorFieldSpec.from_text(["1"], time_interval=(0.0, 1.0))
    curve = integrate(field, 0.5, [0.0], 1.0)
    assert curve.final_state[0] == pytest.approx(0.5)


def test_wrong_initial_dimension():
    with pytest.raises(InvalidInput):
        integrate(exponential(), 0.0, [1.0, 2.0], 1.0)


@pytest.mark.parametrize("kwargs", [{"rtol": 0.0}, {"atol": -1.0}, {"rtol": 1e-17},
                                    {"blowup_norm": 0.0}])
def test_invalid_tolerances(kwargs):
    with pytest.raises(InvalidInput):
        Tolerances(**kwargs)


def test_variational_jacobian_matches_closed_form():
    # x' = x1^2 has phi(t; 0, x) = x / (1 - t x), d phi / dx = 1 / (1 - t x)^2
    field = VectorFieldSpec.from_text(["x1^2"])
    curve, jac = integrate_with_variational(field, 0.0, [0.5], 1.0)
    assert curve.final_state[0] == pytest.approx(1.0, rel=1e-8)
    assert jac.final[0, 0] == pytest.approx(4.0, rel=1e-7)
    assert jac.at(0.5)[0, 0] == pytest.approx(1.0 / 0.75**2, rel=1e-6)


def test_variational_rotation_is_orthogonal():
    field = VectorFieldSpec.from_text(["-x2", "x1"])
    _, jac = integrate_with_variational(field, 0.0, [0.3, -0.2], 1.0)
    expected = np.array([[math.cos(1.0), -math.sin(1.0)], [math.sin(1.0), math.cos(1.0)]])
    assert np.allclose(jac.final, expected, atol=1e-8)


def test_solve_window_covers_both_sides():
    sol = solve_window(exponential(), 0.0, [1.0], (-1.0, 1.0))
    assert sol.complete
    assert sol.time_range == (-1.0, 1.0)
    assert sol.sample(-0.5)[0] == pytest.approx(math.exp(-0.5), rel=1e-8)
    assert sol.sample(0.5)[0] == pytest.approx(math.exp(0.5), rel=1e-8)


def test_solve_window_rejects_t0_outside():
    with pytest.raises(InvalidInput):
        solve_window(exponential(), 2.0, [1.0], (-1.0, 1.0))


def test_field_dimension_mismatch():
    with pytest.raises(DimensionError):
        VectorFieldSpec.from_text(["x1"], box=((0.0, 0.0), (1.0, 1.0)))


def test_jacobian_is_computed_symbolically():
    field = VectorFieldSpec.from_text(["x1*x2", "sin(x1)"])
    assert np.allclose(field.jacobian_at(0.0, [2.0, 3.0]), [[3.0, 2.0], [math.cos(2.0), 0.0]])
    assert np.array_equal(field.extended(0.0, [2.0, 3.0]), [1.0, 6.0, math.sin(2.0)])


def test_autonomous_form_appends_clock():
    field = VectorFieldSpec.from_text(["cos(t)"], time_interval=(0.0, 5.0))
    auto = field.autonomous()
    assert auto.dimension == 2
    assert np.allclose(auto.evaluate(0.0, [7.0, 1.0]), [math.cos(1.0), 1.0])
    assert auto.box.upper == (math.inf, 5.0)


def test_restriction_must_be_inside():
    field = VectorFieldSpec.from_text(["x1"], box=((0.0,), (1.0,)))
    inner = field.restricted(Interval(0.0, 1.0), Box((0.2,), (0.8,)))
    assert inner.box.lower == (0.2,)
    with pytest.raises(InvalidInput):
        field.restricted(Interval(0.0, 1.0), Box((-0.5,), (0.8,)))


def test_box_grid_and_membership():
    box = Box((0.0, -1.0), (1.0, 1.0))
    grid = box.grid(3)
    assert grid.shape == (9, 2)
    assert box.contains_closed(grid[0])
    assert not box.contains(grid[0])
    assert box.contains(box.center)
    with pytest.raises(InvalidInput):
        Box.whole(1).grid(3)


def test_interval_accepts_infinity_text():
    interval = Interval("-∞", "inf")
    assert not interval.is_bounded
    assert interval.contains(1e300)
    with pytest.raises(InvalidInput):
        Interval(1.0, 1.0)
