"""Tests for wreath elements, graph transforms and conjugated symmetries."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from rectiflow.errors import DimensionError, MissingInverse, NotTrivialForm  # noqa: E402
from rectiflow.integrator import Box, VectorFieldSpec, solve_window  # noqa: E402
from rectiflow.rectify import SpaceTimeMap, build_rectification  # noqa: E402
from rectiflow.symmetry import (  # noqa: E402
    TransformedCurve,
    Undefined,
    WreathElement,
    conjugate_symmetry,
    is_symmetry,
    is_trivial_symmetry_form,
    symmetry_from_wreath,
    transform_solution,
    validate_element,
    wreath_act,
    wreath_compose,
    wreath_inverse,
    wreath_to_map,
)

SCALE = WreathElement.from_text("t", ["2*x1"], f_inv_t="t", g_inv=["x1/2"], name="scale")
SHIFT = WreathElement.from_text("t + 1", ["x1"], f_inv_t="t - 1", g_inv=["x1"], name="shift")
SHEAR = WreathElement.from_text("t + x1", ["x1"], f_inv_t="t - x1", g_inv=["x1"], name="shear")

EXPONENTIAL_ICS = [(0.0, [1.0]), (0.0, [0.5]), (0.5, [2.0]), (-0.5, [-1.0])]


def exponential_rect():
    field = VectorFieldSpec.from_text(["x1"])
    return build_rectification(field, t0=0.0, window=(-1.0, 1.0), probe_box=Box((0.5,), (2.0,)))


# -- wreath elements --------------------------------------------------------------


def test_action():
    t, x = wreath_act(SHEAR, 1.0, [3.0])
    assert (t, x.tolist()) == (4.0, [3.0])


@pytest.mark.parametrize("a,b", [(SCALE, SHIFT), (SHIFT, SHEAR), (SHEAR, SCALE)])
def test_compose_acts_as_sequential_application(a, b):
    ab = wreath_compose(a, b)
    for t, x in [(0.0, [1.0]), (0.7, [-2.0]), (-1.3, [0.25])]:
        direct = wreath_act(ab, t, x)
        stepwise = wreath_act(a, *wreath_act(b, t, x))
        assert direct[0] == pytest.approx(stepwise[0])
        assert np.allclose(direct[1], stepwise[1])


def test_composition_is_not_commutative():
    ab = wreath_act(wreath_compose(SHEAR, SCALE), 0.0, [1.0])
    ba = wreath_act(wreath_compose(SCALE, SHEAR), 0.0, [1.0])
    assert ab[0] != ba[0]


@pytest.mark.parametrize("a", [SCALE, SHIFT, SHEAR, wreath_compose(SHEAR, SCALE)])
def test_inverse_undoes_element(a):
    inv = wreath_inverse(a)
    for t, x in [(0.0, [1.0]), (2.0, [-0.5])]:
        back = wreath_act(inv, *wreath_act(a, t, x))
        assert back[0] == pytest.approx(t)
        assert np.allclose(back[1], x)
        forth = wreath_act(a, *wreath_act(inv, t, x))
        assert forth[0] == pytest.approx(t)


def test_identity_is_neutral():
    ident = WreathElement.identity(1)
    for a in (SCALE, SHEAR):
        left = wreath_act(wreath_compose(ident, a), 0.3, [1.5])
        right = wreath_act(a, 0.3, [1.5])
        assert left[0] == pytest.approx(right[0]) and np.allclose(left[1], right[1])


def random_element(rng):
    p, q = (float(v) for v in rng.uniform(0.5, 2.0, size=2))
    b, c = float(rng.uniform(0.5, 2.0)), float(rng.uniform(-1.0, 1.0))
    return WreathElement.from_text(
        f"{p!r}*t + sin({q!r}*x1)",
        [f"{b!r}*x1 + ({c!r})"],
        f_inv_t=f"(t - sin({q!r}*x1))/{p!r}",
        g_inv=[f"(x1 - ({c!r}))/{b!r}"],
    )


def _distance(p, q):
    return abs(p[0] - q[0]) + float(np.linalg.norm(np.asarray(p[1]) - np.asarray(q[1])))


def test_wreath_group_laws_on_random_elements():
    rng = np.random.default_rng(7)
    grid = [(t, [x]) for t in np.linspace(-1.0, 1.0, 10) for x in np.linspace(-2.0, 2.0, 10)]
    ident = WreathElement.identity(1)
    worst = 0.0
    for _ in range(20):
        a, b, c = random_element(rng), random_element(rng), random_element(rng)
        left = wreath_compose(wreath_compose(a, b), c)
        right = wreath_compose(a, wreath_compose(b, c))
        as_map = wreath_to_map(wreath_compose(a, b))
        composed_map = wreath_to_map(a).compose(wreath_to_map(b))
        inv = wreath_inverse(a)
        for t, x in grid:
            worst = max(
                worst,
                _distance(wreath_act(left, t, x), wreath_act(right, t, x)),
                _distance(as_map(t, x), composed_map(t, x)),
                _distance(wreath_act(inv, *wreath_act(a, t, x)), (t, x)),
                _distance(wreath_act(wreath_compose(ident, a), t, x), wreath_act(a, t, x)),
                _distance(wreath_act(wreath_compose(a, ident), t, x), wreath_act(a, t, x)),
            )
    assert worst <= 1e-9

def test_space_part_must_not_depend_on_time():
    with pytest.raises(NotTrivialForm):
        WreathElement.from_text("t", ["x1 + t"])


def test_mixed_dimensions_rejected():
    with pytest.raises(DimensionError):
        wreath_compose(SCALE, WreathElement.identity(2))


def test_inverse_requires_expressions():
    with pytest.raises(MissingInverse):
        wreath_inverse(WreathElement.from_text("t^3 + t", ["x1"]))


def test_validate_element_flags_non_monotone_time():
    bad = WreathElement.from_text("t^2", ["x1"])
    problems = validate_element(bad, (-1.0, 1.0), [[0.0], [1.0]])
    assert any("monotone" in p for p in problems)


def test_validate_element_flags_non_injective_space_map():
    bad = WreathElement.from_text("t", ["x1^2"])
    problems = validate_element(bad, (-1.0, 1.0), [[1.0], [-1.0]])
    assert any("injective" in p for p in problems)


def test_validate_element_flags_wrong_inverse():
    bad = WreathElement.from_text("t + 1", ["x1"], f_inv_t="t + 1", g_inv=["x1"])
    problems = validate_element(bad, (0.0, 1.0), [[0.0]])
    assert any("inverse" in p for p in problems)


def test_valid_element_has_no_problems():
    assert validate_element(SHEAR, (-1.0, 1.0), [[0.0], [1.0], [2.0]]) == []


# -- trivial form -----------------------------------------------------------------


def test_trivial_form_symbolic():
    assert is_trivial_symmetry_form(wreath_to_map(SHEAR)).is_trivial
    drift = SpaceTimeMap.from_expressions(["t", "x1 + t"])
    check = is_trivial_symmetry_form(drift, [(0.0, np.array([1.0]))])
    assert not check.is_trivial
    assert check.witness == pytest.approx(1.0)


def test_trivial_form_on_flow_based_map():
    r = exponential_rect()
    check = is_trivial_symmetry_form(r.as_map(), r.probe_points((3, 3)))
    assert not check.is_trivial
    assert check.witness > 0.5


# -- graph transforms ----------------------------------------------------------------


def test_transform_by_time_shift():
    field = VectorFieldSpec.from_text(["x1"])
    sol = solve_window(field, 0.0, [1.0], (-1.0, 1.0))
    shift = SpaceTimeMap.from_expressions(["t + 1", "x1"])
    curve = transform_solution(shift, sol, samples=51)
    assert isinstance(curve, TransformedCurve)
    assert curve.time_range == (0.0, 2.0)
    assert curve.sample(1.0)[0] == pytest.approx(1.0, rel=1e-8)
    assert curve.sample(1.5)[0] == pytest.approx(math.exp(0.5), rel=1e-5)


def test_transform_with_time_reversal_is_reordered():
    field = VectorFieldSpec.from_text(["0"])
    sol = solve_window(field, 0.0, [2.0], (0.0, 1.0))
    flip = SpaceTimeMap.from_expressions(["-t", "x1"])
    curve = transform_solution(flip, sol, samples=11)
    assert curve.time_range == (-1.0, 0.0)


def test_transform_that_collapses_time_is_undefined():
    field = VectorFieldSpec.from_text(["0"])
    sol = solve_window(field, 0.0, [1.0], (0.0, 1.0))
    swap = SpaceTimeMap.from_expressions(["x1", "t"])
    assert isinstance(transform_solution(swap, sol, samples=11), Undefined)


# -- symmetry checks ----------------------------------------------------------------


def test_time_shift_conjugates_to_scaling():
    # Phi ∘ (t + 1, x) ∘ Phi^-1 = (t + 1, e x) for x' = x with base time 0
    r = exponential_rect()
    sym = symmetry_from_wreath(r, SHIFT)
    t, x = sym(0.2, [1.3])
    assert t == pytest.approx(1.2)
    assert x[0] == pytest.approx(math.e * 1.3, rel=1e-7)


def test_scaling_conjugates_to_scaling():
    # x' = x commutes with x -> 2x, so the conjugate is (t, 2x) again
    r = exponential_rect()
    sym = symmetry_from_wreath(r, SCALE)
    for point in [(0.2, [1.3]), (-0.7, [0.6]), (0.9, [1.9])]:
        t, x = sym(*point)
        assert t == pytest.approx(point[0], abs=1e-12)
        assert x[0] == pytest.approx(2 * point[1][0], abs=1e-6)


ROTATION_SCALE = WreathElement.from_text("t", ["2*x1", "2*x2"], f_inv_t="t",
                                         g_inv=["x1/2", "x2/2"], name="scale")
ROTATION_SHIFT = WreathElement.from_text("t + 1", ["x1", "x2"], f_inv_t="t - 1",
                                         g_inv=["x1", "x2"], name="shift")
ROTATION_ICS = [(0.0, [1.0, 0.0]), (0.0, [0.0, 1.0]), (0.5, [-1.0, 0.5]),
                (-0.5, [0.5, -1.5]), (1.0, [1.5, 1.5])]


@pytest.mark.parametrize(
    "element",
    [ROTATION_SCALE, ROTATION_SHIFT, wreath_compose(ROTATION_SCALE, ROTATION_SHIFT)],
    ids=["scale", "shift", "scale-shift"],
)
def test_conjugated_elements_are_symmetries_of_rotation(element):
    field = VectorFieldSpec.from_text(["-x2", "x1"])
    r = build_rectification(field, t0=0.0, window=(-1.5, 1.5),
                            probe_box=Box((-2.0, -2.0), (2.0, 2.0)))
    report = is_symmetry(symmetry_from_wreath(r, element), field, ROTATION_ICS, (-1.5, 1.5),
                         samples=101)
    assert report.tested_solutions == 5
    assert report.undefined_transforms == 0
    assert report.max_residual <= 1e-4
    assert report.passed


def test_conjugate_rejects_non_trivial_form():
    r = exponential_rect()
    drift = SpaceTimeMap.from_expressions(["t", "x1 + t"], ["t", "x1 - t"])
    with pytest.raises(NotTrivialForm):
        conjugate_symmetry(r, drift)


def test_conjugate_requires_inverse():
    r = exponential_rect()
    with pytest.raises(MissingInverse):
        conjugate_symmetry(r, SpaceTimeMap.from_expressions(["t", "x1"]))


def test_scaling_is_symmetry_of_exponential():
    field = VectorFieldSpec.from_text(["x1"])
    grow = SpaceTimeMap.from_expressions(["t + 1", "exp(1)*x1"])
    report = is_symmetry(grow, field, EXPONENTIAL_ICS, (-1.0, 1.0))
    assert report.tested_solutions == 4
    assert report.passed
    assert report.verdict == "pass"


def test_drift_is_not_symmetry_of_exponential():
    field = VectorFieldSpec.from_text(["x1"])
    drift = SpaceTimeMap.from_expressions(["t", "x1 + t"])
    report = is_symmetry(drift, field, EXPONENTIAL_ICS, (-1.0, 1.0))
    assert not report.passed
    assert report.max_residual > 1e-4


def test_conjugated_symmetry_passes_check():
    r = exponential_rect()
    sym = symmetry_from_wreath(r, SCALE)
    report = is_symmetry(sym, r.field, EXPONENTIAL_ICS[:2], (-1.0, 1.0), samples=101)
    assert report.passed


def test_zero_field_symmetries_are_wreath_elements():
    field = VectorFieldSpec.from_text(["0"])
    ics = [(0.0, [-1.0]), (0.0, [2.0])]
    report = is_symmetry(wreath_to_map(SHEAR), field, ics, (0.0, 3.0))
    assert report.passed
    drift = SpaceTimeMap.from_expressions(["t", "x1 + t"])
    assert not is_symmetry(drift, field, ics, (0.0, 3.0)).passed


def test_undefined_transforms_fail_the_check():
    field = VectorFieldSpec.from_text(["0"])
    swap = SpaceTimeMap.from_expressions(["x1", "t"])
    report = is_symmetry(swap, field, [(0.0, [1.0])], (0.0, 1.0))
    assert report.undefined_transforms == 1
    assert not report.passed
    assert "undefined" in report.to_dict()["solutions"][0]
