"""Symmetries: wreath-product elements, graph transforms and conjugation through Phi.

A wreath element ``(f, g)`` acts on I x M by ``(t, x) -> (f(x)(t), g(x))``. These maps are
exactly the symmetries of the trivial equation x' = 0, and conjugating them through a
rectification Phi yields symmetries of x' = v(t, x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.interpolate import CubicSpline

from .errors import (
    DimensionError,
    EvalError,
    InvalidInput,
    MissingInverse,
    NotTrivialForm,
    OutOfRange,
    TrajectoryError,
)
from .expr_core import (
    Expression,
    Number,
    compile_expression,
    differentiate,
    identity_expressions,
    parse,
    substitute,
)
from .integrator import Tolerances, VectorFieldSpec, solve_window
from .rectify import Point, Rectification, SpaceTimeMap

TIME_MARGIN = 1e-10
TRIVIAL_FORM_THRESHOLD = 1e-8
SYMMETRY_THRESHOLD = 1e-4
DEFAULT_SAMPLES = 201


def _t_free(e: Expression) -> bool:
    return not e.depends_on("t")


@dataclass(frozen=True)
class WreathElement:
    """``(f, g)`` with f(t, x) the time component and g(x) the space components."""

    f: Expression
    g: tuple
    f_inv_t: Optional[Expression] = None
    g_inv: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        n = len(self.g)
        object.__setattr__(self, "g", tuple(self.g))
        if self.g_inv is not None:
            object.__setattr__(self, "g_inv", tuple(self.g_inv))
            if len(self.g_inv) != n:
                raise DimensionError(f"g_inv has {len(self.g_inv)} components, g has {n}")
        exprs = [self.f, *self.g, *(self.g_inv or ())]
        if self.f_inv_t is not None:
            exprs.append(self.f_inv_t)
        if any(e.dimension != n for e in exprs):
            raise DimensionError(f"wreath element {self.name!r} mixes dimensions")
        for part in (self.g, self.g_inv or ()):
            for e in part:
                if not _t_free(e):
                    raise NotTrivialForm(
                        f"wreath element {self.name!r}: space component {e} depends on t"
                    )

    @classmethod
    def from_text(cls, f: str, g: Sequence[str], f_inv_t: Optional[str] = None,
                  g_inv: Optional[Sequence[str]] = None, name: str = "") -> "WreathElement":
        n = len(g)
        return cls(
            f=parse(f, n),
            g=tuple(parse(e, n) for e in g),
            f_inv_t=parse(f_inv_t, n) if f_inv_t is not None else None,
            g_inv=tuple(parse(e, n) for e in g_inv) if g_inv is not None else None,
            name=name,
        )

    @classmethod
    def identity(cls, dimension: int) -> "WreathElement":
        ids = identity_expressions(dimension)
        return cls(ids[0], ids[1:], ids[0], ids[1:], "id")

    @property
    def dimension(self) -> int:
        return len(self.g)

    @property
    def has_inverse(self) -> bool:
        return self.f_inv_t is not None and self.g_inv is not None

    @cached_property
    def _compiled(self) -> list:
        return [compile_expression(e) for e in (self.f, *self.g)]

    def to_dict(self) -> dict:
        out = {"f": str(self.f), "g": [str(e) for e in self.g]}
        if self.f_inv_t is not None:
            out["f_inv_t"] = str(self.f_inv_t)
        if self.g_inv is not None:
            out["g_inv"] = [str(e) for e in self.g_inv]
        return out


def wreath_act(a: WreathElement, t: float, x) -> Point:
    xs = [float(v) for v in np.asarray(x).reshape(-1)]
    if len(xs) != a.dimension:
        raise InvalidInput(f"point has {len(xs)} coordinates, element acts on {a.dimension}")
    f, *g = a._compiled
    return f(t, xs), np.array([gi(t, xs) for gi in g])


def wreath_compose(a: WreathElement, b: WreathElement) -> WreathElement:
    """``a · b``, acting as ``a`` after ``b``."""
    if a.dimension != b.dimension:
        raise DimensionError(
            f"cannot compose elements of dimension {a.dimension} and {b.dimension}"
        )
    f = substitute(a.f, time=b.f, space=b.g)
    g = tuple(substitute(e, space=b.g) for e in a.g)
    f_inv_t = g_inv = None
    if a.has_inverse and b.has_inverse:
        f_inv_t = substitute(b.f_inv_t, time=substitute(a.f_inv_t, space=b.g))
        g_inv = tuple(substitute(e, space=a.g_inv) for e in b.g_inv)
    name = f"{a.name}·{b.name}" if a.name and b.name else ""
    return WreathElement(f, g, f_inv_t, g_inv, name)


def wreath_inverse(a: WreathElement) -> WreathElement:
    if not a.has_inverse:
        raise MissingInverse(f"wreath element {a.name!r} has no inverse expressions")
    return WreathElement(
        f=substitute(a.f_inv_t, space=a.g_inv),
        g=a.g_inv,
        f_inv_t=substitute(a.f, space=a.g_inv),
        g_inv=a.g,
        name=f"{a.name}^-1" if a.name else "",
    )


def wreath_to_map(a: WreathElement) -> SpaceTimeMap:
    inverse = None
    if a.has_inverse:
        b = wreath_inverse(a)
        inverse = (b.f, *b.g)
    return SpaceTimeMap.from_expressions((a.f, *a.g), inverse, name=a.name)


def validate_element(a: WreathElement, window: Tuple[float, float], points: Sequence,
                     time_samples: int = 11) -> List[str]:
    """Problems found with ``a`` on sampled points.

    Checks that f is strictly monotone in t, g is injective and any supplied inverse undoes ``a``.
    """
    problems: List[str] = []
    times = np.linspace(window[0], window[1], time_samples)
    images = []
    for x in points:
        x = np.asarray(x, dtype=float)
        try:
            values = np.array([wreath_act(a, t, x)[0] for t in times])
            gx = wreath_act(a, times[0], x)[1]
        except EvalError as exc:
            problems.append(f"evaluation failed at x={x.tolist()}: {exc}")
            continue
        steps = np.diff(values)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            problems.append(f"f(x)(t) is not strictly monotone at x={x.tolist()}")
        for y, other in images:
            if np.linalg.norm(gx - y) <= 1e-9 and np.linalg.norm(x - other) > 1e-9:
                problems.append(f"g is not injective: x={x.tolist()} and x={other.tolist()}")
        images.append((gx, x))
        if a.has_inverse:
            b = wreath_inverse(a)
            try:
                back = [wreath_act(b, *wreath_act(a, t, x)) for t in times]
            except EvalError as exc:
                problems.append(f"inverse evaluation failed at x={x.tolist()}: {exc}")
                continue
            err = max(abs(bt - t) + float(np.linalg.norm(bx - x))
                      for (bt, bx), t in zip(back, times))
            if err > 1e-9:
                problems.append(f"supplied inverse is off by {err:.3e} at x={x.tolist()}")
    return problems


# -- trivial-form check ---------------------------------------------------------------


@dataclass
class TrivialFormCheck:
    is_trivial: bool
    witness: float  # max |d x'/d t| over the probes

    def to_dict(self) -> dict:
        return {"is_trivial": self.is_trivial, "witness": self.witness}


def is_trivial_symmetry_form(m: SpaceTimeMap, probe_points: Sequence[Point] = ()
                             ) -> TrivialFormCheck:
    """Whether the space output of ``m`` ignores t, i.e. ``m`` has the form (f(t, x), g(x))."""
    if m.expressions is not None:
        derivatives = [differentiate(e, "t") for e in m.expressions[1:]]
        if all(d.node == Number(0.0) for d in derivatives):
            return TrivialFormCheck(True, 0.0)
        if not probe_points:
            return TrivialFormCheck(False, math.inf)
        compiled = [compile_expression(d) for d in derivatives]

        def time_column(t: float, x: np.ndarray) -> np.ndarray:
            xs = x.tolist()
            return np.array([c(t, xs) for c in compiled])
    else:

        def time_column(t: float, x: np.ndarray) -> np.ndarray:
            return m.jacobian(t, x)[1:, 0]

    witness = 0.0
    for t, x in probe_points:
        try:
            column = time_column(float(t), np.asarray(x, dtype=float))
        except (EvalError, TrajectoryError) as exc:
            logger.debug(f"trivial-form probe at t={t} skipped: {exc}")
            continue
        witness = max(witness, float(np.linalg.norm(column)))
    return TrivialFormCheck(witness <= TRIVIAL_FORM_THRESHOLD, witness)


# -- graph transforms -------------------------------------------------------------------


@dataclass(frozen=True)
class Undefined:
    """The transformed graph is not the graph of a function of time."""

    reason: str


@dataclass(frozen=True, eq=False)
class TransformedCurve:
    """A mapped solution graph, reparametrised by the mapped time."""

    times: np.ndarray
    states: np.ndarray

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.times, self.states, axis=0)

    @property
    def time_range(self) -> Tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    @property
    def nodes(self) -> list:
        return list(zip(self.times.tolist(), [tuple(s) for s in self.states.tolist()]))

    def _check(self, t: float) -> None:
        lo, hi = self.time_range
        if not lo <= t <= hi:
            raise OutOfRange(f"t={t!r} outside transformed range [{lo!r}, {hi!r}]")

    def sample(self, t: float) -> np.ndarray:
        self._check(t)
        hit = np.flatnonzero(self.times == t)
        if hit.size:
            return self.states[hit[0]].copy()
        return np.asarray(self._spline(t))

    def derivative(self, t: float) -> np.ndarray:
        self._check(t)
        return np.asarray(self._spline(t, 1))


def transform_solution(m: SpaceTimeMap, sol, samples: int = DEFAULT_SAMPLES
                       ) -> Union[TransformedCurve, Undefined]:
    """Map the graph of ``sol`` through ``m`` and read it back as a curve in the new time.

    ``sol`` is anything with ``time_range`` and ``sample(t)``; the result is
    :class:`Undefined` when the mapped times are not strictly monotone.
    """
    if samples < 2:
        raise InvalidInput(f"need at least 2 samples, got {samples}")
    lo, hi = sol.time_range
    if not lo < hi:
        raise InvalidInput("solution covers an empty time range")
    times, states = [], []
    for t in np.linspace(lo, hi, samples):
        s, y = m(t, sol.sample(t))
        times.append(s)
        states.append(y)
    times = np.array(times)
    steps = np.diff(times)
    if np.all(steps < -TIME_MARGIN):
        times, states = times[::-1], states[::-1]
    elif not np.all(steps > TIME_MARGIN):
        return Undefined("mapped times are not strictly monotone")
    return TransformedCurve(times, np.array(states))


def conjugate_symmetry(r: Rectification, alpha: SpaceTimeMap,
                       probe_points: Optional[Sequence[Point]] = None) -> SpaceTimeMap:
    """Phi ∘ alpha ∘ Phi^-1 for a symmetry ``alpha`` of the trivial equation."""
    if not alpha.has_inverse:
        raise MissingInverse(f"conjugation needs the inverse of {alpha.describe()}")
    points = r.probe_points() if probe_points is None else probe_points
    check = is_trivial_symmetry_form(alpha, points)
    if not check.is_trivial:
        raise NotTrivialForm(
            f"{alpha.describe()} is not of the form (f(t, x), g(x)); "
            f"max |dx'/dt| = {check.witness:.3e}"
        )
    conjugate = r.as_map().compose(alpha).compose(r.inverse_map())
    name = f"Phi ∘ {alpha.name} ∘ Phi^-1" if alpha.name else ""
    return SpaceTimeMap(
        conjugate.dimension,
        conjugate.forward,
        conjugate.jacobian_provider,
        conjugate.inverse,
        conjugate.inverse_jacobian,
        name=name,
    )


def symmetry_from_wreath(r: Rectification, a: WreathElement) -> SpaceTimeMap:
    """The symmetry of x' = v corresponding to a wreath element."""
    return conjugate_symmetry(r, wreath_to_map(a))


# -- symmetry check ----------------------------------------------------------------------


@dataclass
class SymmetryCheckReport:
    tested_solutions: int = 0
    max_residual: float = 0.0
    undefined_transforms: int = 0
    threshold: float = SYMMETRY_THRESHOLD
    per_solution: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.threshold and self.undefined_transforms == 0

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "tested_solutions": self.tested_solutions,
            "max_residual": self.max_residual,
            "undefined_transforms": self.undefined_transforms,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "solutions": self.per_solution,
        }


def _curve_residual(curve: TransformedCurve, field: VectorFieldSpec) -> float:
    times = curve.times
    probes = np.concatenate((times, 0.5 * (times[:-1] + times[1:])))
    worst = 0.0
    for s in probes:
        y = curve.sample(float(s))
        worst = max(worst, float(np.linalg.norm(curve.derivative(float(s)) - field.evaluate(s, y))))
    return worst


def is_symmetry(
    m: SpaceTimeMap,
    field: VectorFieldSpec,
    initial_conditions: Sequence[Point],
    window: Tuple[float, float],
    tol: Optional[Tolerances] = None,
    samples: int = DEFAULT_SAMPLES,
    threshold: float = SYMMETRY_THRESHOLD,
) -> SymmetryCheckReport:
    """Transform the solution through each initial condition by ``m`` and measure how far the
    result is from solving x' = v. Transforms that are undefined are counted, not raised."""
    report = SymmetryCheckReport(threshold=threshold)
    for t0, x0 in initial_conditions:
        x0 = np.asarray(x0, dtype=float)
        entry = {"t0": float(t0), "x0": x0.tolist()}
        report.tested_solutions += 1
        try:
            sol = solve_window(field, float(t0), x0, window, tol)
            curve = transform_solution(m, sol, samples)
            if isinstance(curve, Undefined):
                raise _UndefinedTransform(curve.reason)
            residual = _curve_residual(curve, field)
        except (_UndefinedTransform, TrajectoryError, EvalError, OutOfRange) as exc:
            logger.debug(f"transform undefined for t0={t0}, x0={x0.tolist()}: {exc}")
            report.undefined_transforms += 1
            entry["undefined"] = str(exc)
        else:
            entry["residual"] = residual
            report.max_residual = max(report.max_residual, residual)
        report.per_solution.append(entry)
    logger.info(
        f"symmetry check of {m.describe()}: {report.verdict} "
        f"(max residual {report.max_residual:.3e}, {report.undefined_transforms} undefined)"
    )
    return report


class _UndefinedTransform(Exception):
    pass
