"""Sample-based probes of the hypotheses behind global rectification.

Nothing here proves a hypothesis: every verdict reads "no violation detected on probes" or
names the violation that was seen.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .errors import EvalError, InvalidInput
from .expr_core import Expression, compile_expression, differentiate, parse
from .integrator import Box, TerminationKind, Tolerances, VectorFieldSpec, integrate

DEFAULT_RADII = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
GROWTH_FACTOR = 2.0
GROWTH_STEPS = 3
SOLUTION_RESIDUAL = 1e-9

INVARIANT = "invariant-on-probes"
VIOLATED = "violated"


@dataclass
class LipschitzProfile:
    times: List[float]
    estimates: List[float]
    center: Tuple[float, List[float]]
    radii: List[float]
    refinement_trend: List[float]
    flagged: bool
    nondifferentiable: List[Tuple[float, List[float]]] = field(default_factory=list)

    @property
    def sup_estimate(self) -> float:
        return max(self.estimates) if self.estimates else 0.0

    def to_dict(self) -> dict:
        return {
            "times": self.times,
            "estimates": self.estimates,
            "sup_estimate": self.sup_estimate,
            "center": {"t": self.center[0], "x": self.center[1]},
            "radii": self.radii,
            "refinement_trend": self.refinement_trend,
            "flagged_unbounded": self.flagged,
            "nondifferentiable": [{"t": t, "x": x} for t, x in self.nondifferentiable],
        }


def _grows_without_bound(values: Sequence[float], factor: float, steps: int) -> bool:
    """True when ``steps`` consecutive ratios of ``values`` are all >= ``factor``."""
    run = 0
    for prev, cur in zip(values, values[1:]):
        if np.isnan(prev) or np.isnan(cur):
            run = 0
            continue
        grew = cur > 0 if prev == 0 else cur / prev >= factor
        run = run + 1 if grew else 0
        if run >= steps:
            return True
    return False


def _difference_quotient(field: VectorFieldSpec, t: float, x: np.ndarray, r: float) -> float:
    """max over axis directions of ||v(t, x ± r e_i) - v(t, x)|| / r."""
    try:
        base = field.evaluate(t, x)
    except EvalError:
        return float("nan")
    best = float("nan")
    for i in range(field.dimension):
        for sign in (1.0, -1.0):
            y = x.copy()
            y[i] += sign * r
            if not field.box.contains(y):
                continue
            try:
                q = float(np.linalg.norm(field.evaluate(t, y) - base)) / r
            except EvalError:
                continue
            best = q if np.isnan(best) else max(best, q)
    return best


def _profile(field: VectorFieldSpec, times: Sequence[float], points: np.ndarray,
             radii: Sequence[float], center: Optional[Tuple[float, np.ndarray]],
             growth_factor: float, growth_steps: int) -> LipschitzProfile:
    estimates = []
    nondiff: List[Tuple[float, List[float]]] = []
    best = (-1.0, None)
    for t in times:
        worst = 0.0
        for x in points:
            try:
                norm = float(np.linalg.norm(field.jacobian_at(t, x), 2))
            except EvalError as exc:
                logger.warning(f"v is not differentiable at t={t}, x={x.tolist()}: {exc}")
                nondiff.append((float(t), x.tolist()))
                continue
            worst = max(worst, norm)
            if norm > best[0]:
                best = (norm, (float(t), x))
        estimates.append(worst)

    if center is None:
        if nondiff:
            center = (nondiff[0][0], np.array(nondiff[0][1]))
        elif best[1] is not None:
            center = best[1]
        else:
            center = (float(times[0]), points[0])
    t_c, x_c = float(center[0]), np.asarray(center[1], dtype=float)
    trend = [_difference_quotient(field, t_c, x_c, r) for r in radii]
    flagged = _grows_without_bound(trend, growth_factor, growth_steps)
    if flagged:
        logger.warning(
            f"difference quotients around t={t_c}, x={x_c.tolist()} grow without bound: {trend}"
        )
    return LipschitzProfile(
        times=[float(t) for t in times],
        estimates=estimates,
        center=(t_c, x_c.tolist()),
        radii=[float(r) for r in radii],
        refinement_trend=trend,
        flagged=flagged,
        nondifferentiable=nondiff,
    )


def _check_region(field: VectorFieldSpec, region: Box) -> None:
    if region.dimension != field.dimension:
        raise InvalidInput(f"region has dimension {region.dimension}, field {field.dimension}")
    if not region.is_bounded:
        raise InvalidInput("region must be bounded")
    if not region.is_subset_of(field.box):
        raise InvalidInput("region must lie inside M")


def estimate_lipschitz(
    field: VectorFieldSpec,
    window: Tuple[float, float],
    region: Box,
    time_samples: int = 5,
    space_samples: int = 21,
    radii: Sequence[float] = DEFAULT_RADII,
    growth_factor: float = GROWTH_FACTOR,
    growth_steps: int = GROWTH_STEPS,
) -> LipschitzProfile:
    """L(t) = max ||v_x(t, x)|| over a grid of ``region``, plus difference quotients at
    shrinking radii around the worst point (or the first non-differentiable one).

    The quotient trend is flagged unbounded when each next radius grows it by
    ``growth_factor`` for ``growth_steps`` radii in a row.
    """
    if time_samples < 2 or space_samples < 2:
        raise InvalidInput("need at least 2 time and 2 space samples")
    if list(radii) != sorted(radii, reverse=True):
        raise InvalidInput("radii must be decreasing")
    _check_region(field, region)
    times = np.linspace(window[0], window[1], time_samples)
    return _profile(field, times, region.grid(space_samples), radii, None,
                    growth_factor, growth_steps)


@dataclass
class LipschitzGrowth:
    half_widths: List[float]
    sup_estimates: List[float]
    unbounded: bool

    @property
    def verdict(self) -> str:
        if self.unbounded:
            return "not globally Lipschitz on unbounded M"
        return "no unbounded growth detected on probes"

    def to_dict(self) -> dict:
        return {
            "half_widths": self.half_widths,
            "sup_estimates": self.sup_estimates,
            "unbounded": self.unbounded,
            "verdict": self.verdict,
        }


def estimate_lipschitz_growth(
    field: VectorFieldSpec,
    window: Tuple[float, float],
    center: Sequence[float],
    half_widths: Sequence[float],
    time_samples: int = 3,
    space_samples: int = 11,
    growth_factor: float = GROWTH_FACTOR,
    growth_steps: int = GROWTH_STEPS,
) -> LipschitzGrowth:
    """Sup estimates over nested boxes of growing half-width around ``center``."""
    if list(half_widths) != sorted(half_widths):
        raise InvalidInput("half widths must be increasing")
    sups: List[float] = []
    for w in half_widths:
        region = Box.around(center, w)
        profile = estimate_lipschitz(field, window, region, time_samples, space_samples,
                                     radii=(), growth_factor=growth_factor)
        # nested boxes: keep the sequence monotone even when the coarser grid misses a peak
        sups.append(max([profile.sup_estimate] + sups[-1:]))
    unbounded = _grows_without_bound(sups, growth_factor, min(growth_steps, len(sups) - 1))
    return LipschitzGrowth([float(w) for w in half_widths], sups, unbounded)


# -- invariance ------------------------------------------------------------------------


@dataclass
class Escape:
    t0: float
    x0: List[float]
    t_star: Optional[float]
    kind: str
    face: Optional[dict] = None

    def to_dict(self) -> dict:
        out = {"t0": self.t0, "x0": self.x0, "t_star": self.t_star, "kind": self.kind}
        if self.face is not None:
            out["face"] = self.face
        return out


@dataclass
class InvarianceReport:
    probed: int = 0
    escapes: List[Escape] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return VIOLATED if self.escapes else INVARIANT

    def to_dict(self) -> dict:
        return {
            "probed": self.probed,
            "escapes": [e.to_dict() for e in self.escapes],
            "verdict": self.verdict,
        }


def probe_invariance(field: VectorFieldSpec, window: Tuple[float, float],
                     ic_grid: Sequence[Tuple[float, Sequence[float]]],
                     tol: Optional[Tolerances] = None) -> InvarianceReport:
    """Integrate each initial condition to both window ends and record every early stop."""
    report = InvarianceReport()
    a, b = window
    for t0, x0 in ic_grid:
        t0 = float(t0)
        x0 = [float(v) for v in x0]
        report.probed += 1
        for end in (a, b):
            try:
                termination = integrate(field, t0, x0, end, tol).termination
            except EvalError as exc:
                report.escapes.append(Escape(t0, x0, None, "EvalError"))
                logger.warning(f"probe from t0={t0}, x0={x0} hit an evaluation error: {exc}")
                continue
            if termination.reached:
                continue
            kind = termination.kind
            if kind is TerminationKind.STEP_UNDERFLOW:
                kind = TerminationKind.BLOW_UP
            face = termination.to_dict().get("face")
            report.escapes.append(Escape(t0, x0, termination.t_star, kind.value, face))
            logger.warning(f"probe from t0={t0}, x0={x0} stopped: {kind.value} at "
                           f"t*={termination.t_star}")
    logger.info(f"invariance probe: {report.probed} initial conditions, {report.verdict}")
    return report


# -- uniqueness --------------------------------------------------------------------------


@dataclass
class CandidateCheck:
    expression: List[str]
    max_residual: float
    initial_mismatch: float
    is_solution: bool

    def to_dict(self) -> dict:
        return {
            "expression": self.expression,
            "max_residual": self.max_residual,
            "initial_mismatch": self.initial_mismatch,
            "is_solution": self.is_solution,
        }


@dataclass
class UniquenessReport:
    point: Tuple[float, List[float]]
    flagged: bool
    profile: LipschitzProfile
    evidence: List[CandidateCheck] = field(default_factory=list)

    @property
    def distinct_solutions(self) -> int:
        return sum(1 for c in self.evidence if c.is_solution)

    def to_dict(self) -> dict:
        return {
            "point": {"t": self.point[0], "x": self.point[1]},
            "flagged": self.flagged,
            "refinement_trend": self.profile.refinement_trend,
            "radii": self.profile.radii,
            "evidence": [c.to_dict() for c in self.evidence],
            "distinct_solutions": self.distinct_solutions,
        }


def check_candidate(field: VectorFieldSpec, components: Sequence[Expression], t0: float,
                    x0: Sequence[float], span: float = 1.0, samples: int = 100) -> CandidateCheck:
    """Whether ``t -> components(t)`` solves x' = v on [t0, t0 + span] and passes through x0.

    The residual uses the exact symbolic derivative of each component.
    """
    values = [compile_expression(c) for c in components]
    rates = [compile_expression(differentiate(c, "t")) for c in components]
    zeros = [0.0] * field.dimension
    worst = 0.0
    for t in np.linspace(t0, t0 + span, samples):
        try:
            y = [f(t, zeros) for f in values]
            dy = np.array([f(t, zeros) for f in rates])
            worst = max(worst, float(np.linalg.norm(dy - field.evaluate(t, y))))
        except EvalError:
            worst = float("inf")
            break
    try:
        start = np.array([f(t0, zeros) for f in values])
        mismatch = float(np.linalg.norm(start - np.asarray(x0, dtype=float)))
    except EvalError:
        mismatch = float("inf")
    ok = worst <= SOLUTION_RESIDUAL and mismatch <= SOLUTION_RESIDUAL
    return CandidateCheck([str(c) for c in components], worst, mismatch, ok)


def probe_uniqueness(
    field: VectorFieldSpec,
    point: Tuple[float, Sequence[float]],
    radii: Sequence[float] = DEFAULT_RADII,
    candidates: Sequence[Sequence[str]] = (),
    span: float = 1.0,
) -> UniquenessReport:
    """Flag ``point`` when difference quotients of v around x0 grow without bound.

    ``candidates`` are closed-form curves (component expressions in t) checked as solutions
    through the point; more than one passing curve is direct evidence of non-uniqueness.
    """
    t0 = float(point[0])
    x0 = np.asarray(point[1], dtype=float)
    if not field.box.contains(x0) or not field.time_interval.contains(t0):
        raise InvalidInput(f"point ({t0}, {x0.tolist()}) is outside I x M")
    points = x0[None, :]
    if radii:
        region = Box.around(x0, radii[0])
        if region.is_subset_of(field.box):
            points = region.grid(3)
    profile = _profile(field, [t0], points, radii, (t0, x0), GROWTH_FACTOR, GROWTH_STEPS)
    evidence = [
        check_candidate(field, [parse(c, field.dimension) for c in components], t0, x0, span)
        for components in candidates
    ]
    logger.info(
        f"uniqueness probe at t={t0}, x={x0.tolist()}: "
        f"{'flagged' if profile.flagged else 'not flagged'}"
    )
    return UniquenessReport((t0, x0.tolist()), profile.flagged, profile, evidence)
