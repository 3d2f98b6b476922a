"""Global rectification Phi(t, x0) = (t, phi(t; t0, x0)) and space-time maps.

Phi sends horizontal lines ``x = x0`` to the solution graphs of x' = v(t, x), so its inverse
pushes the direction field (1, v) forward to the constant field (1, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from .errors import (
    EvalError,
    InvalidInput,
    MissingInverse,
    ProbeFailed,
    TrajectoryError,
)
from .expr_core import Expression, compile_expression, differentiate, identity_expressions, parse
from .expr_core import substitute
from .flow import FlowCache, FlowQuery, flow, flow_with_jacobian, raise_for_termination
from .integrator import Box, Tolerances, VectorFieldSpec, integrate

Point = Tuple[float, np.ndarray]
PointMap = Callable[[float, np.ndarray], Point]
JacobianProvider = Callable[[float, np.ndarray], np.ndarray]


def _point(t, x) -> Point:
    return float(t), np.asarray(x, dtype=float).reshape(-1)


# -- space-time maps ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpaceTimeMap:
    """A map (t, x) -> (t', x') of I x M with its (1+n)x(1+n) derivative.

    Expression-defined maps carry their component expressions, which lets compositions of
    them stay symbolic. Flow-based maps only carry callables.
    """

    dimension: int
    forward: PointMap
    jacobian_provider: JacobianProvider
    inverse: Optional[PointMap] = None
    inverse_jacobian: Optional[JacobianProvider] = None
    expressions: Optional[tuple] = None
    inverse_expressions: Optional[tuple] = None
    name: str = ""

    def __call__(self, t: float, x) -> Point:
        return self.forward(*_point(t, x))

    def jacobian(self, t: float, x) -> np.ndarray:
        return self.jacobian_provider(*_point(t, x))

    @property
    def has_inverse(self) -> bool:
        return self.inverse is not None and self.inverse_jacobian is not None

    def apply_inverse(self, t: float, x) -> Point:
        if self.inverse is None:
            raise MissingInverse(f"map {self.name or '<anonymous>'} has no inverse")
        return self.inverse(*_point(t, x))

    def invert(self) -> "SpaceTimeMap":
        if not self.has_inverse:
            raise MissingInverse(f"map {self.name or '<anonymous>'} has no inverse")
        return SpaceTimeMap(
            self.dimension,
            self.inverse,
            self.inverse_jacobian,
            self.forward,
            self.jacobian_provider,
            self.inverse_expressions,
            self.expressions,
            f"({self.name})^-1" if self.name else "",
        )

    def compose(self, other: "SpaceTimeMap") -> "SpaceTimeMap":
        """``self ∘ other``: apply ``other`` first."""
        if other.dimension != self.dimension:
            raise InvalidInput(
                f"cannot compose maps of dimension {self.dimension} and {other.dimension}"
            )
        a, b = self, other

        def forward(t: float, x: np.ndarray) -> Point:
            return a.forward(*b.forward(t, x))

        def jacobian(t: float, x: np.ndarray) -> np.ndarray:
            return a.jacobian_provider(*b.forward(t, x)) @ b.jacobian_provider(t, x)

        inverse = inverse_jacobian = None
        if a.has_inverse and b.has_inverse:

            def inverse(t: float, x: np.ndarray) -> Point:
                return b.inverse(*a.inverse(t, x))

            def inverse_jacobian(t: float, x: np.ndarray) -> np.ndarray:
                return b.inverse_jacobian(*a.inverse(t, x)) @ a.inverse_jacobian(t, x)

        expressions = inverse_expressions = None
        if a.expressions is not None and b.expressions is not None:
            expressions = _substitute_all(a.expressions, b.expressions)
            if a.inverse_expressions is not None and b.inverse_expressions is not None:
                inverse_expressions = _substitute_all(b.inverse_expressions, a.inverse_expressions)

        name = f"{a.name} ∘ {b.name}" if a.name and b.name else ""
        return SpaceTimeMap(self.dimension, forward, jacobian, inverse, inverse_jacobian,
                            expressions, inverse_expressions, name)

    @classmethod
    def identity(cls, dimension: int) -> "SpaceTimeMap":
        def same(t: float, x: np.ndarray) -> Point:
            return t, x.copy()

        def eye(t: float, x: np.ndarray) -> np.ndarray:
            return np.eye(dimension + 1)

        ids = identity_expressions(dimension)
        return cls(dimension, same, eye, same, eye, ids, ids, "id")

    @classmethod
    def from_expressions(
        cls,
        expressions: Sequence[Union[Expression, str]],
        inverse: Optional[Sequence[Union[Expression, str]]] = None,
        name: str = "",
    ) -> "SpaceTimeMap":
        """Map given by 1+n expressions ``(t', x1', ..., xn')`` in ``(t, x1..xn)``."""
        n = len(expressions) - 1
        if n < 1:
            raise InvalidInput("a space-time map needs a time and at least one space component")
        exprs = _as_expressions(expressions, n)
        forward, jacobian = _compile_map(exprs)
        inv_exprs = inverse_fn = inverse_jac = None
        if inverse is not None:
            if len(inverse) != n + 1:
                raise InvalidInput(f"inverse has {len(inverse)} components, expected {n + 1}")
            inv_exprs = _as_expressions(inverse, n)
            inverse_fn, inverse_jac = _compile_map(inv_exprs)
        return cls(n, forward, jacobian, inverse_fn, inverse_jac, exprs, inv_exprs, name)

    def describe(self) -> str:
        if self.expressions is None:
            return self.name or "<flow-based map>"
        return "(t, x) -> (" + ", ".join(str(e) for e in self.expressions) + ")"


def _as_expressions(items: Sequence[Union[Expression, str]], n: int) -> tuple:
    return tuple(parse(e, n) if isinstance(e, str) else e for e in items)


def _substitute_all(outer: tuple, inner: tuple) -> tuple:
    return tuple(substitute(e, time=inner[0], space=inner[1:]) for e in outer)


def _compile_map(exprs: tuple) -> Tuple[PointMap, JacobianProvider]:
    n = len(exprs) - 1
    compiled = [compile_expression(e) for e in exprs]
    jac_compiled = [
        [compile_expression(differentiate(e, var)) for var in ["t"] + list(range(n))]
        for e in exprs
    ]

    def forward(t: float, x: np.ndarray) -> Point:
        xs = x.tolist()
        values = [c(t, xs) for c in compiled]
        return values[0], np.array(values[1:])

    def jacobian(t: float, x: np.ndarray) -> np.ndarray:
        xs = x.tolist()
        return np.array([[c(t, xs) for c in row] for row in jac_compiled])

    return forward, jacobian


def pushforward(
    m: SpaceTimeMap, field_ext: Union[VectorFieldSpec, Callable[[float, np.ndarray], np.ndarray]]
) -> Callable[[float, np.ndarray], np.ndarray]:
    """(m_* w)(y) = Dm(p) w(p) with p = m^-1(y); ``field_ext`` is v (read as (1, v)) or w itself."""
    if m.inverse is None:
        raise MissingInverse(f"pushforward needs the inverse of {m.describe()}")
    ext = field_ext.extended if isinstance(field_ext, VectorFieldSpec) else field_ext

    def pushed(t: float, x) -> np.ndarray:
        p = m.apply_inverse(t, x)
        return m.jacobian_provider(*p) @ ext(*p)

    return pushed


# -- rectification -----------------------------------------------------------------


def default_probe_center(box: Box) -> np.ndarray:
    """Midpoint of each bounded axis, one unit inside a half-bounded one, 0 otherwise."""
    center = []
    for lo, hi in zip(box.lower, box.upper):
        if math.isfinite(lo) and math.isfinite(hi):
            center.append(0.5 * (lo + hi))
        elif math.isfinite(lo):
            center.append(lo + 1.0)
        elif math.isfinite(hi):
            center.append(hi - 1.0)
        else:
            center.append(0.0)
    return np.array(center)


def probe_grid(window: Tuple[float, float], box: Box, counts: Sequence[int] = (5, 5)
               ) -> List[Point]:
    """``counts[0]`` times across the window times a ``counts[1]``-per-axis grid of ``box``."""
    time_count, space_count = counts
    times = np.linspace(window[0], window[1], time_count)
    space = box.grid(space_count)
    return [(float(t), x.copy()) for t in times for x in space]


@dataclass(frozen=True, eq=False)
class Rectification:
    field: VectorFieldSpec
    t0: float
    window: Tuple[float, float]
    tol: Tolerances = field(default_factory=Tolerances)
    probe_box: Optional[Box] = None
    cache: Optional[FlowCache] = None

    def __post_init__(self):
        a, b = (float(v) for v in self.window)
        if not a < b:
            raise InvalidInput(f"window [{a}, {b}] is empty")
        interval = self.field.time_interval
        if not (interval.contains(a) and interval.contains(b)):
            raise InvalidInput(f"window [{a}, {b}] is not inside I")
        if not a <= self.t0 <= b:
            raise InvalidInput(f"base time {self.t0} is outside the window [{a}, {b}]")
        if self.probe_box is not None and not self.probe_box.is_subset_of(self.field.box):
            raise InvalidInput("probe box must lie inside M")
        object.__setattr__(self, "window", (a, b))
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def dimension(self) -> int:
        return self.field.dimension

    def _check_time(self, t: float) -> None:
        if not self.field.time_interval.contains(t):
            raise InvalidInput(f"t={t!r} is not inside I")

    def apply(self, t: float, x0) -> Point:
        """Phi(t, x0) = (t, phi(t; t0, x0)); the time coordinate is passed through untouched."""
        self._check_time(t)
        return t, flow(self.field, FlowQuery(self.t0, x0, t, self.tol), self.cache)

    def apply_inverse(self, tau: float, xi) -> Point:
        """Phi^-1(tau, xi) = (tau, phi(t0; tau, xi))."""
        self._check_time(tau)
        return tau, flow(self.field, FlowQuery(tau, xi, self.t0, self.tol), self.cache)

    def apply_with_jacobian(self, t: float, x0) -> Tuple[Point, np.ndarray]:
        """Phi(t, x0) and DPhi(t, x0) = [[1, 0], [v(t, phi), dphi/dx0]] from one integration."""
        self._check_time(t)
        x, j = flow_with_jacobian(self.field, FlowQuery(self.t0, x0, t, self.tol), self.cache)
        n = self.dimension
        out = np.zeros((n + 1, n + 1))
        out[0, 0] = 1.0
        out[1:, 0] = self.field.evaluate(t, x)
        out[1:, 1:] = j
        return (t, x), out

    def jacobian(self, t: float, x0) -> np.ndarray:
        return self.apply_with_jacobian(t, x0)[1]

    def inverse_jacobian(self, tau: float, xi) -> np.ndarray:
        """D(Phi^-1)(tau, xi) as the inverse of DPhi at the preimage."""
        pre = self.apply_inverse(tau, xi)
        return np.linalg.inv(self.jacobian(*pre))

    def as_map(self) -> SpaceTimeMap:
        return SpaceTimeMap(
            self.dimension,
            lambda t, x: self.apply(t, x),
            lambda t, x: self.jacobian(t, x),
            lambda t, x: self.apply_inverse(t, x),
            lambda t, x: self.inverse_jacobian(t, x),
            name="Phi",
        )

    def inverse_map(self) -> SpaceTimeMap:
        return self.as_map().invert()

    def probe_points(self, counts: Sequence[int] = (5, 5)) -> List[Point]:
        box = self.probe_box
        if box is None:
            box = Box.around(default_probe_center(self.field.box), 0.5)
            if not box.is_subset_of(self.field.box):
                raise InvalidInput("no probe box given and M is too thin for a default one")
        return probe_grid(self.window, box, counts)


def build_rectification(
    field: VectorFieldSpec,
    t0: Optional[float] = None,
    window: Optional[Tuple[float, float]] = None,
    tol: Optional[Tolerances] = None,
    probe_box: Optional[Box] = None,
    cache: Optional[FlowCache] = None,
) -> Rectification:
    """Rectification of ``field`` around base time ``t0`` (window midpoint by default).

    Construction runs a smoke probe from the probe-box center: the solution through it is
    integrated across the whole window and one Phi round trip is done a quarter-window away
    from ``t0``. Any escape or blow-up raises :class:`ProbeFailed`.
    """
    if window is None:
        if not field.time_interval.is_bounded:
            raise InvalidInput("a window is required when I is unbounded")
        window = (field.time_interval.lower, field.time_interval.upper)
    a, b = window
    if t0 is None:
        t0 = 0.5 * (a + b)
    rect = Rectification(field, t0, (a, b), tol or Tolerances(), probe_box, cache)
    a, b = rect.window

    center = probe_box.center if probe_box is not None else default_probe_center(field.box)
    try:
        for end in (a, b):
            raise_for_termination(integrate(field, rect.t0, center, end, rect.tol).termination)
        tau = rect.t0 + (b - a) / 4
        if tau > b:
            tau = rect.t0 - (b - a) / 4
        image = rect.apply(tau, center)
        _, back = rect.apply_inverse(*image)
    except TrajectoryError as exc:
        raise ProbeFailed(
            f"smoke probe from x0={center.tolist()} at t0={rect.t0} failed: {exc}"
        ) from exc
    residual = float(np.linalg.norm(back - center))
    logger.info(
        f"Rectification of {field.describe()} built at t0={rect.t0} on [{a}, {b}] "
        f"(probe round trip {residual:.3e})"
    )
    return rect


# -- verification ------------------------------------------------------------------


@dataclass
class ProbeFailure:
    t: float
    x: tuple
    kind: str
    t_star: Optional[float]
    message: str

    def to_dict(self) -> dict:
        return {"t": self.t, "x": list(self.x), "kind": self.kind, "t_star": self.t_star,
                "message": self.message}


@dataclass
class ProbeResidual:
    t: float
    x: tuple
    x0: tuple
    pushforward: float
    roundtrip: float
    finite_difference: float


@dataclass
class RectificationReport:
    probed: int = 0
    max_pushforward_residual: float = 0.0
    max_roundtrip_residual: float = 0.0
    max_finite_difference_residual: float = 0.0
    failures: List[ProbeFailure] = field(default_factory=list)
    residuals: List[ProbeResidual] = field(default_factory=list)

    def passed(self, pushforward_threshold: float = 1e-5, roundtrip_threshold: float = 1e-6
               ) -> bool:
        return (
            not self.failures
            and self.max_pushforward_residual <= pushforward_threshold
            and self.max_roundtrip_residual <= roundtrip_threshold
        )

    def to_dict(self) -> dict:
        return {
            "probed": self.probed,
            "max_pushforward_residual": self.max_pushforward_residual,
            "max_roundtrip_residual": self.max_roundtrip_residual,
            "max_finite_difference_residual": self.max_finite_difference_residual,
            "failures": [f.to_dict() for f in self.failures],
        }


def _failure(t: float, x: np.ndarray, exc: Exception) -> ProbeFailure:
    kind = type(exc).__name__
    return ProbeFailure(t, tuple(x.tolist()), kind, getattr(exc, "t_star", None), str(exc))


def _fd_residual(r: Rectification, t: float, x: np.ndarray, v: np.ndarray, x0: np.ndarray
                 ) -> float:
    """Space part of the derivative of Phi^-1 along (1, v), by differences on the window."""
    a, b = r.window
    h = 1e-3 * (b - a)
    lo, hi = max(a, t - h), min(b, t + h)
    if lo == hi:
        return 0.0
    left = x0 if lo == t else r.apply_inverse(lo, x + (lo - t) * v)[1]
    right = x0 if hi == t else r.apply_inverse(hi, x + (hi - t) * v)[1]
    return float(np.linalg.norm((right - left) / (hi - lo)))


def verify_rectification(r: Rectification, probe_grid: Sequence[Point]) -> RectificationReport:
    """Check (Phi^-1)_*(1, v) = (1, 0) and Phi∘Phi^-1 = id at each probe point.

    Points whose trajectories escape or blow up are recorded as failures and carry no residual.
    """
    report = RectificationReport()
    target = np.zeros(r.dimension + 1)
    target[0] = 1.0
    for t, x in probe_grid:
        t, x = _point(t, x)
        report.probed += 1
        try:
            _, x0 = r.apply_inverse(t, x)
            (_, back), djac = r.apply_with_jacobian(t, x0)
            v = r.field.evaluate(t, x)
            pushed = np.linalg.solve(djac, np.concatenate(([1.0], v)))
            pushforward_residual = float(np.linalg.norm(pushed - target))
            roundtrip = float(np.linalg.norm(back - x) / (1.0 + np.linalg.norm(x)))
        except (TrajectoryError, EvalError, InvalidInput, np.linalg.LinAlgError) as exc:
            logger.warning(f"rectification probe at t={t}, x={x.tolist()} failed: {exc}")
            report.failures.append(_failure(t, x, exc))
            continue
        try:
            fd = _fd_residual(r, t, x, v, x0)
        except (TrajectoryError, EvalError, InvalidInput) as exc:
            logger.debug(f"finite-difference cross-check skipped at t={t}: {exc}")
            fd = 0.0
        report.residuals.append(
            ProbeResidual(t, tuple(x.tolist()), tuple(x0.tolist()), pushforward_residual,
                          roundtrip, fd)
        )
        report.max_pushforward_residual = max(report.max_pushforward_residual,
                                              pushforward_residual)
        report.max_roundtrip_residual = max(report.max_roundtrip_residual, roundtrip)
        report.max_finite_difference_residual = max(report.max_finite_difference_residual, fd)
    logger.info(
        f"verified {report.probed} probes: pushforward {report.max_pushforward_residual:.3e}, "
        f"round trip {report.max_roundtrip_residual:.3e}, {len(report.failures)} failures"
    )
    return report
