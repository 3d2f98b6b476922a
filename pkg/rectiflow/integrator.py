"""Adaptive explicit Runge–Kutta integration of Cauchy problems.

Dormand–Prince 5(4) pair with FSAL, PI step-size control and Hairer's 4th-order continuous
extension. Every accepted step stores its dense polynomial in the power basis
``y(theta) = sum c_k theta^k`` (``theta`` in [0, 1] across the step), which makes event
truncation a rescaling of the coefficients.

Events checked after each accepted step, earliest first:

* domain escape: a coordinate reaches a finite face of the open box M
* blow-up: the state norm exceeds ``Tolerances.blowup_norm``

Both are located on the dense output with :func:`scipy.optimize.brentq`; the curve is
truncated at the event time. A step shrinking below ``min_step`` terminates the curve with
``StepUnderflow``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.optimize import brentq

from .errors import DimensionError, EvalError, InvalidInput, OutOfRange
from .expr_core import Expression, compile_expression, differentiate, parse, substitute
from .expr_core import Space as _SpaceNode
from .expr_core import identity_expressions

EPS = np.finfo(float).eps

# -- domains ---------------------------------------------------------------------


def _as_bound(value) -> float:
    if isinstance(value, str):
        return float(value.strip().replace("∞", "inf"))
    return float(value)


@dataclass(frozen=True)
class Interval:
    """Open interval (lower, upper); bounds may be infinite."""

    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "lower", _as_bound(self.lower))
        object.__setattr__(self, "upper", _as_bound(self.upper))
        if not self.lower < self.upper:
            raise InvalidInput(f"empty interval ({self.lower}, {self.upper})")

    def contains(self, t: float) -> bool:
        return self.lower < t < self.upper

    def contains_closed(self, t: float) -> bool:
        return self.lower <= t <= self.upper

    @property
    def is_bounded(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        if not self.is_bounded:
            raise InvalidInput(f"interval ({self.lower}, {self.upper}) has no midpoint")
        return 0.5 * (self.lower + self.upper)

    def is_subset_of(self, other: "Interval") -> bool:
        return other.lower <= self.lower and self.upper <= other.upper


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; ``contains`` tests the open box, ``contains_closed`` its closure."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower = tuple(_as_bound(v) for v in self.lower)
        upper = tuple(_as_bound(v) for v in self.upper)
        if len(lower) != len(upper) or not lower:
            raise InvalidInput(f"box bounds disagree: {lower} vs {upper}")
        for i, (lo, hi) in enumerate(zip(lower, upper)):
            if not lo < hi:
                raise InvalidInput(f"empty box along x{i + 1}: ({lo}, {hi})")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def whole(cls, dimension: int) -> "Box":
        return cls((-math.inf,) * dimension, (math.inf,) * dimension)

    @classmethod
    def around(cls, center: Sequence[float], half_width: float) -> "Box":
        return cls(
            tuple(c - half_width for c in center), tuple(c + half_width for c in center)
        )

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def is_bounded(self) -> bool:
        return all(math.isfinite(v) for v in self.lower + self.upper)

    @property
    def center(self) -> np.ndarray:
        if not self.is_bounded:
            raise InvalidInput("an unbounded box has no center")
        return 0.5 * (np.array(self.lower) + np.array(self.upper))

    def contains(self, x: Sequence[float]) -> bool:
        return all(lo < v < hi for lo, v, hi in zip(self.lower, x, self.upper))

    def contains_closed(self, x: Sequence[float]) -> bool:
        return all(lo <= v <= hi for lo, v, hi in zip(self.lower, x, self.upper))

    def is_subset_of(self, other: "Box") -> bool:
        return all(
            olo <= lo and hi <= ohi
            for lo, hi, olo, ohi in zip(self.lower, self.upper, other.lower, other.upper)
        )

    def grid(self, count: int) -> np.ndarray:
        """``count`` points per axis, endpoints included; shape ``(count**n, n)``."""
        if not self.is_bounded:
            raise InvalidInput("cannot grid an unbounded box")
        axes = [np.linspace(lo, hi, count) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


# -- tolerances --------------------------------------------------------------------


@dataclass(frozen=True)
class Tolerances:
    rtol: float = 1e-9
    atol: float = 1e-12
    blowup_norm: float = 1e8
    # minimum step as a fraction of the integration span
    min_step_factor: float = 1e-14

    def __post_init__(self):
        for name in ("rtol", "atol", "blowup_norm", "min_step_factor"):
            value = float(getattr(self, name))
            if not value > 0:
                raise InvalidInput(f"tolerance {name} must be strictly positive, got {value}")
            object.__setattr__(self, name, value)
        if self.rtol < 10 * EPS:
            raise InvalidInput(f"rtol={self.rtol} is below 10 x machine epsilon")

    def min_step_for(self, span: float) -> float:
        return self.min_step_factor * span


# -- vector fields -------------------------------------------------------------------


@dataclass(frozen=True)
class VectorFieldSpec:
    """v: I x M -> R^n given by n expressions, with its symbolic Jacobian dv/dx."""

    dimension: int
    components: tuple
    time_interval: Interval = field(default_factory=Interval)
    box: Optional[Box] = None
    jacobian: tuple = ()

    def __post_init__(self):
        components = tuple(self.components)
        if len(components) != self.dimension:
            raise DimensionError(
                f"{len(components)} components given for dimension {self.dimension}"
            )
        for i, c in enumerate(components):
            if c.dimension != self.dimension:
                raise DimensionError(f"component {i + 1} has dimension {c.dimension}")
        object.__setattr__(self, "components", components)
        box = self.box if self.box is not None else Box.whole(self.dimension)
        if box.dimension != self.dimension:
            raise DimensionError(f"box has dimension {box.dimension}, field {self.dimension}")
        object.__setattr__(self, "box", box)
        if not self.jacobian:
            jacobian = tuple(
                tuple(differentiate(c, j) for j in range(self.dimension)) for c in components
            )
            object.__setattr__(self, "jacobian", jacobian)

    @classmethod
    def from_text(
        cls,
        components: Sequence[str],
        time_interval: Union[Interval, Tuple[float, float], None] = None,
        box: Union[Box, Tuple[Sequence[float], Sequence[float]], None] = None,
    ) -> "VectorFieldSpec":
        n = len(components)
        if isinstance(time_interval, tuple):
            time_interval = Interval(*time_interval)
        if isinstance(box, tuple):
            box = Box(*box)
        return cls(
            dimension=n,
            components=tuple(parse(c, n) for c in components),
            time_interval=time_interval or Interval(),
            box=box,
        )

    @cached_property
    def _compiled(self) -> list:
        return [compile_expression(c) for c in self.components]

    @cached_property
    def _compiled_jacobian(self) -> list:
        return [[compile_expression(e) for e in row] for row in self.jacobian]

    def evaluate(self, t: float, x: Sequence[float]) -> np.ndarray:
        xs = x.tolist() if isinstance(x, np.ndarray) else list(x)
        return np.array([c(t, xs) for c in self._compiled])

    def jacobian_at(self, t: float, x: Sequence[float]) -> np.ndarray:
        xs = x.tolist() if isinstance(x, np.ndarray) else list(x)
        return np.array([[e(t, xs) for e in row] for row in self._compiled_jacobian])

    def extended(self, t: float, x: Sequence[float]) -> np.ndarray:
        """The direction field (1, v(t, x)) on I x M."""
        return np.concatenate(([1.0], self.evaluate(t, x)))

    def restricted(self, time_interval: Interval, box: Box) -> "VectorFieldSpec":
        """The same field on a sub-domain; local rectification runs the global
        construction on such a restriction."""
        if not time_interval.is_subset_of(self.time_interval) or not box.is_subset_of(self.box):
            raise InvalidInput("restriction must lie inside the field's domain")
        return VectorFieldSpec(
            self.dimension, self.components, time_interval, box, self.jacobian
        )

    def autonomous(self) -> "VectorFieldSpec":
        """Equivalent autonomous system on M x I: time becomes coordinate x_{n+1}."""
        n = self.dimension
        ids = identity_expressions(n + 1)
        clock = Expression(_SpaceNode(n), n + 1)
        components = tuple(
            substitute(c, time=clock, space=ids[1 : n + 1]) for c in self.components
        ) + (parse("1", n + 1),)
        box = Box(
            self.box.lower + (self.time_interval.lower,),
            self.box.upper + (self.time_interval.upper,),
        )
        return VectorFieldSpec(n + 1, components, Interval(), box)

    def describe(self) -> str:
        return "(" + ", ".join(str(c) for c in self.components) + ")"


# -- curves -----------------------------------------------------------------------------


class TerminationKind(str, Enum):
    REACHED_TARGET = "ReachedTarget"
    DOMAIN_ESCAPE = "DomainEscape"
    BLOW_UP = "BlowUp"
    STEP_UNDERFLOW = "StepUnderflow"


@dataclass(frozen=True)
class Termination:
    kind: TerminationKind
    t_star: Optional[float] = None
    face: Optional[Tuple[int, str]] = None

    @property
    def reached(self) -> bool:
        return self.kind is TerminationKind.REACHED_TARGET

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.t_star is not None:
            out["t_star"] = self.t_star
        if self.face is not None:
            out["face"] = {"axis": self.face[0] + 1, "side": self.face[1]}
        return out


class _DenseNodes:
    """Accepted nodes plus per-step power-basis dense coefficients."""

    def __init__(self, times: np.ndarray, states: np.ndarray, coeffs: np.ndarray):
        self.times = times
        self.states = states
        self.coeffs = coeffs  # (steps, 5, d)
        self.direction = 1.0 if len(times) < 2 or times[-1] >= times[0] else -1.0
        self._keys = self.direction * (times - times[0])

    @property
    def time_range(self) -> Tuple[float, float]:
        return (min(self.times[0], self.times[-1]), max(self.times[0], self.times[-1]))

    def covers(self, t: float) -> bool:
        lo, hi = self.time_range
        return lo <= t <= hi

    def _locate(self, t: float) -> Tuple[int, float]:
        if not self.covers(t):
            lo, hi = self.time_range
            raise OutOfRange(f"t={t!r} outside covered range [{lo!r}, {hi!r}]")
        key = self.direction * (t - self.times[0])
        i = int(np.searchsorted(self._keys, key, side="right")) - 1
        i = min(max(i, 0), len(self.coeffs) - 1)
        h = self.times[i + 1] - self.times[i]
        return i, (t - self.times[i]) / h

    def value(self, t: float) -> np.ndarray:
        hit = np.flatnonzero(self.times == t)
        if hit.size:
            return self.states[hit[0]].copy()
        i, theta = self._locate(t)
        c = self.coeffs[i]
        return c[0] + theta * (c[1] + theta * (c[2] + theta * (c[3] + theta * c[4])))

    def rate(self, t: float) -> np.ndarray:
        if len(self.coeffs) == 0:
            raise OutOfRange("a single-node curve has no dense derivative")
        i, theta = self._locate(t)
        c = self.coeffs[i]
        h = self.times[i + 1] - self.times[i]
        d_theta = c[1] + theta * (2 * c[2] + theta * (3 * c[3] + theta * 4 * c[4]))
        return d_theta / h


@dataclass(frozen=True, eq=False)
class SolutionCurve:
    """One integrated trajectory from ``(t0, x0)`` with dense output."""

    t0: float
    x0: np.ndarray
    times: np.ndarray
    states: np.ndarray
    coeffs: np.ndarray
    termination: Termination

    @cached_property
    def _dense(self) -> _DenseNodes:
        return _DenseNodes(self.times, self.states, self.coeffs)

    @property
    def direction(self) -> str:
        return "backward" if self._dense.direction < 0 else "forward"

    @property
    def nodes(self) -> list:
        return list(zip(self.times.tolist(), [tuple(s) for s in self.states.tolist()]))

    @property
    def time_range(self) -> Tuple[float, float]:
        return self._dense.time_range

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1].copy()

    def covers(self, t: float) -> bool:
        return self._dense.covers(t)

    def sample(self, t: float) -> np.ndarray:
        return self._dense.value(t)

    def derivative(self, t: float) -> np.ndarray:
        return self._dense.rate(t)


@dataclass(frozen=True, eq=False)
class JacobianCurve:
    """dphi(t)/dx0 along a trajectory, on the same nodes as its :class:`SolutionCurve`."""

    times: np.ndarray
    matrices: np.ndarray
    coeffs: np.ndarray

    @cached_property
    def _dense(self) -> _DenseNodes:
        n = self.matrices.shape[1]
        return _DenseNodes(self.times, self.matrices.reshape(len(self.times), n * n), self.coeffs)

    @property
    def nodes(self) -> list:
        return list(zip(self.times.tolist(), list(self.matrices)))

    @property
    def final(self) -> np.ndarray:
        return self.matrices[-1].copy()

    def at(self, t: float) -> np.ndarray:
        n = self.matrices.shape[1]
        return self._dense.value(t).reshape(n, n)


# -- Dormand–Prince tableau ------------------------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = _A[6]
# b - b_hat of the embedded 4th-order solution
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Hairer's dense output weights
_D = np.array(
    [
        -12715105075 / 11282082432,
        0.0,
        87487479700 / 32700410799,
        -10690763975 / 1880347072,
        701980252875 / 199316789632,
        -1453857185 / 822651844,
        69997945 / 29380423,
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
PI_ALPHA = 0.17
PI_BETA = 0.04

Rhs = Callable[[float, np.ndarray], np.ndarray]


def _rms(v: np.ndarray) -> float:
    return float(np.sqrt(np.mean(v * v)))


def _initial_step(rhs: Rhs, t0: float, y0: np.ndarray, f0: np.ndarray, direction: float,
                  tol: Tolerances, span: float) -> float:
    scale = tol.atol + tol.rtol * np.abs(y0)
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    try:
        f1 = rhs(t0 + direction * h0, y0 + direction * h0 * f0)
    except EvalError:
        return h0
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def _dense_coefficients(y: np.ndarray, y_new: np.ndarray, k: np.ndarray, h: float) -> np.ndarray:
    r2 = y_new - y
    r3 = h * k[0] - r2
    r4 = r2 - h * k[6] - r3
    r5 = h * (_D @ k)
    return np.stack([y, r2 + r3, r4 + r5 - r3, -(r4 + 2 * r5), r5])


def _poly(c: np.ndarray, theta: float) -> np.ndarray:
    return c[0] + theta * (c[1] + theta * (c[2] + theta * (c[3] + theta * c[4])))


@dataclass
class _Event:
    theta: float
    kind: TerminationKind
    face: Optional[Tuple[int, str]] = None


def _find_events(c: np.ndarray, n: int, box: Box, blowup_norm: float) -> Optional[_Event]:
    """Earliest event inside an accepted step, on the dense polynomial ``c``."""
    end = _poly(c, 1.0)[:n]
    events = []
    for axis in range(n):
        lo, hi = box.lower[axis], box.upper[axis]
        if math.isfinite(lo) and end[axis] <= lo:
            g = lambda th, a=axis, b=lo: _poly(c, th)[a] - b
            events.append(_Event(_root(g), TerminationKind.DOMAIN_ESCAPE, (axis, "lower")))
        if math.isfinite(hi) and end[axis] >= hi:
            g = lambda th, a=axis, b=hi: b - _poly(c, th)[a]
            events.append(_Event(_root(g), TerminationKind.DOMAIN_ESCAPE, (axis, "upper")))
    if np.linalg.norm(end) > blowup_norm:
        g = lambda th: blowup_norm - np.linalg.norm(_poly(c, th)[:n])
        events.append(_Event(_root(g), TerminationKind.BLOW_UP))
    if not events:
        return None
    return min(events, key=lambda e: e.theta)


def _root(g: Callable[[float], float]) -> float:
    # g > 0 at the step start, g <= 0 at its end
    if g(1.0) == 0.0:
        return 1.0
    return brentq(g, 0.0, 1.0, xtol=1e-14, rtol=4 * EPS)


@dataclass
class _Run:
    times: np.ndarray
    states: np.ndarray
    coeffs: np.ndarray
    termination: Termination
    steps: int
    rejected: int


def _dopri(rhs: Rhs, t0: float, y0: np.ndarray, t_target: float, tol: Tolerances,
           n: int, box: Box) -> _Run:
    """Integrate ``y' = rhs(t, y)``; events are tested on the first ``n`` components."""
    d = len(y0)
    times, states, coeffs = [t0], [y0.copy()], []
    span = abs(t_target - t0)
    if span == 0.0:
        return _Run(np.array(times), np.array(states), np.empty((0, 5, d)),
                    Termination(TerminationKind.REACHED_TARGET), 0, 0)

    direction = 1.0 if t_target > t0 else -1.0
    min_step = tol.min_step_for(span)
    t, y = t0, y0.copy()
    f = rhs(t, y)
    h = _initial_step(rhs, t, y, f, direction, tol, span)
    err_prev = 1e-4
    rejected_last = False
    steps = rejected = 0
    k = np.empty((7, d))
    termination = None

    while termination is None:
        floor = max(min_step, 10 * EPS * abs(t))
        if h < floor:
            termination = Termination(TerminationKind.STEP_UNDERFLOW, t_star=t)
            break
        remaining = abs(t_target - t)
        last = h >= remaining
        if last:
            h = remaining
        hs = direction * h

        k[0] = f
        try:
            for i in range(1, 7):
                k[i] = rhs(t + _C[i] * hs, y + hs * (_A[i] @ k[:i]))
        except EvalError:
            if h <= floor:
                raise
            h *= 0.25
            rejected += 1
            rejected_last = True
            continue

        y_new = y + hs * (_B @ k[:6])
        scale = tol.atol + tol.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(hs * (_E @ k) / scale)

        if err > 1.0:
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
            rejected += 1
            rejected_last = True
            continue

        steps += 1
        t_new = t_target if last else t + hs
        c = _dense_coefficients(y, y_new, k, hs)
        event = _find_events(c, n, box, tol.blowup_norm)
        if event is not None:
            # truncate the step at the event: y(theta * s) on the shortened step
            scale_pow = event.theta ** np.arange(5)
            c = c * scale_pow[:, None]
            t_new = t + event.theta * hs
            y_new = _poly(c, 1.0)
            if event.face is not None:
                axis, side = event.face
                y_new[axis] = box.lower[axis] if side == "lower" else box.upper[axis]
            termination = Termination(event.kind, t_star=t_new, face=event.face)
        times.append(t_new)
        states.append(y_new)
        coeffs.append(c)
        if termination is not None:
            break
        if last:
            termination = Termination(TerminationKind.REACHED_TARGET)
            break

        t, y = t_new, y_new
        f = k[6].copy()
        factor = SAFETY * max(err, 1e-10) ** -PI_ALPHA * err_prev ** PI_BETA
        factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
        if rejected_last:
            factor = min(factor, 1.0)
        err_prev = max(err, 1e-4)
        rejected_last = False
        h *= factor

    return _Run(np.array(times), np.array(states), np.array(coeffs).reshape(-1, 5, d),
                termination, steps, rejected)


# -- public API --------------------------------------------------------------------------


def _check_cauchy(field: VectorFieldSpec, t0: float, x0, t_target: float) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if len(x0) != field.dimension:
        raise InvalidInput(f"x0 has {len(x0)} coordinates, field dimension is {field.dimension}")
    if not (math.isfinite(t0) and field.time_interval.contains(t0)):
        raise InvalidInput(f"t0={t0!r} is not inside I")
    if not field.box.contains(x0):
        raise InvalidInput(f"x0={x0.tolist()!r} is not inside M")
    if not (math.isfinite(t_target) and field.time_interval.contains_closed(t_target)):
        raise InvalidInput(f"t_target={t_target!r} must be finite and in the closure of I")
    return x0


def integrate(field: VectorFieldSpec, t0: float, x0, t_target: float,
              tol: Optional[Tolerances] = None) -> SolutionCurve:
    """Solve x' = v(t, x), x(t0) = x0 towards ``t_target`` (either direction)."""
    tol = tol or Tolerances()
    t0, t_target = float(t0), float(t_target)
    x0 = _check_cauchy(field, t0, x0, t_target)
    run = _dopri(lambda t, y: field.evaluate(t, y), t0, x0, t_target, tol,
                 field.dimension, field.box)
    logger.debug(
        f"integrate {field.describe()} from t={t0} to {t_target}: {run.steps} steps, "
        f"{run.rejected} rejected, {run.termination.kind.value}"
    )
    return SolutionCurve(t0, x0, run.times, run.states, run.coeffs, run.termination)


def integrate_with_variational(field: VectorFieldSpec, t0: float, x0, t_target: float,
                               tol: Optional[Tolerances] = None
                               ) -> Tuple[SolutionCurve, JacobianCurve]:
    """Integrate the state together with J' = v_x(t, x) J, J(t0) = I, on one step sequence."""
    tol = tol or Tolerances()
    t0, t_target = float(t0), float(t_target)
    x0 = _check_cauchy(field, t0, x0, t_target)
    n = field.dimension

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        x = y[:n]
        jac = y[n:].reshape(n, n)
        return np.concatenate((field.evaluate(t, x), (field.jacobian_at(t, x) @ jac).ravel()))

    y0 = np.concatenate((x0, np.eye(n).ravel()))
    run = _dopri(rhs, t0, y0, t_target, tol, n, field.box)
    logger.debug(
        f"variational {field.describe()} from t={t0} to {t_target}: {run.steps} steps, "
        f"{run.termination.kind.value}"
    )
    curve = SolutionCurve(t0, x0, run.times, run.states[:, :n], run.coeffs[:, :, :n],
                          run.termination)
    jac = JacobianCurve(run.times, run.states[:, n:].reshape(-1, n, n), run.coeffs[:, :, n:])
    return curve, jac


def sample(curve: SolutionCurve, t: float) -> np.ndarray:
    """Dense-output state at ``t``; exact at nodes, :class:`OutOfRange` outside the curve."""
    return curve.sample(float(t))


@dataclass(frozen=True, eq=False)
class WindowSolution:
    """The solution through ``(t0, x0)`` integrated to both ends of a time window."""

    t0: float
    backward: SolutionCurve
    forward: SolutionCurve

    @property
    def time_range(self) -> Tuple[float, float]:
        return (self.backward.time_range[0], self.forward.time_range[1])

    @property
    def terminations(self) -> list:
        return [self.backward.termination, self.forward.termination]

    @property
    def complete(self) -> bool:
        return all(term.reached for term in self.terminations)

    def _side(self, t: float) -> SolutionCurve:
        if t >= self.t0 and len(self.forward.times) > 1:
            return self.forward
        if t <= self.t0 and len(self.backward.times) > 1:
            return self.backward
        return self.forward if t >= self.t0 else self.backward

    def covers(self, t: float) -> bool:
        lo, hi = self.time_range
        return lo <= t <= hi

    def sample(self, t: float) -> np.ndarray:
        return self._side(t).sample(t)

    def derivative(self, t: float) -> np.ndarray:
        return self._side(t).derivative(t)


def solve_window(field: VectorFieldSpec, t0: float, x0, window: Tuple[float, float],
                 tol: Optional[Tolerances] = None) -> WindowSolution:
    a, b = window
    if not a <= t0 <= b:
        raise InvalidInput(f"t0={t0!r} is outside the window [{a!r}, {b!r}]")
    return WindowSolution(
        float(t0),
        backward=integrate(field, t0, x0, a, tol),
        forward=integrate(field, t0, x0, b, tol),
    )
