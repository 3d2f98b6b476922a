"""Two-time flow map phi(t; s, x) of a vector field.

Every query is answered by a fresh integration from ``(s, x)`` to ``t``; a :class:`FlowCache`
can be shared between queries to memoise repeated ones.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .errors import TrajectoryBlowUp, TrajectoryEscaped
from .integrator import (
    SolutionCurve,
    Termination,
    TerminationKind,
    Tolerances,
    VectorFieldSpec,
    integrate,
    integrate_with_variational,
)


@dataclass(frozen=True)
class FlowQuery:
    s: float
    x: tuple
    t: float
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", tuple(float(v) for v in np.asarray(self.x).reshape(-1)))

    @property
    def key(self) -> tuple:
        return (self.s, self.x, self.t, self.tol)


class FlowCache:
    """Get-or-insert memo for flow queries; concurrent callers see one stored value per key."""

    def __init__(self):
        self._lock = threading.Lock()
        self._values: Dict[tuple, object] = {}
        self.hits = 0
        self.misses = 0

    def get_or_compute(self, key: tuple, compute: Callable[[], object]) -> object:
        with self._lock:
            if key in self._values:
                self.hits += 1
                return self._values[key]
        value = compute()
        with self._lock:
            self.misses += 1
            return self._values.setdefault(key, value)

    def __len__(self) -> int:
        with self._lock:
            return len(self._values)

    def clear(self) -> None:
        with self._lock:
            self._values.clear()


def raise_for_termination(termination: Termination) -> None:
    """Turn a non-reached termination into the matching trajectory error."""
    if termination.reached:
        return
    if termination.kind is TerminationKind.DOMAIN_ESCAPE:
        raise TrajectoryEscaped(termination.t_star, termination.face)
    reason = "blow-up" if termination.kind is TerminationKind.BLOW_UP else "step underflow"
    raise TrajectoryBlowUp(termination.t_star, reason)


def _final(curve: SolutionCurve) -> np.ndarray:
    raise_for_termination(curve.termination)
    return curve.final_state


def flow(field: VectorFieldSpec, q: FlowQuery, cache: Optional[FlowCache] = None) -> np.ndarray:
    """phi(q.t; q.s, q.x)."""

    def compute() -> np.ndarray:
        return _final(integrate(field, q.s, q.x, q.t, q.tol))

    if cache is None:
        return compute()
    value = cache.get_or_compute(("flow", field) + q.key, compute)
    return np.array(value)


def flow_with_jacobian(
    field: VectorFieldSpec, q: FlowQuery, cache: Optional[FlowCache] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """phi(q.t; q.s, q.x) together with its derivative in x from the variational equation."""

    def compute() -> Tuple[np.ndarray, np.ndarray]:
        curve, jac = integrate_with_variational(field, q.s, q.x, q.t, q.tol)
        return _final(curve), jac.final

    if cache is None:
        return compute()
    x, j = cache.get_or_compute(("variational", field) + q.key, compute)
    return np.array(x), np.array(j)


def flow_jacobian(field: VectorFieldSpec, q: FlowQuery, cache: Optional[FlowCache] = None
                  ) -> np.ndarray:
    return flow_with_jacobian(field, q, cache)[1]


def check_group_law(field: VectorFieldSpec, s: float, r: float, t: float, x,
                    tol: Optional[Tolerances] = None) -> float:
    """||phi(t; r, phi(r; s, x)) - phi(t; s, x)||."""
    tol = tol or Tolerances()
    via = flow(field, FlowQuery(r, flow(field, FlowQuery(s, x, r, tol)), t, tol))
    direct = flow(field, FlowQuery(s, x, t, tol))
    return float(np.linalg.norm(via - direct))
