"""Separable quadratic program over a simplex-box set.

Every solver in the package reduces to repeated calls of::

    minimize    sum_t q_t z_t**2 + b_t z_t
    subject to  sum_t z_t = gamma,  lower <= z <= upper

with ``q > 0``. The minimizer is ``z_t = clip((lam - b_t) / (2 q_t), lower_t,
upper_t)`` for a scalar ``lam`` located by bisection on the monotone map
``lam -> sum_t z_t(lam)``, followed by one exact solve on the free set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import BACKEND, USE_NUMBA
from .errors import InfeasibleSet

if USE_NUMBA:
    from . import _kernels_numba as backend
else:
    from . import _kernels_numpy as backend

__all__ = [
    "BACKEND",
    "DEFAULT_TOL",
    "SeparableQP",
    "backend",
    "check_nonempty",
    "kkt_residual",
    "project_box_simplex",
    "qp_objective",
    "recover_multiplier",
    "solve_separable_qp",
    "solve_with_multiplier",
]

DEFAULT_TOL = 1e-12
FEAS_TOL = 1e-9


def _vec(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64).reshape(-1)


@dataclass(frozen=True, eq=False)
class SeparableQP:
    q: np.ndarray
    b: np.ndarray
    gamma: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        for name in ("q", "b", "lower", "upper"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        object.__setattr__(self, "gamma", float(self.gamma))
        h = self.q.shape[0]
        if any(getattr(self, n).shape[0] != h for n in ("b", "lower", "upper")):
            raise ValueError("q, b, lower and upper must have the same length")
        if h == 0:
            raise ValueError("empty problem")
        if not np.all(self.q > 0):
            raise ValueError("quadratic coefficients must be strictly positive")
        if np.any(self.lower > self.upper):
            raise InfeasibleSet("lower bound exceeds upper bound")
        check_nonempty(self.gamma, self.lower, self.upper)

    def objective(self, z) -> float:
        return qp_objective(self.q, self.b, z)


def qp_objective(q, b, z) -> float:
    z = np.asarray(z, dtype=np.float64)
    return float(np.dot(q * z + b, z))


def check_nonempty(gamma, lower, upper, tol=FEAS_TOL):
    lo = float(np.sum(lower))
    hi = float(np.sum(upper))
    if gamma < lo - tol or gamma > hi + tol:
        raise InfeasibleSet(f"gamma={gamma!r} outside [sum(lower)={lo!r}, sum(upper)={hi!r}]")


def solve_with_multiplier(qp: SeparableQP, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, float]:
    if not tol > 0:
        raise ValueError("tol must be positive")
    z = np.empty_like(qp.q)
    lam = backend.qp_row(qp.q, qp.b, qp.gamma, qp.lower, qp.upper, tol, z)
    return z, float(lam)


def solve_separable_qp(qp: SeparableQP, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Return the unique minimizer of ``qp``.

    Bounds hold exactly and ``|sum(z) - gamma| <= tol`` (up to rounding of
    the final sum).
    """
    return solve_with_multiplier(qp, tol)[0]


def project_box_simplex(v, gamma, lower, upper, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Euclidean projection of ``v`` onto {sum z = gamma, lower <= z <= upper}."""
    v = _vec(v)
    qp = SeparableQP(np.ones_like(v), -2.0 * v, gamma, lower, upper)
    return solve_separable_qp(qp, tol)


def recover_multiplier(z, q, b, lower, upper, atol: float = 1e-12) -> float:
    """Estimate the equality multiplier from a candidate solution alone.

    Uses the mean of the gradient over coordinates strictly inside their box;
    if every coordinate sits on a bound, returns the midpoint of the interval
    of multipliers consistent with the active bounds.
    """
    z, q, b, lower, upper = map(_vec, (z, q, b, lower, upper))
    grad = 2.0 * q * z + b
    at_lo = z <= lower + atol
    at_hi = z >= upper - atol
    free = ~(at_lo | at_hi)
    if free.any():
        return float(grad[free].mean())
    # at lower: grad >= lam, at upper: grad <= lam (a pinned coordinate is both)
    lam_max = grad[at_lo & ~at_hi].min() if (at_lo & ~at_hi).any() else np.inf
    lam_min = grad[at_hi & ~at_lo].max() if (at_hi & ~at_lo).any() else -np.inf
    if np.isfinite(lam_max) and np.isfinite(lam_min):
        return float(0.5 * (lam_max + lam_min))
    if np.isfinite(lam_max):
        return float(lam_max)
    if np.isfinite(lam_min):
        return float(lam_min)
    return 0.0


def kkt_residual(z, lam, q, b, lower, upper, atol: float = 1e-12) -> float:
    """Largest violation of the optimality conditions, in gradient units.

    Stationarity for free coordinates, sign conditions for active bounds,
    plus box and equality violations (scaled to gradient units through the
    curvature).
    """
    z, q, b, lower, upper = map(_vec, (z, q, b, lower, upper))
    grad = 2.0 * q * z + b
    at_lo = z <= lower + atol
    at_hi = z >= upper - atol
    free = ~(at_lo | at_hi)
    viol = np.zeros_like(z)
    viol[free] = np.abs(grad[free] - lam)
    lo_only = at_lo & ~at_hi
    hi_only = at_hi & ~at_lo
    viol[lo_only] = np.maximum(lam - grad[lo_only], 0.0)
    viol[hi_only] = np.maximum(grad[hi_only] - lam, 0.0)
    box = np.maximum(np.maximum(lower - z, z - upper), 0.0)
    return float(max(viol.max(), (2.0 * q * box).max()))
