"""Payoffs, aggregate costs and best responses of the charging game."""

from __future__ import annotations

import numpy as np

from .kernel import DEFAULT_TOL, SeparableQP, backend, solve_separable_qp
from .model import FleetInstance


def _matrix(x, instance: FleetInstance) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (instance.m, instance.h):
        raise ValueError(f"charging matrix has shape {x.shape}, expected {(instance.m, instance.h)}")
    return x


def _check_index(i, instance):
    if not 0 <= i < instance.m:
        raise IndexError(f"agent index {i} out of range for m={instance.m}")


def aggregate(x, instance: FleetInstance) -> np.ndarray:
    """Total demand per slot, PEV plus non-PEV."""
    return _matrix(x, instance).sum(axis=0) + instance.base_load


def payoffs(x, instance: FleetInstance) -> np.ndarray:
    """Vector of every agent's cost ``sum_t x_it p_t S_t``."""
    x = _matrix(x, instance)
    s = x.sum(axis=0) + instance.base_load
    return x @ (instance.prices * s)


def agent_payoff(i: int, x, instance: FleetInstance) -> float:
    _check_index(i, instance)
    x = _matrix(x, instance)
    s = x.sum(axis=0) + instance.base_load
    return float(np.dot(x[i] * instance.prices, s))


def base_load_cost(x, instance: FleetInstance) -> float:
    s = aggregate(x, instance)
    return float(np.dot(instance.base_load * instance.prices, s))


def social_cost(x, instance: FleetInstance) -> float:
    s = aggregate(x, instance)
    return float(np.dot(instance.prices, s * s))


def auxiliary_cost(x, instance: FleetInstance) -> float:
    x = _matrix(x, instance)
    return float(np.sum((x * x) @ instance.prices))


def potential(x, instance: FleetInstance) -> float:
    """Objective of the auxiliary problem whose minimizer is the Nash point."""
    return social_cost(x, instance) + auxiliary_cost(x, instance)


def _others(i, x, instance):
    return x.sum(axis=0) - x[i]


def best_response_qp(i: int, x, instance: FleetInstance, c: float = 0.0) -> SeparableQP:
    p = instance.prices
    a = _others(i, x, instance)
    return SeparableQP(
        q=p + c,
        b=p * (a + instance.base_load) - 2.0 * c * x[i],
        gamma=instance.gamma[i],
        lower=instance.lower[i],
        upper=instance.upper[i],
    )


def exact_best_response(i: int, x, instance: FleetInstance, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Minimizer of agent ``i``'s payoff over its own set, others held fixed."""
    _check_index(i, instance)
    x = _matrix(x, instance)
    return solve_separable_qp(best_response_qp(i, x, instance), tol)


def regularized_best_response(
    i: int, x, instance: FleetInstance, c: float, tol: float = DEFAULT_TOL
) -> np.ndarray:
    """Best response with proximity penalty ``c * ||z - x_i||^2``."""
    if not c > 0:
        raise ValueError("c must be positive")
    _check_index(i, instance)
    x = _matrix(x, instance)
    return solve_separable_qp(best_response_qp(i, x, instance, c), tol)


def _snapshot_responses(x, instance, c, tol):
    m = instance.m
    out = np.empty_like(x)
    colsum = x.sum(axis=0)
    ones = np.ones(m)
    backend.sweep(
        x, ones, colsum, instance.prices, instance.base_load, instance.gamma,
        instance.lower, instance.upper, ones, ones, float(c), False, tol, out,
    )
    return out


def best_responses(x, instance: FleetInstance, tol: float = DEFAULT_TOL) -> np.ndarray:
    """All agents' exact best responses against the same profile."""
    x = np.ascontiguousarray(_matrix(x, instance))
    return _snapshot_responses(x, instance, 0.0, tol)


def regularized_best_responses(x, instance: FleetInstance, c: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """One Jacobi application of the regularized best-response map."""
    if not c > 0:
        raise ValueError("c must be positive")
    x = np.ascontiguousarray(_matrix(x, instance))
    return _snapshot_responses(x, instance, c, tol)


def unilateral_payoffs(z, x, instance: FleetInstance) -> np.ndarray:
    """Cost of agent i when it alone switches to row i of ``z``."""
    z = _matrix(z, instance)
    x = _matrix(x, instance)
    a = x.sum(axis=0)[None, :] - x + instance.base_load[None, :]
    return np.sum(z * instance.prices[None, :] * (a + z), axis=1)


def nash_gaps(x, instance: FleetInstance, tol: float = DEFAULT_TOL) -> np.ndarray:
    x = _matrix(x, instance)
    br = best_responses(x, instance, tol)
    return payoffs(x, instance) - unilateral_payoffs(br, x, instance)


def nash_residual(x, instance: FleetInstance, tol: float = DEFAULT_TOL) -> float:
    """Largest gain any agent gets from deviating to its exact best response.

    Zero at the Nash equilibrium; a value ``<= eps`` certifies an eps-Nash
    point. Clamped below at zero (rounding can make a gain slightly negative).
    """
    if instance.m == 0:
        return 0.0
    return max(0.0, float(nash_gaps(x, instance, tol).max()))


def default_c(instance: FleetInstance) -> float:
    return float(instance.prices.max() * instance.m)
