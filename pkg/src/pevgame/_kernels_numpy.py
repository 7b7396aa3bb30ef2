"""Vectorized numpy kernels, used when numba is unavailable or disabled.

Bisection runs on all rows at once; the in-place (Gauss-Seidel) sweep is
inherently sequential and loops over rows in Python.
"""

import numpy as np

_MAX_BISECT = 200


def _clip(lam, Q, B, LB, UB):
    return np.clip((lam[:, None] - B) / (2.0 * Q), LB, UB)


def qp_rows(Q, B, gamma, LB, UB, tol, Z, lam):
    lo = (2.0 * Q * LB + B).min(axis=1)
    hi = (2.0 * Q * UB + B).max(axis=1)
    slope = (1.0 / (2.0 * Q)).sum(axis=1)
    at_lo = gamma <= LB.sum(axis=1)
    at_hi = ~at_lo & (gamma >= UB.sum(axis=1))

    active = ~(at_lo | at_hi)
    for _ in range(_MAX_BISECT):
        active &= (hi - lo) * slope > tol
        mid = 0.5 * (lo + hi)
        active &= (mid > lo) & (mid < hi)
        if not active.any():
            break
        below = _clip(mid, Q, B, LB, UB).sum(axis=1) < gamma
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)

    mid = 0.5 * (lo + hi)
    z = _clip(mid, Q, B, LB, UB)
    res = np.abs(z.sum(axis=1) - gamma)

    free = (z > LB) & (z < UB)
    inv = 1.0 / (2.0 * Q)
    den = np.where(free, inv, 0.0).sum(axis=1)
    num = gamma + np.where(free, B * inv, -z).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam2 = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), mid)
    z2 = _clip(lam2, Q, B, LB, UB)
    take = (den > 0.0) & (lam2 >= lo) & (lam2 <= hi) & (np.abs(z2.sum(axis=1) - gamma) <= res)
    z = np.where(take[:, None], z2, z)
    out_lam = np.where(take, lam2, mid)

    z[at_lo] = LB[at_lo]
    out_lam[at_lo] = lo[at_lo]
    z[at_hi] = UB[at_hi]
    out_lam[at_hi] = hi[at_hi]
    Z[...] = z
    lam[...] = out_lam


def qp_row(q, b, gamma, lb, ub, tol, z):
    lam = np.empty(1)
    qp_rows(q[None], b[None], np.array([gamma]), lb[None], ub[None], tol, z[None], lam)
    return float(lam[0])


def sweep(x, w, colsum, p, x0, gamma, lb, ub, qs, bs, c, inplace, tol, out):
    if not inplace:
        A = colsum[None, :] - w[:, None] * x
        Q = qs[:, None] * p[None, :] + c
        B = bs[:, None] * p[None, :] * (A + x0[None, :]) - 2.0 * c * x
        lam = np.empty(x.shape[0])
        qp_rows(Q, B, gamma, lb, ub, tol, out, lam)
        return float(np.abs(out - x).max()) if x.size else 0.0

    change = 0.0
    z = np.empty(x.shape[1])
    for i in range(x.shape[0]):
        a = colsum - w[i] * x[i]
        q = qs[i] * p + c
        b = bs[i] * p * (a + x0) - 2.0 * c * x[i]
        qp_row(q, b, gamma[i], lb[i], ub[i], tol, z)
        d = z - x[i]
        change = max(change, float(np.abs(d).max()))
        colsum += w[i] * d
        x[i] = z
    return change
