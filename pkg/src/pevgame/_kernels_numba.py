"""Loop kernels compiled with numba.

Mirror of :mod:`pevgame._kernels_numpy`; both modules expose the same three
functions with the same signatures and write their results into caller-owned
buffers.
"""

import numpy as np
from numba import njit

_MAX_BISECT = 200


@njit(cache=True, nogil=True)
def _clip_sum(lam, q, b, lb, ub):
    s = 0.0
    for t in range(q.shape[0]):
        v = (lam - b[t]) / (2.0 * q[t])
        if v < lb[t]:
            v = lb[t]
        elif v > ub[t]:
            v = ub[t]
        s += v
    return s


@njit(cache=True, nogil=True)
def _clip_sum_split(lam, lo, hi, q, b, lb, ub):
    # also counts breakpoints strictly inside (lo, lam) and (lam, hi)
    s = 0.0
    n_left = 0
    n_right = 0
    for t in range(q.shape[0]):
        two_q = 2.0 * q[t]
        k1 = two_q * lb[t] + b[t]
        k2 = two_q * ub[t] + b[t]
        if lo < k1 < lam:
            n_left += 1
        elif lam < k1 < hi:
            n_right += 1
        if lo < k2 < lam:
            n_left += 1
        elif lam < k2 < hi:
            n_right += 1
        v = (lam - b[t]) / two_q
        if v < lb[t]:
            v = lb[t]
        elif v > ub[t]:
            v = ub[t]
        s += v
    return s, n_left, n_right


@njit(cache=True, nogil=True)
def _clip_fill(lam, q, b, lb, ub, z):
    s = 0.0
    for t in range(q.shape[0]):
        v = (lam - b[t]) / (2.0 * q[t])
        if v < lb[t]:
            v = lb[t]
        elif v > ub[t]:
            v = ub[t]
        z[t] = v
        s += v
    return s


@njit(cache=True, nogil=True)
def _polish(lo, hi, q, b, gamma, lb, ub, tol, z):
    """Solve for the multiplier on the free set at the bracket midpoint.

    Accepts (writes ``z``) only if the equality residual does not get worse
    than at the midpoint and is within ``tol``. Returns ``(accepted, lam)``
    with ``lam`` the bracket midpoint when rejected.
    """
    mid = 0.5 * (lo + hi)
    num = gamma
    den = 0.0
    s_mid = 0.0
    for t in range(q.shape[0]):
        v = (mid - b[t]) / (2.0 * q[t])
        if v <= lb[t]:
            num -= lb[t]
            s_mid += lb[t]
        elif v >= ub[t]:
            num -= ub[t]
            s_mid += ub[t]
        else:
            num += b[t] / (2.0 * q[t])
            den += 1.0 / (2.0 * q[t])
            s_mid += v
    if den <= 0.0:
        return False, mid
    lam = min(max(num / den, lo), hi)
    s = _clip_sum(lam, q, b, lb, ub)
    err = abs(s - gamma)
    if err > abs(s_mid - gamma) or err > tol:
        return False, mid
    _clip_fill(lam, q, b, lb, ub, z)
    return True, lam


@njit(cache=True, nogil=True)
def qp_row(q, b, gamma, lb, ub, tol, z):
    """Minimize sum(q z^2 + b z) s.t. sum(z) = gamma, lb <= z <= ub.

    Writes the minimizer into ``z`` and returns the multiplier. Feasibility
    of the set is the caller's responsibility.
    """
    h = q.shape[0]
    lo = np.inf
    hi = -np.inf
    slope = 0.0
    s_lo = 0.0
    s_hi = 0.0
    for t in range(h):
        a = 2.0 * q[t] * lb[t] + b[t]
        c = 2.0 * q[t] * ub[t] + b[t]
        if a < lo:
            lo = a
        if c > hi:
            hi = c
        slope += 1.0 / (2.0 * q[t])
        s_lo += lb[t]
        s_hi += ub[t]
    if gamma <= s_lo:
        for t in range(h):
            z[t] = lb[t]
        return lo
    if gamma >= s_hi:
        for t in range(h):
            z[t] = ub[t]
        return hi

    for _ in range(_MAX_BISECT):
        if (hi - lo) * slope <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s_mid, n_left, n_right = _clip_sum_split(mid, lo, hi, q, b, lb, ub)
        if s_mid < gamma:
            lo = mid
            n_inside = n_right
        else:
            hi = mid
            n_inside = n_left
        # no breakpoint left in the bracket: the sum is affine there
        if n_inside == 0:
            ok, lam = _polish(lo, hi, q, b, gamma, lb, ub, tol, z)
            if ok:
                return lam
    ok, lam = _polish(lo, hi, q, b, gamma, lb, ub, np.inf, z)
    if not ok:
        _clip_fill(lam, q, b, lb, ub, z)
    return lam


@njit(cache=True, nogil=True)
def qp_rows(Q, B, gamma, LB, UB, tol, Z, lam):
    for i in range(Q.shape[0]):
        lam[i] = qp_row(Q[i], B[i], gamma[i], LB[i], UB[i], tol, Z[i])


@njit(cache=True, nogil=True)
def sweep(x, w, colsum, p, x0, gamma, lb, ub, qs, bs, c, inplace, tol, out):
    """One pass of per-row block updates.

    Row i solves the separable problem with
    ``q = qs[i] * p + c`` and ``b = bs[i] * p * (A + x0) - 2 c x[i]`` where
    ``A = colsum - w[i] * x[i]``. With ``inplace`` the rows are updated in
    index order and ``colsum`` is kept current; otherwise every row sees the
    same snapshot and results go to ``out``. Returns the sup-norm change.
    """
    m, h = x.shape
    q = np.empty(h)
    bb = np.empty(h)
    z = np.empty(h)
    change = 0.0
    for i in range(m):
        wi = w[i]
        for t in range(h):
            a = colsum[t] - wi * x[i, t]
            q[t] = qs[i] * p[t] + c
            bb[t] = bs[i] * p[t] * (a + x0[t]) - 2.0 * c * x[i, t]
        qp_row(q, bb, gamma[i], lb[i], ub[i], tol, z)
        for t in range(h):
            d = z[t] - x[i, t]
            if abs(d) > change:
                change = abs(d)
            if inplace:
                colsum[t] += wi * d
                x[i, t] = z[t]
            else:
                out[i, t] = z[t]
    return change
