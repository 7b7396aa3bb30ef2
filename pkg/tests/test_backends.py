"""The numba and numpy kernels must be interchangeable."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pevgame import _kernels_numpy as npk
from pevgame._accel import HAVE_NUMBA

numba_only = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def _rows(rng, m, h):
    Q = rng.uniform(0.05, 5, (m, h))
    B = rng.normal(scale=3, size=(m, h))
    LB = rng.uniform(0, 0.3, (m, h)) * rng.integers(0, 2, (m, h))
    UB = LB + rng.uniform(0, 1, (m, h)) * rng.integers(0, 2, (m, h))
    G = rng.uniform(LB.sum(1), UB.sum(1))
    return Q, B, G, LB, UB


@numba_only
def test_qp_rows_agree(rng):
    from pevgame import _kernels_numba as nbk

    Q, B, G, LB, UB = _rows(rng, 200, 9)
    Z1, Z2 = np.empty_like(Q), np.empty_like(Q)
    l1, l2 = np.empty(200), np.empty(200)
    nbk.qp_rows(Q, B, G, LB, UB, 1e-12, Z1, l1)
    npk.qp_rows(Q, B, G, LB, UB, 1e-12, Z2, l2)
    assert_allclose(Z1, Z2, atol=1e-10)


@numba_only
@pytest.mark.parametrize("inplace", [False, True])
@pytest.mark.parametrize("c", [0.0, 2.5])
def test_sweeps_agree(rng, inplace, c):
    from pevgame import _kernels_numba as nbk

    m, h = 15, 6
    _, _, G, LB, UB = _rows(rng, m, h)
    x = LB + (UB - LB) * ((G - LB.sum(1)) / np.maximum(UB.sum(1) - LB.sum(1), 1e-300))[:, None]
    p = rng.uniform(0.5, 2, h)
    x0 = rng.uniform(0, 1, h)
    w = rng.integers(1, 4, m).astype(float)
    qs, bs = w * w + w, 2 * w
    results = []
    for k in (nbk, npk):
        xx = x.copy()
        colsum = (w[:, None] * xx).sum(0)
        out = np.empty_like(xx)
        change = k.sweep(xx, w, colsum, p, x0, G, LB, UB, qs, bs, c, inplace, 1e-12, out)
        results.append((change, xx if inplace else out, colsum))
    (c1, r1, s1), (c2, r2, s2) = results
    assert c1 == pytest.approx(c2, abs=1e-10)
    assert_allclose(r1, r2, atol=1e-10)
    assert_allclose(s1, s2, atol=1e-10)


def _run_solver(no_jit: str):
    code = (
        "import json, pevgame\n"
        "from pevgame import AgentParams, FleetInstance, solve_nash_central\n"
        "inst = FleetInstance([1, 2, 3], tuple(AgentParams(g, [0, 0, 0], [1, 1, 1]) for g in (0.5, 1.5, 2.5)),"
        " [0.2, 0.1, 0.0])\n"
        "x, r = solve_nash_central(inst)\n"
        "print(json.dumps({'backend': pevgame.BACKEND, 'x': x.tolist()}))\n"
    )
    env = dict(os.environ, PEVGAME_NO_JIT=no_jit)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def test_env_flag_selects_numpy_backend():
    res = _run_solver("1")
    assert res["backend"] == "numpy"


@numba_only
def test_backends_give_the_same_equilibrium():
    a, b = _run_solver("0"), _run_solver("1")
    assert a["backend"] == "numba"
    assert_allclose(a["x"], b["x"], atol=1e-9)
