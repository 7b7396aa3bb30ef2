"""Compare the numba and numpy kernels.

Times the batched row solve, both sweep modes, and an end-to-end Nash solve
(each backend in its own process, selected through PEVGAME_NO_JIT).

    python benchmarks/bench_backends.py [--m 200] [--h 12] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from pevgame import _kernels_numpy
from pevgame._accel import HAVE_NUMBA

END_TO_END = """
import json, time
import numpy as np
import pevgame
from pevgame import FleetInstance, solve_nash_central
from pevgame.montecarlo import RAMP_PRICES, sample_agents, uniform_gamma_model
inst = FleetInstance(RAMP_PRICES, sample_agents(uniform_gamma_model(seed=1), {m}), np.zeros(12))
solve_nash_central(inst)  # warm-up (JIT compile or cache load)
t = time.perf_counter()
x, rep = solve_nash_central(inst)
print(json.dumps({{"backend": pevgame.BACKEND, "seconds": time.perf_counter() - t,
                   "sweeps": rep.iterations, "objective": rep.objective}}))
"""


def problem(m, h, seed=0):
    rng = np.random.default_rng(seed)
    Q = rng.uniform(0.1, 5, (m, h))
    B = rng.normal(size=(m, h))
    LB = np.zeros((m, h))
    UB = np.ones((m, h))
    G = rng.uniform(0.5, h - 0.5, m)
    return Q, B, G, LB, UB


def bench_kernels(mod, m, h, repeat):
    Q, B, G, LB, UB = problem(m, h)
    Z, lam = np.empty_like(Q), np.empty(m)
    mod.qp_rows(Q, B, G, LB, UB, 1e-12, Z, lam)  # compile
    x = Z.copy()
    w = np.ones(m)
    p = np.linspace(0.1, 10, h)
    x0 = np.zeros(h)
    out = np.empty_like(x)

    def rows():
        mod.qp_rows(Q, B, G, LB, UB, 1e-12, Z, lam)

    def jacobi():
        mod.sweep(x, w, x.sum(0), p, x0, G, LB, UB, w, w, float(m), False, 1e-12, out)

    def gauss_seidel():
        xx = x.copy()
        mod.sweep(xx, w, xx.sum(0), p, x0, G, LB, UB, 2 * w, 2 * w, 0.0, True, 1e-12, out)

    res = {}
    for name, fn in (("qp_rows", rows), ("jacobi sweep", jacobi), ("gauss-seidel sweep", gauss_seidel)):
        fn()
        res[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
    return res


def end_to_end(m, no_jit):
    env = dict(os.environ, PEVGAME_NO_JIT="1" if no_jit else "0")
    out = subprocess.run([sys.executable, "-c", END_TO_END.format(m=m)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=200)
    ap.add_argument("--h", type=int, default=12)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--e2e-m", type=int, default=50, help="fleet size for the end-to-end solve")
    args = ap.parse_args()

    mods = {"numpy": _kernels_numpy}
    if HAVE_NUMBA:
        from pevgame import _kernels_numba

        mods["numba"] = _kernels_numba
    timings = {name: bench_kernels(mod, args.m, args.h, args.repeat) for name, mod in mods.items()}

    print(f"kernels, m={args.m}, h={args.h} (best of {args.repeat}, seconds)")
    print(f"{'operation':<22}" + "".join(f"{n:>12}" for n in mods) + ("     speedup" if len(mods) > 1 else ""))
    for op in timings["numpy"]:
        row = f"{op:<22}" + "".join(f"{timings[n][op]:>12.2e}" for n in mods)
        if "numba" in timings:
            row += f"{timings['numpy'][op] / timings['numba'][op]:>11.1f}x"
        print(row)

    print(f"\nend-to-end Nash solve, m={args.e2e_m}, h=12")
    results = [end_to_end(args.e2e_m, no_jit=True)]
    if HAVE_NUMBA:
        results.append(end_to_end(args.e2e_m, no_jit=False))
    for r in results:
        print(f"{r['backend']:<8} {r['seconds']:8.3f}s  {r['sweeps']} sweeps  objective {r['objective']!r}")
    if len(results) == 2:
        rel = abs(results[0]["objective"] - results[1]["objective"]) / abs(results[1]["objective"])
        print(f"speedup {results[0]['seconds'] / results[1]['seconds']:.1f}x, objective agreement {rel:.1e}")


if __name__ == "__main__":
    main()
