"""Compare the numba kernels against their numpy fallbacks.

Kernel timings run in-process on the LP matrix of a generated grid
instance. The end-to-end LP solve runs once per backend in a subprocess,
since the backend is chosen at import time from POPT_DISABLE_NUMBA.

    python3 benchmarks/bench_kernels.py --grid 3 --agents 30 --repeat 20
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from popt import _kernels
from popt.auction import MechanismConfig, build_lip, perturb
from popt.spectrum import GridSpec, generate

SOLVE_SNIPPET = """
import time, numpy as np
from popt import _kernels
from popt.auction import MechanismConfig, build_lip, perturb
from popt.lp import solve
from popt.spectrum import GridSpec, generate
rng = np.random.default_rng({seed})
spec = GridSpec(m_g={g}, n_g={g}, n_agents={n})
lp = build_lip(perturb(generate(spec, rng), MechanismConfig(), rng))
solve(lp)  # warm-up (jit compile or cache load)
t = time.perf_counter()
for _ in range({repeat}):
    sol = solve(lp)
print(_kernels.BACKEND, (time.perf_counter() - t) / {repeat}, sol.iterations, sol.objective_value)
"""


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def kernel_table(grid, agents, repeat, seed):
    rng = np.random.default_rng(seed)
    spec = GridSpec(m_g=grid, n_g=grid, n_agents=agents)
    inst = generate(spec, rng)
    lp = build_lip(perturb(inst, MechanismConfig(), rng))
    A = lp.A.tocsc()
    indptr, indices, data = A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data
    colids = np.repeat(np.arange(A.shape[1]), np.diff(indptr))
    cost = lp.objective
    y = rng.random(A.shape[0])
    eligible = np.ones(A.shape[1], dtype=np.bool_)
    rows = []

    def pair(name, f_np, f_nb):
        t_np = best_of(f_np, repeat)
        t_nb = best_of(f_nb, repeat) if _kernels.HAVE_NUMBA else float("nan")
        rows.append((name, t_np, t_nb))

    args = (indptr, indices, data, colids, cost, y, eligible, False, 1e-9)
    pair("price", lambda: _kernels._price_numpy(*args), lambda: _kernels._price_numba(*args))
    pair("reduced_costs", lambda: _kernels._reduced_costs_numpy(*args[:6]),
         lambda: _kernels._reduced_costs_numba(*args[:6]))

    m = A.shape[0]
    binv = np.eye(m)
    xb = rng.random(m)
    alpha = rng.random(m)

    def piv(f):
        return lambda: f(binv.copy(), xb.copy(), alpha, 0, 0.5)

    pair("pivot", piv(_kernels._pivot_numpy), piv(_kernels._pivot_numba))

    small = generate(GridSpec(m_g=2, n_g=2, s_g=2, n_agents=4, k_a=2, mu=3.0), rng)
    oargs = (small.valuations, small.bundles, small.supplies.astype(float), 10**6)
    pair("oracle_search", lambda: _kernels._oracle_search_py(*oargs),
         lambda: _kernels._oracle_search_numba(*oargs))
    return A.shape, rows


def solve_table(grid, agents, repeat, seed):
    out = []
    for disable in ("1", "0"):
        env = dict(os.environ, POPT_DISABLE_NUMBA=disable)
        code = SOLVE_SNIPPET.format(seed=seed, g=grid, n=agents, repeat=repeat)
        r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, secs, iters, obj = r.stdout.split()
        out.append((backend, float(secs), int(iters), float(obj)))
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--grid", type=int, default=3, help="grid side length")
    p.add_argument("--agents", type=int, default=30)
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-solve", action="store_true")
    args = p.parse_args(argv)

    shape, rows = kernel_table(args.grid, args.agents, args.repeat, args.seed)
    print(f"LP matrix {shape[0]} x {shape[1]}, best of {args.repeat}")
    print(f"{'kernel':<15}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}")
    for name, a, b in rows:
        print(f"{name:<15}{1e3 * a:>12.3f}{1e3 * b:>12.3f}{a / b:>10.1f}")
    if not args.skip_solve:
        print("\nfull LP solve")
        res = solve_table(args.grid, args.agents, max(1, args.repeat // 10), args.seed)
        for backend, secs, iters, obj in res:
            print(f"{backend:<8}{secs:>10.3f} s  {iters} pivots  objective {obj:.9g}")
        if res[0][3] != res[1][3]:
            print(f"objective differs between backends by {abs(res[0][3] - res[1][3]):.3e}")


if __name__ == "__main__":
    main()
