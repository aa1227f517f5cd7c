"""Compare the numba kernels against the numpy/scipy fallback.

Each backend runs in its own interpreter (the choice is made at import), on
the same meshes: assembly (triplets to CSR), sparse mat-vec, ILU(0) setup and
apply, and a full clamped solve.

    python3 benchmarks/bench_backends.py [--levels 5 6 7] [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from crafem import _kernels
from crafem.assembly import assemble_operator
from crafem.femspace import build_space
from crafem.linalg import Ilu0
from crafem.mesh import refine, unit_square_initial
from crafem.solver import solve_clamped
from crafem.verification import example1

levels, repeat = json.loads(sys.argv[1]), int(sys.argv[2])

def best(fn):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)

out = []
mesh = unit_square_initial()
ex = example1(1e-5)
for level in range(max(levels) + 1):
    if level in levels:
        space = build_space(mesh)
        K = assemble_operator(space, "stiffness")
        x = np.random.default_rng(0).random(K.n_cols)
        ilu = Ilu0(K.add(assemble_operator(space, "mass")))
        out.append({
            "backend": _kernels.backend(), "level": level, "n_tri": mesh.n_triangles,
            "assemble": best(lambda: assemble_operator(space, "stiffness")),
            "matvec": best(lambda: K @ x),
            "ilu0_setup": best(lambda: Ilu0(K.add(assemble_operator(space, "mass")))),
            "ilu0_apply": best(lambda: ilu.solve(x)),
            "clamped_solve": best(lambda: solve_clamped(space, ex.f, 1e-5)),
        })
    mesh = refine(mesh, range(mesh.n_triangles))
print(json.dumps(out))
"""

KEYS = ("assemble", "matvec", "ilu0_setup", "ilu0_apply", "clamped_solve")


def run_backend(flag, levels, repeat):
    env = dict(os.environ, CRAFEM_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", WORKER, json.dumps(levels), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", default=[6, 8, 10],
                    help="numbers of uniform bisection rounds")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    fast = run_backend("1", args.levels, args.repeat)
    slow = run_backend("0", args.levels, args.repeat)
    print(f"{'n_tri':>8} {'kernel':>14} {'numba [s]':>11} {'numpy [s]':>11} {'speedup':>8}")
    for a, b in zip(fast, slow):
        for key in KEYS:
            print(f"{a['n_tri']:>8} {key:>14} {a[key]:>11.4g} {b[key]:>11.4g} "
                  f"{b[key] / a[key]:>8.2f}")
    print(f"total wall time {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
