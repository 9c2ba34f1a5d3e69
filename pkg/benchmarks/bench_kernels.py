"""Time the DOPRI5 flow kernel compiled with numba against its pure-Python body.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--system hopf_z2]

Integrates one period of a builtin system with the variational equations
(the workload of a shooting Newton step) and prints the mean wall time of
each path and their ratio.  Results of the two paths are compared to make
sure the speedup is not bought with a different answer.
"""
import argparse
import time

import numpy as np

from eqfuller import kernels
from eqfuller._jit import HAVE_NUMBA, pure_module, python_version
from eqfuller.systems import builtin_system


def run(fn, rhs, jac, system, x0, t_end, with_stm):
    n = x0.size
    y0 = np.concatenate([x0, np.eye(n).ravel()]) if with_stm else x0.copy()
    return fn(rhs, jac, y0, system.params(), n, with_stm, t_end, 1e-11, 1e-12, np.inf,
              np.zeros(0), 1e12, 2_000_000, 1.0)


def timed(fn, rhs, jac, system, x0, t_end, with_stm, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = run(fn, rhs, jac, system, x0, t_end, with_stm)
        times.append(time.perf_counter() - t0)
    return float(np.mean(times)), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--system", default="hopf_z2")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--t-end", type=float, default=2 * np.pi)
    args = ap.parse_args()

    system = builtin_system(args.system)
    x0 = np.full(system.dim, 0.5)
    x0[0] = 1.0
    print(f"system {system.name} (dim {system.dim}), t_end {args.t_end:.4g}")
    if not HAVE_NUMBA:
        print("numba disabled or missing: only the Python path is timed")
    py = (pure_module(kernels.__name__).integrate, python_version(system.rhs),
          python_version(system.jac))
    for with_stm in (False, True):
        t_py, out_py = timed(*py, system, x0, args.t_end, with_stm, max(1, args.repeat // 2))
        line = f"  stm={with_stm!s:5}  python {t_py * 1e3:9.2f} ms  steps {out_py[4]}"
        if HAVE_NUMBA:
            nb = (kernels.integrate, system.rhs, system.jac)
            t0 = time.perf_counter()
            run(*nb, system, x0, args.t_end, with_stm)
            compile_s = time.perf_counter() - t0
            t_nb, out_nb = timed(*nb, system, x0, args.t_end, with_stm, args.repeat)
            diff = float(np.max(np.abs(out_nb[2] - out_py[2])))
            line += (f"  numba {t_nb * 1e3:8.3f} ms  (first call {compile_s:.1f} s)"
                     f"  speedup {t_py / t_nb:7.1f}x  max|diff| {diff:.1e}")
        print(line)


if __name__ == "__main__":
    main()
