"""Compare the compiled and pure-Python ILU(0) kernels on augmented velocity blocks.

Usage: python benchmarks/bench_kernels.py [--levels 2 3 4] [--repeat 5]
"""

import argparse
import timeit

import numpy as np
import scipy.sparse as sp

from rkal import _kernels
from rkal.fem import Operators, build_mesh
from rkal.linalg import ILU0


def velocity_block(level, dt=0.1, nu=0.01, gamma=1.0):
    _, spaces = build_mesh(level=level)
    ops = Operators(spaces)
    G = ops.B.T @ sp.diags(1.0 / ops.M_p.diagonal()) @ ops.B
    f = spaces.free_dofs
    return (ops.M_u + dt * nu * ops.K_u + gamma * dt * G)[f][:, f].tocsr()


def best(stmt, repeat):
    return min(timeit.repeat(stmt, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = _kernels.available_backends()
    print(f"backends: {', '.join(backends)}  (default: {_kernels.BACKEND})")
    print(f"{'level':>5} {'n':>6} {'nnz':>8} {'backend':>8} {'factor [s]':>11} {'solve [s]':>11}")
    for level in args.levels:
        A = velocity_block(level)
        b = np.random.default_rng(0).standard_normal(A.shape[0])
        times = {}
        for name in backends:
            k = _kernels.load_backend(name)
            M = ILU0(A, kernels=k)
            tf = best(lambda: ILU0(A, kernels=k), args.repeat)
            ts = best(lambda: M.solve(b), args.repeat)
            times[name] = (tf, ts)
            print(f"{level:>5} {A.shape[0]:>6} {A.nnz:>8} {name:>8} {tf:>11.3e} {ts:>11.3e}")
        if len(times) == 2:
            (cf, cs), (pf, ps) = times["cython"], times["python"]
            print(f"{'':>5} speedup  factor x{pf / cf:.0f}  solve x{ps / cs:.0f}")


if __name__ == "__main__":
    main()
