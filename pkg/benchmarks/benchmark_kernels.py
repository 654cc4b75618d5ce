#!/usr/bin/env python3
"""Benchmark the master-equation integrator: numba kernel vs numpy fallback.

The adaptive stepper dominates runtime in engine cycles and steady-state
relaxations, so this is the path the @njit kernel exists for. The numpy
implementation is algorithmically identical (same tableau, same step control,
same per-step renormalization); NHTHERMO_DISABLE_NUMBA=1 selects it globally.

Run:  python3 benchmarks/benchmark_kernels.py
"""

import time

import numpy as np

from nhthermo import kernels
from nhthermo.dynamics import BathSpec, NonHermitianSystem, build_generator
from nhthermo.operators import HermitianOperator

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)


def cases():
    bath = BathSpec(beta=0.01, kappa=0.01)
    for name, gamma, span in (
        ("relaxation gamma=0.5", 0.5, 2000.0),
        ("relaxation gamma=1.2", 1.2, 2000.0),
    ):
        sys = NonHermitianSystem(HermitianOperator(SX), HermitianOperator(gamma * SY))
        model = build_generator(sys, bath)
        x0 = (np.eye(2) / 2).reshape(-1).astype(complex)
        yield name, x0, span, np.array([0.0]), model.M[None], model.c[None]


def run(fn, x0, span, node_t, Mn, cn, repeats=3):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(x0.copy(), 0.0, span, node_t, Mn, cn, 1e-9, 1e-12, 0.0, np.inf, 10**9)
        best = min(best, time.perf_counter() - t0)
    return out, best


def main():
    if not kernels.HAS_NUMBA:
        print("numba not importable; only the numpy path is available")
        return
    print(f"numba path active: {kernels.USE_NUMBA} "
          f"(set NHTHERMO_DISABLE_NUMBA=1 to force the numpy fallback)\n")
    header = f"{'case':26s} {'steps':>8s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s} {'agree':>9s}"
    print(header)
    print("-" * len(header))
    for name, x0, span, node_t, Mn, cn in cases():
        # warm the JIT once before timing
        kernels._integrate_window_numba(x0.copy(), 0.0, 1.0, node_t, Mn, cn,
                                        1e-9, 1e-12, 0.0, np.inf, 10**9)
        (xa, _, nsteps, _), ta = run(kernels._integrate_window_numba, x0, span, node_t, Mn, cn)
        (xb, _, _, _), tb = run(kernels.integrate_window_numpy, x0, span, node_t, Mn, cn, repeats=1)
        agree = float(np.linalg.norm(xa - xb))
        print(f"{name:26s} {nsteps:8d} {ta*1e3:9.1f}ms {tb*1e3:9.1f}ms {tb/ta:7.1f}x {agree:9.1e}")


if __name__ == "__main__":
    main()
