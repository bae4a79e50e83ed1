"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--sweeps 1500] [--n 64]
"""

import argparse
import time

import numpy as np

from laughlin_lab import kernels


def bench_metropolis(backend, n, sweeps, seed=7):
    rng = np.random.default_rng(seed)
    pts = np.ascontiguousarray(rng.standard_normal((n, 2)) * 5.0)
    qh_pos = np.zeros((0, 2))
    qh_mult = np.zeros(0)
    gauss = rng.standard_normal((sweeps, n, 2))
    unif = rng.random((sweeps, n))
    traj = np.empty((sweeps, n, 2))
    t0 = time.perf_counter()
    acc = backend.metropolis_sweeps(pts, 1.0, 3.0, qh_pos, qh_mult,
                                    np.sqrt(2.0), gauss, unif, traj)
    dt = time.perf_counter() - t0
    return dt, acc, traj


def bench_psor(backend, cells=220, tol=1e-10, seed=3):
    """Iterate to the same residual on both backends; the stable state of the
    toppling LCP is unique, so converged occupancies must agree."""
    src = np.zeros((cells, cells))
    src[cells // 2, cells // 2] = 4.0 / (0.02 ** 2)  # 4 charges, occupancy units
    u = np.zeros_like(src)
    t0 = time.perf_counter()
    sweeps = 0
    res = np.inf
    while res > tol and sweeps < 200_000:
        res = backend.psor_sweeps(u, src, 1.0, 1.9, 64)
        sweeps += 64
    dt = time.perf_counter() - t0
    pad = np.zeros((cells + 2, cells + 2))
    pad[1:-1, 1:-1] = u
    occ = src - u + 0.25 * (pad[:-2, 1:-1] + pad[2:, 1:-1]
                            + pad[1:-1, :-2] + pad[1:-1, 2:])
    return dt, sweeps, occ


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sweeps", type=int, default=1500)
    ap.add_argument("--n", type=int, default=64)
    args = ap.parse_args()

    backends = kernels.available_backends()
    print(f"selected backend: {kernels.BACKEND}")
    print(f"{'kernel':<12} {'backend':<8} {'time':>9}  result")
    rows = {}
    for name, mod in backends.items():
        dt, acc, traj = bench_metropolis(mod, args.n, args.sweeps)
        rows.setdefault("metropolis", {})[name] = (dt, traj)
        print(f"{'metropolis':<12} {name:<8} {dt:8.3f}s  accepted={acc}")
    for name, mod in backends.items():
        dt, sweeps, occ = bench_psor(mod)
        rows.setdefault("toppling", {})[name] = (dt, occ)
        print(f"{'toppling':<12} {name:<8} {dt:8.3f}s  sweeps={sweeps}")
    for kernel, entries in rows.items():
        if len(entries) == 2:
            slow = entries["python"][0]
            fast = entries["cython"][0]
            diff = float(np.max(np.abs(entries["python"][1] - entries["cython"][1])))
            print(f"{kernel}: cython speedup x{slow / fast:.1f}, "
                  f"max cross-backend deviation {diff:.2e}")


if __name__ == "__main__":
    main()
