"""Time the compiled and numpy kernels side by side.

    python3 benchmarks/bench_kernels.py [--n 400] [--repeat 5]

Reports the best wall time per call and the cost per grid node (per
source-target pair for the potential sum).
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from dampwave import kernels


def _best(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _grid_arrays(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    shape = (2, n + 2, n + 2)
    up, uc = np.zeros(shape), np.zeros(shape)
    up[:, 1:-1, 1:-1] = rng.standard_normal((2, n, n))
    uc[:, 1:-1, 1:-1] = rng.standard_normal((2, n, n))
    V = np.zeros((n + 2, n + 2))
    V[1:-1, 1:-1] = rng.uniform(0.0, 4.0, (n, n))
    return up, uc, V


def bench_grid(mod, n: int, repeat: int) -> dict[str, float]:
    up, uc, V = _grid_arrays(n)
    dt, dx = 0.01, 0.1
    inv = 1.0 / (1.0 + 0.5 * dt * V)
    un, v, out = np.zeros_like(up), np.zeros_like(up), np.zeros_like(up)
    lo, hi = 1, n + 1
    step = _best(lambda: mod.leapfrog_step(up, uc, un, V, inv, v, 0.36, 0.64, dx, dt,
                                           lo, hi, lo, hi), repeat)
    elastic = _best(lambda: mod.elastic_apply(uc, out, 0.36, 0.64, dx, lo, hi, lo, hi), repeat)
    return {"leapfrog_step": step / (n * n), "elastic_apply": elastic / (n * n)}


def bench_potential(mod, m: int, targets: int, repeat: int) -> float:
    dx = 0.05
    s = (np.arange(m) - m / 2 + 0.5) * dx
    SX, SY = np.meshgrid(s, s, indexing="ij")
    sx, sy = SX.ravel().copy(), SY.ravel().copy()
    rho = np.ascontiguousarray(np.random.default_rng(1).standard_normal((2, sx.size)))
    e = np.linspace(-2.0, 2.0, int(round(targets ** 0.5)))
    EX, EY = np.meshgrid(e, e, indexing="ij")
    ex, ey = EX.ravel().copy(), EY.ravel().copy()
    elapsed = _best(lambda: mod.potential_direct(sx, sy, rho, ex, ey, dx, 2 * dx), repeat)
    return elapsed / (sx.size * ex.size)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=400, help="grid side for the stencil kernels")
    parser.add_argument("--sources", type=int, default=40, help="source lattice side")
    parser.add_argument("--targets", type=int, default=1600, help="potential evaluation points")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    found = kernels.backends()
    print(f"default backend: {kernels.BACKEND}; available: {', '.join(sorted(found))}")
    rows = {}
    for name in sorted(found):
        mod = found[name]
        res = bench_grid(mod, args.n, args.repeat)
        res["potential_direct"] = bench_potential(mod, args.sources, args.targets, args.repeat)
        rows[name] = res

    names = sorted(rows)
    header = f"{'kernel':<18s}{'unit':<9s}" + "".join(f"{name:>10s}" for name in names)
    print(header + ("   speedup" if len(names) == 2 else ""))
    for kernel in ("leapfrog_step", "elastic_apply", "potential_direct"):
        unit = "ns/pair" if kernel == "potential_direct" else "ns/node"
        line = f"{kernel:<18s}{unit:<9s}" + "".join(f"{rows[name][kernel] * 1e9:>10.2f}"
                                                   for name in names)
        if len(names) == 2:
            line += f"{rows['pure'][kernel] / rows['ext'][kernel]:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
