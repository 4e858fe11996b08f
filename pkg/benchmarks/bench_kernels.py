"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--agents 400] [--n 80]

Both backends get identical inputs; the script also checks that their
outputs agree bit for bit before reporting timings.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from mscrowd import _kernels
from mscrowd.geometry import Domain, Grid
from mscrowd.interaction import KernelParams


def _inputs(n_agents: int, n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    grid = Grid(0.0, 0.0, 0.1, n, n)
    dom = Domain(grid)
    side = n * grid.h
    pts = rng.uniform(0.05, side - 0.05, (n_agents, 2))
    ang = rng.uniform(0, 2 * np.pi, n_agents)
    heads = np.column_stack([np.cos(ang), np.sin(ang)])
    rho = rng.random(grid.shape) * (rng.random(grid.shape) < 0.6)
    vel = dom.project_cells(rng.uniform(-1, 1, grid.shape + (2,)))
    vmax = np.hypot(vel[..., 0], vel[..., 1]).max()
    dt = 0.8 * grid.h / vmax
    cells = grid.locate(pts)
    params = KernelParams(0.1, 0.2, 0.4, 0.4, 2.0)
    free = np.ones(grid.shape, np.uint8)
    exits = np.zeros(grid.shape + (4,), np.uint8)  # per-face door flags
    return dict(grid=grid, pts=pts, heads=heads, rho=rho, vel=vel, dt=dt, cells=cells,
                params=params, free=free, exits=exits)


def _cases(d):
    g = d["grid"]
    return {
        "micro_sum": lambda b: _kernels.micro_sum(d["pts"], d["heads"], d["pts"], d["params"], backend=b),
        "macro_sum": lambda b: _kernels.macro_sum(d["pts"], d["heads"], d["cells"], d["rho"], g, d["params"],
                                                  backend=b),
        "push_forward": lambda b: _kernels.push_forward(d["rho"], d["vel"], d["dt"], g.h, d["free"], d["exits"],
                                                        backend=b)[0],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--agents", type=int, default=400)
    ap.add_argument("--n", type=int, default=80, help="grid cells per side")
    args = ap.parse_args(argv)
    if _kernels._core is None:
        raise SystemExit("compiled kernels are not built; nothing to compare")
    d = _inputs(args.agents, args.n)
    print(f"{args.agents} agents, {args.n}x{args.n} grid, best of {args.repeat}")
    print(f"{'kernel':<14}{'compiled [ms]':>15}{'python [ms]':>15}{'speed-up':>10}  identical")
    for name, fn in _cases(d).items():
        same = np.array_equal(fn("compiled"), fn("python"))
        tc = min(timeit.repeat(lambda: fn("compiled"), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fn("python"), number=1, repeat=args.repeat))
        print(f"{name:<14}{tc * 1e3:>15.2f}{tp * 1e3:>15.2f}{tp / tc:>10.1f}  {same}")


if __name__ == "__main__":
    main()
