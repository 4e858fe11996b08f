"""Kernel backend selection and thread fan-out.

The compiled extension ``_core`` is used when it imports; otherwise the
numpy module ``_fallback`` takes over.  Set ``MSCROWD_BACKEND=python`` to
force the fallback.
"""
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _fallback

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

if os.environ.get("MSCROWD_BACKEND", "").lower() == "python" or _core is None:
    BACKEND = "python"
    _impl = _fallback
else:
    BACKEND = "compiled"
    _impl = _core


def backend_module(name=None):
    """Return the kernel module for ``name`` ('compiled', 'python' or None for default)."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "compiled":
        if _core is None:
            raise RuntimeError("compiled kernels are not available")
        return _core
    raise ValueError(f"unknown backend {name!r}")


def _ranges(n, workers):
    if workers <= 1 or n < 2:
        return [(0, n)]
    chunk = math.ceil(n / workers)
    return [(a, min(n, a + chunk)) for a in range(0, n, chunk)]


def _fan_out(fn, n, workers):
    spans = _ranges(n, workers)
    if len(spans) == 1:
        fn(*spans[0])
        return
    with ThreadPoolExecutor(max_workers=len(spans)) as pool:
        for fut in [pool.submit(fn, a, b) for a, b in spans]:
            fut.result()


def _c(a, dtype=np.float64):
    return np.ascontiguousarray(a, dtype=dtype)


def build_buckets(sources, size):
    """Uniform spatial hash of ``sources`` with square buckets of edge ``size``."""
    sources = _c(sources).reshape(-1, 2)
    if len(sources) == 0:
        return dict(start=np.zeros(2, np.int64), items=np.zeros(0, np.int64),
                    x0=0.0, y0=0.0, size=size, nbx=1, nby=1)
    x0, y0 = sources.min(axis=0)
    x1, y1 = sources.max(axis=0)
    nbx = int(math.floor((x1 - x0) / size)) + 1
    nby = int(math.floor((y1 - y0) / size)) + 1
    bx = np.floor((sources[:, 0] - x0) / size).astype(np.int64)
    by = np.floor((sources[:, 1] - y0) / size).astype(np.int64)
    bid = by * nbx + bx
    items = np.argsort(bid, kind="stable").astype(np.int64)
    counts = np.bincount(bid, minlength=nbx * nby)
    start = np.zeros(nbx * nby + 1, np.int64)
    np.cumsum(counts, out=start[1:])
    return dict(start=start, items=items, x0=float(x0), y0=float(y0),
                size=float(size), nbx=nbx, nby=nby)


def micro_sum(targets, headings, sources, params, out=None, workers=1, backend=None):
    """Add the agent-sum interaction velocity at ``targets`` into ``out``."""
    impl = backend_module(backend)
    targets = _c(targets).reshape(-1, 2)
    headings = _c(headings).reshape(-1, 2)
    sources = _c(sources).reshape(-1, 2)
    if out is None:
        out = np.zeros_like(targets)
    if len(sources) == 0 or len(targets) == 0 or params.inert:
        return out
    # slight oversize keeps every source within r_max inside the 3x3 block
    b = build_buckets(sources, params.r_max * (1.0 + 1e-9))
    fr, fa, rr, ra, abar = params.as_tuple()

    def work(t0, t1):
        impl.micro_sum(targets, headings, sources, b["start"], b["items"],
                       b["x0"], b["y0"], b["size"], b["nbx"], b["nby"],
                       fr, fa, rr, ra, abar, out, t0, t1)

    _fan_out(work, len(targets), workers)
    return out


def macro_sum(targets, headings, cells, rho, grid, params, out=None, workers=1, backend=None):
    """Add the cell-quadrature interaction velocity at ``targets`` into ``out``.

    ``cells`` is an (n, 2) integer array of each target's containing cell.
    """
    impl = backend_module(backend)
    targets = _c(targets).reshape(-1, 2)
    headings = _c(headings).reshape(-1, 2)
    rho = _c(rho)
    if out is None:
        out = np.zeros_like(targets)
    if len(targets) == 0 or params.inert:
        return out
    ci = _c(cells[:, 0], np.int64)
    cj = _c(cells[:, 1], np.int64)
    reach = int(math.ceil(params.r_max / grid.h)) + 1
    fr, fa, rr, ra, abar = params.as_tuple()

    def work(t0, t1):
        impl.macro_sum(targets, headings, ci, cj, rho, grid.x0, grid.y0, grid.h,
                       reach, fr, fa, rr, ra, abar, out, t0, t1)

    _fan_out(work, len(targets), workers)
    return out


def cfl_excess(vel, rho, dt, h, backend=None):
    impl = backend_module(backend)
    return impl.cfl_excess(_c(vel[..., 0]), _c(vel[..., 1]), _c(rho), float(dt), float(h))


def push_forward(rho, vel, dt, h, free, exits, workers=1, backend=None):
    """Translate each cell by its velocity and redistribute onto the grid.

    Returns ``(new_rho, outflow)`` where ``outflow`` is the density each
    source cell lost through doors.  Callers must enforce the CFL bound.
    """
    impl = backend_module(backend)
    rho = _c(rho)
    vx = _c(vel[..., 0])
    vy = _c(vel[..., 1])
    free = _c(free, np.uint8)
    exits = _c(exits, np.uint8)
    ny = rho.shape[0]
    retained = np.zeros_like(rho)
    outflow = np.zeros_like(rho)
    new = np.zeros_like(rho)
    _fan_out(lambda a, b: impl.push_sources(rho, vx, vy, dt, h, free, exits,
                                            retained, outflow, a, b), ny, workers)
    _fan_out(lambda a, b: impl.push_gather(rho, vx, vy, dt, h, free, retained,
                                           new, a, b), ny, workers)
    return new, outflow
