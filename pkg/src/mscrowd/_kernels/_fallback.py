"""Numpy versions of the compiled kernels in ``_core.pyx``.

Signatures and per-target accumulation order mirror the compiled module,
so both backends agree to the last bit on IEEE-754 hardware without FMA
contraction.  Loops run over sources (or stencil offsets) and vectorise
over targets.
"""
import numpy as np

COINCIDENT = 1e-9  # same meaning as in _core.pyx


def _radial(s, fr, fa, rr, ra):
    f = np.zeros_like(s)
    rep = s <= rr
    f[rep] = f[rep] - fr / s[rep]
    att = s <= ra
    f[att] = f[att] + fa * s[att]
    return f


def _in_view(dx, dy, hx, hy, abar):
    if abar >= np.pi:
        return np.ones(dx.shape, dtype=bool)
    alpha = np.arctan2(hx * dy - hy * dx, hx * dx + hy * dy)
    return np.abs(alpha) <= abar


def micro_sum(targets, headings, sources, bucket_start, bucket_items, bx0, by0,
              bsize, nbx, nby, fr, fa, rr, ra, abar, out, t0, t1):
    if len(sources) == 0 or t1 <= t0:
        return
    tx = targets[t0:t1, 0]
    ty = targets[t0:t1, 1]
    hx = headings[t0:t1, 0]
    hy = headings[t0:t1, 1]
    rmax = max(rr, ra)
    ax = np.zeros(t1 - t0)
    ay = np.zeros(t1 - t0)
    # brute force over sources in index order; the bucket tables only
    # exist to prune, and pruned sources contribute nothing
    for k in range(len(sources)):
        dx = sources[k, 0] - tx
        dy = sources[k, 1] - ty
        s = np.sqrt(dx * dx + dy * dy)
        m = (s > COINCIDENT * rmax) & (s <= rmax)
        if not m.any():
            continue
        m[m] = _in_view(dx[m], dy[m], hx[m], hy[m], abar)
        if not m.any():
            continue
        c = _radial(s[m], fr, fa, rr, ra) / s[m]
        ax[m] = ax[m] + c * dx[m]
        ay[m] = ay[m] + c * dy[m]
    out[t0:t1, 0] = out[t0:t1, 0] + ax
    out[t0:t1, 1] = out[t0:t1, 1] + ay


def macro_sum(targets, headings, ci, cj, rho, x0, y0, h, reach, fr, fa, rr, ra,
              abar, out, t0, t1):
    ny, nx = rho.shape
    tx = targets[t0:t1, 0]
    ty = targets[t0:t1, 1]
    hx = headings[t0:t1, 0]
    hy = headings[t0:t1, 1]
    ci = np.asarray(ci[t0:t1])
    cj = np.asarray(cj[t0:t1])
    rmax = max(rr, ra)
    ax = np.zeros(t1 - t0)
    ay = np.zeros(t1 - t0)
    for dj in range(-reach, reach + 1):
        j = cj + dj
        jok = (j >= 0) & (j < ny)
        for di in range(-reach, reach + 1):
            if di == 0 and dj == 0:
                continue
            i = ci + di
            m = jok & (i >= 0) & (i < nx)
            if not m.any():
                continue
            r = np.zeros(t1 - t0)
            r[m] = rho[j[m], i[m]]
            m &= r != 0.0
            if not m.any():
                continue
            dx = (x0 + (i[m] + 0.5) * h) - tx[m]
            dy = (y0 + (j[m] + 0.5) * h) - ty[m]
            s = np.sqrt(dx * dx + dy * dy)
            keep = (s > COINCIDENT * rmax) & (s <= rmax)
            keep &= _in_view(dx, dy, hx[m], hy[m], abar)
            if not keep.any():
                continue
            idx = np.flatnonzero(m)[keep]
            dx, dy, s = dx[keep], dy[keep], s[keep]
            f = _radial(s, fr, fa, rr, ra)
            w = r[idx] * h * h
            c = f * w / s
            ax[idx] = ax[idx] + c * dx
            ay[idx] = ay[idx] + c * dy
    out[t0:t1, 0] = out[t0:t1, 0] + ax
    out[t0:t1, 1] = out[t0:t1, 1] + ay


def _frac(v, dt, h):
    return np.clip(v * dt / h, -1.0, 1.0)


def _axis_weight(a, d):
    if d == 0:
        return 1.0 - np.abs(a)
    if d > 0:
        return np.where(a > 0.0, a, 0.0)
    return np.where(a < 0.0, -a, 0.0)


def cfl_excess(vx, vy, rho, dt, h):
    m = rho != 0.0
    if not m.any():
        return 0.0
    return float(max(np.abs(vx[m] * dt / h).max(), np.abs(vy[m] * dt / h).max()))


def _dest_kind(di, dj, free, exits):
    """Destination class for every source cell at offset (di, dj).

    0 regular, 1 leaves through a door, 2 blocked (mass stays in source).
    """
    ny, nx = free.shape
    jj, ii = np.mgrid[0:ny, 0:nx]
    ti, tj = ii + di, jj + dj
    xout = (ti < 0) | (ti >= nx)
    yout = (tj < 0) | (tj >= ny)
    kind = np.full((ny, nx), 2, dtype=np.int8)

    inside = ~xout & ~yout
    kind[inside] = np.where(free[tj[inside], ti[inside]] != 0, 0, 2)

    sx = 1 if di > 0 else 0
    sy = 3 if dj > 0 else 2
    m = xout & ~yout
    kind[m] = np.where(exits[tj[m], ii[m], sx] != 0, 1, 2)
    m = yout & ~xout
    kind[m] = np.where(exits[jj[m], ti[m], sy] != 0, 1, 2)
    m = xout & yout
    kind[m] = np.where((exits[jj[m], ii[m], sx] != 0) | (exits[jj[m], ii[m], sy] != 0), 1, 2)
    return kind


def push_sources(rho, vx, vy, dt, h, free, exits, retained, outflow, r0, r1):
    ax = _frac(vx[r0:r1], dt, h)
    ay = _frac(vy[r0:r1], dt, h)
    keep = np.zeros(ax.shape)
    gone = np.zeros(ax.shape)
    live = rho[r0:r1] != 0.0
    for dj in (-1, 0, 1):
        wy = _axis_weight(ay, dj)
        for di in (-1, 0, 1):
            w = _axis_weight(ax, di) * wy
            w = np.where(live, w, 0.0)
            kind = _dest_kind(di, dj, free, exits)[r0:r1]
            gone = gone + np.where(kind == 1, w, 0.0)
            keep = keep + np.where(kind == 2, w, 0.0)
    retained[r0:r1] = keep
    outflow[r0:r1] = rho[r0:r1] * gone


def _shift(a, di, dj):
    """out[j, i] = a[j - dj, i - di], zero where the source is off-grid."""
    ny, nx = a.shape
    out = np.zeros_like(a)
    ys = slice(max(0, -dj), ny - max(0, dj))
    yd = slice(max(0, dj), ny - max(0, -dj))
    xs = slice(max(0, -di), nx - max(0, di))
    xd = slice(max(0, di), nx - max(0, -di))
    out[yd, xd] = a[ys, xs]
    return out


def push_gather(rho, vx, vy, dt, h, free, retained, out, r0, r1):
    ax = _frac(vx, dt, h)
    ay = _frac(vy, dt, h)
    acc = np.zeros(rho.shape)
    for dj in (-1, 0, 1):
        wy = _axis_weight(ay, dj)
        for di in (-1, 0, 1):
            w = _axis_weight(ax, di) * wy
            acc = acc + _shift(rho * w, di, dj)
    acc = acc + rho * retained
    acc[free == 0] = 0.0
    out[r0:r1] = acc[r0:r1]
