# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: interaction sums and cell push-forward.

Every function works on a half-open range of targets ``[t0, t1)`` and
releases the GIL, so the Python wrapper can fan ranges out to threads.
Per-target accumulation order is fixed, which keeps results independent
of how the range is split.
"""
from libc.math cimport sqrt, atan2, fabs, floor
from libc.stdlib cimport malloc, free, qsort

# pairs closer than this fraction of the interaction range count as the
# same point; layout round-off must not produce a 1/s blow-up
DEF COINCIDENT = 1e-9


cdef inline double _radial(double s, double fr, double fa, double rr, double ra) noexcept nogil:
    cdef double f = 0.0
    if s <= rr:
        f = f - fr / s
    if s <= ra:
        f = f + fa * s
    return f


DEF HALF_PI = 1.5707963267948966


cdef inline bint _in_view(double dx, double dy, double hx, double hy, double abar) noexcept nogil:
    cdef double alpha
    cdef double dot = hx * dx + hy * dy
    if abar >= 3.141592653589793:
        return 1
    # the sign of the dot product settles most pairs without atan2; the
    # shortcut agrees with the atan2 test exactly
    if dot > 0.0:
        if abar >= HALF_PI:
            return 1
    elif dot < 0.0:
        if abar <= HALF_PI:
            return 0
    else:
        # perpendicular: atan2 gives exactly +-HALF_PI
        return abar >= HALF_PI
    alpha = atan2(hx * dy - hy * dx, dot)
    return fabs(alpha) <= abar


cdef int _cmp_long(const void* a, const void* b) noexcept nogil:
    cdef long x = (<long*>a)[0]
    cdef long y = (<long*>b)[0]
    return (x > y) - (x < y)


def micro_sum(const double[:, ::1] targets, const double[:, ::1] headings,
              const double[:, ::1] sources, const long[::1] bucket_start,
              const long[::1] bucket_items, double bx0, double by0, double bsize,
              long nbx, long nby, double fr, double fa, double rr, double ra,
              double abar, double[:, ::1] out, long t0, long t1):
    """Accumulate the agent-sum interaction velocity for targets t0..t1."""
    cdef long nsrc = sources.shape[0]
    cdef long t, k, b, m, n, bi, bj, tbx, tby, ncand
    cdef double tx, ty, hx, hy, dx, dy, s, f, c, ax, ay
    cdef double rmax = rr if rr > ra else ra
    cdef double smin = COINCIDENT * rmax
    cdef long* cand
    if nsrc == 0 or t1 <= t0:
        return
    cand = <long*>malloc(nsrc * sizeof(long))
    if cand == NULL:
        raise MemoryError()
    with nogil:
        for t in range(t0, t1):
            tx = targets[t, 0]
            ty = targets[t, 1]
            hx = headings[t, 0]
            hy = headings[t, 1]
            tbx = <long>floor((tx - bx0) / bsize)
            tby = <long>floor((ty - by0) / bsize)
            ncand = 0
            for bj in range(tby - 1, tby + 2):
                if bj < 0 or bj >= nby:
                    continue
                for bi in range(tbx - 1, tbx + 2):
                    if bi < 0 or bi >= nbx:
                        continue
                    b = bj * nbx + bi
                    for m in range(bucket_start[b], bucket_start[b + 1]):
                        cand[ncand] = bucket_items[m]
                        ncand += 1
            if ncand > 1:
                qsort(cand, ncand, sizeof(long), _cmp_long)
            ax = 0.0
            ay = 0.0
            for n in range(ncand):
                k = cand[n]
                dx = sources[k, 0] - tx
                dy = sources[k, 1] - ty
                s = sqrt(dx * dx + dy * dy)
                if s <= smin or s > rmax:
                    continue
                if not _in_view(dx, dy, hx, hy, abar):
                    continue
                f = _radial(s, fr, fa, rr, ra)
                c = f / s
                ax = ax + c * dx
                ay = ay + c * dy
            out[t, 0] = out[t, 0] + ax
            out[t, 1] = out[t, 1] + ay
    free(cand)


def macro_sum(const double[:, ::1] targets, const double[:, ::1] headings,
              const long[::1] ci, const long[::1] cj, const double[:, ::1] rho,
              double x0, double y0, double h, long reach,
              double fr, double fa, double rr, double ra, double abar,
              double[:, ::1] out, long t0, long t1):
    """Midpoint-rule quadrature of the interaction integral over grid cells.

    ``ci, cj`` hold each target's containing cell (possibly outside the
    grid); that cell is skipped.  ``reach`` is the stencil half-width in
    cells.
    """
    cdef long ny = rho.shape[0]
    cdef long nx = rho.shape[1]
    cdef long t, i, j, di, dj
    cdef double tx, ty, hx, hy, dx, dy, s, f, c, w, r, ax, ay
    cdef double rmax = rr if rr > ra else ra
    cdef double smin = COINCIDENT * rmax
    # squared-distance reject, loose enough never to drop an in-range cell
    cdef double far2 = rmax * rmax * (1.0 + 1e-9)
    cdef double d2, half
    cdef long lo, hi, ilo, ihi
    with nogil:
        for t in range(t0, t1):
            tx = targets[t, 0]
            ty = targets[t, 1]
            hx = headings[t, 0]
            hy = headings[t, 1]
            ax = 0.0
            ay = 0.0
            for dj in range(-reach, reach + 1):
                j = cj[t] + dj
                if j < 0 or j >= ny:
                    continue
                # columns this row can reach inside the interaction disc,
                # padded by one cell; the distance test below stays exact
                dy = (y0 + (j + 0.5) * h) - ty
                if dy * dy > far2:
                    continue
                half = sqrt(far2 - dy * dy)
                ilo = <long>floor((tx - half - x0) / h - 0.5) - 1
                ihi = <long>floor((tx + half - x0) / h - 0.5) + 2
                lo = ci[t] - reach
                hi = ci[t] + reach
                if ilo > lo:
                    lo = ilo
                if ihi < hi:
                    hi = ihi
                if lo < 0:
                    lo = 0
                if hi > nx - 1:
                    hi = nx - 1
                for i in range(lo, hi + 1):
                    di = i - ci[t]
                    if di == 0 and dj == 0:
                        continue
                    r = rho[j, i]
                    if r == 0.0:
                        continue
                    dx = (x0 + (i + 0.5) * h) - tx
                    dy = (y0 + (j + 0.5) * h) - ty
                    d2 = dx * dx + dy * dy
                    if d2 > far2:
                        continue
                    s = sqrt(d2)
                    if s <= smin or s > rmax:
                        continue
                    if not _in_view(dx, dy, hx, hy, abar):
                        continue
                    f = _radial(s, fr, fa, rr, ra)
                    w = r * h * h
                    c = f * w / s
                    ax = ax + c * dx
                    ay = ay + c * dy
            out[t, 0] = out[t, 0] + ax
            out[t, 1] = out[t, 1] + ay


cdef inline double _frac(double v, double dt, double h) noexcept nogil:
    cdef double a = v * dt / h
    if a > 1.0:
        a = 1.0
    elif a < -1.0:
        a = -1.0
    return a


cdef inline double _axis_weight(double a, long d) noexcept nogil:
    # share of a translated cell that lands at offset d in {-1, 0, 1}
    if d == 0:
        return 1.0 - fabs(a)
    if d > 0:
        return a if a > 0.0 else 0.0
    return -a if a < 0.0 else 0.0


cdef inline int _dest_kind(long i, long j, long di, long dj, long nx, long ny,
                           const unsigned char[:, ::1] free,
                           const unsigned char[:, :, ::1] exits) noexcept nogil:
    # 0 = regular destination, 1 = leaves through a door, 2 = blocked
    cdef long ii = i + di
    cdef long jj = j + dj
    cdef bint xout = ii < 0 or ii >= nx
    cdef bint yout = jj < 0 or jj >= ny
    cdef int side
    if not xout and not yout:
        return 0 if free[jj, ii] else 2
    if xout and not yout:
        side = 1 if di > 0 else 0
        return 1 if exits[jj, i, side] else 2
    if yout and not xout:
        side = 3 if dj > 0 else 2
        return 1 if exits[j, ii, side] else 2
    if exits[j, i, 1 if di > 0 else 0] or exits[j, i, 3 if dj > 0 else 2]:
        return 1
    return 2


def cfl_excess(const double[:, ::1] vx, const double[:, ::1] vy,
               const double[:, ::1] rho, double dt, double h):
    """Largest |v| dt / h over cells carrying mass."""
    cdef long ny = rho.shape[0]
    cdef long nx = rho.shape[1]
    cdef long i, j
    cdef double a, worst = 0.0
    with nogil:
        for j in range(ny):
            for i in range(nx):
                if rho[j, i] == 0.0:
                    continue
                a = fabs(vx[j, i] * dt / h)
                if a > worst:
                    worst = a
                a = fabs(vy[j, i] * dt / h)
                if a > worst:
                    worst = a
    return worst


def push_sources(const double[:, ::1] rho, const double[:, ::1] vx,
                 const double[:, ::1] vy, double dt, double h,
                 const unsigned char[:, ::1] free,
                 const unsigned char[:, :, ::1] exits,
                 double[:, ::1] retained, double[:, ::1] outflow,
                 long r0, long r1):
    """Per source cell: fraction kept in place and density lost via doors."""
    cdef long ny = rho.shape[0]
    cdef long nx = rho.shape[1]
    cdef long i, j, di, dj
    cdef int kind
    cdef double ax, ay, w, keep, gone
    with nogil:
        for j in range(r0, r1):
            for i in range(nx):
                keep = 0.0
                gone = 0.0
                if rho[j, i] != 0.0:
                    ax = _frac(vx[j, i], dt, h)
                    ay = _frac(vy[j, i], dt, h)
                    for dj in range(-1, 2):
                        for di in range(-1, 2):
                            w = _axis_weight(ax, di) * _axis_weight(ay, dj)
                            if w == 0.0:
                                continue
                            kind = _dest_kind(i, j, di, dj, nx, ny, free, exits)
                            if kind == 1:
                                gone = gone + w
                            elif kind == 2:
                                keep = keep + w
                retained[j, i] = keep
                outflow[j, i] = rho[j, i] * gone


def push_gather(const double[:, ::1] rho, const double[:, ::1] vx,
                const double[:, ::1] vy, double dt, double h,
                const unsigned char[:, ::1] free,
                const double[:, ::1] retained, double[:, ::1] out,
                long r0, long r1):
    """Per destination cell: collect translated mass from the 3x3 sources."""
    cdef long ny = rho.shape[0]
    cdef long nx = rho.shape[1]
    cdef long i, j, si, sj, di, dj
    cdef double acc, w, ax, ay
    with nogil:
        for j in range(r0, r1):
            for i in range(nx):
                if not free[j, i]:
                    out[j, i] = 0.0
                    continue
                acc = 0.0
                for dj in range(-1, 2):
                    sj = j - dj
                    if sj < 0 or sj >= ny:
                        continue
                    for di in range(-1, 2):
                        si = i - di
                        if si < 0 or si >= nx:
                            continue
                        if rho[sj, si] == 0.0:
                            continue
                        ax = _frac(vx[sj, si], dt, h)
                        ay = _frac(vy[sj, si], dt, h)
                        w = _axis_weight(ax, di) * _axis_weight(ay, dj)
                        if w == 0.0:
                            continue
                        acc = acc + rho[sj, si] * w
                acc = acc + rho[j, i] * retained[j, i]
                out[j, i] = acc
