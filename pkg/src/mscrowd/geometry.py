"""Rectangular domains on a uniform grid, with rectangular obstacles and doors.

Cells are half-open squares ``[x0 + i h, x0 + (i+1) h) x [y0 + j h, ...)``.
Arrays over the grid are indexed ``[j, i]`` (row = y).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# side indices used by the exit-face table
LEFT, RIGHT, DOWN, UP = 0, 1, 2, 3


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def area(self) -> float:
        return max(0.0, self.x1 - self.x0) * max(0.0, self.y1 - self.y0)

    def contains(self, x, y) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1

    def translated(self, dx: float, dy: float) -> "Rect":
        return Rect(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)


def rect_overlap_area(a: Rect, b: Rect) -> float:
    """Exact area of the intersection of two axis-aligned rectangles."""
    wx = min(a.x1, b.x1) - max(a.x0, b.x0)
    wy = min(a.y1, b.y1) - max(a.y0, b.y0)
    if wx <= 0.0 or wy <= 0.0:
        return 0.0
    return wx * wy


@dataclass(frozen=True)
class Grid:
    x0: float
    y0: float
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell per axis")

    @property
    def x1(self) -> float:
        return self.x0 + self.nx * self.h

    @property
    def y1(self) -> float:
        return self.y0 + self.ny * self.h

    @property
    def bounds(self) -> Rect:
        return Rect(self.x0, self.y0, self.x1, self.y1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def cell_rect(self, i: int, j: int) -> Rect:
        h = self.h
        return Rect(self.x0 + i * h, self.y0 + j * h, self.x0 + (i + 1) * h, self.y0 + (j + 1) * h)

    def centers(self) -> np.ndarray:
        """Cell centres as an array of shape (ny, nx, 2)."""
        xs = self.x0 + (np.arange(self.nx) + 0.5) * self.h
        ys = self.y0 + (np.arange(self.ny) + 0.5) * self.h
        cx, cy = np.meshgrid(xs, ys)
        return np.stack([cx, cy], axis=-1)

    def _axis_index(self, v, origin):
        # floor, then nudge so the half-open convention holds against the
        # float cell edges origin + i*h
        k = np.floor((v - origin) / self.h).astype(np.int64)
        k = np.where(origin + (k + 1) * self.h <= v, k + 1, k)
        k = np.where(origin + k * self.h > v, k - 1, k)
        return k

    def locate(self, points) -> np.ndarray:
        """Unbounded (i, j) cell indices for an (n, 2) array of points."""
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        i = self._axis_index(p[:, 0], self.x0)
        j = self._axis_index(p[:, 1], self.y0)
        return np.stack([i, j], axis=1)

    def is_nested_in(self, fine: "Grid") -> int:
        """Refinement factor r if ``fine`` subdivides this grid exactly, else 0."""
        r = self.h / fine.h
        ri = int(round(r))
        if ri < 1 or abs(r - ri) > 1e-9 * r:
            return 0
        if fine.nx != self.nx * ri or fine.ny != self.ny * ri:
            return 0
        if abs(fine.x0 - self.x0) > 1e-9 * self.h or abs(fine.y0 - self.y0) > 1e-9 * self.h:
            return 0
        return ri


def cell_index(x, grid: Grid):
    """Containing cell ``(i, j)`` of point ``x``, or ``None`` outside the grid."""
    i, j = (int(v) for v in grid.locate([x])[0])
    if 0 <= i < grid.nx and 0 <= j < grid.ny:
        return (i, j)
    return None


@dataclass(frozen=True)
class DoorSegment:
    """Axis-aligned segment with a preferred crossing direction.

    Doors on the outer boundary let mass and agents leave; interior doors
    only serve as counting lines for fluxes.
    """

    p0: tuple[float, float]
    p1: tuple[float, float]
    normal: tuple[float, float]

    def __post_init__(self):
        if tuple(self.p0) == tuple(self.p1):
            raise ValueError("door endpoints must differ")
        if self.p0[0] != self.p1[0] and self.p0[1] != self.p1[1]:
            raise ValueError("door segments must be axis-aligned")

    @property
    def vertical(self) -> bool:
        return self.p0[0] == self.p1[0]

    @property
    def line(self) -> float:
        return self.p0[0] if self.vertical else self.p0[1]

    @property
    def span(self) -> tuple[float, float]:
        a, b = (self.p0[1], self.p1[1]) if self.vertical else (self.p0[0], self.p1[0])
        return (min(a, b), max(a, b))

    @property
    def width(self) -> float:
        lo, hi = self.span
        return hi - lo

    def covers(self, q: float) -> bool:
        lo, hi = self.span
        return lo <= q <= hi

    def crossings(self, before: np.ndarray, after: np.ndarray) -> tuple[int, int]:
        """Count segments ``before[k] -> after[k]`` crossing the door, per direction.

        Returns ``(along_normal, against_normal)``.
        """
        before = np.asarray(before, float).reshape(-1, 2)
        after = np.asarray(after, float).reshape(-1, 2)
        if len(before) == 0:
            return (0, 0)
        a = 0 if self.vertical else 1
        b = 1 - a
        c = self.line
        s0 = before[:, a] - c
        s1 = after[:, a] - c
        # half-open sides: a point exactly on the line counts as the + side
        side0 = s0 >= 0
        side1 = s1 >= 0
        moved = side0 != side1
        if not moved.any():
            return (0, 0)
        denom = np.where(s1 - s0 == 0, 1.0, s1 - s0)
        tcross = -s0 / denom
        q = before[:, b] + tcross * (after[:, b] - before[:, b])
        lo, hi = self.span
        hit = moved & (q >= lo) & (q <= hi)
        n = self.normal[a]
        forward = hit & ((side1 & (n > 0)) | (~side1 & (n < 0)))
        return (int(forward.sum()), int((hit & ~forward).sum()))


def project_admissible(v, x, obstacles, walls: Rect, doors=(), eps: float = 1e-2):
    """Drop the velocity component pointing into any boundary within ``eps`` of ``x``.

    ``walls`` is the outer domain box; its boundary is solid except where a
    door lies on it.  Obstacle outward normals point into free space.
    """
    vx, vy = float(v[0]), float(v[1])
    px, py = float(x[0]), float(x[1])
    normals = []
    for r in obstacles:
        if r.y0 <= py <= r.y1:
            if 0.0 <= r.x0 - px <= eps:
                normals.append((-1.0, 0.0))
            if 0.0 <= px - r.x1 <= eps:
                normals.append((1.0, 0.0))
        if r.x0 <= px <= r.x1:
            if 0.0 <= r.y0 - py <= eps:
                normals.append((0.0, -1.0))
            if 0.0 <= py - r.y1 <= eps:
                normals.append((0.0, 1.0))

    def door_at(vertical, line, q):
        return any(d.vertical == vertical and d.line == line and d.covers(q) for d in doors)

    if px - walls.x0 <= eps and not door_at(True, walls.x0, py):
        normals.append((1.0, 0.0))
    if walls.x1 - px <= eps and not door_at(True, walls.x1, py):
        normals.append((-1.0, 0.0))
    if py - walls.y0 <= eps and not door_at(False, walls.y0, px):
        normals.append((0.0, 1.0))
    if walls.y1 - py <= eps and not door_at(False, walls.y1, px):
        normals.append((0.0, -1.0))

    for nx_, ny_ in normals:
        dot = vx * nx_ + vy * ny_
        if dot < 0.0:
            vx -= dot * nx_
            vy -= dot * ny_
    return np.array([vx, vy])


@dataclass(frozen=True)
class Domain:
    """Grid plus solid obstacles and doors; the outer box is walled."""

    grid: Grid
    obstacles: tuple[Rect, ...] = ()
    doors: tuple[DoorSegment, ...] = ()
    eps_wall: float | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def eps(self) -> float:
        return self.grid.h / 10.0 if self.eps_wall is None else self.eps_wall

    @property
    def box(self) -> Rect:
        return self.grid.bounds

    def is_exit(self, door: DoorSegment) -> bool:
        b = self.box
        if door.vertical:
            return door.line in (b.x0, b.x1)
        return door.line in (b.y0, b.y1)

    @property
    def exit_doors(self) -> tuple[DoorSegment, ...]:
        return tuple(d for d in self.doors if self.is_exit(d))

    def in_obstacle(self, x, y) -> bool:
        return any(r.contains(x, y) for r in self.obstacles)

    def is_free(self, x, y) -> bool:
        return self.box.contains(x, y) and not self.in_obstacle(x, y)

    def free_mask(self) -> np.ndarray:
        """True for cells whose centre lies outside every obstacle."""
        if "free" not in self._cache:
            c = self.grid.centers()
            free = np.ones(self.grid.shape, dtype=bool)
            for r in self.obstacles:
                inside = ((c[..., 0] >= r.x0) & (c[..., 0] < r.x1)
                          & (c[..., 1] >= r.y0) & (c[..., 1] < r.y1))
                free &= ~inside
            self._cache["free"] = free
        return self._cache["free"]

    def exit_faces(self) -> np.ndarray:
        """(ny, nx, 4) flags: boundary face of the cell lies on an exit door."""
        if "exits" not in self._cache:
            g = self.grid
            ex = np.zeros(g.shape + (4,), dtype=bool)
            c = g.centers()
            for d in self.exit_doors:
                if d.vertical:
                    side, col = (LEFT, 0) if d.line == g.x0 else (RIGHT, g.nx - 1)
                    lo, hi = d.span
                    ys = c[:, col, 1]
                    ex[:, col, side] |= (ys >= lo) & (ys <= hi)
                else:
                    side, row = (DOWN, 0) if d.line == g.y0 else (UP, g.ny - 1)
                    lo, hi = d.span
                    xs = c[row, :, 0]
                    ex[row, :, side] |= (xs >= lo) & (xs <= hi)
            self._cache["exits"] = ex
        return self._cache["exits"]

    def project(self, v, x):
        return project_admissible(v, x, self.obstacles, self.box, self.exit_doors, self.eps)

    def project_many(self, vel: np.ndarray, pts: np.ndarray) -> np.ndarray:
        out = np.array(vel, dtype=float, copy=True)
        for k in range(len(pts)):
            out[k] = self.project(out[k], pts[k])
        return out

    def project_cells(self, vel: np.ndarray) -> np.ndarray:
        """Cell-level admissibility: no velocity component toward a solid face.

        A face is solid when the neighbour across it is an obstacle cell, or
        when it lies on the outer wall away from any door.
        """
        free = self.free_mask()
        ex = self.exit_faces()
        ny, nx = free.shape
        solid_r = np.ones((ny, nx), bool)
        solid_r[:, :-1] = ~free[:, 1:]
        solid_r[:, -1] = ~ex[:, -1, RIGHT]
        solid_l = np.ones((ny, nx), bool)
        solid_l[:, 1:] = ~free[:, :-1]
        solid_l[:, 0] = ~ex[:, 0, LEFT]
        solid_u = np.ones((ny, nx), bool)
        solid_u[:-1, :] = ~free[1:, :]
        solid_u[-1, :] = ~ex[-1, :, UP]
        solid_d = np.ones((ny, nx), bool)
        solid_d[1:, :] = ~free[:-1, :]
        solid_d[0, :] = ~ex[0, :, DOWN]
        out = np.array(vel, dtype=float, copy=True)
        vx, vy = out[..., 0], out[..., 1]
        vx[(vx > 0) & solid_r] = 0.0
        vx[(vx < 0) & solid_l] = 0.0
        vy[(vy > 0) & solid_u] = 0.0
        vy[(vy < 0) & solid_d] = 0.0
        out[~free] = 0.0
        return out

    def _sweep(self, p, d, axis):
        """Move ``p`` by ``d`` along ``axis``; stop short of solid faces.

        Returns (new coordinate, exited).
        """
        c0 = p[axis]
        q = p[1 - axis]
        c1 = c0 + d
        margin = self.eps / 2.0
        if d == 0.0:
            return c0, False
        stop = c1
        for r in self.obstacles:
            lo_q, hi_q = (r.y0, r.y1) if axis == 0 else (r.x0, r.x1)
            lo_c, hi_c = (r.x0, r.x1) if axis == 0 else (r.y0, r.y1)
            if not (lo_q < q < hi_q):
                continue
            if d > 0 and c0 <= lo_c < c1 + margin:
                stop = min(stop, max(c0, lo_c - margin))
            elif d < 0 and c1 - margin < hi_c <= c0:
                stop = max(stop, min(c0, hi_c + margin))
        b = self.box
        lo_w, hi_w = (b.x0, b.x1) if axis == 0 else (b.y0, b.y1)
        vertical = axis == 0
        if d > 0 and stop >= hi_w:
            if any(dr.vertical == vertical and dr.line == hi_w and dr.covers(q) for dr in self.exit_doors):
                return stop, True
            stop = max(c0, hi_w - margin) if c0 < hi_w - margin else c0
        elif d < 0 and stop < lo_w + 0.0:
            if any(dr.vertical == vertical and dr.line == lo_w and dr.covers(q) for dr in self.exit_doors):
                return stop, True
            stop = min(c0, lo_w + margin) if c0 > lo_w + margin else c0
        return stop, False

    def move(self, p, disp):
        """Displace a point, sliding along solid faces; flags door exits.

        Returns ``(new_point, exited)``.  The x component is applied first,
        then y, each with its own face check.
        """
        p = [float(p[0]), float(p[1])]
        x, out = self._sweep(p, float(disp[0]), 0)
        if out:
            return np.array([x, p[1] + float(disp[1])]), True
        p[0] = x
        y, out = self._sweep(p, float(disp[1]), 1)
        p[1] = y
        return np.array(p), out
