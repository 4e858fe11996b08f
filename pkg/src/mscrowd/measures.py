"""Agent (atomic) and grid-density (continuous) masses and their blend."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .geometry import Grid, Rect, rect_overlap_area

log = logging.getLogger(__name__)

FOLLOWER, LEADER = "follower", "leader"


class InvalidScaling(ValueError):
    pass


@dataclass(frozen=True)
class MicroState:
    positions: np.ndarray  # (N, 2)
    ids: np.ndarray  # (N,) int, stable across steps
    leader: np.ndarray  # (N,) bool

    @classmethod
    def from_points(cls, points, leaders=()):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        lead = np.zeros(len(pts), dtype=bool)
        lead[list(leaders)] = True
        return cls(pts.copy(), np.arange(len(pts)), lead)

    @property
    def n(self) -> int:
        return len(self.positions)

    def roles(self):
        return [LEADER if f else FOLLOWER for f in self.leader]

    def followers(self) -> np.ndarray:
        return self.positions[~self.leader]

    def moved(self, positions, keep=None) -> "MicroState":
        if keep is None:
            return replace(self, positions=np.asarray(positions, float))
        return MicroState(np.asarray(positions, float)[keep], self.ids[keep], self.leader[keep])

    def count_in(self, region: Rect | None) -> int:
        if region is None:
            return self.n
        p = self.positions
        inside = (p[:, 0] >= region.x0) & (p[:, 0] < region.x1) & (p[:, 1] >= region.y0) & (p[:, 1] < region.y1)
        return int(inside.sum())


@dataclass(frozen=True)
class MacroDensity:
    grid: Grid
    rho: np.ndarray  # (ny, nx), pedestrians per unit area in the scaled units

    def total_mass(self) -> float:
        return float(self.rho.sum() * self.grid.cell_area)

    def cell_masses(self) -> np.ndarray:
        return self.rho * self.grid.cell_area

    def overlap_weights(self, region: Rect | None) -> np.ndarray:
        """Area of each cell inside ``region`` (cell area when region is None)."""
        g = self.grid
        if region is None:
            return np.full(g.shape, g.cell_area)
        xs = g.x0 + np.arange(g.nx + 1) * g.h
        ys = g.y0 + np.arange(g.ny + 1) * g.h
        wx = np.clip(np.minimum(xs[1:], region.x1) - np.maximum(xs[:-1], region.x0), 0.0, None)
        wy = np.clip(np.minimum(ys[1:], region.y1) - np.maximum(ys[:-1], region.y0), 0.0, None)
        return np.outer(wy, wx)

    def mass_in(self, region: Rect | None) -> float:
        if region is None:
            return self.total_mass()
        return float((self.rho * self.overlap_weights(region)).sum())


@dataclass(frozen=True)
class CrowdMeasure:
    """Blend theta * agents + (1 - theta) * lam * density of one population."""

    micro: MicroState
    macro: MacroDensity
    theta: float
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if not self.lam > 0:
            raise InvalidScaling(f"lambda must be positive, got {self.lam}")


def compute_lambda(n_agents, macro_total) -> float:
    if not n_agents > 0 or not macro_total > 0:
        raise InvalidScaling(f"need positive agent count and macro mass, got {n_agents}, {macro_total}")
    return n_agents / macro_total


def measure_of(cm: CrowdMeasure, region: Rect | None = None) -> float:
    return cm.theta * cm.micro.count_in(region) + (1.0 - cm.theta) * cm.lam * cm.macro.mass_in(region)


def init_density_from_micro(points, xi, lam, grid: Grid, free=None) -> MacroDensity:
    """Local average of agent counts over discs of radius ``xi`` at cell centres.

    ``rho_i = #{agents within xi of x_i} / (lam * pi * xi^2)``; cells not
    marked in ``free`` are zero.
    """
    if not xi > 0:
        raise ValueError("xi must be positive")
    if not lam > 0:
        raise InvalidScaling("lambda must be positive")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    counts = np.zeros(grid.shape)
    if len(pts):
        c = grid.centers()
        reach = int(math.ceil(xi / grid.h)) + 1
        cells = grid.locate(pts)
        for (x, y), (ci, cj) in zip(pts, cells):
            j0, j1 = max(0, cj - reach), min(grid.ny, cj + reach + 1)
            i0, i1 = max(0, ci - reach), min(grid.nx, ci + reach + 1)
            if j0 >= j1 or i0 >= i1:
                continue
            block = c[j0:j1, i0:i1]
            d2 = (block[..., 0] - x) ** 2 + (block[..., 1] - y) ** 2
            counts[j0:j1, i0:i1] += d2 <= xi * xi
    rho = counts / (lam * math.pi * xi * xi)
    if free is not None:
        rho[~np.asarray(free, bool)] = 0.0
    return MacroDensity(grid, rho)


def _scaling_error(points, xi, lam, grid, free):
    n = len(points)
    m = init_density_from_micro(points, xi, lam, grid, free).total_mass()
    return (lam * m - n) / n


def tune_xi(points, lam, grid: Grid, free=None, tol=0.05, max_iter=50):
    """Pick an averaging radius so that ``lam * M0`` matches the agent count.

    Starts at 1.5 h.  If that misses, bisects on the sign of the scaling
    error between a bracketing pair of radii; the error is a step function
    of ``xi`` on lattice layouts, so a scan over [h, 4h] backs the bisection
    up.  Returns ``(xi, relative_error)``; raises if nothing meets ``tol``.
    """
    n = len(points)
    if n == 0:
        return 1.5 * grid.h, 0.0
    h = grid.h
    xi = 1.5 * h
    err = _scaling_error(points, xi, lam, grid, free)
    if abs(err) <= tol:
        return xi, err
    best = (abs(err), xi, err)
    # widen a bracket around 1.5 h in both directions until the sign flips
    lo, hi = xi, xi
    e_lo = e_hi = err
    step = 1.25
    for _ in range(12):
        if e_lo * e_hi < 0:
            break
        lo /= step
        hi *= step
        e_lo = _scaling_error(points, lo, lam, grid, free)
        e_hi = _scaling_error(points, hi, lam, grid, free)
        for e, r in ((e_lo, lo), (e_hi, hi)):
            if abs(e) < best[0]:
                best = (abs(e), r, e)
        if best[0] <= tol:
            return best[1], best[2]
    if e_lo * e_hi < 0:
        a, b, ea = lo, hi, e_lo
        if err * ea > 0:
            a, ea = xi, err
        elif err * e_hi > 0:
            b = xi
        for _ in range(max_iter):
            mid = 0.5 * (a + b)
            em = _scaling_error(points, mid, lam, grid, free)
            if abs(em) < best[0]:
                best = (abs(em), mid, em)
            if abs(em) <= tol:
                return mid, em
            if em * ea > 0:
                a, ea = mid, em
            else:
                b = mid
    for r in np.linspace(h, 4 * h, 121):
        e = _scaling_error(points, r, lam, grid, free)
        if abs(e) < best[0]:
            best = (abs(e), float(r), e)
        if abs(e) <= tol:
            log.debug("xi bisection stalled at a jump; scan picked %.6g", r)
            return float(r), e
    raise InvalidScaling(
        f"could not match lambda*M0 to N within {tol:.0%}; best xi={best[1]:.4g} error={best[2]:+.3%}")


# ---------------------------------------------------------------------------
# snapshot files


def _fmt(v) -> str:
    return format(float(v), ".9g")


def write_density(path, density: MacroDensity, time: float = 0.0):
    g = density.grid
    lines = [" ".join([str(g.nx), str(g.ny), _fmt(g.h), _fmt(g.x0), _fmt(g.y0), _fmt(time)])]
    for row in density.rho:
        lines.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _read_header(line):
    parts = line.split()
    if len(parts) != 6:
        raise ValueError("snapshot header must read: nx ny h x0 y0 time")
    nx, ny = int(parts[0]), int(parts[1])
    h, x0, y0, t = (float(p) for p in parts[2:])
    return Grid(x0, y0, h, nx, ny), t


def read_density(path) -> tuple[MacroDensity, float]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    grid, t = _read_header(lines[0])
    rho = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    if rho.shape != grid.shape:
        raise ValueError(f"expected {grid.ny} rows of {grid.nx} values, got {rho.shape}")
    return MacroDensity(grid, rho), t


def write_vector_field(path, grid: Grid, vel: np.ndarray, time: float = 0.0):
    """Same header as density snapshots, then one ``vx vy`` line per cell, row-major."""
    lines = [" ".join([str(grid.nx), str(grid.ny), _fmt(grid.h), _fmt(grid.x0), _fmt(grid.y0), _fmt(time)])]
    for v in np.asarray(vel, float).reshape(-1, 2):
        lines.append(f"{_fmt(v[0])} {_fmt(v[1])}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_vector_field(path) -> tuple[Grid, np.ndarray]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    grid, _ = _read_header(lines[0])
    vals = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    if vals.shape != (grid.nx * grid.ny, 2):
        raise ValueError("vector field needs one 'vx vy' line per cell")
    return grid, vals.reshape(grid.ny, grid.nx, 2)


def write_agents(path, micro: MicroState):
    lines = [f"{int(i)} {_fmt(p[0])} {_fmt(p[1])} {role}"
             for i, p, role in zip(micro.ids, micro.positions, micro.roles())]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_agents(path) -> MicroState:
    ids, pts, lead = [], [], []
    for ln in Path(path).read_text().splitlines():
        if not ln.strip():
            continue
        i, x, y, role = ln.split()
        if role not in (FOLLOWER, LEADER):
            raise ValueError(f"unknown role {role!r}")
        ids.append(int(i))
        pts.append((float(x), float(y)))
        lead.append(role == LEADER)
    return MicroState(np.array(pts, float).reshape(-1, 2), np.array(ids, dtype=np.int64), np.array(lead, bool))
