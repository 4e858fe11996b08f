"""Observables: centre of mass, moments of inertia, door flux, outflow time,
mass budgets and grid-error metrics, plus the per-step CSV record."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Rect
from .measures import CrowdMeasure, MacroDensity, measure_of

SCALES = ("m", "M", "mu")


class ZeroMass(ValueError):
    """The requested quantity is undefined for a region without mass."""


def _inside(p, region: Rect | None):
    if region is None:
        return np.ones(len(p), dtype=bool)
    return (p[:, 0] >= region.x0) & (p[:, 0] < region.x1) & (p[:, 1] >= region.y0) & (p[:, 1] < region.y1)


def _weighted_points(cm: CrowdMeasure, region: Rect | None, scale: str):
    """Point masses representing one scale inside ``region``: (points, weights)."""
    pts_m = cm.micro.positions[_inside(cm.micro.positions, region)]
    w_m = np.ones(len(pts_m))
    d = cm.macro
    wM = (d.rho * d.overlap_weights(region)).ravel()
    pts_M = d.grid.centers().reshape(-1, 2)
    keep = wM != 0
    pts_M, wM = pts_M[keep], wM[keep]
    if scale == "m":
        return pts_m, w_m
    if scale == "M":
        return pts_M, wM
    if scale == "mu":
        return (np.concatenate([pts_m, pts_M]),
                np.concatenate([cm.theta * w_m, (1.0 - cm.theta) * cm.lam * wM]))
    raise ValueError(f"unknown scale {scale!r}")


def center_of_mass(cm: CrowdMeasure, region: Rect | None = None, scale: str = "mu") -> np.ndarray:
    pts, w = _weighted_points(cm, region, scale)
    total = w.sum()
    if not total > 0:
        raise ZeroMass("centre of mass of an empty measure is undefined")
    return np.array([(w * pts[:, 0]).sum() / total, (w * pts[:, 1]).sum() / total])


def moments(cm: CrowdMeasure, region: Rect | None = None, center=None) -> dict[str, tuple[float, float, float]]:
    """(I1, I2, IG) for each scale.

    With ``center=None`` every scale is taken about its own centre of mass;
    otherwise all three use the given point.  A scale without mass reports
    NaN; if every scale is empty :class:`ZeroMass` is raised.
    """
    out = {}
    for s in SCALES:
        try:
            out[s] = scale_moments(cm, s, region, center)
        except ZeroMass:
            out[s] = (math.nan, math.nan, math.nan)
    if all(math.isnan(v[0]) for v in out.values()):
        raise ZeroMass("moments of an empty measure are undefined")
    return out


def scale_moments(cm: CrowdMeasure, scale: str, region: Rect | None = None, center=None):
    pts, w = _weighted_points(cm, region, scale)
    if center is None:
        if not w.sum() > 0:
            raise ZeroMass(f"scale {scale} has no mass")
        c = np.array([(w * pts[:, 0]).sum(), (w * pts[:, 1]).sum()]) / w.sum()
    else:
        c = np.asarray(center, float)
    i1 = float((w * (pts[:, 0] - c[0]) ** 2).sum())
    i2 = float((w * (pts[:, 1] - c[1]) ** 2).sum())
    return (i1, i2, i1 + i2)


@dataclass(frozen=True)
class FluxSample:
    total: float  # blended outgoing flux through the door
    macro: float  # (1 - theta) lam part
    micro: float  # theta part
    forward: int  # agents crossing along the door normal
    backward: int  # agents crossing against it


def door_flux(pre: CrowdMeasure, post: CrowdMeasure, door, probe: Rect, dt: float,
              attempted=None) -> FluxSample:
    """Outgoing flux of one population across the door bounding ``probe``.

    Mass leaving the probe between the two states, per unit time and with
    outgoing positive.  ``attempted`` are the pre-step agents' end points
    (aligned with ``pre.micro``) for the directional counts.
    """
    dM = pre.macro.mass_in(probe) - post.macro.mass_in(probe)
    dm = pre.micro.count_in(probe) - post.micro.count_in(probe)
    macro = (1.0 - pre.theta) * pre.lam * dM / dt
    micro = pre.theta * dm / dt
    fwd = back = 0
    if door is not None and attempted is not None:
        fwd, back = door.crossings(pre.micro.positions, attempted)
    return FluxSample(macro + micro, macro, micro, fwd, back)


def average_outflow_time(times, masses) -> float:
    """Trapezoidal ``(1/mu_0) * integral of mu_t dt`` of a sampled mass series."""
    t = np.asarray(times, float)
    m = np.asarray(masses, float)
    if len(m) == 0 or not m[0] > 0:
        raise ZeroMass("average outflow time needs a positive initial mass")
    if len(t) < 2:
        return 0.0
    return float(np.sum(0.5 * (m[1:] + m[:-1]) * np.diff(t)) / m[0])


def aggregate(density: MacroDensity, coarse) -> np.ndarray:
    """Cell masses of ``density`` summed onto a nested coarser grid."""
    r = coarse.is_nested_in(density.grid)
    if r is None:
        raise ValueError("grids are not nested")
    m = density.cell_masses()
    return m.reshape(coarse.ny, r, coarse.nx, r).sum(axis=(1, 3))


def l1_cell_error(reference: MacroDensity, approx: MacroDensity) -> float:
    """Sum over cells of the absolute mass difference on the approximation's grid."""
    if reference.grid == approx.grid:
        ref = reference.cell_masses()
    else:
        ref = aggregate(reference, approx.grid)
    return float(np.abs(ref - approx.cell_masses()).sum())


# ---------------------------------------------------------------------------
# per-step record


def _followers_only(cm: CrowdMeasure) -> CrowdMeasure:
    if not cm.micro.leader.any():
        return cm
    keep = ~cm.micro.leader
    return replace(cm, micro=cm.micro.moved(cm.micro.positions, keep))


def _covers(region: Rect | None, grid) -> bool:
    b = grid.bounds
    return region is None or (region.x0 <= b.x0 and region.y0 <= b.y0 and region.x1 >= b.x1 and region.y1 >= b.y1)


def _exit_flux(pre: CrowdMeasure, pinfo, dt: float) -> FluxSample:
    macro = (1.0 - pre.theta) * pre.lam * pinfo.outflow / dt
    micro = pre.theta * pinfo.exited / dt
    return FluxSample(macro + micro, macro, micro, 0, 0)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".9g")


@dataclass
class DiagnosticsRecord:
    """One row per step; leaders are left out of the group-shape columns."""

    columns: list[str]
    rows: list[list] = field(default_factory=list)
    _cum: list = field(default_factory=list, repr=False)
    leader_pops: tuple = ()

    @classmethod
    def for_world(cls, world) -> "DiagnosticsRecord":
        cols = ["step", "t", "dt"]
        lead = []
        for k, pop in enumerate(world.populations, start=1):
            p = f"p{k}_"
            cols += [p + c for c in ("n_agents", "macro_mass", "mu_mass",
                                     "probe_m", "probe_M", "probe_mu",
                                     "com_x", "com_y")]
            for s in SCALES:
                cols += [f"{p}I1_{s}", f"{p}I2_{s}", f"{p}IG_{s}"]
            cols += [p + c for c in ("flux", "flux_M", "flux_m", "cross_fwd", "cross_back",
                                     "out_M", "out_m", "rho_max", "rho_min", "residual")]
            if pop.measure.micro.leader.any():
                cols += [p + "leader_x", p + "leader_y"]
                lead.append(k - 1)
        return cls(cols, leader_pops=tuple(lead))

    def observe(self, world, prev=None, info=None):
        row = [world.n, world.t, info.dt if info is not None else 0.0]
        if not self._cum:
            self._cum = [[0, 0, 0.0, 0] for _ in world.populations]
        for k, pop in enumerate(world.populations):
            cm = pop.measure
            grp = _followers_only(cm)
            row += [cm.micro.n, cm.macro.total_mass(), measure_of(cm),
                    cm.micro.count_in(pop.probe), cm.macro.mass_in(pop.probe),
                    measure_of(cm, pop.probe)]
            try:
                c = center_of_mass(grp)
            except ZeroMass:
                c = (math.nan, math.nan)
            row += [c[0], c[1]]
            for s in SCALES:
                try:
                    row += list(scale_moments(grp, s))
                except ZeroMass:
                    row += [math.nan] * 3
            cum = self._cum[k]
            if prev is not None and info is not None:
                pinfo = info.pops[k]
                if _covers(pop.probe, cm.macro.grid):
                    # whole domain: the step's exit bookkeeping is exact,
                    # mass differences would only add round-off
                    fl = _exit_flux(prev.populations[k].measure, pinfo, info.dt)
                else:
                    fl = door_flux(prev.populations[k].measure, cm, None, pop.probe, info.dt)
                cum[0] += pinfo.crossings[0]
                cum[1] += pinfo.crossings[1]
                cum[2] += pinfo.outflow
                cum[3] += pinfo.exited
                row += [fl.total, fl.macro, fl.micro, cum[0], cum[1], cum[2], cum[3],
                        float(cm.macro.rho.max()), float(cm.macro.rho.min()), pinfo.residual]
            else:
                rho = cm.macro.rho
                row += [0.0, 0.0, 0.0, 0, 0, 0.0, 0, float(rho.max()), float(rho.min()), 0.0]
            if k in self.leader_pops:
                lp = cm.micro.positions[cm.micro.leader]
                row += [lp[0, 0], lp[0, 1]] if len(lp) else [math.nan, math.nan]
        self.rows.append(row)

    def column(self, name) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([float(r[j]) for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())
