"""One explicit step of the coupled agent/density system and the run loop.

Both scales of a population are moved by the same velocity field: agents
by ``P + v dt`` and the density by translating every cell with its own
velocity and redistributing the translated squares onto the grid.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .desired import DesiredField
from .geometry import Domain, Rect
from .interaction import InteractionSpec, interaction_field
from .measures import CrowdMeasure, MacroDensity, MicroState

log = logging.getLogger(__name__)

CFL_SLACK = 1e-12


class CFLViolation(RuntimeError):
    """A cell would move farther than one cell width in a single step."""


@dataclass(frozen=True)
class StepControls:
    dt_max: float = 0.05
    cfl: float = 1.0
    t_final: float = 1.0

    def __post_init__(self):
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if not self.t_final >= 0:
            raise ValueError("t_final must be nonnegative")


@dataclass(frozen=True)
class LeaderRule:
    """Leaders walk at a fixed velocity, pausing while the group lags behind."""

    velocity: tuple[float, float]
    stop_distance: float


@dataclass(frozen=True)
class Population:
    name: str
    measure: CrowdMeasure
    interaction: InteractionSpec
    desired: DesiredField
    leader: LeaderRule | None = None
    probe: Rect | None = None
    door: int | None = None  # index into domain.doors used for flux counting


@dataclass(frozen=True)
class World:
    domain: Domain
    populations: tuple[Population, ...]
    controls: StepControls
    t: float = 0.0
    n: int = 0


@dataclass
class PopStepInfo:
    outflow: float = 0.0  # macro mass that left through doors this step
    exited: int = 0  # agents that left through doors this step
    crossings: tuple[int, int] = (0, 0)  # agents across the counting door (+n, -n)
    residual: float = 0.0  # macro mass balance error of the step


@dataclass
class StepInfo:
    dt: float
    pops: list[PopStepInfo] = field(default_factory=list)


def compute_dt(velocities, h: float, c: StepControls) -> float:
    """Largest step with ``dt * max|v| <= cfl * h``, capped by ``dt_max``."""
    v = np.asarray(velocities, float).reshape(-1, 2)
    vmax = float(np.hypot(v[:, 0], v[:, 1]).max()) if len(v) else 0.0
    if vmax == 0.0:
        return c.dt_max
    return min(c.dt_max, c.cfl * h / vmax)


def advance_micro(micro: MicroState, velocities, dt: float, domain: Domain):
    """Move agents by ``v dt``; agents leaving through a door are dropped.

    Returns ``(new_state, attempted)`` where ``attempted`` holds each old
    agent's end point (beyond the wall for exits), aligned with ``micro``.
    """
    vel = np.asarray(velocities, float).reshape(-1, 2)
    new = np.empty_like(micro.positions)
    keep = np.ones(micro.n, dtype=bool)
    for k in range(micro.n):
        p, out = domain.move(micro.positions[k], vel[k] * dt)
        new[k] = p
        keep[k] = not out
    return micro.moved(new, keep), new


def advance_macro(density: MacroDensity, cell_velocities, dt: float, domain: Domain,
                  workers: int = 1, backend=None):
    """Push the piecewise-constant density forward by the cellwise translation.

    Returns ``(new_density, outflow_mass)``.  Raises :class:`CFLViolation`
    when some mass-carrying cell would travel more than one cell width.
    """
    g = density.grid
    vel = np.asarray(cell_velocities, float).reshape(g.shape + (2,))
    excess = _kernels.cfl_excess(vel, density.rho, dt, g.h, backend=backend)
    if excess > 1.0 + CFL_SLACK:
        raise CFLViolation(f"|v| dt / h reaches {excess:.6g} > 1; shrink dt")
    new, out = _kernels.push_forward(density.rho, vel, dt, g.h, domain.free_mask(),
                                     domain.exit_faces(), workers=workers, backend=backend)
    return MacroDensity(g, new), float(out.sum() * g.cell_area)


# ---------------------------------------------------------------------------


def _other(world: World, k: int) -> CrowdMeasure | None:
    pops = world.populations
    if len(pops) < 2:
        return None
    return pops[1 - k].measure if len(pops) == 2 else None


def group_center(cm: CrowdMeasure) -> np.ndarray | None:
    """Centre of the blended follower mass (leaders excluded)."""
    fol = cm.micro.followers()
    w_m = cm.theta
    w_M = (1.0 - cm.theta) * cm.lam
    cell_mass = cm.macro.cell_masses()
    total = w_m * len(fol) + w_M * cell_mass.sum()
    if total <= 0:
        return None
    c = cm.macro.grid.centers()
    sx = w_m * fol[:, 0].sum() + w_M * (cell_mass * c[..., 0]).sum()
    sy = w_m * fol[:, 1].sum() + w_M * (cell_mass * c[..., 1]).sum()
    return np.array([sx / total, sy / total])


def population_velocities(world: World, k: int, workers=1, backend=None):
    """Projected agent velocities and the massive-cell velocity field of population k."""
    dom = world.domain
    pop = world.populations[k]
    cm = pop.measure
    other = _other(world, k)
    spec: InteractionSpec = pop.interaction

    agents = cm.micro.positions
    g = cm.macro.grid
    mask = (cm.macro.rho > 0) & dom.free_mask()
    cells = g.centers()[mask]

    targets = np.concatenate([agents, cells]) if len(cells) else agents.copy()
    v_des = pop.desired(targets)
    heads = pop.desired.headings(targets, v_des)
    v = v_des + interaction_field(targets, heads, cm, other, spec, workers, backend)

    v_agents = v[: len(agents)]
    if pop.leader is not None and cm.micro.leader.any():
        c = group_center(cm)
        lead = cm.micro.leader
        lv = np.asarray(pop.leader.velocity, float)
        for idx in np.flatnonzero(lead):
            far = c is not None and np.hypot(*(agents[idx] - c)) > pop.leader.stop_distance
            v_agents[idx] = 0.0 if far else lv
    v_agents = dom.project_many(v_agents, agents)

    v_cells = np.zeros(g.shape + (2,))
    v_cells[mask] = v[len(agents):]
    v_cells = dom.project_cells(v_cells)
    return v_agents, v_cells, mask


def step(world: World, workers: int = 1, backend=None, dt: float | None = None):
    """Advance every population by one common time step."""
    dom = world.domain
    fields = [population_velocities(world, k, workers, backend) for k in range(len(world.populations))]
    if dt is None:
        dt = world.controls.dt_max
        for _, vc, mask in fields:
            dt = min(dt, compute_dt(vc[mask], dom.grid.h, world.controls))
        remaining = world.controls.t_final - world.t
        if remaining > 0:
            dt = min(dt, remaining)

    info = StepInfo(dt=dt)
    new_pops = []
    for pop, (va, vc, _) in zip(world.populations, fields):
        cm = pop.measure
        micro, attempted = advance_micro(cm.micro, va, dt, dom)
        before = cm.macro.total_mass()
        macro, outflow = advance_macro(cm.macro, vc, dt, dom, workers, backend)
        pinfo = PopStepInfo(outflow=outflow, exited=cm.micro.n - micro.n)
        pinfo.residual = macro.total_mass() + outflow - before
        if pop.door is not None:
            pinfo.crossings = dom.doors[pop.door].crossings(cm.micro.positions, attempted)
        info.pops.append(pinfo)
        new_pops.append(replace(pop, measure=replace(cm, micro=micro, macro=macro)))
    # the last step is clipped to land on t_final exactly
    t_new = world.t + dt
    if abs(world.controls.t_final - t_new) <= 1e-12 * max(1.0, world.controls.t_final):
        t_new = world.controls.t_final
    return replace(world, populations=tuple(new_pops), t=t_new, n=world.n + 1), info


def _probe_masses(world: World):
    out = []
    for pop in world.populations:
        cm = pop.measure
        out.append((cm.micro.count_in(pop.probe), cm.macro.mass_in(pop.probe)))
    return out


def run(world: World, workers: int = 1, backend=None, max_steps: int | None = None,
        stop_when_empty: bool = False, empty_tol: float = 1e-6,
        snapshot_every: int | None = None, on_snapshot=None, on_step=None):
    """Step until ``t_final`` (or ``max_steps``, or the probes empty out).

    Returns ``(record, final_world)``.  ``on_step(world, info)`` is called
    after every step; ``on_snapshot(world)`` every ``snapshot_every`` steps
    and at the start.
    """
    from .diagnostics import DiagnosticsRecord

    record = DiagnosticsRecord.for_world(world)
    record.observe(world)
    if on_snapshot is not None and snapshot_every:
        on_snapshot(world)
    start = _probe_masses(world)
    if all(m == 0 and M == 0 for m, M in start):
        return record, world
    while world.t < world.controls.t_final:
        if max_steps is not None and world.n >= max_steps:
            break
        prev = world
        world, info = step(world, workers, backend)
        record.observe(world, prev, info)
        if on_step is not None:
            on_step(world, info)
        if on_snapshot is not None and snapshot_every and world.n % snapshot_every == 0:
            on_snapshot(world)
        if stop_when_empty:
            now = _probe_masses(world)
            if all(m == 0 and M <= empty_tol * max(M0, 1e-300) for (m, M), (_, M0) in zip(now, start)):
                log.info("probe regions empty at t=%.6g after %d steps", world.t, world.n)
                break
    return record, world
