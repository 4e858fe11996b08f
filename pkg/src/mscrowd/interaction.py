"""Nonlocal interaction velocity: radial kernel, angular focus, and the
agent-sum / density-quadrature evaluations, blended across populations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .measures import CrowdMeasure, MacroDensity, MicroState


@dataclass(frozen=True)
class KernelParams:
    f_r: float = 0.0  # repulsion strength
    f_a: float = 0.0  # attraction strength
    r_r: float = 1.0  # repulsion radius
    r_a: float = 1.0  # attraction radius
    alpha_bar: float = math.pi / 2  # half-width of the field of view

    def __post_init__(self):
        if self.f_r < 0 or self.f_a < 0:
            raise ValueError("kernel strengths must be nonnegative")
        if not (self.r_r > 0 and self.r_a > 0):
            raise ValueError("kernel radii must be positive")
        if not 0.0 <= self.alpha_bar <= math.pi:
            raise ValueError("alpha_bar must lie in [0, pi]")

    @property
    def r_max(self) -> float:
        return max(self.r_r, self.r_a)

    @property
    def inert(self) -> bool:
        return self.f_r == 0.0 and self.f_a == 0.0

    def as_tuple(self):
        return (float(self.f_r), float(self.f_a), float(self.r_r), float(self.r_a), float(self.alpha_bar))


@dataclass(frozen=True)
class InteractionSpec:
    """Endogenous kernel, exogenous kernel, and the exogenous weight Theta.

    The scale weight theta lives on each :class:`CrowdMeasure`.
    """

    endogenous: KernelParams
    exogenous: KernelParams | None = None
    exo_weight: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.exo_weight <= 1.0:
            raise ValueError("exogenous weight must lie in [0, 1]")


def radial_kernel(s: float, p: KernelParams) -> float:
    """Signed interaction magnitude at distance ``s`` (negative repels)."""
    if not s > 0:
        raise ValueError("distance must be positive")
    f = 0.0
    if s <= p.r_r:
        f = f - p.f_r / s
    if s <= p.r_a:
        f = f + p.f_a * s
    return f


def angular_focus(alpha: float, alpha_bar: float) -> int:
    return 1 if abs(alpha) <= alpha_bar else 0


def sight_angle(x, y, heading) -> float:
    """Signed angle in [-pi, pi] from ``heading`` to ``y - x``."""
    dx = float(y[0]) - float(x[0])
    dy = float(y[1]) - float(x[1])
    if dx == 0.0 and dy == 0.0:
        raise ValueError("coincident points have no sight angle")
    hx, hy = float(heading[0]), float(heading[1])
    return math.atan2(hx * dy - hy * dx, hx * dx + hy * dy)


def _rows(a):
    return np.ascontiguousarray(np.asarray(a, float).reshape(-1, 2))


def micro_field(targets, headings, agents, p: KernelParams, workers=1, backend=None):
    """Agent-sum interaction velocity at each target; zero-distance pairs are skipped."""
    pts = agents.positions if isinstance(agents, MicroState) else agents
    return _kernels.micro_sum(_rows(targets), _rows(headings), _rows(pts), p,
                              workers=workers, backend=backend)


def macro_field(targets, headings, density: MacroDensity, p: KernelParams, workers=1, backend=None):
    """Midpoint quadrature of the interaction integral against the density.

    Cells whose centre is within ``r_max`` contribute; the target's own
    cell is skipped.
    """
    targets = _rows(targets)
    cells = density.grid.locate(targets)
    return _kernels.macro_sum(targets, _rows(headings), cells, density.rho, density.grid, p,
                              workers=workers, backend=backend)


def nu_micro_at(x, agents, heading, p: KernelParams):
    return micro_field([x], [heading], agents, p)[0]


def nu_macro_at(x, density: MacroDensity, heading, p: KernelParams):
    return macro_field([x], [heading], density, p)[0]


def _blend(targets, headings, cm: CrowdMeasure, p: KernelParams, workers, backend):
    out = np.zeros((len(targets), 2))
    if cm.theta > 0.0:
        out += cm.theta * micro_field(targets, headings, cm.micro, p, workers, backend)
    if cm.theta < 1.0:
        out += ((1.0 - cm.theta) * cm.lam) * macro_field(targets, headings, cm.macro, p, workers, backend)
    return out


def interaction_field(targets, headings, own: CrowdMeasure, other: CrowdMeasure | None,
                      spec: InteractionSpec, workers=1, backend=None):
    """Interaction velocity at many targets, including the cross-population term."""
    targets = _rows(targets)
    headings = _rows(headings)
    w = spec.exo_weight if (other is not None and spec.exogenous is not None) else 0.0
    out = np.zeros((len(targets), 2))
    if w < 1.0:
        out += (1.0 - w) * _blend(targets, headings, own, spec.endogenous, workers, backend)
    if w > 0.0:
        out += w * _blend(targets, headings, other, spec.exogenous, workers, backend)
    return out


def interaction_velocity(x, own: CrowdMeasure, other: CrowdMeasure | None, spec: InteractionSpec, heading):
    return interaction_field([x], [heading], own, other, spec)[0]
