"""Desired-velocity fields and the heading used by the angular focus."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Grid

CONSTANT = "constant"
TOWARD = "toward_target"
GRID = "grid_sampled"
ZERO = "zero"


@dataclass(frozen=True)
class DesiredField:
    kind: str
    vector: tuple[float, float] = (0.0, 0.0)  # constant
    target: tuple[float, float] = (0.0, 0.0)  # toward_target
    speed: float = 1.0  # toward_target
    grid: Grid | None = None  # grid_sampled
    values: np.ndarray | None = field(default=None, compare=False)  # (ny, nx, 2)
    heading: tuple[float, float] = (1.0, 0.0)  # used where the field vanishes
    source: str | None = None  # file the grid values came from, if any

    def __post_init__(self):
        if self.kind not in (CONSTANT, TOWARD, GRID, ZERO):
            raise ValueError(f"unknown desired-field kind {self.kind!r}")
        if self.kind == TOWARD and not self.speed > 0:
            raise ValueError("toward_target needs a positive speed")
        if self.kind == GRID:
            if self.grid is None or self.values is None:
                raise ValueError("grid_sampled needs a grid and per-cell vectors")
            if np.shape(self.values) != self.grid.shape + (2,):
                raise ValueError("grid_sampled needs exactly one vector per cell")
        hn = float(np.hypot(*self.heading))
        if abs(hn - 1.0) > 1e-9:
            raise ValueError("conventional heading must be a unit vector")

    @classmethod
    def constant(cls, v, heading=(1.0, 0.0)):
        return cls(CONSTANT, vector=(float(v[0]), float(v[1])), heading=heading)

    @classmethod
    def toward(cls, target, speed=1.0, heading=(1.0, 0.0)):
        return cls(TOWARD, target=(float(target[0]), float(target[1])), speed=float(speed), heading=heading)

    @classmethod
    def zero(cls, heading=(1.0, 0.0)):
        return cls(ZERO, heading=heading)

    @classmethod
    def sampled(cls, grid, values, heading=(1.0, 0.0), source=None):
        return cls(GRID, grid=grid, values=np.asarray(values, float), heading=heading, source=source)

    def __call__(self, points) -> np.ndarray:
        """Evaluate at an (n, 2) array of points."""
        p = np.asarray(points, float).reshape(-1, 2)
        if self.kind == CONSTANT:
            return np.tile(np.asarray(self.vector, float), (len(p), 1))
        if self.kind == ZERO:
            return np.zeros((len(p), 2))
        if self.kind == TOWARD:
            d = np.asarray(self.target, float) - p
            n = np.hypot(d[:, 0], d[:, 1])
            out = np.zeros_like(d)
            m = n > 0
            out[m] = self.speed * d[m] / n[m, None]
            return out
        cells = self.grid.locate(p)
        i = np.clip(cells[:, 0], 0, self.grid.nx - 1)
        j = np.clip(cells[:, 1], 0, self.grid.ny - 1)
        return self.values[j, i].copy()

    def headings(self, points, desired=None) -> np.ndarray:
        """Unit direction of the desired velocity, or the conventional heading where it is zero."""
        v = self(points) if desired is None else np.asarray(desired, float)
        n = np.hypot(v[:, 0], v[:, 1])
        out = np.tile(np.asarray(self.heading, float), (len(v), 1))
        m = n > 0
        out[m] = v[m] / n[m, None]
        return out


def eval_desired(f: DesiredField, x) -> np.ndarray:
    return f([x])[0]
