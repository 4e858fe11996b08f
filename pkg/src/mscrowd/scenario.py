"""Declarative scenarios: dataclasses, a sectioned text format, presets,
validation and construction of the initial :class:`~mscrowd.stepper.World`.

File layout (all keys optional unless noted; unknown keys are errors)::

    [scenario]        name
    [domain]          x0 y0 x1 y1 h (required), eps_wall
    [obstacle.K]      rect = x0 y0 x1 y1
    [door.K]          p0 = x y, p1 = x y, normal = nx ny
    [controls]        dt_max cfl t_final stop_when_empty empty_tol
    [output]          snapshot_every
    [population.K]    see POP_KEYS

Vectors are written as space-separated numbers; point lists as
``x y; x y; ...``.  Sections are numbered from 1.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .desired import DesiredField
from .geometry import Domain, DoorSegment, Grid, Rect
from .interaction import InteractionSpec, KernelParams
from .measures import CrowdMeasure, MicroState, init_density_from_micro, read_vector_field, tune_xi
from .stepper import LeaderRule, Population, StepControls, World

PRESETS = ("test1", "test2_small", "test2_large", "test3", "test4")
DESIRED_KINDS = ("constant", "toward_target", "zero", "grid_sampled", "funnel")


class ScenarioError(ValueError):
    """Malformed scenario text or an invalid override."""


@dataclass(frozen=True)
class Layout:
    """Agent start positions: a regular lattice or an explicit list."""

    kind: str = "lattice"
    origin: tuple[float, float] = (0.0, 0.0)
    spacing: tuple[float, float] = (1.0, 1.0)
    counts: tuple[int, int] = (1, 1)
    points: tuple[tuple[float, float], ...] = ()

    def positions(self) -> np.ndarray:
        if self.kind == "points":
            return np.array(self.points, float).reshape(-1, 2)
        nx, ny = self.counts
        xs = self.origin[0] + self.spacing[0] * np.arange(nx)
        ys = self.origin[1] + self.spacing[1] * np.arange(ny)
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    @property
    def n(self) -> int:
        return len(self.points) if self.kind == "points" else self.counts[0] * self.counts[1]


@dataclass(frozen=True)
class DesiredSpec:
    kind: str = "zero"
    vector: tuple[float, float] = (0.0, 0.0)
    target: tuple[float, float] = (0.0, 0.0)
    speed: float = 1.0
    file: str | None = None  # grid_sampled: vector-field snapshot
    gate: Rect | None = None  # funnel: the passage to steer through
    direction: float = 1.0  # funnel: +1 walks toward +x, -1 toward -x
    heading: tuple[float, float] = (1.0, 0.0)


@dataclass(frozen=True)
class LeaderSpec:
    position: tuple[float, float]
    velocity: tuple[float, float]
    stop_distance: float


@dataclass(frozen=True)
class PopulationSpec:
    name: str
    layout: Layout
    theta: float
    kernel: KernelParams
    lam: float | None = None
    m0: float | None = None
    xi: float | None = None  # density averaging radius; tuned when None
    exo_kernel: KernelParams | None = None
    exo_weight: float = 0.0
    desired: DesiredSpec = DesiredSpec()
    leader: LeaderSpec | None = None
    probe: Rect | None = None
    door: int | None = None  # 1-based index into the scenario doors

    @property
    def N(self) -> int:
        """Follower count; a leader comes on top."""
        return self.layout.n

    @property
    def lam_effective(self) -> float | None:
        if self.lam is not None:
            return self.lam
        if self.m0 is not None and self.m0 > 0:
            return self.N / self.m0
        return None


@dataclass(frozen=True)
class Scenario:
    name: str
    box: Rect
    h: float
    populations: tuple[PopulationSpec, ...]
    controls: StepControls
    obstacles: tuple[Rect, ...] = ()
    doors: tuple[DoorSegment, ...] = ()
    eps_wall: float | None = None
    snapshot_every: int = 0
    stop_when_empty: bool = False
    empty_tol: float = 1e-6
    base_dir: str | None = field(default=None, compare=False)

    @property
    def grid(self) -> Grid:
        nx = int(round((self.box.x1 - self.box.x0) / self.h))
        ny = int(round((self.box.y1 - self.box.y0) / self.h))
        return Grid(self.box.x0, self.box.y0, self.h, nx, ny)

    def domain(self) -> Domain:
        return Domain(self.grid, self.obstacles, self.doors, self.eps_wall)


# ---------------------------------------------------------------------------
# validation


def _on_segment(p, r: Rect, tol) -> bool:
    x, y = p
    on_v = (abs(x - r.x0) <= tol or abs(x - r.x1) <= tol) and r.y0 - tol <= y <= r.y1 + tol
    on_h = (abs(y - r.y0) <= tol or abs(y - r.y1) <= tol) and r.x0 - tol <= x <= r.x1 + tol
    return on_v or on_h


def validate(s: Scenario) -> list[str]:
    """Every violated invariant, as readable messages; empty when valid."""
    v = []
    b = s.box
    if not (b.x1 > b.x0 and b.y1 > b.y0):
        v.append("domain box is empty")
        return v
    if not s.h > 0:
        v.append("grid h must be positive")
        return v
    for axis, length in (("x", b.x1 - b.x0), ("y", b.y1 - b.y0)):
        k = length / s.h
        if abs(k - round(k)) > 1e-6 * max(1.0, k):
            v.append(f"domain {axis}-extent is not a whole number of cells")
    if s.eps_wall is not None and not s.eps_wall > 0:
        v.append("eps_wall must be positive")
    tol = 1e-9 * max(1.0, b.x1 - b.x0, b.y1 - b.y0)
    for k, r in enumerate(s.obstacles, 1):
        if not (r.x1 > r.x0 and r.y1 > r.y0):
            v.append(f"obstacle {k} is empty")
        if r.x0 < b.x0 - tol or r.x1 > b.x1 + tol or r.y0 < b.y0 - tol or r.y1 > b.y1 + tol:
            v.append(f"obstacle {k} leaves the domain")
    walls = (b,) + tuple(s.obstacles)
    for k, d in enumerate(s.doors, 1):
        n = np.hypot(*d.normal)
        if abs(n - 1.0) > 1e-9:
            v.append(f"door {k} normal must be a unit vector")
        elif (d.vertical and d.normal[1] != 0) or (not d.vertical and d.normal[0] != 0):
            v.append(f"door {k} normal must be perpendicular to the door")
        for p in (d.p0, d.p1):
            if not (b.x0 - tol <= p[0] <= b.x1 + tol and b.y0 - tol <= p[1] <= b.y1 + tol):
                v.append(f"door {k} leaves the domain")
                break
        lies_on_box = (d.vertical and d.line in (b.x0, b.x1)) or (not d.vertical and d.line in (b.y0, b.y1))
        spans_gap = all(any(_on_segment(p, w, tol) for w in walls) for p in (d.p0, d.p1))
        if not (lies_on_box or spans_gap):
            v.append(f"door {k} is neither on a wall nor across a passage")
    if s.snapshot_every < 0:
        v.append("snapshot_every must be nonnegative")
    if not 0 < s.empty_tol < 1:
        v.append("empty_tol must lie in (0, 1)")
    if not 1 <= len(s.populations) <= 2:
        v.append("scenarios hold one or two populations")
    dom = s.domain() if not v else None
    for k, p in enumerate(s.populations, 1):
        tag = f"population {k}"
        if not 0.0 <= p.theta <= 1.0:
            v.append(f"{tag}: theta out of range")
        if p.N < 1:
            v.append(f"{tag}: needs at least one agent")
        if p.lam is not None and not p.lam > 0:
            v.append(f"{tag}: lambda must be positive")
        if p.m0 is not None and not p.m0 > 0:
            v.append(f"{tag}: m0 must be positive")
        if p.lam is None and p.m0 is None:
            v.append(f"{tag}: give lambda or m0")
        if p.lam is not None and p.m0 is not None and p.N > 0 and abs(p.lam * p.m0 - p.N) > 0.05 * p.N:
            v.append(f"{tag}: lambda * m0 disagrees with N")
        if p.xi is not None and not p.xi > 0:
            v.append(f"{tag}: xi must be positive")
        if not 0.0 <= p.exo_weight <= 1.0:
            v.append(f"{tag}: exogenous weight out of range")
        if p.exo_weight > 0 and p.exo_kernel is None:
            v.append(f"{tag}: exogenous weight without an exogenous kernel")
        d = p.desired
        if d.kind not in DESIRED_KINDS:
            v.append(f"{tag}: unknown desired kind {d.kind!r}")
        if d.kind in ("toward_target", "funnel") and not d.speed > 0:
            v.append(f"{tag}: desired speed must be positive")
        if d.kind == "grid_sampled" and not d.file:
            v.append(f"{tag}: grid_sampled needs a file")
        if d.kind == "funnel" and (d.gate is None or d.direction not in (1.0, -1.0)):
            v.append(f"{tag}: funnel needs a gate and a direction of +1 or -1")
        if abs(np.hypot(*d.heading) - 1.0) > 1e-9:
            v.append(f"{tag}: heading must be a unit vector")
        if p.door is not None and not 1 <= p.door <= len(s.doors):
            v.append(f"{tag}: door index out of range")
        if p.probe is not None and not (p.probe.x1 > p.probe.x0 and p.probe.y1 > p.probe.y0):
            v.append(f"{tag}: probe region is empty")
        if p.leader is not None and not p.leader.stop_distance > 0:
            v.append(f"{tag}: leader stop distance must be positive")
        if dom is not None:
            pts = p.layout.positions()
            if p.leader is not None:
                pts = np.vstack([pts, p.leader.position])
            bad = [q for q in pts if not dom.is_free(q[0], q[1])]
            if bad:
                v.append(f"{tag}: {len(bad)} agent(s) outside the domain or inside an obstacle")
            if len(pts) and len({(float(a), float(c)) for a, c in pts}) != len(pts):
                v.append(f"{tag}: agent positions must be distinct")
    if len(s.populations) == 2 and dom is not None:
        for p in s.populations:
            if p.desired.kind == "funnel" and p.desired.gate is not None:
                g = p.desired.gate
                if g.x0 < b.x0 or g.x1 > b.x1:
                    v.append(f"population {p.name}: funnel gate leaves the domain")
    return v


# ---------------------------------------------------------------------------
# text format

_KP = ("f_r", "f_a", "r_r", "r_a", "alpha_bar")
POP_KEYS = (
    "name", "layout", "origin", "spacing", "counts", "points",
    "lambda", "m0", "xi", "theta", *_KP, *("exo_" + k for k in _KP), "exo_weight",
    "desired", "desired_vector", "desired_target", "desired_speed", "desired_file",
    "desired_gate", "desired_direction", "heading",
    "leader_position", "leader_velocity", "leader_stop", "probe", "door",
)
SECTION_KEYS = {
    "scenario": ("name",),
    "domain": ("x0", "y0", "x1", "y1", "h", "eps_wall"),
    "obstacle": ("rect",),
    "door": ("p0", "p1", "normal"),
    "controls": ("dt_max", "cfl", "t_final", "stop_when_empty", "empty_tol"),
    "output": ("snapshot_every",),
    "population": POP_KEYS,
}


def _num(s: str) -> float:
    s = s.strip()
    if s.lower() in ("pi", "+pi"):
        return math.pi
    if s.lower().startswith("pi/"):
        return math.pi / float(s[3:])
    return float(s)


def _vec(s: str, n: int = 2) -> tuple:
    parts = s.split()
    if len(parts) != n:
        raise ScenarioError(f"expected {n} numbers, got {s!r}")
    return tuple(_num(p) for p in parts)


def _rect(s: str) -> Rect:
    return Rect(*_vec(s, 4))


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ScenarioError(f"not a boolean: {s!r}")


def _int(s: str) -> int:
    f = float(s)
    if f != int(f):
        raise ScenarioError(f"not an integer: {s!r}")
    return int(f)


def _f(x: float) -> str:
    return repr(float(x))


def _fv(v) -> str:
    return " ".join(_f(x) for x in v)


def _section_kind(name: str) -> tuple[str, int | None]:
    base, _, idx = name.partition(".")
    if base not in SECTION_KEYS:
        raise ScenarioError(f"unknown section [{name}]")
    if base in ("obstacle", "door", "population"):
        if not idx.isdigit() or int(idx) < 1:
            raise ScenarioError(f"section [{name}] needs a positive index")
        return base, int(idx)
    if idx:
        raise ScenarioError(f"section [{name}] takes no index")
    return base, None


def _kernel(sec, prefix="") -> KernelParams | None:
    keys = [prefix + k for k in _KP]
    if prefix and not any(k in sec for k in keys):
        return None
    vals = {}
    for k in _KP:
        if prefix + k in sec:
            vals[k] = _num(sec[prefix + k])
    if "r_a" not in vals and "r_r" in vals:
        vals["r_a"] = vals["r_r"]  # inert placeholder when there is no attraction
    return KernelParams(**vals)


def _parse_population(sec, k) -> PopulationSpec:
    kind = sec.get("layout", "lattice")
    if kind == "lattice":
        layout = Layout("lattice", _vec(sec["origin"]), _vec(sec["spacing"]),
                        tuple(_int(x) for x in sec["counts"].split()))
        if len(layout.counts) != 2:
            raise ScenarioError("counts needs two integers")
    elif kind == "points":
        pts = tuple(_vec(p) for p in sec["points"].split(";") if p.strip())
        layout = Layout("points", points=pts)
    else:
        raise ScenarioError(f"unknown layout {kind!r}")
    desired = DesiredSpec(
        kind=sec.get("desired", "zero"),
        vector=_vec(sec["desired_vector"]) if "desired_vector" in sec else (0.0, 0.0),
        target=_vec(sec["desired_target"]) if "desired_target" in sec else (0.0, 0.0),
        speed=_num(sec["desired_speed"]) if "desired_speed" in sec else 1.0,
        file=sec.get("desired_file"),
        gate=_rect(sec["desired_gate"]) if "desired_gate" in sec else None,
        direction=_num(sec["desired_direction"]) if "desired_direction" in sec else 1.0,
        heading=_vec(sec["heading"]) if "heading" in sec else (1.0, 0.0),
    )
    leader = None
    if any(x in sec for x in ("leader_position", "leader_velocity", "leader_stop")):
        try:
            leader = LeaderSpec(_vec(sec["leader_position"]), _vec(sec["leader_velocity"]),
                                _num(sec["leader_stop"]))
        except KeyError as e:
            raise ScenarioError(f"leader needs leader_position, leader_velocity and leader_stop ({e})")
    if "theta" not in sec:
        raise ScenarioError(f"population {k} needs theta")
    return PopulationSpec(
        name=sec.get("name", f"p{k}"),
        layout=layout,
        theta=_num(sec["theta"]),
        kernel=_kernel(sec),
        lam=_num(sec["lambda"]) if "lambda" in sec else None,
        m0=_num(sec["m0"]) if "m0" in sec else None,
        xi=_num(sec["xi"]) if "xi" in sec else None,
        exo_kernel=_kernel(sec, "exo_"),
        exo_weight=_num(sec["exo_weight"]) if "exo_weight" in sec else 0.0,
        desired=desired,
        leader=leader,
        probe=_rect(sec["probe"]) if "probe" in sec else None,
        door=_int(sec["door"]) if "door" in sec else None,
    )


def _sections(text: str) -> dict[str, dict[str, str]]:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",),
                                   inline_comment_prefixes=("#",), strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ScenarioError(str(e)) from None
    out = {}
    for name in cp.sections():
        base, _ = _section_kind(name)
        sec = dict(cp[name])
        unknown = sorted(set(sec) - set(SECTION_KEYS[base]))
        if unknown:
            raise ScenarioError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
        out[name] = sec
    return out


def _indexed(secs, base):
    items = sorted((int(n.split(".")[1]), s) for n, s in secs.items() if n.startswith(base + "."))
    idx = [i for i, _ in items]
    if idx != list(range(1, len(idx) + 1)):
        raise ScenarioError(f"[{base}.K] sections must be numbered 1..n without gaps")
    return [s for _, s in items]


def from_sections(secs: dict[str, dict[str, str]], base_dir=None) -> Scenario:
    try:
        dom = secs.get("domain")
        if dom is None:
            raise ScenarioError("missing [domain]")
        box = Rect(_num(dom["x0"]), _num(dom["y0"]), _num(dom["x1"]), _num(dom["y1"]))
        ctl = secs.get("controls", {})
        controls = StepControls(
            dt_max=_num(ctl.get("dt_max", "0.05")),
            cfl=_num(ctl.get("cfl", "1")),
            t_final=_num(ctl.get("t_final", "1")),
        )
        obstacles = tuple(_rect(s["rect"]) for s in _indexed(secs, "obstacle"))
        doors = tuple(DoorSegment(_vec(s["p0"]), _vec(s["p1"]), _vec(s["normal"])) for s in _indexed(secs, "door"))
        pops = tuple(_parse_population(s, k) for k, s in enumerate(_indexed(secs, "population"), 1))
        return Scenario(
            name=secs.get("scenario", {}).get("name", "scenario"),
            box=box,
            h=_num(dom["h"]),
            eps_wall=_num(dom["eps_wall"]) if "eps_wall" in dom else None,
            populations=pops,
            controls=controls,
            obstacles=obstacles,
            doors=doors,
            snapshot_every=_int(secs.get("output", {}).get("snapshot_every", "0")),
            stop_when_empty=_bool(ctl.get("stop_when_empty", "false")),
            empty_tol=_num(ctl.get("empty_tol", "1e-6")),
            base_dir=None if base_dir is None else str(base_dir),
        )
    except KeyError as e:
        raise ScenarioError(f"missing required key {e}") from None
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(str(e)) from None


def parse(text: str, base_dir=None) -> Scenario:
    return from_sections(_sections(text), base_dir)


def load(path) -> Scenario:
    p = Path(path)
    return parse(p.read_text(encoding="utf-8"), base_dir=p.parent)


def _kernel_keys(kp: KernelParams, prefix="") -> dict[str, str]:
    return {prefix + k: _f(v) for k, v in zip(_KP, kp.as_tuple())}


def to_sections(s: Scenario) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {"scenario": {"name": s.name}}
    b = s.box
    dom = {"x0": _f(b.x0), "y0": _f(b.y0), "x1": _f(b.x1), "y1": _f(b.y1), "h": _f(s.h)}
    if s.eps_wall is not None:
        dom["eps_wall"] = _f(s.eps_wall)
    out["domain"] = dom
    for k, r in enumerate(s.obstacles, 1):
        out[f"obstacle.{k}"] = {"rect": _fv((r.x0, r.y0, r.x1, r.y1))}
    for k, d in enumerate(s.doors, 1):
        out[f"door.{k}"] = {"p0": _fv(d.p0), "p1": _fv(d.p1), "normal": _fv(d.normal)}
    c = s.controls
    out["controls"] = {"dt_max": _f(c.dt_max), "cfl": _f(c.cfl), "t_final": _f(c.t_final),
                       "stop_when_empty": "true" if s.stop_when_empty else "false",
                       "empty_tol": _f(s.empty_tol)}
    out["output"] = {"snapshot_every": str(int(s.snapshot_every))}
    for k, p in enumerate(s.populations, 1):
        sec = {"name": p.name, "layout": p.layout.kind}
        if p.layout.kind == "lattice":
            sec["origin"] = _fv(p.layout.origin)
            sec["spacing"] = _fv(p.layout.spacing)
            sec["counts"] = " ".join(str(int(c)) for c in p.layout.counts)
        else:
            sec["points"] = "; ".join(_fv(q) for q in p.layout.points)
        if p.lam is not None:
            sec["lambda"] = _f(p.lam)
        if p.m0 is not None:
            sec["m0"] = _f(p.m0)
        if p.xi is not None:
            sec["xi"] = _f(p.xi)
        sec["theta"] = _f(p.theta)
        sec.update(_kernel_keys(p.kernel))
        if p.exo_kernel is not None:
            sec.update(_kernel_keys(p.exo_kernel, "exo_"))
        sec["exo_weight"] = _f(p.exo_weight)
        d = p.desired
        sec["desired"] = d.kind
        if d.kind == "constant":
            sec["desired_vector"] = _fv(d.vector)
        if d.kind == "toward_target":
            sec["desired_target"] = _fv(d.target)
        if d.kind in ("toward_target", "funnel"):
            sec["desired_speed"] = _f(d.speed)
        if d.kind == "grid_sampled":
            sec["desired_file"] = d.file or ""
        if d.kind == "funnel":
            g = d.gate
            sec["desired_gate"] = _fv((g.x0, g.y0, g.x1, g.y1))
            sec["desired_direction"] = _f(d.direction)
        sec["heading"] = _fv(d.heading)
        if p.leader is not None:
            sec["leader_position"] = _fv(p.leader.position)
            sec["leader_velocity"] = _fv(p.leader.velocity)
            sec["leader_stop"] = _f(p.leader.stop_distance)
        if p.probe is not None:
            sec["probe"] = _fv((p.probe.x0, p.probe.y0, p.probe.x1, p.probe.y1))
        if p.door is not None:
            sec["door"] = str(int(p.door))
        out[f"population.{k}"] = sec
    return out


def serialize(s: Scenario) -> str:
    lines = []
    for name, sec in to_sections(s).items():
        lines.append(f"[{name}]")
        lines += [f"{k} = {v}" for k, v in sec.items()]
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# overrides


def apply_overrides(s: Scenario, overrides) -> Scenario:
    """Apply ``key=value`` pairs such as ``populations.0.theta=0.3``.

    Population, obstacle and door indices are 0-based here (sections in the
    file are numbered from 1).  Other keys read ``section.key``.
    """
    secs = to_sections(s)
    plural = {"populations": "population", "obstacles": "obstacle", "doors": "door"}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ScenarioError(f"override {item!r} is not key=value")
        parts = key.strip().split(".")
        if parts[0] in plural:
            if len(parts) != 3 or not parts[1].isdigit():
                raise ScenarioError(f"override {key!r} should read {parts[0]}.INDEX.KEY")
            section = f"{plural[parts[0]]}.{int(parts[1]) + 1}"
            name = parts[2]
        elif len(parts) == 2:
            section, name = parts
        else:
            raise ScenarioError(f"override {key!r} should read SECTION.KEY")
        base = section.split(".")[0]
        if base not in SECTION_KEYS or name not in SECTION_KEYS[base]:
            raise ScenarioError(f"override {key!r} names no known key")
        if section not in secs:
            if base in plural.values():
                raise ScenarioError(f"override {key!r} names a missing {base}")
            secs[section] = {}
        secs[section][name] = value.strip()
    return from_sections(secs, s.base_dir)


def seal_doors(s: Scenario) -> Scenario:
    """The same scenario in a closed box: doors and counting references removed."""
    pops = tuple(replace(p, door=None) for p in s.populations)
    return replace(s, doors=(), populations=pops)


# ---------------------------------------------------------------------------
# presets


def _kp(f_r, r_r, f_a=0.0, r_a=None) -> KernelParams:
    return KernelParams(f_r=f_r, f_a=f_a, r_r=r_r, r_a=r_r if r_a is None else r_a, alpha_bar=math.pi / 2)


def _test1() -> Scenario:
    # 10 x 10 square of side 1.8 on cell centres, facing +x
    pop = PopulationSpec(
        name="crowd", layout=Layout("lattice", (2.05, 1.05), (0.2, 0.2), (10, 10)),
        theta=0.3, lam=10.0, kernel=_kp(0.1, 0.5),
        desired=DesiredSpec("zero", heading=(1.0, 0.0)),
    )
    return Scenario("test1", Rect(0.0, 0.0, 6.0, 4.0), 0.1, (pop,), StepControls(0.05, 1.0, 1.0))


def _test2(n: int, lam: float, name: str) -> Scenario:
    if n == 10:
        layout = Layout("lattice", (1.375, 1.375), (0.25, 0.25), (2, 5))
    else:
        layout = Layout("lattice", (0.375, 0.875), (0.25, 0.25), (10, 10))
    door = DoorSegment((3.0, 1.75), (3.0, 2.25), (1.0, 0.0))
    pop = PopulationSpec(
        name="crowd", layout=layout, theta=0.5, lam=lam, kernel=_kp(0.1, 0.25),
        desired=DesiredSpec("toward_target", target=(3.25, 2.0), speed=1.0),
        probe=Rect(0.0, 0.0, 3.0, 4.0), door=1,
    )
    return Scenario(name, Rect(0.0, 0.0, 3.0, 4.0), 0.05, (pop,), StepControls(0.05, 1.0, 60.0),
                    doors=(door,), stop_when_empty=True)


def _test3() -> Scenario:
    # thin wall with a unit opening; blocks are point reflections of each
    # other through the passage centre, so rows are offset by 0.1
    gate = Rect(4.9, 1.5, 5.1, 2.5)
    walls = (Rect(4.9, 0.0, 5.1, 1.5), Rect(4.9, 2.5, 5.1, 4.0))
    doors = (
        DoorSegment((5.0, 1.5), (5.0, 2.5), (1.0, 0.0)),  # counting line in the passage
        DoorSegment((10.0, 0.0), (10.0, 4.0), (1.0, 0.0)),
        DoorSegment((0.0, 0.0), (0.0, 4.0), (-1.0, 0.0)),
    )
    common = dict(theta=0.3, lam=30.0, kernel=_kp(0.1, 0.2), exo_kernel=_kp(0.1, 0.35), exo_weight=0.65,
                  door=1)
    right = PopulationSpec(
        name="rightward", layout=Layout("lattice", (2.4, 1.25), (0.35, 0.35), (6, 5)),
        desired=DesiredSpec("funnel", gate=gate, direction=1.0, speed=1.2, heading=(1.0, 0.0)),
        probe=Rect(0.0, 0.0, 5.0, 4.0), **common,
    )
    left = PopulationSpec(
        name="leftward", layout=Layout("lattice", (5.85, 1.35), (0.35, 0.35), (6, 5)),
        desired=DesiredSpec("funnel", gate=gate, direction=-1.0, speed=1.2, heading=(-1.0, 0.0)),
        probe=Rect(5.0, 0.0, 10.0, 4.0), **common,
    )
    return Scenario("test3", Rect(0.0, 0.0, 10.0, 4.0), 0.05, (right, left), StepControls(0.05, 1.0, 10.0),
                    obstacles=walls, doors=doors)


def _test4() -> Scenario:
    pop = PopulationSpec(
        name="group", layout=Layout("lattice", (1.25, 2.25), (0.35, 0.35), (5, 5)),
        theta=0.3, lam=80.0, kernel=_kp(0.05, 1.5, f_a=0.4, r_a=1.5),
        desired=DesiredSpec("zero", heading=(1.0, 0.0)),
        leader=LeaderSpec((3.25, 2.95), (0.4, 0.0), 1.5),
    )
    return Scenario("test4", Rect(0.0, 0.0, 12.0, 6.0), 0.1, (pop,), StepControls(0.05, 1.0, 15.0))


def preset(name: str) -> Scenario:
    if name == "test1":
        return _test1()
    if name == "test2_small":
        return _test2(10, 10.0, name)
    if name == "test2_large":
        return _test2(100, 100.0, name)
    if name == "test3":
        return _test3()
    if name == "test4":
        return _test4()
    raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


# ---------------------------------------------------------------------------
# world construction


def funnel_field(grid: Grid, gate: Rect, direction: float, speed: float) -> np.ndarray:
    """Per-cell vectors steering toward a rectangular passage, then straight on.

    Before the passage the field points at the nearest point of the gate's
    entry face (shrunk by half a cell at each end); inside and beyond it
    points along ``direction`` in x.
    """
    c = grid.centers()
    x, y = c[..., 0], c[..., 1]
    entry = gate.x0 if direction > 0 else gate.x1
    before = (x < entry) if direction > 0 else (x >= entry)
    lo, hi = gate.y0 + 0.5 * grid.h, gate.y1 - 0.5 * grid.h
    ty = np.clip(y, lo, hi)
    dx = entry - x
    dy = ty - y
    n = np.hypot(dx, dy)
    out = np.zeros(grid.shape + (2,))
    out[..., 0] = direction * speed
    m = before & (n > 0) & (dy != 0)
    out[m, 0] = speed * dx[m] / n[m]
    out[m, 1] = speed * dy[m] / n[m]
    return out


def build_desired(d: DesiredSpec, grid: Grid, base_dir=None) -> DesiredField:
    if d.kind == "constant":
        return DesiredField.constant(d.vector, heading=d.heading)
    if d.kind == "toward_target":
        return DesiredField.toward(d.target, d.speed, heading=d.heading)
    if d.kind == "zero":
        return DesiredField.zero(heading=d.heading)
    if d.kind == "grid_sampled":
        path = Path(d.file)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        g, values = read_vector_field(path)
        return DesiredField.sampled(g, values, heading=d.heading, source=str(d.file))
    if d.kind == "funnel":
        return DesiredField.sampled(grid, funnel_field(grid, d.gate, d.direction, d.speed),
                                    heading=d.heading, source="funnel")
    raise ScenarioError(f"unknown desired kind {d.kind!r}")


def build_world(s: Scenario) -> World:
    """Initial world: agents from the layouts, densities by local averaging."""
    problems = validate(s)
    if problems:
        raise ScenarioError("; ".join(problems))
    dom = s.domain()
    grid = dom.grid
    free = dom.free_mask()
    pops = []
    for p in s.populations:
        pts = p.layout.positions()
        lam = p.lam_effective
        xi = p.xi
        if xi is None:
            xi, _ = tune_xi(pts, lam, grid, free)
        density = init_density_from_micro(pts, xi, lam, grid, free)
        leaders = ()
        if p.leader is not None:
            pts = np.vstack([pts, p.leader.position])
            leaders = (len(pts) - 1,)
        micro = MicroState.from_points(pts, leaders)
        cm = CrowdMeasure(micro, density, p.theta, lam)
        spec = InteractionSpec(p.kernel, p.exo_kernel, p.exo_weight)
        leader = None if p.leader is None else LeaderRule(p.leader.velocity, p.leader.stop_distance)
        pops.append(Population(p.name, cm, spec, build_desired(p.desired, grid, s.base_dir), leader,
                               p.probe, None if p.door is None else p.door - 1))
    return World(dom, tuple(pops), s.controls)
