"""Command-line driver: single runs, parameter sweeps and convergence studies.

Exit status is 0 on success, 1 when a run fails, 2 for invalid input.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .analytic import CASES, convergence
from .diagnostics import ZeroMass, average_outflow_time
from .measures import write_agents, write_density
from .scenario import ScenarioError, apply_overrides, build_world, load, preset, serialize, validate
from .stepper import run

log = logging.getLogger("mscrowd")

EXIT_OK, EXIT_RUN, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad command-line input; reported with exit status 2."""


def _load_scenario(args):
    if bool(args.preset) == bool(args.scenario):
        raise InputError("give exactly one of --preset or --scenario")
    try:
        s = preset(args.preset) if args.preset else load(args.scenario)
        s = apply_overrides(s, args.override or [])
    except (ScenarioError, OSError, ValueError) as e:
        raise InputError(str(e)) from e
    problems = validate(s)
    if problems:
        raise InputError("invalid scenario:\n  " + "\n  ".join(problems))
    return s


def _snapshot_writer(out: Path, written: set):
    def write(world):
        if world.n in written:
            return
        written.add(world.n)
        for k, pop in enumerate(world.populations, start=1):
            tag = f"t{world.t:012.6f}_p{k}"
            write_density(out / f"density_{tag}.dat", pop.measure.macro, world.t)
            write_agents(out / f"agents_{tag}.dat", pop.measure.micro)
    return write


def execute(s, out: Path, workers: int = 1, snapshot_every: int | None = None, extra=None):
    """Run one scenario into ``out``; returns the diagnostics record."""
    out.mkdir(parents=True, exist_ok=True)
    world = build_world(s)
    every = s.snapshot_every if snapshot_every is None else snapshot_every
    written: set = set()
    snap = _snapshot_writer(out, written)
    dts = []
    record, final = run(world, workers=workers, stop_when_empty=s.stop_when_empty, empty_tol=s.empty_tol,
                        snapshot_every=every, on_snapshot=snap,
                        on_step=lambda w, info: dts.append(info.dt))
    if every:
        snap(final)
    record.write_csv(out / "diagnostics.csv")
    manifest = {
        "scenario": serialize(s),
        "steps": final.n,
        "dt_count": len(dts),
        "t_end": final.t,
        "workers": workers,
        "snapshot_every": every,
        "versions": {"mscrowd": __version__, "numpy": np.__version__,
                     "python": platform.python_version(), "kernels": _kernels.BACKEND},
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return record


def outflow_times(record, n_pops: int) -> list[dict[str, float]]:
    """Average outflow time of each population's probe, per scale."""
    t = record.column("t")
    res = []
    for k in range(1, n_pops + 1):
        row = {}
        for scale in ("mu", "m", "M"):
            try:
                row[scale] = average_outflow_time(t, record.column(f"p{k}_probe_{scale}"))
            except ZeroMass:
                row[scale] = math.nan
        res.append(row)
    return res


def _parse_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def cmd_run(args) -> int:
    s = _load_scenario(args)
    out = Path(args.out)
    execute(s, out, args.threads, args.snapshot_every,
            extra={"preset": args.preset, "scenario_file": args.scenario, "overrides": args.override or []})
    print(f"wrote {out / 'diagnostics.csv'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.sweep_key:
        raise InputError("sweep needs --sweep-key")
    values = _parse_list(args.sweep_values or "")
    if not values:
        raise InputError("sweep needs a non-empty --sweep-values list")
    base = _load_scenario(args)
    scenarios = []
    for v in values:
        try:
            s = apply_overrides(base, [f"{args.sweep_key}={v}"])
        except (ScenarioError, ValueError) as e:
            raise InputError(f"sweep value {v!r}: {e}") from e
        problems = validate(s)
        if problems:
            raise InputError(f"sweep value {v!r} gives an invalid scenario:\n  " + "\n  ".join(problems))
        scenarios.append(s)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_pops = len(base.populations)
    header = ["key", "value", "steps", "t_end"]
    for k in range(1, n_pops + 1):
        header += [f"p{k}_T_ave_mu", f"p{k}_T_ave_m", f"p{k}_T_ave_M"]
    rows = []
    for i, (v, s) in enumerate(zip(values, scenarios)):
        rec = execute(s, out / f"run_{i:03d}", args.threads, args.snapshot_every,
                      extra={"sweep_key": args.sweep_key, "sweep_value": v})
        row = [args.sweep_key, v, int(rec.column("step")[-1]), format(rec.column("t")[-1], ".9g")]
        for tav in outflow_times(rec, n_pops):
            row += [format(tav[sc], ".9g") for sc in ("mu", "m", "M")]
        rows.append(row)
        log.info("sweep %s=%s done", args.sweep_key, v)
    with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {out / 'summary.csv'}")
    return EXIT_OK


def cmd_convergence(args) -> int:
    if args.case not in CASES:
        raise InputError(f"unknown convergence case {args.case!r}; choose from {', '.join(CASES)}")
    try:
        hs = [float(v) for v in _parse_list(args.h)]
    except ValueError as e:
        raise InputError(f"bad h list: {e}") from e
    if any(not h > 0 for h in hs):
        raise InputError("grid sizes must be positive")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = convergence(args.case, hs, workers=args.threads)
    path = out / "convergence.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if rows:
            w.writerow(["h", "l1_cell_error"])
            w.writerows([format(h, ".9g"), format(e, ".9g")] for h, e in rows)
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mscrowd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"mscrowd {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        src = sp.add_argument_group("scenario source")
        src.add_argument("--preset", help="one of the built-in presets")
        src.add_argument("--scenario", help="scenario file")
        sp.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="e.g. populations.0.theta=0.3 (repeatable)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--snapshot-every", type=int, default=None, metavar="N",
                        help="write density and agent snapshots every N steps (0 disables)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for the kernels")

    r = sub.add_parser("run", help="run one scenario")
    scenario_args(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a scenario over a list of values of one key")
    scenario_args(s)
    s.add_argument("--sweep-key", "--key", dest="sweep_key", help="dotted key to vary")
    s.add_argument("--sweep-values", "--values", dest="sweep_values", help="comma-separated values")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("convergence", help="grid-convergence study on an analytic flow")
    c.add_argument("--case", default="rotation", help=f"one of: {', '.join(CASES)}")
    c.add_argument("--h", default="0.2,0.1,0.05,0.025", help="comma-separated grid sizes")
    c.add_argument("--out", required=True, help="output directory")
    c.add_argument("--threads", type=int, default=1)
    c.set_defaults(func=cmd_convergence)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("mscrowd: --threads must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "snapshot_every", None) is not None and args.snapshot_every < 0:
        print("mscrowd: --snapshot-every must be nonnegative", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as e:
        print(f"mscrowd: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # a failed run, not bad input
        log.debug("run failed", exc_info=True)
        print(f"mscrowd: run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
