"""Command line front end.

    conspart run config.json
    conspart converge config.json --n 50,100,200,400,800
    conspart compare config.json --n 50,100,200
    conspart sample config.json --n 50,100,200

The configuration is one flat JSON object. Either name a preset with
``"problem"`` (quartic, buckley, bottom, riemann-shock, riemann-rarefaction)
or give ``flux``, ``ic`` and its parameters, and optionally ``source``.
Run parameters: ``n``, ``t_end``, ``output_times``, ``sampling``,
``postprocess``, ``d_min``, ``d_max``, ``dt``, ``reference_multiplier``,
``shock_width`` and ``output_dir``. Sweeps use ``CONSPART_WORKERS`` worker
processes (default 1).

Exit status: 0 on success, 2 for configuration errors, 3 when the solver
aborts.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .engine import MergeError, reconstruct_shocks
from .experiments import (ConfigError, comparison_rows, convergence_rows, problem_from_config,
                          sampling_rows, simulate, snapshot_diagnostics)
from .particles import write_events

logger = logging.getLogger("conspart")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
SNAPSHOT_COLUMNS = ("x", "u", "is_shock", "is_inflection")
CONVERGENCE_COLUMNS = ("n", "mode", "t", "err_post", "err_raw", "err_noshock", "order_running")
WORKERS_ENV = "CONSPART_WORKERS"

DEFAULTS = {
    "n": 200,
    "sampling": "equidistant",
    "postprocess": True,
    "reference_multiplier": 16,
    "output_dir": "out",
}
KNOWN_KEYS = {
    "problem", "name", "flux", "flux_coefficients", "ic", "domain", "base", "amplitude",
    "u_left", "u_right", "x0", "value", "values", "breaks", "coefficients", "source",
    "source_support", "source_breaks", "source_coefficients", "n", "d_min", "d_max", "dt",
    "t_end", "output_times", "sampling", "postprocess", "reference_multiplier",
    "output_dir", "window", "shock_width",
}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_snapshot(path, x, u, is_shock, is_inflection) -> None:
    """CSV with columns ``x,u,is_shock,is_inflection``; floats keep 17 digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_COLUMNS)
        for row in zip(x, u, is_shock, is_inflection):
            w.writerow([_fmt(v) for v in row])


def read_snapshot(path) -> dict:
    """Arrays of a snapshot CSV keyed by column name."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        "x": np.array([float(r["x"]) for r in rows]),
        "u": np.array([float(r["u"]) for r in rows]),
        "is_shock": np.array([r["is_shock"] == "1" for r in rows]),
        "is_inflection": np.array([r["is_inflection"] == "1" for r in rows]),
    }


def write_table(path, rows, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a JSON object")
    return resolve_config(cfg)


def resolve_config(cfg: dict) -> dict:
    """Fill defaults and check the run parameters."""
    unknown = set(cfg) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    out = dict(DEFAULTS)
    out.update(cfg)
    problem = problem_from_config(out)
    out.setdefault("t_end", problem.t_end)
    out["t_end"] = float(out["t_end"])
    if not isinstance(out["n"], int) or out["n"] < 2:
        raise ConfigError("n must be an integer >= 2")
    if out["t_end"] < 0:
        raise ConfigError("t_end must be non-negative")
    times = [float(t) for t in out.get("output_times", [out["t_end"]])]
    if times != sorted(times) or any(t < 0 or t > out["t_end"] for t in times):
        raise ConfigError("output_times must be sorted and lie in [0, t_end]")
    out["output_times"] = times
    if out["sampling"] not in ("equidistant", "adaptive"):
        raise ConfigError("sampling must be 'equidistant' or 'adaptive'")
    for key in ("d_min", "d_max", "dt"):
        if key in out and out[key] is not None and out[key] < 0:
            raise ConfigError(f"{key} must be non-negative")
    return out


def _spec(cfg: dict) -> dict:
    """The part of a configuration that defines the problem."""
    return {k: v for k, v in cfg.items() if k not in DEFAULTS and k != "output_times"}


def _parse_list(text, kind=int):
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


@contextmanager
def _runner():
    workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield pool.map


# ----------------------------------------------------------------------
# commands

def cmd_run(cfg: dict) -> Path:
    """Snapshots, event log and manifest for one run; returns the output directory."""
    problem = problem_from_config(cfg)
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    times = cfg["output_times"] or [cfg["t_end"]]
    initial, snaps, system = simulate(problem, cfg["n"], times, cfg["sampling"],
                                      cfg.get("d_min"), cfg.get("d_max"), cfg.get("dt"))
    diagnostics = []
    files = []
    for k, (t, snap) in enumerate(zip(sorted(times), snaps)):
        out = reconstruct_shocks(snap) if cfg["postprocess"] else snap
        name = f"snapshot_{k:03d}.csv"
        write_snapshot(outdir / name, out.x, out.u, out.is_shock, out.is_inflection)
        d = snapshot_diagnostics(initial, snap)
        d["file"] = name
        diagnostics.append(d)
        files.append(name)
    write_events(system.events, outdir / "events.jsonl")
    manifest = {"config": cfg, "problem": problem.name, "snapshots": diagnostics,
                "events": len(system.events)}
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=float)
    return outdir


def cmd_converge(cfg: dict, ns, modes=("equidistant",), t=None, shock_width=None) -> Path:
    problem = problem_from_config(cfg)
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    t = cfg["t_end"] if t is None else t
    width = shock_width if shock_width is not None else cfg.get("shock_width")
    with _runner() as runner:
        rows, orders = convergence_rows(problem, ns, t, modes, width,
                                        cfg["reference_multiplier"], runner=runner,
                                        spec=_spec(cfg))
    write_table(outdir / "convergence.csv", rows, CONVERGENCE_COLUMNS)
    with open(outdir / "orders.json", "w") as fh:
        json.dump({"config": cfg, "t": t, "orders": orders}, fh, indent=2)
    for mode, o in orders.items():
        print(f"{mode}: order post={o['err_post']:.3f} raw={o['err_raw']:.3f} "
              f"noshock={o['err_noshock']:.3f}")
    return outdir


def cmd_compare(cfg: dict, ns, times=None, self_check=False, shock_width=None) -> Path:
    problem = problem_from_config(cfg)
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    times = [cfg["t_end"]] if not times else times
    width = shock_width if shock_width is not None else cfg.get("shock_width")
    rows = []
    with _runner() as runner:
        for t in times:
            rows += comparison_rows(problem, ns, t, width, cfg["reference_multiplier"],
                                    self_check, runner=runner, spec=_spec(cfg))
    cols = ["n", "cells", "t", "err_particle", "err_fv", "err_particle_noshock",
            "err_fv_noshock"] + (["err_fv_self"] if self_check else [])
    write_table(outdir / "comparison.csv", rows, cols)
    for r in rows:
        print(f"t={r['t']:g} n={r['n']}: particles {r['err_particle']:.3e}  "
              f"finite volume {r['err_fv']:.3e}")
    return outdir


def cmd_sample(cfg: dict, ns, modes=("equidistant", "adaptive")) -> Path:
    problem = problem_from_config(cfg)
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    rows, orders = sampling_rows(problem, ns, modes)
    write_table(outdir / "sampling.csv", rows, ("n", "mode", "err"))
    with open(outdir / "sampling_orders.json", "w") as fh:
        json.dump(orders, fh, indent=2)
    for mode, o in orders.items():
        print(f"{mode}: order {o:.3f}")
    return outdir


# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conspart",
                                description="Particle method for scalar conservation laws.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="evolve one configuration and write snapshots")
    r.add_argument("config")
    c = sub.add_parser("converge", help="error table over resolutions")
    c.add_argument("config")
    c.add_argument("--n", default="50,100,200,400,800")
    c.add_argument("--modes", default="equidistant")
    c.add_argument("--t", type=float, default=None)
    c.add_argument("--shock-width", type=float, default=None)
    m = sub.add_parser("compare", help="particle method against the finite-volume oracle")
    m.add_argument("config")
    m.add_argument("--n", default="50,100,200,400")
    m.add_argument("--t", default=None, help="comma-separated times")
    m.add_argument("--self-check", action="store_true",
                   help="also score the oracle against itself")
    m.add_argument("--shock-width", type=float, default=None)
    s = sub.add_parser("sample", help="initial sampling error study")
    s.add_argument("config")
    s.add_argument("--n", default="50,100,200,400,800")
    s.add_argument("--modes", default="equidistant,adaptive")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            out = cmd_run(cfg)
        elif args.command == "converge":
            out = cmd_converge(cfg, _parse_list(args.n), tuple(args.modes.split(",")),
                               args.t, args.shock_width)
        elif args.command == "compare":
            times = _parse_list(args.t, float) if args.t else None
            out = cmd_compare(cfg, _parse_list(args.n), times, args.self_check,
                              args.shock_width)
        else:
            out = cmd_sample(cfg, _parse_list(args.n), tuple(args.modes.split(",")))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MergeError, FloatingPointError, RuntimeError, ValueError) as exc:
        print(f"solver aborted: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"wrote {out}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
