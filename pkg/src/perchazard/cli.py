"""Command-line front end.

Subcommands::

    perchazard simulate      --preset fig3 --out runs/fig3
    perchazard hazard-curve  --preset fig1-left --out runs/fig1
    perchazard fit           runs/fig1/curve.csv --window 0.45 0.575
    perchazard sweep         --preset fig4 --vary driver.theta=0.5,5 --out runs/theta
    perchazard preset list | show NAME

Exit codes: 0 success, 2 invalid configuration, 3 numerical or domain error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io, svg
from .analysis import fit_singularity, hazard_curve, path_summary
from .config import RunConfig, expand_sweep, load_config, load_preset, preset_names, set_dotted
from .errors import (
    CapacityError,
    ConfigError,
    DomainError,
    InsufficientDataError,
    NormalizationError,
    PositivityError,
    SingularityError,
)
from .hazard import PercolationConstants, singularity_exponent
from .market import run_simulation

NUMERIC_ERRORS = (DomainError, PositivityError, SingularityError, InsufficientDataError,
                  CapacityError, NormalizationError, FloatingPointError)

log = logging.getLogger("perchazard")


# ---------------------------------------------------------------------------
# configuration from flags


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_assignments(items, multi=False) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"{item!r}: expected KEY=VALUE")
        out[key] = [_parse_value(v) for v in value.split(",")] if multi else _parse_value(value)
    return out


def build_config(args, command: str) -> RunConfig:
    if args.preset and args.config:
        raise ConfigError("give either --preset or --config, not both")
    if args.preset:
        d = load_preset(args.preset).to_dict()
    elif args.config:
        d = load_config(args.config).to_dict()
    else:
        d = {}
    d["command"] = "simulate" if command == "sweep" else command
    if args.seed is not None:
        d["seed"] = args.seed
    if getattr(args, "replicas", None) is not None:
        d["replicas"] = args.replicas
    if getattr(args, "steps", None) is not None:
        d["steps"] = args.steps
    for key, value in _parse_assignments(getattr(args, "param", None)).items():
        set_dotted(d, key, value)
    return RunConfig.from_dict(d)


# ---------------------------------------------------------------------------
# simulate


def _simulate_replica(args):
    cfg_dict, replica, eta = args
    cfg = RunConfig.from_dict(cfg_dict)
    return run_simulation(cfg.lattice_spec(), cfg.hazard_model(), cfg.driver_spec(), cfg.price_params(eta),
                          cfg.steps, cfg.mode, cfg.seed, replica)


def _map(fn, tasks, parallelism):
    if parallelism > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def run_replicas(cfg: RunConfig, parallelism: int = 1, eta: float | None = None):
    """All replicas of a simulate config, in replica order."""
    d = cfg.to_dict()
    return _map(_simulate_replica, [(d, r, eta) for r in range(cfg.replicas)], parallelism)


def _path_svg(path, mp, title):
    svg.write_panels(path, [
        {"x": mp.t, "series": {"p": mp.p}, "title": f"{title}: occupancy p(t)",
         "marks": mp.t[mp.crash == 1]},
        {"x": mp.t, "series": {"h": mp.h}, "title": "hazard h(t)"},
        {"x": mp.t, "series": {"ln price": mp.log_price}, "title": "log price",
         "marks": mp.t[mp.crash == 1]},
    ])


def write_simulation(cfg: RunConfig, out: Path, results, fmt: str, emit_svg: bool, suffix: str = "") -> list[dict]:
    ext = "json" if fmt == "json" else "csv"
    header = cfg.echo()
    summaries = []
    for mp, events in results:
        r = int(mp.meta["replica"])
        io.write_path(out / f"path_r{r:03d}{suffix}.{ext}", mp, header)
        io.write_events(out / f"crashes_r{r:03d}{suffix}.{ext}", events, header)
        if emit_svg:
            _path_svg(out / f"path_r{r:03d}{suffix}.svg", mp, cfg.name or "run")
        s = path_summary(mp, p_c=cfg.hazard_model().constants.p_c)
        s["replica"] = r
        summaries.append(s)
    return summaries


def cmd_simulate(args) -> int:
    cfg = build_config(args, "simulate")
    out = Path(args.out)
    results = run_replicas(cfg, args.parallelism)
    summaries = write_simulation(cfg, out, results, args.format, args.emit_svg)
    if cfg.overlay_zero_volatility:
        write_simulation(cfg, out, run_replicas(cfg, args.parallelism, eta=0.0), args.format,
                         args.emit_svg, suffix="_eta0")
    for s in summaries:
        print(f"replica {s['replica']}: {s['steps']} steps, {s['crashes']} crashes, "
              f"{s['excursions']} near-critical excursions")
    print(f"wrote {len(summaries)} replica(s) to {out}")
    return 0


# ---------------------------------------------------------------------------
# hazard-curve and fit


def cmd_hazard_curve(args) -> int:
    cfg = build_config(args, "hazard-curve")
    out = Path(args.out)
    model = cfg.hazard_model()
    curve = hazard_curve(cfg.lattice_spec(), model, cfg.p_values(), cfg.replicas, cfg.mode, cfg.seed,
                         args.parallelism)
    ext = "json" if args.format == "json" else "csv"
    target = io.write_curve(out / f"curve.{ext}", curve, cfg.echo())
    if args.emit_svg:
        svg.write_panels(out / "curve.svg", [
            {"x": curve.p, "series": {"h(p)": curve.h_mean}, "title": f"{cfg.name or 'hazard'}: h(p)",
             "marks": [model.constants.p_c]}])
    print(f"wrote {len(curve)} points to {target}")
    return 0


def fit_report(curve, window=None) -> dict:
    model = curve.model or {}
    d = int(model.get("d", 2))
    constants = PercolationConstants.for_dimension(d, model.get("p_c"))
    fit = fit_singularity(curve, constants, window)
    report = {
        "exponent": fit.exponent,
        "stderr": fit.stderr,
        "ci95": list(fit.ci95),
        "amplitude": fit.amplitude,
        "window": list(fit.window),
        "r_squared": fit.r_squared,
        "n_points": fit.n_points,
        "residual_rms": fit.residual_rms,
        "weighted": fit.weighted,
        "p_c": constants.p_c,
        "theory": None,
        "theory_exact": None,
    }
    exps = model.get("exponents") or []
    if len(exps) == 1:
        a = float(exps[0])
        report["theory"] = float(singularity_exponent(a, constants))
        if d == 2:
            report["theory_exact"] = str(singularity_exponent(a, constants, exact=True))
    return report


def _format_report(rep: dict) -> str:
    lines = [
        "power-law fit of h ~ A (p_c - p)^(-alpha)",
        f"  window        [{rep['window'][0]:.6g}, {rep['window'][1]:.6g}]  (p_c = {rep['p_c']})",
        f"  points        {rep['n_points']} ({'weighted' if rep['weighted'] else 'unweighted'})",
        f"  alpha         {rep['exponent']:.6g} +- {rep['stderr']:.3g}",
        f"  95% CI        [{rep['ci95'][0]:.6g}, {rep['ci95'][1]:.6g}]",
        f"  amplitude     {rep['amplitude']:.6g}",
        f"  R^2           {rep['r_squared']:.6f}",
    ]
    if rep["theory"] is not None:
        exact = f" = {rep['theory_exact']}" if rep["theory_exact"] else ""
        lines.append(f"  theory        {rep['theory']:.6g}{exact}  ((a - mu) / sigma)")
    return "\n".join(lines)


def cmd_fit(args) -> int:
    curve = io.read_curve(args.curve)
    rep = fit_report(curve, tuple(args.window) if args.window else None)
    text = _format_report(rep)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "fit.txt").write_text(text + "\n")
        (out / "fit.json").write_text(json.dumps(rep, indent=1) + "\n")
    return 0


# ---------------------------------------------------------------------------
# sweep

SUMMARY_KEYS = ("crashes", "crash_rate", "crashes_per_step", "mean_bubble_amplitude", "excursions",
                "excursion_crash_fraction")


def _mean(values):
    vals = [v for v in values if not (isinstance(v, float) and math.isnan(v))]
    return math.fsum(vals) / len(vals) if vals else math.nan


def cmd_sweep(args) -> int:
    base = build_config(args, "sweep")
    ranges = dict(base.sweep)
    ranges.update(_parse_assignments(args.vary, multi=True))
    if not ranges:
        raise ConfigError("sweep: no parameter ranges (use --vary KEY=V1,V2 or a 'sweep' block)")
    out = Path(args.out)
    cells = expand_sweep(base, ranges)
    rows = []
    for i, (params, d) in enumerate(cells):
        row = {"cell": i, **params}
        try:
            cfg = RunConfig.from_dict(d)
            summaries = write_simulation(cfg, out / f"cell_{i:03d}", run_replicas(cfg, args.parallelism),
                                         args.format, args.emit_svg)
            row.update({k: _mean([s[k] for s in summaries]) for k in SUMMARY_KEYS})
            row["status"] = "ok"
        except (ConfigError, *NUMERIC_ERRORS) as exc:
            row.update({k: math.nan for k in SUMMARY_KEYS})
            row["status"] = f"failed: {exc}"
            log.warning("sweep cell %d %s failed: %s", i, params, exc)
        rows.append(row)
        print(f"cell {i} {params}: {row['status']}")
    keys = list(ranges)
    cols = {"cell": np.array([r["cell"] for r in rows])}
    for k in keys:
        vals = [r[k] for r in rows]
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            cols[k] = np.array(vals, dtype=float)
    for k in SUMMARY_KEYS:
        cols[k] = np.array([r[k] for r in rows], dtype=float)
    # lists keep the dotted parameter names out of the flattened header keys
    header = {"sweep": {"ranges": [[k, ranges[k]] for k in keys],
                        "cells": [{k: r[k] for k in keys} for r in rows],
                        "status": [r["status"] for r in rows]},
              **base.echo()}
    io.write_table(out / "summary.csv", "sweep-summary", header, cols)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"wrote {len(rows)} cells to {out} ({failed} failed)")
    return 0


# ---------------------------------------------------------------------------
# presets


def cmd_preset(args) -> int:
    if args.action == "list":
        for name in preset_names():
            print(f"{name:12s} {load_preset(name).description}")
        return 0
    if not args.name:
        raise ConfigError("preset show: NAME required")
    print(json.dumps(load_preset(args.name).to_dict(), indent=1))
    return 0


# ---------------------------------------------------------------------------
# entry point


def _add_run_flags(p, steps=True):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--preset", help="named preset (see 'preset list')")
    p.add_argument("--seed", type=int, help="master seed (overrides the configuration)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--replicas", type=int)
    p.add_argument("--parallelism", type=int, default=1, help="worker processes")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="override a configuration entry, e.g. hazard.a=2.5")
    p.add_argument("--emit-svg", action="store_true", help="also write SVG line charts")
    if steps:
        p.add_argument("--steps", type=int)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perchazard", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate price paths")
    _add_run_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("hazard-curve", help="ensemble hazard h(p) on a grid of occupancy fractions")
    _add_run_flags(p, steps=False)
    p.set_defaults(func=cmd_hazard_curve)

    p = sub.add_parser("fit", help="fit the singularity exponent of a hazard curve file")
    p.add_argument("curve", help="curve file written by hazard-curve")
    p.add_argument("--window", type=float, nargs=2, metavar=("P_LOW", "P_HIGH"))
    p.add_argument("--out", help="directory for fit.txt and fit.json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="grid of simulations with a summary table")
    _add_run_flags(p)
    p.add_argument("--vary", action="append", metavar="KEY=V1,V2,...", help="parameter range")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("preset", help="list or show the bundled presets")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_preset)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for line in exc.problems:
            print(f"  {line}", file=sys.stderr)
        return 2
    except NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
