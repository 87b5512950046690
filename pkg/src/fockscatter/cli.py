"""Command-line entry point: ``fockscatter {run,preset,compare,sweep,validate}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments as E
from .mps import TruncationError
from .pulses import PulseError
from .scattering import ScatteringError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_COMPARISON = 0, 1, 2, 3


def _apply_overrides(data: dict, args) -> dict:
    data = dict(data)
    grids = dict(data.get("grids", {}))
    if args.dt is not None:
        grids["dt"] = args.dt
    if args.grid_points is not None:
        grids["n_omega"] = args.grid_points
    if grids:
        data["grids"] = grids
    return data


def _run(data: dict, args, default_dir: str) -> int:
    cfg = E.config_from_dict(_apply_overrides(data, args))
    out = Path(args.out_dir or default_dir)
    manifest = E.run_experiment(cfg, out, threads=args.threads)
    print(f"wrote {out / 'manifest.json'}")
    cmp = manifest.get("comparison")
    if cmp is not None:
        _print_report(cmp)
        if not cmp["passed"]:
            return EXIT_COMPARISON
    return EXIT_OK


def _print_report(rep: dict) -> None:
    for name, d in rep["differences"].items():
        flag = "PASS" if d["passed"] else "FAIL"
        kind = "rel" if d["relative"] else "abs"
        print(f"{flag} {name:6s} {kind} {d['metric']:.3e} (tol {d['tol']:.0e}) max_abs {d['max_abs']:.3e} L2 {d['l2']:.3e}")


def _sweep(data: dict, args) -> int:
    if args.grid_points is not None:
        data = dict(data, grids=dict(data.get("grids", {}), n_omega=args.grid_points))
    cfg = E.sweep_from_dict(data)
    out = Path(args.out_dir or "runs/sweep")
    out.mkdir(parents=True, exist_ok=True)
    table = E.sweep_max_population(cfg, out / "max_population.csv", threads=args.threads)
    failed = [r for r in table if r["error"]]
    manifest = {"schema_version": E.SCHEMA_VERSION, "config": E._jsonable(data),
                "cells": len(table), "failed": failed}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"wrote {out / 'max_population.csv'} ({len(table)} cells, {len(failed)} failed)")
    return EXIT_NUMERICAL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=None, help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker count for maps and sweeps")
    common.add_argument("--dt", type=float, default=None, help="override the MPS time step")
    common.add_argument("--grid-points", type=int, default=None, help="override the frequency grid size")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="fockscatter", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run an experiment config")
    p.add_argument("config")
    p = sub.add_parser("preset", parents=[common], help="run a shipped preset (use 'list' to show them)")
    p.add_argument("name")
    p = sub.add_parser("compare", parents=[common], help="compare two single-engine runs")
    p.add_argument("manifest_a")
    p.add_argument("manifest_b")
    p = sub.add_parser("sweep", parents=[common], help="max-population sweep")
    p.add_argument("config", nargs="?", default=None, help="sweep config (default: fig7 preset)")
    p = sub.add_parser("validate", parents=[common], help="run the oracle suite")
    p.add_argument("--svd-cutoff", type=float, default=1e-10)
    p.add_argument("--omega-max", type=float, default=30.0)
    p.add_argument("--no-cross", action="store_true", help="skip the cross-engine check")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _run(E.load_config(args.config), args, f"runs/{Path(args.config).stem}")
        if args.command == "preset":
            if args.name == "list":
                print("\n".join(E.preset_names()))
                return EXIT_OK
            data = E.load_preset(args.name)
            if data.get("kind") == "sweep":
                return _sweep(data, args)
            return _run(data, args, f"runs/{args.name}")
        if args.command == "sweep":
            data = E.load_preset("fig7") if args.config is None else E.load_config(args.config)
            return _sweep(data, args)
        if args.command == "compare":
            rep = E.compare_methods(args.manifest_a, args.manifest_b).to_dict()
            _print_report(rep)
            if args.out_dir:
                Path(args.out_dir).mkdir(parents=True, exist_ok=True)
                (Path(args.out_dir) / "comparison.json").write_text(json.dumps(rep, indent=2))
            return EXIT_OK if rep["passed"] else EXIT_COMPARISON
        if args.command == "validate":
            kw = {"svd_cutoff": args.svd_cutoff, "omega_max": args.omega_max,
                  "cross_engine": not args.no_cross}
            if args.dt is not None:
                kw["dt"] = args.dt
            if args.grid_points is not None:
                kw["n_omega"] = args.grid_points
            rep = E.validate(**kw)
            for c in rep["checks"]:
                print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']:.3e} (tol {c['tol']:.0e}) {c['detail']}")
            if args.out_dir:
                Path(args.out_dir).mkdir(parents=True, exist_ok=True)
                (Path(args.out_dir) / "validate.json").write_text(json.dumps(rep, indent=2))
            return EXIT_OK if rep["passed"] else EXIT_NUMERICAL
    except E.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except E.ComparisonError as exc:
        print(f"comparison error: {exc}", file=sys.stderr)
        return EXIT_COMPARISON
    except (ScatteringError, TruncationError, PulseError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
