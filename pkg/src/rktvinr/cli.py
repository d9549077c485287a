"""Command line entry point: ``rktvinr <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, harness, noise, odesim, sindy
from .config import ConfigError, ExperimentConfig, resolve, with_updates
from .metrics import coeff_error, rel_error


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    updates = {}
    for key, dotted in (("system", "system"), ("method", "method"), ("sigma2", "noise.relative_level"),
                        ("distribution", "noise.distribution"), ("rescale", "rescale"),
                        ("t0", "grid.t0"), ("t1", "grid.t1"), ("h", "grid.h"),
                        ("omega0", "siren.omega0"), ("c3", "train.c3"), ("iters", "train.iters"),
                        ("lr", "train.lr"), ("degree", "library.poly_degree"),
                        ("threshold", "library.threshold"), ("out_dir", "output_dir")):
        value = getattr(args, key, None)
        if value is not None:
            updates[dotted] = value
    for item in getattr(args, "set", None) or []:
        key, _, raw = item.partition("=")
        updates[key] = json.loads(raw) if raw[:1] in "[{0123456789-tfn" else raw
    return resolve(with_updates(cfg, updates))


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML experiment config; flags override it")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config field by dotted key (repeatable)")


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    _, traj = harness.ground_truth(cfg)
    text = traj.to_csv(args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def cmd_corrupt(args) -> int:
    traj = odesim.Trajectory.from_csv(args.input)
    spec = noise.NoiseSpec(args.sigma2, args.distribution, args.seed)
    text = noise.corrupt(traj, spec).to_csv(args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def cmd_denoise(args) -> int:
    cfg = _load_config(args)
    data = odesim.Trajectory.from_csv(args.input)
    workdir = Path(args.workdir) if args.workdir else None
    if workdir:
        workdir.mkdir(parents=True, exist_ok=True)
    out = harness.denoise(cfg, data, args.seed, workdir)
    text = out.trajectory(data).to_csv(args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def cmd_identify(args) -> int:
    traj = odesim.Trajectory.from_csv(args.input)
    spec = sindy.LibrarySpec(args.degree, args.trig)
    model = sindy.identify(traj, spec, args.threshold, args.max_sweeps, args.ridge)
    if args.model:
        Path(args.model).write_text(model.to_json() + "\n")
    text = model.xi_csv(args.out)
    if args.out is None:
        sys.stdout.write(text)
    for line in model.equations():
        print(line, file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    truth = odesim.Trajectory.from_csv(args.truth)
    est = odesim.Trajectory.from_csv(args.estimate)
    report = {"e_X": rel_error(truth.states, est.states)}
    if truth.derivs is not None and est.derivs is not None:
        report["e_dX"] = rel_error(truth.derivs, est.derivs)
    if args.model:
        model = sindy.SindyModel.from_json(Path(args.model).read_text())
        system = odesim.make_system(args.system)
        report["e_Xi"] = coeff_error(sindy.true_coefficients(system, model.library, args.rescale),
                                     model.xi)
    print(json.dumps(report, indent=1))
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    spec = harness.SweepSpec(
        levels=args.levels if args.levels else harness.default_levels(),
        methods=args.methods or ["RKTV", "StdINR"],
        seeds=args.seeds if args.seeds is not None else cfg.seeds,
    )
    root = harness.output_root(cfg)
    results = harness.run_sweep(spec, cfg, workers=args.workers, root=root)
    print(harness.format_report(harness.aggregate(harness.read_results(root / "results.csv"))))
    failed = [r for r in results if r.status != "ok"]
    for r in failed:
        print(f"FAILED {r.artifacts}: {r.status}", file=sys.stderr)
    return 2 if failed else 0


def cmd_report(args) -> int:
    root = Path(args.results)
    rows = harness.read_results(root / "results.csv")
    agg = harness.write_aggregates(root, rows)
    print(harness.format_report(agg))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rktvinr", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a preset system and write its trajectory CSV")
    _common(p)
    p.add_argument("--system", choices=odesim.SYSTEM_NAMES)
    p.add_argument("--t0", type=float)
    p.add_argument("--t1", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--rescale", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("corrupt", help="add calibrated noise to a trajectory CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--sigma2", type=float, default=1e-2)
    p.add_argument("--distribution", choices=noise.DISTRIBUTIONS, default="Gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("denoise", help="estimate states and derivatives from a noisy trajectory CSV")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=baselines.METHODS)
    p.add_argument("--system", choices=odesim.SYSTEM_NAMES,
                   help="selects system-specific defaults (omega0, c3)")
    p.add_argument("--omega0", type=float)
    p.add_argument("--c3", type=float, help="TV weight at the reference noise level")
    p.add_argument("--sigma2", type=float, help="noise level of the input; scales c3")
    p.add_argument("--iters", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workdir", help="directory for checkpoint and loss history")
    p.add_argument("--out")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("identify", help="run STLSQ on a trajectory CSV with derivative columns")
    p.add_argument("--input", required=True)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--trig", action="store_true")
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--max-sweeps", type=int, default=10)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--model", help="also write the model JSON here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("evaluate", help="relative errors of an estimate against the truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--model", help="model JSON; needs --system for the true coefficients")
    p.add_argument("--system", choices=odesim.SYSTEM_NAMES, default="LinearOsc")
    p.add_argument("--rescale", type=float, default=1.0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="run every (noise level, method, seed) point")
    _common(p)
    p.add_argument("--system", choices=odesim.SYSTEM_NAMES)
    p.add_argument("--levels", type=float, nargs="+")
    p.add_argument("--methods", nargs="+", choices=baselines.METHODS)
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--distribution", choices=noise.DISTRIBUTIONS)
    p.add_argument("--iters", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", dest="out_dir",
                   help=f"results root (default ${harness.OUTPUT_ENV} or ./results)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="recompute and print median tables from results.csv")
    p.add_argument("results", help="results root containing results.csv")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with np.errstate(over="raise", invalid="raise"):
            return args.func(args)
    except (ConfigError, KeyError, ValueError, OSError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
