"""Experiment orchestration: one (system, noise, method, seed) run and noise-level sweeps."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, noise, odesim, sindy
from .config import ExperimentConfig, effective_c3, resolve, with_updates
from .metrics import ErrorReport, coeff_error, rel_error
from .siren import SirenConfig
from .train import TrainConfig, fit

log = logging.getLogger(__name__)

OUTPUT_ENV = "RKTVINR_OUTPUT"
RESULT_COLUMNS = ("system", "method", "sigma2", "seed", "e_X", "e_dX", "e_Xi", "status", "artifacts")
AGG_COLUMNS = ("system", "method", "sigma2", "e_X", "e_dX", "e_Xi", "n_ok")


def default_levels() -> list[float]:
    """{1} plus {1, 2/3, 1/3} x 10^-k for k = 1..4, largest first."""
    levels = [1.0] + [mult * 10.0 ** -k for k in (1, 2, 3, 4) for mult in (1.0, 2.0 / 3.0, 1.0 / 3.0)]
    return sorted(levels, reverse=True)


@dataclass
class SweepSpec:
    levels: list = field(default_factory=default_levels)
    methods: list = field(default_factory=lambda: ["RKTV", "StdINR"])
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])

    def __post_init__(self):
        if any(not lv > 0 for lv in self.levels):
            raise ValueError("sweep levels must be positive")
        self.levels = sorted((float(v) for v in self.levels), reverse=True)


@dataclass
class RunResult:
    system: str
    method: str
    sigma2: float
    seed: int
    report: ErrorReport | None
    status: str = "ok"
    artifacts: str = ""
    wall_ms: float = 0.0

    def row(self) -> list[str]:
        r = self.report
        fmt = lambda v: "" if v is None else format(float(v), ".17g")  # noqa: E731
        return [self.system, self.method, format(self.sigma2, ".17g"), str(self.seed),
                fmt(r and r.e_state), fmt(r and r.e_deriv), fmt(r and r.e_coeff),
                self.status, self.artifacts]


def output_root(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output_dir or os.environ.get(OUTPUT_ENV, "results"))


def run_dir(root: Path, system: str, method: str, sigma2: float, seed: int) -> Path:
    return root / system / method / f"sigma2={sigma2:.6g}" / f"seed={seed}"


def ground_truth(cfg: ExperimentConfig):
    system = odesim.make_system(cfg.system, cfg.overrides)
    traj = odesim.simulate(system, cfg.x0, (cfg.grid.t0, cfg.grid.t1), cfg.grid.h)
    return system, odesim.rescale(traj, cfg.rescale)


def denoise(cfg: ExperimentConfig, noisy: odesim.Trajectory, seed: int, workdir: Path | None = None):
    """Dispatch on ``cfg.method``; NN methods also write checkpoint and loss history."""
    siren_cfg = SirenConfig(out_dim=noisy.n, t_domain=(noisy.t0, noisy.t1),
                            hidden_layers=cfg.siren.hidden_layers, width=cfg.siren.width,
                            omega0=cfg.siren.omega0)
    method = cfg.method
    if method == "RKTV":
        tc = TrainConfig(c1=cfg.train.c1, c2=cfg.train.c2, c3=effective_c3(cfg), lr=cfg.train.lr,
                         iters=cfg.train.iters, seed=seed)
        res = fit(noisy, siren_cfg, tc)
        if workdir is not None:
            res.params.save(workdir / "checkpoint.json")
            res.write_history(workdir / "loss_history.csv")
        return baselines.DenoiseOutput(res.denoised.states, res.denoised.derivs, "RKTV")
    if method == "StdINR":
        out, params, history = baselines.std_inr(
            noisy, siren_cfg, lr=cfg.train.lr, iters=cfg.train.iters,
            weight_decay=cfg.std_inr.weight_decay, seed=seed, return_params=True)
        if workdir is not None:
            params.save(workdir / "checkpoint.json")
            _write_rows(workdir / "loss_history.csv", ("iter", "L", "L_fit", "sq_norm"),
                        [[i] + [format(float(v), ".17g") for v in row] for i, row in enumerate(history)])
        return out
    if method == "SavitzkyGolay":
        return baselines.savitzky_golay(noisy.states, noisy.h, cfg.savgol.window, cfg.savgol.degree)
    if method == "TVR":
        return baselines.tvr_differentiate(noisy.states, noisy.h, cfg.tvr.alpha, cfg.tvr.iterations,
                                           cfg.tvr.eps)
    if method == "Spline":
        return baselines.smoothing_spline(noisy.states, noisy.times, cfg.spline.lam)
    raise ValueError(f"unknown method {method!r}")


def run_one(cfg: ExperimentConfig, seed: int, root: Path | None = None) -> RunResult:
    """simulate -> rescale -> corrupt -> denoise -> identify -> metrics, artifacts on disk."""
    cfg = resolve(cfg)
    root = output_root(cfg) if root is None else Path(root)
    sigma2 = float(cfg.noise.relative_level)
    workdir = run_dir(root, cfg.system, cfg.method, sigma2, seed)
    workdir.mkdir(parents=True, exist_ok=True)
    result = RunResult(cfg.system, cfg.method, sigma2, int(seed), None,
                       artifacts=workdir.relative_to(root).as_posix())
    start = time.perf_counter()
    stage = "config"
    try:
        (workdir / "config.yaml").write_text(with_updates(cfg, {"seeds": [int(seed)]}).to_yaml())
        stage = "simulate"
        system, clean = ground_truth(cfg)
        clean.to_csv(workdir / "clean.csv")
        stage = "corrupt"
        noisy = noise.corrupt(clean, noise.NoiseSpec(sigma2, cfg.noise.distribution, int(seed)))
        noisy.to_csv(workdir / "noisy.csv")
        stage = "denoise"
        out = denoise(cfg, noisy, int(seed), workdir)
        est = out.trajectory(clean)
        est.to_csv(workdir / "denoised.csv")
        _write_residuals(workdir / "residuals.csv", noisy.states - est.states, clean.states)
        e_state = rel_error(clean.states, est.states)
        e_deriv = rel_error(clean.derivs, est.derivs)
        result.report = ErrorReport(e_state, e_deriv)
        stage = "identify"
        spec = sindy.LibrarySpec(cfg.library.poly_degree, cfg.library.trig)
        model = sindy.identify(est, spec, cfg.library.threshold, cfg.library.max_sweeps,
                               cfg.library.ridge)
        model.xi_csv(workdir / "xi.csv")
        (workdir / "model.json").write_text(model.to_json() + "\n")
        xi_true = sindy.true_coefficients(system, spec, cfg.rescale)
        result.report = ErrorReport(e_state, e_deriv, coeff_error(xi_true, model.xi))
    except Exception as exc:  # any stage failure becomes a row, not a crash
        result.status = f"error:{stage}:{type(exc).__name__}: {exc}".replace("\n", " ")
        (workdir / "error.txt").write_text(traceback.format_exc())
        log.warning("run %s failed at %s: %s", result.artifacts, stage, exc)
    result.wall_ms = (time.perf_counter() - start) * 1e3
    return result


def _write_residuals(path: Path, residuals: np.ndarray, clean: np.ndarray) -> None:
    """Estimated noise (observation minus estimate) per entry, for histograms."""
    rows = [[i, j + 1, format(float(residuals[i, j]), ".17g")]
            for i in range(residuals.shape[0]) for j in range(residuals.shape[1])]
    _write_rows(path, ("row", "var", "residual"), rows)


def _write_rows(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue(), newline="")


def _task(args):
    cfg_dict, seed, root = args
    import threadpoolctl

    with threadpoolctl.threadpool_limits(1):
        return run_one(ExperimentConfig.from_dict(cfg_dict), seed, Path(root))


def run_sweep(sweep: SweepSpec, base: ExperimentConfig, workers: int = 1,
              root: Path | None = None) -> list[RunResult]:
    """Every (level, method, seed) point; rows ordered level-descending, then method, then seed."""
    base = resolve(base)
    root = output_root(base) if root is None else Path(root)
    root.mkdir(parents=True, exist_ok=True)
    tasks = []
    for level in sweep.levels:
        for method in sweep.methods:
            cfg = with_updates(base, {"noise.relative_level": level, "method": method})
            for seed in sweep.seeds:
                tasks.append((cfg.to_dict(), int(seed), str(root)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    write_results(root, results)
    return results


def write_results(root: Path, results: list[RunResult]) -> None:
    _write_rows(root / "results.csv", RESULT_COLUMNS, [r.row() for r in results])
    # wall time is the one non-deterministic output, so it stays out of the CSVs
    timings = [{"artifacts": r.artifacts, "wall_ms": round(r.wall_ms, 1)} for r in results]
    (root / "timings.json").write_text(json.dumps(timings, indent=1) + "\n")
    write_aggregates(root, read_results(root / "results.csv"))


def read_results(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def aggregate(rows: list[dict]) -> list[dict]:
    """Median over seeds of each metric per (system, method, sigma2), failed runs skipped."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["system"], r["method"], float(r["sigma2"])), []).append(r)
    out = []
    for (system, method, s2), members in groups.items():
        ok = [r for r in members if r["status"] == "ok"]
        agg = {"system": system, "method": method, "sigma2": s2, "n_ok": len(ok)}
        for col in ("e_X", "e_dX", "e_Xi"):
            vals = [float(r[col]) for r in ok if r[col] != ""]
            agg[col] = float(np.median(vals)) if vals else float("nan")
        out.append(agg)
    return out


def write_aggregates(root: Path, rows: list[dict]) -> list[dict]:
    agg = aggregate(rows)
    fmt = lambda v: format(float(v), ".17g")  # noqa: E731
    _write_rows(root / "aggregate.csv", AGG_COLUMNS,
                [[a["system"], a["method"], fmt(a["sigma2"]), fmt(a["e_X"]), fmt(a["e_dX"]),
                  fmt(a["e_Xi"]), a["n_ok"]] for a in agg])
    # one wide table per metric and system: sigma2 down, methods across
    for system in sorted({a["system"] for a in agg}):
        sub = [a for a in agg if a["system"] == system]
        methods = list(dict.fromkeys(a["method"] for a in sub))
        levels = sorted({a["sigma2"] for a in sub}, reverse=True)
        lookup = {(a["method"], a["sigma2"]): a for a in sub}
        for col in ("e_X", "e_dX", "e_Xi"):
            body = [[fmt(s2)] + [fmt(lookup[(m, s2)][col]) if (m, s2) in lookup else ""
                                  for m in methods] for s2 in levels]
            _write_rows(root / f"median_{col}_{system}.csv", ["sigma2"] + methods, body)
    return agg


def format_report(agg: list[dict]) -> str:
    lines = [f"{'system':<10} {'method':<14} {'sigma2':>10} {'e_X':>10} {'e_dX':>10} {'e_Xi':>10} {'ok':>3}"]
    for a in agg:
        lines.append(f"{a['system']:<10} {a['method']:<14} {a['sigma2']:>10.3g} {a['e_X']:>10.3e} "
                     f"{a['e_dX']:>10.3e} {a['e_Xi']:>10.3e} {a['n_ok']:>3}")
    return "\n".join(lines)
