"""Command-line entry point.

    sch-lab <subcommand> --config <file> [--out <dir>] [--workers <n>]
            [--seed-override <u64>]

Subcommands run the corresponding experiment and write CSV/JSONL outputs
plus a config-hash manifest under the output directory.  Detected
blow-up is a successful experiment outcome (exit 0); invalid configs and
numerical failures exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, validate
from .dynamics import estimate_Theta
from .ensemble import (
    EnsembleConfig,
    decay_experiment,
    lyapunov_experiment,
    measure_experiment,
    stability_experiment,
    write_report,
)
from .integrate import run
from .noise import check_lyapunov_condition
from .psdo import estimate_Xi, estimate_symmetrized_order
from .spectral import GridFunction, TorusGrid, random_band_limited


def _initial_state(cfg: RunConfig) -> GridFunction:
    grid = TorusGrid(cfg.sim.n_points)
    ic = cfg.raw.get("initial", {"kind": "sine", "amplitude": 1.0})
    kind = ic.get("kind", "sine")
    amp = float(ic.get("amplitude", 1.0))
    if kind == "sine":
        return GridFunction.from_callable(grid, lambda x: amp * np.sin(ic.get("mode", 1) * x))
    if kind == "cosine":
        return GridFunction.from_callable(grid, lambda x: amp * np.cos(ic.get("mode", 1) * x))
    if kind == "random_band":
        rng = np.random.default_rng(int(ic.get("seed", 0)))
        u = random_band_limited(grid, int(ic.get("k_max", grid.n_points // 4)), rng)
        return amp * u
    raise ConfigError([f"unknown initial condition kind {kind!r}"])


def _manifest(cfg: RunConfig, out_dir: Path, t_start: float, extra: dict) -> None:
    record = {
        "config_hash": cfg.config_hash,
        "tool_version": __version__,
        "wall_clock_s": time.time() - t_start,
        **extra,
    }
    (out_dir / "manifest.json").write_text(json.dumps(record, sort_keys=True, indent=2))


def _cmd_simulate(cfg: RunConfig, out_dir: Path) -> dict:
    traj = run(cfg.sim, _initial_state(cfg))
    with open(out_dir / "trajectory.csv", "w") as fh:
        traj.write_csv(fh)
    if traj.failure:
        raise RuntimeError(f"numerical failure: {traj.failure}")
    return {"steps": len(traj.times), "blowup": traj.blowup}


def _cmd_ensemble(cfg: RunConfig, out_dir: Path) -> dict:
    p = cfg.experiment_params
    ens = EnsembleConfig(paths=int(p.get("paths", 16)), base=cfg.sim)
    u0 = _initial_state(cfg)
    from .ensemble import run_paths

    trajs = run_paths(ens, u0)
    blowups = sum(1 for t in trajs if t.blowup)
    failures = sum(1 for t in trajs if t.failure)
    series = np.stack([t.diagnostics["h1_sq"] for t in trajs if not t.failure])
    with open(out_dir / "ensemble.csv", "w") as fh:
        fh.write("t,mean_h1_sq,se\n")
        mean = series.mean(axis=0)
        se = series.std(axis=0, ddof=1) / np.sqrt(series.shape[0])
        for t, m, e in zip(trajs[0].times, mean, se):
            fh.write(f"{t:.10g},{m:.12g},{e:.12g}\n")
    return {"paths": ens.paths, "blowups": blowups, "failures": failures}


def _cmd_decay(cfg: RunConfig, out_dir: Path) -> dict:
    p = cfg.experiment_params
    ens = EnsembleConfig(paths=int(p.get("paths", 256)), base=cfg.sim)
    report = decay_experiment(
        ens,
        _initial_state(cfg),
        cfg.sim.drift.damping,
        c0_estimate=float(p.get("c0_estimate", 0.0)),
        Xi_estimate=float(p.get("Xi_estimate", 0.0)),
    )
    report["config_hash"] = cfg.config_hash
    report["seed"] = cfg.sim.seed
    with open(out_dir / "decay.jsonl", "w") as fh:
        write_report(fh, report)
    if report["valid"]:
        with open(out_dir / "decay.csv", "w") as fh:
            fh.write("t,mean_h1_sq,se,envelope,margin\n")
            for row in zip(report["times"], report["mean_h1_sq"], report["se"],
                           report["envelope"], report["margin"]):
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")
    return {"valid": report["valid"]}


def _cmd_lyapunov(cfg: RunConfig, out_dir: Path) -> dict:
    p = cfg.experiment_params
    g0 = float(p.get("g0", 1.0))
    g = lambda t: g0  # noqa: E731
    grid = TorusGrid(cfg.sim.n_points)
    rng = np.random.default_rng(int(p.get("sample_seed", 7)))
    samples = [
        float(a) * random_band_limited(grid, grid.n_points // 4, rng)
        for a in np.geomspace(0.1, 10.0, int(p.get("condition_samples", 100)))
    ]
    cond = check_lyapunov_condition(
        cfg.sim.ito_spec,
        cfg.sim.q_bank,
        cfg.sim.drift.damping,
        g,
        samples,
        s=cfg.sim.diagnostic_s,
        Xi=float(p.get("Xi_estimate", 0.0)),
        Theta=float(p.get("Theta_estimate", 0.0)),
    )
    ens = EnsembleConfig(paths=int(p.get("paths", 256)), base=cfg.sim)
    report = lyapunov_experiment(ens, _initial_state(cfg), g, condition_report=cond)
    report["config_hash"] = cfg.config_hash
    with open(out_dir / "lyapunov.jsonl", "w") as fh:
        write_report(fh, report)
    if report.get("valid"):
        with open(out_dir / "lyapunov.csv", "w") as fh:
            fh.write("t,mean_V,se,bound,margin\n")
            for row in zip(report["times"], report["mean_V"], report["se"],
                           report["bound"], report["margin"]):
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")
    return {"valid": report.get("valid", False), "condition_holds": cond["holds"]}


def _cmd_stability(cfg: RunConfig, out_dir: Path) -> dict:
    p = cfg.experiment_params
    grid = TorusGrid(cfg.sim.n_points)
    rng = np.random.default_rng(int(p.get("perturbation_seed", 11)))
    pert = random_band_limited(grid, int(p.get("perturbation_k_max", 4)), rng)
    ens = EnsembleConfig(paths=int(p.get("paths", 64)), base=cfg.sim)
    report = stability_experiment(
        ens,
        _initial_state(cfg),
        pert,
        [float(d) for d in p.get("deltas", [0.1, 0.05, 0.025, 0.0125])],
        sigma=float(cfg.sigma),
    )
    report["config_hash"] = cfg.config_hash
    with open(out_dir / "stability.jsonl", "w") as fh:
        write_report(fh, report)
    return {"rows": len(report["rows"])}


def _cmd_measure(cfg: RunConfig, out_dir: Path) -> dict:
    p = cfg.experiment_params
    report = measure_experiment(
        cfg.sim,
        _initial_state(cfg),
        paths=int(p.get("paths", 128)),
        start_horizons=[float(T) for T in p.get("start_horizons", [4, 8, 16])],
        handoffs=[float(n) for n in p.get("handoffs", [1, 2])],
        t_eval=float(p.get("t_eval", 0.5)),
    )
    report["config_hash"] = cfg.config_hash
    with open(out_dir / "measure.jsonl", "w") as fh:
        write_report(fh, report)
    return {"ladder": report["ladder"]}


def _cmd_estimate_constants(cfg: RunConfig, out_dir: Path) -> dict:
    p = cfg.experiment_params
    eta = float(p.get("eta", 1.0))
    s = cfg.sim.diagnostic_s
    samples = int(p.get("samples", 200))
    resolutions = [int(n) for n in p.get("resolutions", [64, 128])]
    result = {"config_hash": cfg.config_hash, "eta": eta, "s": s, "Xi": {}, "Theta": {}}
    for n in resolutions:
        grid = TorusGrid(n)
        result["Xi"][str(n)] = estimate_Xi(cfg.sim.q_bank, eta, samples, cfg.sim.seed, grid)
        result["Theta"][str(n)] = estimate_Theta(s, samples, cfg.sim.seed, grid)
    result["orders"] = [
        estimate_symmetrized_order(spec, resolutions) for spec in cfg.sim.q_bank
    ]
    (out_dir / "constants.json").write_text(json.dumps(result, indent=2, sort_keys=True))
    return {"Xi": result["Xi"], "Theta": result["Theta"]}


def _cmd_blowup_scan(cfg: RunConfig, out_dir: Path) -> dict:
    p = cfg.experiment_params
    rows = []
    for eps in p.get("epsilons", [0.0, 0.25, 0.5]):
        sim = replace(cfg.sim, drift=replace(cfg.sim.drift, epsilon=float(eps)))
        from .integrate import BlowupMonitor

        sim = replace(sim, monitor=BlowupMonitor(
            w1inf_threshold=cfg.sim.monitor.w1inf_threshold,
            slope_integral_threshold=cfg.sim.monitor.slope_integral_threshold,
        ))
        traj = run(sim, _initial_state(cfg))
        rows.append({"epsilon": float(eps), "blowup": traj.blowup, "failure": traj.failure})
    (out_dir / "blowup_scan.json").write_text(json.dumps(rows, indent=2))
    return {"rows": len(rows)}


_COMMANDS = {
    "simulate": _cmd_simulate,
    "ensemble": _cmd_ensemble,
    "decay": _cmd_decay,
    "lyapunov": _cmd_lyapunov,
    "stability": _cmd_stability,
    "measure": _cmd_measure,
    "estimate-constants": _cmd_estimate_constants,
    "blowup-scan": _cmd_blowup_scan,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sch-lab")
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None)
    parser.add_argument("--workers", type=int,
                        default=int(os.environ.get("SCH_LAB_WORKERS", "1")))
    parser.add_argument("--seed-override", type=int, default=None)
    args = parser.parse_args(argv)

    t_start = time.time()
    try:
        cfg = validate(Path(args.config).read_text())
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.subcommand != cfg.experiment:
        print(
            f"config error: experiment.kind={cfg.experiment!r} does not match "
            f"subcommand {args.subcommand!r}",
            file=sys.stderr,
        )
        return 2
    if args.seed_override is not None:
        cfg.sim = replace(cfg.sim, seed=args.seed_override)

    out_dir = Path(args.out or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        extra = _COMMANDS[args.subcommand](cfg, out_dir)
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _manifest(cfg, out_dir, t_start, extra)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
