"""
Command-line pipeline: calibrate, synth, run, correct, compare-mc, report.

Exit status is 0 on success, 1 for configuration or usage problems (including
a missing library) and 2 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .config import PRESETS, RunConfig, load_config, resolve_workers
from .errors import ConfigError, DomainError, IntegrationError
from .experiments import (
    CorrectionSettings,
    classify_pairs,
    compare_mc,
    gain_experiment,
    gain_summary,
    mismatch_experiment,
    noise_sweep,
    suite_rate,
)
from .fdd import ModeLibrary, build_library, mode_system, score
from .galerkin import integrate_gpc
from .jcr import contours
from .montecarlo import McConfig
from .scenario import MeasurementTrace, ModeSchedule, mode_steady_state, steady_suite, synthesize

NOISE_NOTE = "noise sigma = pct/100 * |T_c,true - T_f|, applied independently to both channels"


class UsageError(Exception):
    pass


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, Path):
        return str(v)
    raise TypeError(f"not serialisable: {type(v).__name__}")


def _j_column(label: str) -> str:
    return "J_" + label.lower().replace("faulty", "f")


def _library_path(cfg: RunConfig) -> Path:
    return cfg.out / "library.json"


def _load_library(cfg: RunConfig) -> ModeLibrary:
    path = _library_path(cfg)
    if not path.exists():
        raise UsageError(f"no library at {path}; run 'battfdd calibrate' with the same --out first")
    return ModeLibrary.from_json(path.read_text())


def _correction_settings(cfg: RunConfig, noise_pct: float) -> CorrectionSettings:
    c = cfg.correction
    s = cfg.simulation
    return CorrectionSettings(c.window, c.min_fill, c.box, c.n_starts, c.t_end, s.sample_period, s.dt, s.perturbation_hold, noise_pct)


def _schedule(cfg: RunConfig) -> ModeSchedule:
    labels = cfg.simulation.schedule
    share = cfg.simulation.t_end / len(labels)
    return ModeSchedule(tuple((k * share, cfg.mode(lbl)) for k, lbl in enumerate(labels)))


# -- subcommands --------------------------------------------------------------


def cmd_calibrate(cfg: RunConfig, workers: int) -> dict:
    lib = build_library(cfg.battery, cfg.modes, cfg.jcr.n_samples, cfg.jcr.n_bins, cfg.seed, dt=cfg.simulation.dt)
    _library_path(cfg).write_text(lib.to_json() + "\n")
    summary = {}
    for e in lib.entries:
        cs = contours(e.jcr, cfg.jcr.levels)
        cs.to_csv(cfg.out / f"contours_{e.mode.label}.csv")
        closed = mode_steady_state(cfg.battery, e.mode)
        summary[e.mode.label] = {
            "mean_Tc": e.tc.mean(), "mean_Ts": e.ts.mean(), "std_Tc": e.tc.std(), "std_Ts": e.ts.std(),
            "closed_form_Tc": closed.T_c, "closed_form_Ts": closed.T_s,
        }
    _write_json(cfg.out / "calibration.json", {"modes": summary, "seed": cfg.seed})
    return summary


def cmd_synth(cfg: RunConfig, workers: int) -> MeasurementTrace:
    s = cfg.simulation
    trace = synthesize(_schedule(cfg), s.dt, s.t_end, cfg.noise_pct, s.perturbation_hold, cfg.seed, cfg.battery, s.sample_period)
    trace.to_csv(cfg.out / "trace.csv")
    _write_json(cfg.out / "trace.json", {
        "seed": cfg.seed, "noise_pct": cfg.noise_pct, "noise_definition": NOISE_NOTE,
        "schedule": [[t, m.label] for t, m in trace.schedule.entries], "n_samples": len(trace),
    })
    return trace


def _write_classification(path, times, truth, results, labels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "true_mode", "predicted_mode"] + [_j_column(lbl) for lbl in labels] + ["membership_prob"])
        for t, tr, r in zip(times, truth, results):
            w.writerow([repr(float(t)), tr, r.predicted] + [repr(float(r.J.get(lbl, np.nan))) for lbl in labels]
                       + [repr(float(r.membership))])


def cmd_run(cfg: RunConfig, workers: int, trace_path=None) -> dict:
    lib = _load_library(cfg)
    labels = lib.labels
    report = {"noise_definition": NOISE_NOTE, "seed": cfg.seed}
    if trace_path is not None:
        trace = MeasurementTrace.from_csv(trace_path)
        keep = trace.time >= cfg.simulation.classify_after
        if not keep.any():
            raise UsageError(f"no trace samples at or after classify_after={cfg.simulation.classify_after} s")
        pairs = trace.measured_pairs()[keep]
        results = classify_pairs(pairs, lib, workers)
        truth = list(trace.mode[keep])
        times = trace.time[keep]
        rep = score([r.predicted for r in results], truth, labels)
        report.update({"source": str(trace_path), **rep.to_dict()})
    else:
        suite, results, rep = suite_rate(lib, cfg.modes, cfg.n_per_mode, cfg.noise_pct, cfg.seed, cfg.battery, workers)
        truth = list(suite.labels)
        times = np.arange(len(suite)) * cfg.simulation.sample_period
        report.update({"source": "steady-state suite", "noise_pct": cfg.noise_pct, **rep.to_dict()})
    _write_classification(cfg.out / "classification.csv", times, truth, results, labels)

    if cfg.noise_sweep:
        rates = noise_sweep(lib, cfg.modes, cfg.noise_sweep, cfg.n_per_mode, cfg.seed, cfg.battery, workers)
        report["noise_sweep"] = {f"{k:g}": v for k, v in rates.items()}
        levels = list(rates)
        report["noise_sweep_monotone"] = all(rates[a] >= rates[b] for a, b in zip(levels, levels[1:]))
    if cfg.mismatch_pct > 0:
        table = mismatch_experiment(
            cfg.battery, cfg.modes, cfg.mismatch_pct, cfg.mismatch_draws, cfg.n_per_mode,
            _correction_settings(cfg, cfg.noise_pct), cfg.seed, cfg.jcr.n_samples, cfg.jcr.n_bins, workers,
        )
        _write_json(cfg.out / "mismatch.json", table)
        report["mismatch"] = {k: table[k] for k in ("mismatch_pct", "draws", "r_FCR_without", "r_FCR_with", "uplift_pp")}
    _write_json(cfg.out / "report.json", report)
    return report


def cmd_correct(cfg: RunConfig, workers: int) -> dict:
    pct = cfg.mismatch_pct
    outcomes = gain_experiment(cfg.battery, cfg.modes, pct, _correction_settings(cfg, cfg.noise_pct), cfg.seed, workers)
    summary = {}
    for label, o in outcomes.items():
        o.gains.to_csv(cfg.out / f"gains_{label}.csv")
        summary[label] = {**gain_summary(o.gains), "corrected_means": o.corrected_means, "measured_means": o.measured_means}
    settle1 = float(np.mean([v["settle_mu1"] for v in summary.values()]))
    settle2 = float(np.mean([v["settle_mu2"] for v in summary.values()]))
    result = {
        "mismatch_pct": pct,
        "modes": summary,
        "all_plateau": all(v["plateau_mu1"] and v["plateau_mu2"] for v in summary.values()),
        "mean_settle_mu1": settle1,
        "mean_settle_mu2": settle2,
        "mu2_settles_first": settle2 < settle1,
    }
    _write_json(cfg.out / "correction.json", result)
    return result


def cmd_compare_mc(cfg: RunConfig, workers: int) -> dict:
    lib = _load_library(cfg)
    mc = McConfig(cfg.mc.n_samples, cfg.seed, cfg.mc.reuse_samples, max_evals=cfg.mc.max_evals)
    result = compare_mc(cfg.battery, lib, cfg.modes, cfg.mc.n_eval, cfg.noise_pct, cfg.seed + 1, mc)
    result["noise_definition"] = NOISE_NOTE
    _write_json(cfg.out / "compare.json", result)
    return result


def cmd_report(cfg: RunConfig, workers: int) -> dict:
    out = cfg.out
    made = []
    summary = {}
    lib_path = _library_path(cfg)
    if lib_path.exists():
        lib = ModeLibrary.from_json(lib_path.read_text())
        points = truth = None
        cls_path = out / "classification.csv"
        if cls_path.exists():
            with open(cls_path, newline="") as fh:
                rows = list(csv.DictReader(fh))
            suite = steady_suite(cfg.modes, cfg.n_per_mode, cfg.noise_pct, cfg.seed, cfg.battery)
            if len(rows) == len(suite):
                points, truth = suite.pairs(), suite.labels
        made.append(plotting.plot_jcr(lib, out / "jcr.png", cfg.jcr.levels, points, truth))
    trace_path = out / "trace.csv"
    if trace_path.exists():
        made.append(plotting.plot_trace(MeasurementTrace.from_csv(trace_path), out / "trace.png"))
    gain_files = sorted(glob.glob(str(out / "gains_*.csv")))
    if gain_files:
        from .correction import GainTrajectory

        trajectories = {}
        order = {m.label: k for k, m in enumerate(cfg.modes)}
        for f in sorted(gain_files, key=lambda f: order.get(Path(f).stem[6:], 99)):
            data = np.genfromtxt(f, delimiter=",", names=True)
            data = np.atleast_1d(data)
            trajectories[Path(f).stem[6:]] = GainTrajectory(data["step"], data["time_s"], data["mu1"], data["mu2"], data["J"])
        made.append(plotting.plot_gains(trajectories, out / "gains.png"))
    for name in ("report", "compare", "correction", "calibration"):
        p = out / f"{name}.json"
        if p.exists():
            summary[name] = json.loads(p.read_text())
    sweep = summary.get("report", {}).get("noise_sweep")
    if sweep:
        made.append(plotting.plot_rates([float(k) for k in sweep], {"gPC": list(sweep.values())}, out / "rates.png"))
    mode = cfg.mode(cfg.simulation.schedule[0])
    traj = integrate_gpc(mode_system(cfg.battery, mode), cfg.simulation.t_end, cfg.simulation.dt)
    traj.to_csv(out / f"gpc_{mode.label}.csv")
    made.append(plotting.plot_variance(traj, out / "variance.png"))
    summary["figures"] = [str(Path(p).name) for p in made]
    _write_json(out / "summary.json", summary)
    return summary


COMMANDS = {
    "calibrate": cmd_calibrate,
    "synth": cmd_synth,
    "run": cmd_run,
    "correct": cmd_correct,
    "compare-mc": cmd_compare_mc,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="battfdd", description="Stochastic fault diagnosis for a two-node battery thermal model.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file overriding the defaults")
    common.add_argument("--preset", choices=PRESETS, help="named reproduction profile")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--workers", type=int, help="worker processes (0: all cores)")
    common.add_argument("--noise-pct", type=float, dest="noise_pct")
    common.add_argument("--mismatch-pct", type=float, dest="mismatch_pct")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "run":
            p.add_argument("--trace", type=Path, help="classify a trace CSV instead of a steady-state suite")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        cfg = load_config(args.config, args.preset, {
            "run.seed": args.seed,
            "run.out": None if args.out is None else str(args.out),
            "run.workers": args.workers,
            "noise.pct": args.noise_pct,
            "mismatch.pct": args.mismatch_pct,
        })
        cfg.out.mkdir(parents=True, exist_ok=True)
        workers = resolve_workers(cfg.workers)
        kwargs = {"trace_path": args.trace} if args.command == "run" else {}
        result = COMMANDS[args.command](cfg, workers, **kwargs)
    except (ConfigError, UsageError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, IntegrationError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(_brief(args.command, result), default=_jsonable))
    return 0


def _brief(command, result):
    if command == "run":
        keys = ("r_FCR", "n_total", "noise_sweep", "mismatch")
        return {k: result[k] for k in keys if k in result}
    if command == "compare-mc":
        return {"gpc_r_FCR": result["gpc"]["r_FCR"], "mc_r_FCR": result["mc"]["r_FCR"], "speedup": result["speedup"]}
    if command == "synth":
        return {"n_samples": len(result)}
    if command == "correct":
        return {k: result[k] for k in ("all_plateau", "mean_settle_mu1", "mean_settle_mu2", "mu2_settles_first")}
    if command == "report":
        return {"figures": result["figures"]}
    return {"modes": list(result)}


if __name__ == "__main__":
    sys.exit(main())
