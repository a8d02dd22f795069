"""
End-to-end pipelines shared by the command line and the acceptance tests:
suite classification, noise sweeps, mismatch correction and the Monte Carlo
comparison.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .correction import CorrectionGains, GainTrajectory, WindowSpec, corrected_steady_state, plateau, run_online, settling_step
from .fdd import ModeLibrary, build_library, classify, library_entry, mode_system, score
from .montecarlo import McConfig, mc_classify, mc_identify, mode_starts
from .scenario import ModeSchedule, OperatingMode, steady_suite, synthesize
from .thermal import BatteryParams


def _classify_chunk(args):
    library, pairs = args
    return [classify(p, library) for p in pairs]


def classify_pairs(pairs, library: ModeLibrary, workers: int = 1):
    """Classify every pair; results come back in input order."""
    pairs = np.asarray(pairs, dtype=float)
    if workers <= 1 or len(pairs) < 64:
        return _classify_chunk((library, pairs))
    chunks = np.array_split(pairs, workers * 4)
    with ProcessPoolExecutor(workers) as pool:
        parts = pool.map(_classify_chunk, [(library, c) for c in chunks if len(c)])
    return [r for part in parts for r in part]


def suite_rate(library, modes, n_per_mode, noise_pct, seed, params, workers=1):
    suite = steady_suite(modes, n_per_mode, noise_pct, seed, params)
    results = classify_pairs(suite.pairs(), library, workers)
    report = score([r.predicted for r in results], list(suite.labels), library.labels)
    return suite, results, report


def noise_sweep(library, modes, levels, n_per_mode, seed, params, workers=1) -> dict:
    """r_FCR at each noise level; one fixed-seed suite geometry for all levels."""
    rates = {}
    for pct in levels:
        _, _, rep = suite_rate(library, modes, n_per_mode, pct, seed, params, workers)
        rates[float(pct)] = rep.r_fcr
    return rates


def mismatched_modes(modes, pct: float, rng) -> tuple:
    """Shift each mode's current and resistance means by +/- ``pct`` percent, random sign."""
    signs = rng.choice((-1.0, 1.0), size=(len(modes), 2))
    f = pct / 100.0
    return tuple(m.shifted(1 + f * s[0], 1 + f * s[1]) for m, s in zip(modes, signs))


@dataclass
class CorrectionSettings:
    window: WindowSpec = WindowSpec()
    min_fill: int | None = None
    box: tuple = (-1.0, 1.0)
    n_starts: int = 5
    t_end: float = 10800.0
    sample_period: float = 60.0
    dt: float = 1.0
    perturbation_hold: float = 60.0
    noise_pct: float = 2.0


@dataclass
class CorrectionOutcome:
    label: str
    gains: GainTrajectory
    final: CorrectionGains
    corrected_means: tuple
    measured_means: tuple


def correct_mode(params: BatteryParams, model_mode: OperatingMode, true_mode: OperatingMode, s: CorrectionSettings, seed: int):
    """Run the online correction for one mode on a trace from its true (shifted) plant.

    Returns the outcome and the corrected surrogates (T_c, T_s).
    """
    trace = synthesize(
        ModeSchedule.single(true_mode), s.dt, s.t_end, s.noise_pct, s.perturbation_hold, seed, params, s.sample_period
    )
    sys = mode_system(params, model_mode)
    g = run_online(trace.measured_pairs(), trace.time, s.window, sys, s.dt, box=s.box, n_starts=s.n_starts, min_fill=s.min_fill)
    final = g.final_gains()
    x = corrected_steady_state(sys, final, g.window_mean)
    tc, ts = sys.surrogates(x)
    outcome = CorrectionOutcome(model_mode.label, g, final, (float(x[0]), float(x[sys.n])), tuple(float(v) for v in g.window_mean))
    return outcome, (tc, ts)


def _correct_task(args):
    return correct_mode(*args)


def mismatch_experiment(
    params: BatteryParams,
    modes,
    pct: float,
    draws: int,
    n_per_mode: int,
    settings: CorrectionSettings,
    seed: int = 0,
    jcr_samples: int = 10_000,
    jcr_bins: int = 40,
    workers: int = 1,
) -> dict:
    """Per-mode r_FCR without and with correction, averaged over mismatch draws."""
    modes = tuple(modes)
    library = build_library(params, modes, jcr_samples, jcr_bins, seed)
    labels = library.labels
    plants, tasks = [], []
    for d in range(draws):
        rng = np.random.default_rng([seed, d])
        true = mismatched_modes(modes, pct, rng)
        plants.append(true)
        for k, (m, t) in enumerate(zip(modes, true)):
            tasks.append((params, m, t, settings, 1000 * (seed + 1) + 10 * d + k))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_correct_task, tasks))
    else:
        outcomes = [_correct_task(t) for t in tasks]

    without, with_, per_draw = [], [], []
    for d, true in enumerate(plants):
        chunk = outcomes[d * len(modes) : (d + 1) * len(modes)]
        corrected = ModeLibrary(
            [library_entry(tc, ts, m, jcr_samples, jcr_bins, seed + k) for k, (m, (_, (tc, ts))) in enumerate(zip(modes, chunk))]
        )
        suite = steady_suite(true, n_per_mode, settings.noise_pct, seed + 7919 * (d + 1), params)
        truth = list(suite.labels)
        r0 = score([r.predicted for r in classify_pairs(suite.pairs(), library, workers)], truth, labels)
        r1 = score([r.predicted for r in classify_pairs(suite.pairs(), corrected, workers)], truth, labels)
        without.append([r0.per_mode[lbl] for lbl in labels])
        with_.append([r1.per_mode[lbl] for lbl in labels])
        per_draw.append({
            "plant": {m.label: [m.I_mean, m.Rc_mean] for m in true},
            "without": r0.to_dict(),
            "with": r1.to_dict(),
            "gains": {o.label: list(o.final.pair) for o, _ in chunk},
        })
    without = np.mean(without, axis=0)
    with_ = np.mean(with_, axis=0)
    return {
        "labels": labels,
        "mismatch_pct": pct,
        "draws": draws,
        "r_FCR_without": dict(zip(labels, map(float, without))),
        "r_FCR_with": dict(zip(labels, map(float, with_))),
        "uplift_pp": dict(zip(labels, map(float, 100 * (with_ - without)))),
        "per_draw": per_draw,
    }


def gain_summary(g: GainTrajectory) -> dict:
    q = max(2, len(g) // 4)
    return {
        "n_steps": len(g),
        "final_mu1": float(np.mean(g.mu1[-q:])),
        "final_mu2": float(np.mean(g.mu2[-q:])),
        "plateau_mu1": plateau(g.mu1),
        "plateau_mu2": plateau(g.mu2),
        "settle_mu1": settling_step(g.mu1),
        "settle_mu2": settling_step(g.mu2),
    }


def gain_experiment(params, modes, pct, settings: CorrectionSettings, seed=0, workers=1) -> dict:
    """Gain trajectories for every mode under one random-sign mismatch draw."""
    modes = tuple(modes)
    true = mismatched_modes(modes, pct, np.random.default_rng([seed, 0]))
    tasks = [(params, m, t, settings, 1000 * (seed + 1) + k) for k, (m, t) in enumerate(zip(modes, true))]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_correct_task, tasks))
    else:
        outcomes = [_correct_task(t) for t in tasks]
    return {o.label: o for o, _ in outcomes}


def compare_mc(
    params: BatteryParams,
    library: ModeLibrary,
    modes,
    n_eval: int,
    noise_pct: float,
    seed: int,
    mc: McConfig = McConfig(reuse_samples=False),
) -> dict:
    """gPC and Monte Carlo pipelines on one suite, timed sample by sample."""
    modes = tuple(modes)
    per_mode = math.ceil(n_eval / len(modes))
    suite = steady_suite(modes, per_mode, noise_pct, seed, params)
    pairs = suite.pairs()
    truth = list(suite.labels)

    gpc_pred, gpc_t = [], []
    for p in pairs:
        t0 = time.perf_counter()
        gpc_pred.append(classify(p, library).predicted)
        gpc_t.append(time.perf_counter() - t0)

    starts = mode_starts(modes)
    mc_pred, mc_t = [], []
    for k, p in enumerate(pairs):
        cfg = McConfig(mc.n_samples, mc.seed + k, mc.reuse_samples, mc.bounds, mc.max_evals)
        ident = mc_identify(p, cfg, params, starts)
        mc_pred.append(mc_classify(ident, modes))
        mc_t.append(ident.elapsed)

    labels = library.labels
    g = score(gpc_pred, truth, labels)
    m = score(mc_pred, truth, labels)
    return {
        "n_total": len(pairs),
        "noise_pct": noise_pct,
        "mc_samples": mc.n_samples,
        "gpc": {**g.to_dict(), "mean_seconds": float(np.mean(gpc_t))},
        "mc": {**m.to_dict(), "mean_seconds": float(np.mean(mc_t))},
        "speedup": float(np.mean(mc_t) / np.mean(gpc_t)),
        "low_accuracy": m.r_fcr < 0.5,
    }
