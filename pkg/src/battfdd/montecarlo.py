"""
Monte Carlo reference: forward propagation and sampling-based identification.

Identification searches the mean and standard deviation of current and
conduction resistance so that ``N`` simulated steady states sit as close as
possible to one measured pair; the identified means are then matched to the
nearest operating mode.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .optimize import minimize
from .scenario import OperatingMode
from .thermal import BatteryParams


@dataclass
class McPropagation:
    I: np.ndarray
    Rc: np.ndarray
    T_c: np.ndarray
    T_s: np.ndarray

    @property
    def mean(self):
        return float(self.T_c.mean()), float(self.T_s.mean())

    @property
    def std(self):
        return float(self.T_c.std(ddof=1)), float(self.T_s.std(ddof=1))


def _positive_rc(rng, mean, std, n):
    r = mean + std * rng.standard_normal(n)
    bad = r <= 0
    while bad.any():
        r[bad] = mean + std * rng.standard_normal(int(bad.sum()))
        bad = r <= 0
    return r


def steady_states(params: BatteryParams, I, Rc):
    heat = np.square(I) * params.R_e
    Ts = params.T_f + heat * params.R_u
    return Ts + heat * Rc, Ts


def mc_propagate(params: BatteryParams, mode: OperatingMode, n: int, seed: int = 0) -> McPropagation:
    if n < 2:
        raise DomainError(f"need at least 2 samples, got {n}")
    rng = np.random.default_rng(seed)
    I = mode.I_mean + mode.I_std * rng.standard_normal(n)
    Rc = _positive_rc(rng, mode.Rc_mean, mode.Rc_std, n)
    Tc, Ts = steady_states(params, I, Rc)
    return McPropagation(I, Rc, Tc, Ts)


@dataclass(frozen=True)
class McConfig:
    n_samples: int = 100
    seed: int = 0
    reuse_samples: bool = True
    # (I_mean, I_std, Rc_mean, Rc_std)
    bounds: tuple = ((10.0, 20.0), (0.0, 1.0), (1.2, 2.8), (0.0, 0.2))
    max_evals: int = 800

    def __post_init__(self):
        if self.n_samples < 1:
            raise DomainError(f"n_samples must be >= 1, got {self.n_samples}")


@dataclass
class McIdentification:
    I_mean: float
    I_std: float
    Rc_mean: float
    Rc_std: float
    objective: float
    elapsed: float
    converged: bool
    n_evals: int


def mc_identify(measured, cfg: McConfig = McConfig(), params: BatteryParams | None = None, starts=None) -> McIdentification:
    """Minimise the sum of squared deviations of N simulated pairs from ``measured``.

    With ``reuse_samples`` the same standard-normal draws are used for every
    candidate (common random numbers); otherwise each evaluation draws anew.
    ``starts`` defaults to the centre of the search box; see ``mode_starts``.
    """
    params = params or BatteryParams()
    a, b = (float(v) for v in measured)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError(f"measured pair must be finite, got {measured!r}")
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_samples
    fixed = rng.standard_normal((2, n)) if cfg.reuse_samples else None
    R_e, R_u, T_f = params.R_e, params.R_u, params.T_f

    def objective(lam):
        i_mean, i_std, r_mean, r_std = lam
        z = fixed if fixed is not None else rng.standard_normal((2, n))
        I = i_mean + i_std * z[0]
        Rc = r_mean + r_std * z[1]
        if (Rc <= 0).any():
            Rc = np.where(Rc > 0, Rc, _positive_rc(rng, r_mean, r_std, n))
        heat = I * I * R_e
        Ts = T_f + heat * R_u
        Tc = Ts + heat * Rc
        return float(np.sum((Tc - a) ** 2) + np.sum((Ts - b) ** 2))

    bounds = cfg.bounds
    if starts is None:
        starts = [tuple(0.5 * (lo + hi) for lo, hi in bounds)]
    res = minimize(objective, bounds, starts, xatol=1e-6, fatol=1e-10, max_evals=cfg.max_evals)
    elapsed = time.perf_counter() - t0
    i_mean, i_std, r_mean, r_std = res.x
    return McIdentification(i_mean, i_std, r_mean, r_std, res.fun, elapsed, res.converged, res.n_evals)


def mc_classify(ident: McIdentification, modes) -> str:
    """Nearest mode in (I, R_c) mean space, each axis scaled by its level gap."""
    modes = list(modes)
    i_levels = sorted({m.I_mean for m in modes})
    r_levels = sorted({m.Rc_mean for m in modes})
    i_scale = (i_levels[-1] - i_levels[0]) or 1.0
    r_scale = (r_levels[-1] - r_levels[0]) or 1.0
    best, best_d = None, math.inf
    for m in modes:
        d = ((ident.I_mean - m.I_mean) / i_scale) ** 2 + ((ident.Rc_mean - m.Rc_mean) / r_scale) ** 2
        if d < best_d:
            best, best_d = m.label, d
    return best


def mode_starts(modes) -> list:
    """One search start per candidate mode, at its prior mean and spread."""
    return [(m.I_mean, m.I_std, m.Rc_mean, m.Rc_std) for m in modes]
