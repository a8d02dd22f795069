"""
Operating modes, mode schedules and synthetic measurement traces.

A fault is a shift of the mean current and/or conduction resistance with
Gaussian perturbations superimposed.  Perturbations are redrawn every
``perturbation_hold`` seconds and held constant in between.

Measurement noise is Gaussian with a standard deviation of ``noise_pct``
percent of the instantaneous core-to-ambient temperature rise.  It is added
to the surface temperature and, independently, to the core temperature
estimate that accompanies every sample.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .thermal import BatteryParams, rk4, steady_state

SIGMA_I = 0.45  # A
SIGMA_RC = 0.066  # K/W


@dataclass(frozen=True)
class OperatingMode:
    label: str
    I_mean: float
    Rc_mean: float
    I_std: float = SIGMA_I
    Rc_std: float = SIGMA_RC

    def shifted(self, I_factor: float = 1.0, Rc_factor: float = 1.0) -> "OperatingMode":
        return OperatingMode(self.label, self.I_mean * I_factor, self.Rc_mean * Rc_factor, self.I_std, self.Rc_std)


NORMAL = OperatingMode("Normal", 13.8, 1.68)
FAULTY1 = OperatingMode("Faulty1", 16.2, 1.68)
FAULTY2 = OperatingMode("Faulty2", 13.8, 2.28)
FAULTY3 = OperatingMode("Faulty3", 16.2, 2.28)
DEFAULT_MODES = (NORMAL, FAULTY1, FAULTY2, FAULTY3)


def mode_by_label(label: str, modes=DEFAULT_MODES) -> OperatingMode:
    for m in modes:
        if m.label == label:
            return m
    raise KeyError(label)


@dataclass(frozen=True)
class ModeSchedule:
    entries: tuple  # ((start_s, OperatingMode), ...)

    def __post_init__(self):
        if not self.entries:
            raise DomainError("schedule is empty")
        starts = [s for s, _ in self.entries]
        if starts[0] != 0:
            raise DomainError("first schedule entry must start at t=0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise DomainError("schedule start times must be strictly increasing")

    @classmethod
    def single(cls, mode: OperatingMode) -> "ModeSchedule":
        return cls(((0.0, mode),))

    def active(self, t: float) -> OperatingMode:
        current = self.entries[0][1]
        for start, mode in self.entries:
            if t >= start:
                current = mode
            else:
                break
        return current


@dataclass
class MeasurementTrace:
    time: np.ndarray
    mode: np.ndarray  # labels
    I_true: np.ndarray
    Rc_true: np.ndarray
    Tc_true: np.ndarray
    Ts_true: np.ndarray
    Ts_meas: np.ndarray
    Tc_meas: np.ndarray
    seed: int
    noise_pct: float
    schedule: ModeSchedule = field(repr=False, default=None)

    def __len__(self):
        return len(self.time)

    def label_at(self, t: float) -> str:
        if t < self.time[0] or t > self.time[-1]:
            raise IndexError(f"t={t} outside trace span [{self.time[0]}, {self.time[-1]}]")
        if self.schedule is not None:
            return self.schedule.active(t).label
        k = int(np.searchsorted(self.time, t, side="right")) - 1
        return str(self.mode[k])

    def measured_pairs(self) -> np.ndarray:
        return np.column_stack([self.Tc_meas, self.Ts_meas])

    def to_csv(self, path):
        cols = ["time_s", "mode", "I_true", "Rc_true", "Tc_true", "Ts_true", "Ts_meas", "Tc_meas"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for k in range(len(self.time)):
                w.writerow(
                    [repr(float(self.time[k])), str(self.mode[k])]
                    + [repr(float(a[k])) for a in (self.I_true, self.Rc_true, self.Tc_true, self.Ts_true, self.Ts_meas, self.Tc_meas)]
                )

    @classmethod
    def from_csv(cls, path, seed=-1, noise_pct=float("nan")) -> "MeasurementTrace":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        col = lambda k: np.array([float(r[k]) for r in rows])
        return cls(
            col("time_s"), np.array([r["mode"] for r in rows]), col("I_true"), col("Rc_true"),
            col("Tc_true"), col("Ts_true"), col("Ts_meas"), col("Tc_meas"), seed, noise_pct,
        )


def noise_sigma(params: BatteryParams, T_c, noise_pct: float):
    return (noise_pct / 100.0) * np.abs(np.asarray(T_c) - params.T_f)


def _draw_rc(rng, mode: OperatingMode) -> float:
    while True:
        r = mode.Rc_mean + mode.Rc_std * rng.standard_normal()
        if r > 0:
            return r


def synthesize(
    schedule: ModeSchedule,
    dt: float = 1.0,
    t_end: float = 7200.0,
    noise_pct: float = 2.0,
    perturbation_hold: float = 60.0,
    seed: int = 0,
    params: BatteryParams | None = None,
    sample_period: float | None = None,
    init=None,
) -> MeasurementTrace:
    """Simulate a labelled trace with perturbed inputs and noisy measurements.

    The model is integrated with RK4 at ``dt``; samples are recorded every
    ``sample_period`` seconds (default: every step).
    """
    params = params or BatteryParams()
    if noise_pct < 0:
        raise DomainError(f"noise_pct must be >= 0, got {noise_pct}")
    if perturbation_hold < dt:
        raise DomainError("perturbation_hold must be >= dt")
    sample_period = dt if sample_period is None else sample_period
    stride = int(round(sample_period / dt))
    if stride < 1 or abs(stride * dt - sample_period) > 1e-9:
        raise DomainError("sample_period must be a positive multiple of dt")
    n_steps = int(math.floor(t_end / dt + 1e-9))
    rng = np.random.default_rng(seed)
    input_rng, noise_rng = rng.spawn(2)

    # piecewise-constant inputs, one draw per hold interval
    n_hold = int(math.floor(n_steps * dt / perturbation_hold)) + 1
    hold_I = np.empty(n_hold)
    hold_R = np.empty(n_hold)
    for h in range(n_hold):
        mode = schedule.active(h * perturbation_hold)
        hold_I[h] = mode.I_mean + mode.I_std * input_rng.standard_normal()
        hold_R[h] = _draw_rc(input_rng, mode)

    def inputs(t):
        h = min(int(math.floor(t / perturbation_hold + 1e-9)), n_hold - 1)
        return hold_I[h], hold_R[h]

    C_c, C_s, R_e, R_u, T_f = params.C_c, params.C_s, params.R_e, params.R_u, params.T_f
    y = np.array(init if init is not None else (T_f, T_f), dtype=float)
    states = np.empty((n_steps + 1, 2))
    states[0] = y
    for n in range(n_steps):
        # inputs are frozen over each step so switching times stay on the grid
        i, r = inputs(n * dt)
        heat = i * i * R_e

        def rhs(t, x, heat=heat, r=r):
            q = (x[1] - x[0]) / r
            return np.array([(heat + q) / C_c, ((T_f - x[1]) / R_u - q) / C_s])

        y = rk4(rhs, y, n * dt, dt, 1)[-1]
        states[n + 1] = y

    idx = np.arange(0, n_steps + 1, stride)
    time = idx * dt
    I_true = np.array([inputs(t)[0] for t in time])
    Rc_true = np.array([inputs(t)[1] for t in time])
    Tc = states[idx, 0]
    Ts = states[idx, 1]
    sigma = noise_sigma(params, Tc, noise_pct)
    Ts_meas = Ts + sigma * noise_rng.standard_normal(len(idx))
    Tc_meas = Tc + sigma * noise_rng.standard_normal(len(idx))
    labels = np.array([schedule.active(t).label for t in time])
    return MeasurementTrace(time, labels, I_true, Rc_true, Tc, Ts, Ts_meas, Tc_meas, seed, noise_pct, schedule)


@dataclass
class SteadySuite:
    """Independent labelled steady-state samples (one perturbation draw each)."""

    labels: np.ndarray
    xi: np.ndarray
    Tc_true: np.ndarray
    Ts_true: np.ndarray
    Tc_meas: np.ndarray
    Ts_meas: np.ndarray

    def __len__(self):
        return len(self.labels)

    def pairs(self) -> np.ndarray:
        return np.column_stack([self.Tc_meas, self.Ts_meas])


def steady_suite(
    modes,
    n_per_mode: int,
    noise_pct: float,
    seed: int,
    params: BatteryParams | None = None,
) -> SteadySuite:
    """Draw steady-state samples for each mode and corrupt them with noise."""
    params = params or BatteryParams()
    rng = np.random.default_rng(seed)
    labels, xis, tcs, tss = [], [], [], []
    for mode in modes:
        xi = rng.standard_normal((n_per_mode, 2))
        I = mode.I_mean + mode.I_std * xi[:, 0]
        R = mode.Rc_mean + mode.Rc_std * xi[:, 1]
        for k in np.flatnonzero(R <= 0):
            while R[k] <= 0:
                xi[k, 1] = rng.standard_normal()
                R[k] = mode.Rc_mean + mode.Rc_std * xi[k, 1]
        heat = I * I * params.R_e
        Ts = params.T_f + heat * params.R_u
        labels += [mode.label] * n_per_mode
        xis.append(xi)
        tcs.append(Ts + heat * R)
        tss.append(Ts)
    Tc = np.concatenate(tcs)
    Ts = np.concatenate(tss)
    sigma = noise_sigma(params, Tc, noise_pct)
    noise = rng.standard_normal((len(Tc), 2))
    return SteadySuite(
        np.array(labels), np.concatenate(xis), Tc, Ts, Tc + sigma * noise[:, 0], Ts + sigma * noise[:, 1]
    )


def mode_steady_state(params: BatteryParams, mode: OperatingMode):
    """Closed-form steady state at a mode's mean inputs."""
    p = BatteryParams(params.C_c, params.C_s, params.R_e, mode.Rc_mean, params.R_u, params.T_f)
    return steady_state(p, mode.I_mean)
