"""
Two-node lumped thermal model of a cylindrical Li-ion cell.

The core node is heated by Joule losses and exchanges heat with the surface
node through the conduction resistance; the surface node exchanges heat with
the ambient air through the convection resistance::

    C_c dT_c/dt = I^2 R_e + (T_s - T_c) / R_c
    C_s dT_s/dt = (T_f - T_s) / R_u - (T_s - T_c) / R_c

Temperatures are in degC, time in seconds.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import numpy as np

from .errors import DomainError, IntegrationError


@dataclass(frozen=True)
class BatteryParams:
    """Physical constants of the cell (defaults from the reference parameter table)."""

    C_c: float = 268.0  # J/K
    C_s: float = 18.8  # J/K
    R_e: float = 0.010  # Ohm
    R_c: float = 2.0  # K/W
    R_u: float = 1.5  # K/W
    T_f: float = 25.0  # degC

    def __post_init__(self):
        for name in ("C_c", "C_s", "R_e", "R_c", "R_u"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")
        if not math.isfinite(self.T_f):
            raise DomainError(f"T_f must be finite, got {self.T_f!r}")


class ThermalState(NamedTuple):
    T_c: float
    T_s: float


@dataclass(frozen=True)
class ConstantResistance:
    R_e: float = 0.010


@dataclass(frozen=True)
class AffineResistance:
    """R_e = beta0 + beta1 * SOC + beta2 * T_c."""

    beta0: float
    beta1: float = 0.0
    beta2: float = 0.0


ResistanceLaw = Union[ConstantResistance, AffineResistance]


def resistance(law: ResistanceLaw, soc: float = 0.5, T_c: float = 25.0) -> float:
    if not 0.0 <= soc <= 1.0:
        raise DomainError(f"SOC must lie in [0, 1], got {soc!r}")
    if isinstance(law, ConstantResistance):
        value = law.R_e
    else:
        value = law.beta0 + law.beta1 * soc + law.beta2 * T_c
    if not value > 0:
        raise DomainError(f"unphysical electrical resistance {value!r}")
    return value


def derivs(state, params: BatteryParams, current: float, R_e: float | None = None):
    """Time derivatives (dT_c/dt, dT_s/dt) in degC/s."""
    T_c, T_s = state
    if not (math.isfinite(T_c) and math.isfinite(T_s) and math.isfinite(current)):
        raise DomainError(f"non-finite input: state={tuple(state)!r}, current={current!r}")
    if R_e is None:
        R_e = params.R_e
    q_cond = (T_s - T_c) / params.R_c
    dTc = (current * current * R_e + q_cond) / params.C_c
    dTs = ((params.T_f - T_s) / params.R_u - q_cond) / params.C_s
    return dTc, dTs


def steady_state(params: BatteryParams, current: float) -> ThermalState:
    """Closed-form equilibrium for a constant current."""
    heat = current * current * params.R_e
    T_s = params.T_f + heat * params.R_u
    return ThermalState(T_s + heat * params.R_c, T_s)


def rk4(rhs: Callable, y0, t0: float, dt: float, n_steps: int) -> np.ndarray:
    """Classical fixed-step RK4; returns the (n_steps + 1, dim) trajectory."""
    y = np.array(y0, dtype=float)
    out = np.empty((n_steps + 1, y.size))
    out[0] = y
    t = t0
    half = 0.5 * dt
    for n in range(n_steps):
        k1 = rhs(t, y)
        k2 = rhs(t + half, y + half * k1)
        k3 = rhs(t + half, y + half * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at step {n + 1}", step=n + 1)
        out[n + 1] = y
        t = t0 + (n + 1) * dt
    return out


def n_steps_for(t_span: float, dt: float) -> int:
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt!r}")
    if t_span < dt:
        raise DomainError(f"t_span ({t_span}) must be >= dt ({dt})")
    return int(math.floor(t_span / dt + 1e-9))


@dataclass
class Trajectory:
    time: np.ndarray
    T_c: np.ndarray
    T_s: np.ndarray

    def __len__(self):
        return len(self.time)

    @property
    def final(self) -> ThermalState:
        return ThermalState(float(self.T_c[-1]), float(self.T_s[-1]))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "T_c", "T_s"])
            for row in zip(self.time, self.T_c, self.T_s):
                w.writerow([repr(float(v)) for v in row])


def integrate(
    params: BatteryParams,
    current,
    t_span: float,
    dt: float = 1.0,
    init=None,
    law: ResistanceLaw | None = None,
    soc: float = 0.5,
) -> Trajectory:
    """Integrate the thermal model with fixed-step RK4.

    ``current`` is either a constant or a callable ``t -> amperes``.  With an
    affine resistance law the Joule term is re-evaluated at every stage from
    the instantaneous core temperature; SOC is held constant.
    """
    n = n_steps_for(t_span, dt)
    if init is None:
        init = (params.T_f, params.T_f)
    current_fn = current if callable(current) else (lambda t, _i=float(current): _i)
    C_c, C_s, R_c, R_u, T_f = params.C_c, params.C_s, params.R_c, params.R_u, params.T_f

    def rhs(t, y):
        T_c, T_s = y
        i = current_fn(t)
        R_e = params.R_e if law is None else resistance(law, soc, T_c)
        q_cond = (T_s - T_c) / R_c
        return np.array([(i * i * R_e + q_cond) / C_c, ((T_f - T_s) / R_u - q_cond) / C_s])

    y = rk4(rhs, init, 0.0, dt, n)
    return Trajectory(np.arange(n + 1) * dt, y[:, 0], y[:, 1])
