"""
Sliding-window correction gains for the gPC model.

The mean equations of the Galerkin system receive an output-injection term

    dTc_0/dt += mu1 (T_c,meas - Tc_0)
    dTs_0/dt += mu2 (T_s,meas - Ts_0)

and the gains are refitted on every window of ``L`` samples, advancing by
``M`` samples, by minimising the squared mismatch between the corrected mean
predictions and the windowed measurements.  Measurements are held constant
between samples, so a prediction at sample ``i`` only sees data up to
``i - 1``.

The corrected system is linear with piecewise-constant input, so the
propagation over one sample period is the exact product of the RK4 step
matrices; no per-step Python loop is needed inside the objective.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .galerkin import GalerkinSystem
from .optimize import box_starts, minimize

GAIN_BOX = (-1.0, 1.0)


@dataclass(frozen=True)
class WindowSpec:
    L: int = 80
    M: int = 1

    def __post_init__(self):
        if self.L < 2 or not 1 <= self.M <= self.L:
            raise ValueError(f"need L >= 2 and 1 <= M <= L, got L={self.L}, M={self.M}")


@dataclass(frozen=True)
class CorrectionGains:
    mu1: float = 0.0
    mu2: float = 0.0
    converged: bool = True
    objective: float = float("nan")

    @property
    def pair(self):
        return (self.mu1, self.mu2)


def injection(sys: GalerkinSystem, gains) -> np.ndarray:
    """(dim, 2) matrix mapping (T_c, T_s) measurements into the mean rows."""
    mu1, mu2 = gains
    K = np.zeros((sys.dim, 2))
    K[0, 0] = mu1
    K[sys.n, 1] = mu2
    return K


def output_matrix(sys: GalerkinSystem) -> np.ndarray:
    C = np.zeros((2, sys.dim))
    C[0, 0] = 1.0
    C[1, sys.n] = 1.0
    return C


def corrected_rhs(sys: GalerkinSystem, gains, measurement):
    """Right-hand side of the corrected system for a fixed measurement pair."""
    if isinstance(gains, CorrectionGains):
        gains = gains.pair
    K = injection(sys, gains)
    C = output_matrix(sys)
    y = np.asarray(measurement, dtype=float)

    def rhs(t, x):
        return sys.A @ x + sys.b + K @ (y - C @ x)

    return rhs


def corrected_matrices(sys: GalerkinSystem, gains):
    """(A - K C, K) for the corrected linear system."""
    K = injection(sys, gains)
    return sys.A - K @ output_matrix(sys), K


def sample_propagator(A: np.ndarray, period: float, dt: float = 1.0):
    """Exact RK4 map over one sample period for x' = A x + c with constant c.

    Returns (P, S) with x(t + period) = P x(t) + S c.
    """
    n_sub = max(1, int(round(period / dt)))
    h = period / n_sub
    d = A.shape[0]
    eye = np.eye(d)
    hA = h * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    R = eye + hA + hA2 / 2 + hA3 / 6 + hA3 @ hA / 24
    G = h * (eye + hA / 2 + hA2 / 6 + hA3 / 24)
    aug = np.zeros((2 * d, 2 * d))
    aug[:d, :d] = R
    aug[:d, d:] = G
    aug[d:, d:] = eye
    powered = np.linalg.matrix_power(aug, n_sub)
    return powered[:d, :d], powered[:d, d:]


def _contractive(P) -> bool:
    return float(np.max(np.abs(np.linalg.eigvals(P)))) < 1.0


def coupled_block(A: np.ndarray, seeds) -> np.ndarray:
    """Indices reachable from ``seeds`` through the sparsity pattern of ``A``."""
    # round-off entries from the quadrature are not couplings
    mag = np.abs(A)
    linked = mag > 1e-12 * mag.max()
    linked |= linked.T
    block = set(seeds)
    frontier = list(seeds)
    while frontier:
        i = frontier.pop()
        for j in np.flatnonzero(linked[i]):
            if j not in block:
                block.add(int(j))
                frontier.append(int(j))
    return np.array(sorted(block))


class WindowModel:
    """Corrected-mean predictions over a window of held measurements.

    Only the coefficients coupled to the two means influence the predictions,
    so the window recursion runs on that block alone.
    """

    def __init__(self, sys: GalerkinSystem, period: float, dt: float = 1.0):
        self.sys = sys
        self.period = period
        self.dt = dt
        self.n = sys.n
        self.block = coupled_block(sys.A, (0, sys.n))
        self._A = sys.A[np.ix_(self.block, self.block)]
        self._b = sys.b[self.block]
        self._out = [int(np.flatnonzero(self.block == 0)[0]), int(np.flatnonzero(self.block == sys.n)[0])]

    def propagators(self, gains):
        """Full-state (P, S, K) over one sample period."""
        A, K = corrected_matrices(self.sys, gains)
        P, S = sample_propagator(A, self.period, self.dt)
        return P, S, K

    def simulate(self, gains, x0, y):
        """Full states at every sample of the window, starting from ``x0``."""
        P, S, K = self.propagators(gains)
        drive = (self.sys.b[None, :] + y @ K.T) @ S.T
        states = np.empty((len(y), len(x0)))
        x = np.asarray(x0, dtype=float)
        states[0] = x
        for i in range(1, len(y)):
            x = P @ x + drive[i - 1]
            states[i] = x
        return states

    def stable(self, gains) -> bool:
        return _contractive(self.propagators(gains)[0])

    def predictions(self, gains, x0, y):
        """(T_c, T_s) mean predictions over the window, or None if unstable."""
        mu1, mu2 = gains
        i_c, i_s = self._out
        A = self._A.copy()
        A[i_c, i_c] -= mu1
        A[i_s, i_s] -= mu2
        P, S = sample_propagator(A, self.period, self.dt)
        if not _contractive(P):
            return None
        c = np.repeat(self._b[None, :], len(y), axis=0)
        c[:, i_c] += mu1 * y[:, 0]
        c[:, i_s] += mu2 * y[:, 1]
        drive = c @ S.T
        x = np.asarray(x0, dtype=float)[self.block]
        out = np.empty((len(y), 2))
        out[0] = x[i_c], x[i_s]
        for i in range(1, len(y)):
            x = P @ x + drive[i - 1]
            out[i] = x[i_c], x[i_s]
        return out

    def objective(self, gains, x0, y) -> float:
        # gains that make the corrected model diverge are not admissible
        pred = self.predictions(gains, x0, y)
        if pred is None:
            return math.inf
        r = pred - y
        value = float(np.sum(r * r))
        return value if math.isfinite(value) else math.inf


def optimize_gains(
    window,
    sys: GalerkinSystem,
    init: CorrectionGains = CorrectionGains(),
    x0=None,
    period: float = 60.0,
    dt: float = 1.0,
    box=GAIN_BOX,
    n_starts: int = 5,
    model: WindowModel | None = None,
) -> CorrectionGains:
    """Gains minimising the windowed squared error, warm-started at ``init``."""
    y = np.asarray(window, dtype=float)
    model = model or WindowModel(sys, period, dt)
    if x0 is None:
        x0 = sys.ambient_init()
    bounds = [box, box]
    starts = [init.pair] + box_starts(bounds, n_starts - 1)
    res = minimize(lambda g: model.objective(g, x0, y), bounds, starts, xatol=1e-6, fatol=1e-10, max_evals=400)
    return CorrectionGains(res.x[0], res.x[1], res.converged, res.fun)


@dataclass
class GainTrajectory:
    step: np.ndarray
    time: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    J: np.ndarray
    final_state: np.ndarray = field(default=None, repr=False)
    window_mean: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.step)

    def final_gains(self, tail: float = 0.25) -> CorrectionGains:
        """Gains averaged over the trailing fraction of the run."""
        k = max(1, int(round(tail * len(self))))
        return CorrectionGains(float(np.mean(self.mu1[-k:])), float(np.mean(self.mu2[-k:])))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "time_s", "mu1", "mu2", "J"])
            for row in zip(self.step, self.time, self.mu1, self.mu2, self.J):
                w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def run_online(
    pairs,
    time,
    spec: WindowSpec,
    sys: GalerkinSystem,
    dt: float = 1.0,
    init_state=None,
    init_gains: CorrectionGains = CorrectionGains(),
    box=GAIN_BOX,
    n_starts: int = 5,
    min_fill: int | None = None,
) -> GainTrajectory:
    """Refit the gains on every window while advancing the corrected model.

    ``pairs`` holds the (T_c, T_s) measurements at uniformly spaced ``time``.
    The model state at each window start comes from the corrected model run
    online with the gains in force at the time.

    With ``min_fill`` the optimisation starts as soon as that many samples
    exist and the window grows until it holds ``L`` samples; otherwise the
    first step waits for a full window.
    """
    y = np.asarray(pairs, dtype=float)
    time = np.asarray(time, dtype=float)
    if len(y) <= spec.L:
        raise ValueError(f"trace of {len(y)} samples is not longer than the window ({spec.L})")
    first = spec.L if min_fill is None else int(min_fill)
    if not 2 <= first <= spec.L:
        raise ValueError(f"min_fill must lie in [2, L], got {min_fill}")
    period = float(time[1] - time[0])
    model = WindowModel(sys, period, dt)
    x = sys.ambient_init() if init_state is None else np.asarray(init_state, dtype=float)
    x_at = 0  # sample index that x refers to
    gains = init_gains
    steps, times, mu1, mu2, J = [], [], [], [], []
    for k, stop in enumerate(range(first, len(y) + 1, spec.M)):
        start = max(0, stop - spec.L)
        if start > x_at:
            # advance the online state to the window start under the gains in force
            x = model.simulate(gains.pair, x, y[x_at : start + 1])[-1]
            x_at = start
        gains = optimize_gains(y[start:stop], sys, gains, x, period, dt, box, n_starts, model)
        steps.append(k)
        times.append(time[stop - 1])
        mu1.append(gains.mu1)
        mu2.append(gains.mu2)
        J.append(gains.objective)
    last = y[start:stop]
    return GainTrajectory(
        np.array(steps), np.array(times), np.array(mu1), np.array(mu2), np.array(J), x, last.mean(axis=0)
    )


def corrected_steady_state(sys: GalerkinSystem, gains, y_ref) -> np.ndarray:
    """Equilibrium of the corrected system for a constant measurement pair."""
    if isinstance(gains, CorrectionGains):
        gains = gains.pair
    A, K = corrected_matrices(sys, gains)
    return np.linalg.solve(A, -(sys.b + K @ np.asarray(y_ref, dtype=float)))


def rolling_variance(series, width: int) -> np.ndarray:
    series = np.asarray(series, dtype=float)
    if len(series) < width:
        return np.array([np.var(series)])
    windows = np.lib.stride_tricks.sliding_window_view(series, width)
    return windows.var(axis=1)


def settling_step(series, width: int = 20, ratio: float = 2.0) -> int:
    """First step after which the rolling variance stays within ``ratio`` of the final-quarter variance.

    The reference is the series' own terminal fluctuation level, so gains
    with different noise floors are compared on equal terms.
    """
    series = np.asarray(series, dtype=float)
    ref = np.var(series[-max(2, len(series) // 4) :])
    above = np.flatnonzero(rolling_variance(series, width) > ratio * ref)
    return 0 if above.size == 0 else int(above[-1] + 1)


def plateau(series) -> bool:
    """Final-quarter variance below first-quarter variance."""
    series = np.asarray(series, dtype=float)
    q = max(2, len(series) // 4)
    return float(np.var(series[-q:])) < float(np.var(series[:q]))
