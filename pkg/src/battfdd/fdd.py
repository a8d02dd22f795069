"""
Minimum-distance fault classification on gPC surrogates.

For each candidate mode the distance between a measured (T_c, T_s) pair and
the set of temperatures that mode can produce is

    J_i = min over xi in [-3, 3]^2 of (T_c,i(xi) - T_c,p)^2 + (T_s,i(xi) - T_s,p)^2

and the predicted mode is the argmin of J_i.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IntegrationError
from .galerkin import UncertainInput, assemble, integrate_gpc, surrogates_at
from .gpc import GpcSurrogate, MultiIndexBasis, default_basis
from .jcr import JcrMap, build_map, membership
from .optimize import box_starts, minimize
from .scenario import OperatingMode
from .thermal import BatteryParams, rk4

BOX = 3.0
TIE_TOL = 1e-10
QUADRATIC_2D = ((0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1))


def _fast_eval(basis: MultiIndexBasis, coeff_rows):
    """Scalar evaluator xi -> tuple of surrogate values (pure Python)."""
    order = basis.order
    factors = [tuple((g, m) for g, m in enumerate(t) if m) for t in basis.terms]
    rows = [tuple(float(c) for c in r) for r in coeff_rows]
    n_germs = basis.n_germs

    def evaluate(xi):
        he = []
        for g in range(n_germs):
            x = xi[g]
            h = [1.0, x]
            for n in range(1, order):
                h.append(x * h[n] - n * h[n - 1])
            he.append(h)
        phi = []
        for f in factors:
            v = 1.0
            for g, m in f:
                v *= he[g][m]
            phi.append(v)
        return tuple(sum(c * p for c, p in zip(r, phi)) for r in rows)

    return evaluate


@dataclass
class DistanceResult:
    J: float
    xi: tuple
    converged: bool
    n_evals: int


def _polish(residual, x, lo, hi, max_iter: int = 30):
    """Projected Gauss-Newton on the residual vector, starting at ``x``.

    Nelder-Mead can stall in the long curved valley of the distance
    objective, on a face of the box or just short of an interior zero.
    Coordinates resting on a bound where descent points outward are frozen, so
    the iteration can slide along a face.
    """
    x = np.asarray(x, dtype=float)
    r = np.asarray(residual(x))
    f = float(r @ r)
    n_evals = 1
    for _ in range(max_iter):
        if f <= 1e-28:
            break
        h = 1e-7 * (1.0 + np.abs(x))
        jac = np.empty((len(r), len(x)))
        for k in range(len(x)):
            xk = x.copy()
            xk[k] += h[k]
            jac[:, k] = (np.asarray(residual(xk)) - r) / h[k]
        n_evals += len(x)
        descent = -(jac.T @ r)
        free = ~(((x <= lo) & (descent < 0)) | ((x >= hi) & (descent > 0)))
        if not free.any():
            break
        step = np.zeros_like(x)
        step[free] = np.linalg.lstsq(jac[:, free], -r, rcond=None)[0]
        t = 1.0
        while t > 1e-4:
            xn = np.clip(x + t * step, lo, hi)
            rn = np.asarray(residual(xn))
            n_evals += 1
            fn = float(rn @ rn)
            if fn < f:
                break
            t *= 0.5
        else:
            break
        done = f - fn <= 1e-15 * f
        x, r, f = xn, rn, fn
        if done:
            break
    return tuple(float(v) for v in x), f, n_evals


def min_distance(tc: GpcSurrogate, ts: GpcSurrogate, measured, n_starts: int = 5, box: float = BOX) -> DistanceResult:
    a, b = (float(v) for v in measured)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError(f"measured pair must be finite, got {measured!r}")
    basis = tc.basis
    if basis.terms == QUADRATIC_2D:
        # monomial form of 1, x, y, x^2-1, y^2-1, xy
        c0, c1, c2, c3, c4, c5 = (float(v) for v in tc.coeffs)
        s0, s1, s2, s3, s4, s5 = (float(v) for v in ts.coeffs)
        c0 -= c3 + c4 + a
        s0 -= s3 + s4 + b

        def residual(xi):
            x, y = xi
            return (c0 + x * (c1 + c3 * x + c5 * y) + y * (c2 + c4 * y),
                    s0 + x * (s1 + s3 * x + s5 * y) + y * (s2 + s4 * y))

    else:
        evaluate = _fast_eval(basis, (tc.coeffs, ts.coeffs))

        def residual(xi):
            c, s = evaluate(xi)
            return (c - a, s - b)

    def objective(xi):
        c, s = residual(xi)
        return c * c + s * s

    bounds = [(-box, box)] * basis.n_germs
    res = minimize(
        objective, bounds, box_starts(bounds, n_starts), xatol=1e-7, fatol=1e-14,
        max_evals=1000, stop_below=1e-16, restarts=0,
    )
    x, fun, n_evals = res.x, res.fun, res.n_evals
    if fun > 1e-16:
        px, pf, extra = _polish(residual, x, -box, box)
        n_evals += extra
        if pf < fun:
            x, fun = px, pf
    return DistanceResult(fun, x, res.converged or fun <= 1e-16, n_evals)


@dataclass
class LibraryEntry:
    mode: OperatingMode
    tc: GpcSurrogate
    ts: GpcSurrogate
    jcr: JcrMap

    def to_dict(self):
        m = self.mode
        return {
            "mode": {"label": m.label, "I_mean": m.I_mean, "Rc_mean": m.Rc_mean, "I_std": m.I_std, "Rc_std": m.Rc_std},
            "tc": self.tc.to_dict(),
            "ts": self.ts.to_dict(),
            "jcr": self.jcr.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            OperatingMode(**d["mode"]),
            GpcSurrogate.from_dict(d["tc"]),
            GpcSurrogate.from_dict(d["ts"]),
            JcrMap.from_dict(d["jcr"]),
        )


@dataclass
class ModeLibrary:
    entries: list

    def __post_init__(self):
        bases = {e.tc.basis for e in self.entries} | {e.ts.basis for e in self.entries}
        if len(bases) > 1:
            raise ValueError("all library surrogates must share one basis")

    @property
    def labels(self):
        return [e.mode.label for e in self.entries]

    def entry(self, label) -> LibraryEntry:
        for e in self.entries:
            if e.mode.label == label:
                return e
        raise KeyError(label)

    def to_json(self) -> str:
        return json.dumps({"entries": [e.to_dict() for e in self.entries]}, indent=1)

    @classmethod
    def from_json(cls, text) -> "ModeLibrary":
        return cls([LibraryEntry.from_dict(d) for d in json.loads(text)["entries"]])


def mode_system(params: BatteryParams, mode: OperatingMode, basis: MultiIndexBasis | None = None):
    return assemble(
        params,
        UncertainInput(mode.I_mean, mode.I_std, 0),
        UncertainInput(mode.Rc_mean, mode.Rc_std, 1),
        basis or default_basis(),
    )


def library_entry(tc, ts, mode, n_samples=10_000, n_bins=40, seed=0) -> LibraryEntry:
    return LibraryEntry(mode, tc, ts, build_map(tc, ts, n_samples, n_bins, seed, mode.label))


def build_library(
    params: BatteryParams,
    modes,
    n_samples: int = 10_000,
    n_bins: int = 40,
    seed: int = 0,
    at_time: float | None = None,
    dt: float = 1.0,
) -> ModeLibrary:
    """Steady-state (or fixed-time) surrogates and JCR maps for each mode."""
    entries = []
    for k, mode in enumerate(modes):
        sys = mode_system(params, mode)
        if at_time is None:
            tc, ts = sys.steady_surrogates
        else:
            tc, ts = surrogates_at(integrate_gpc(sys, at_time, dt), at_time)
        entries.append(library_entry(tc, ts, mode, n_samples, n_bins, seed + k))
    return ModeLibrary(entries)


@dataclass
class ClassificationResult:
    predicted: str
    J: dict
    xi: dict
    membership: float
    converged: bool


def classify(measured, library: ModeLibrary, n_starts: int = 5) -> ClassificationResult:
    J, xi, conv = {}, {}, {}
    for e in library.entries:
        try:
            r = min_distance(e.tc, e.ts, measured, n_starts)
        except ValueError:
            continue
        J[e.mode.label], xi[e.mode.label], conv[e.mode.label] = r.J, r.xi, r.converged
    if not J:
        raise RuntimeError("distance minimisation failed for every mode")
    best = min(J.values())
    tied = [lbl for lbl in library.labels if lbl in J and J[lbl] <= best + TIE_TOL]
    probs = {lbl: membership(library.entry(lbl).jcr, measured) for lbl in tied}
    # max() keeps the first of equal keys, so declaration order breaks remaining ties
    winner = max(tied, key=lambda lbl: probs[lbl])
    return ClassificationResult(winner, J, xi, probs[winner], conv[winner])


@dataclass
class ClassificationReport:
    labels: list
    n_total: int
    n_id: int
    r_fcr: float
    confusion: np.ndarray  # rows: truth, columns: prediction
    per_mode: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "labels": self.labels,
            "n_total": self.n_total,
            "n_id": self.n_id,
            "r_FCR": self.r_fcr,
            "confusion": self.confusion.tolist(),
            "per_mode_r_FCR": self.per_mode,
        }


def score(predictions, truth, labels=None) -> ClassificationReport:
    predictions = list(predictions)
    truth = list(truth)
    if len(predictions) != len(truth):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(truth)} labels")
    if labels is None:
        labels = list(dict.fromkeys(truth + predictions))
    idx = {lbl: k for k, lbl in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=int)
    for p, t in zip(predictions, truth):
        confusion[idx[t], idx[p]] += 1
    n_id = sum(p == t for p, t in zip(predictions, truth))
    n_total = len(truth)
    per_mode = {}
    for lbl in labels:
        row = confusion[idx[lbl]].sum()
        if row:
            per_mode[lbl] = confusion[idx[lbl], idx[lbl]] / row
    return ClassificationReport(labels, n_total, n_id, n_id / n_total if n_total else float("nan"), confusion, per_mode)


@dataclass
class CoreEstimate:
    time: np.ndarray
    T_c: np.ndarray
    T_s_model: np.ndarray
    diverged: bool


def estimate_core(
    ts_measured,
    time,
    params: BatteryParams,
    gains=(0.0, 0.0),
    mode: OperatingMode | None = None,
    init=None,
    dt: float = 1.0,
    bound: float = 200.0,
) -> CoreEstimate:
    """Observer estimate of the core temperature from surface measurements.

    The deterministic model runs at the assumed mode's mean inputs; the
    surface innovation ``T_s,meas - T_s,model`` is fed back into the core and
    surface equations with gains ``(mu1, mu2)``.  Measurements are held
    constant between samples.
    """
    mu1, mu2 = (float(g) for g in gains)
    if not (math.isfinite(mu1) and math.isfinite(mu2)):
        raise DomainError("gains must be finite")
    time = np.asarray(time, dtype=float)
    y_meas = np.asarray(ts_measured, dtype=float)
    if len(time) > 2 and np.ptp(np.diff(time)) > 1e-9 * max(1.0, time[-1]):
        raise DomainError("measurement series must be uniformly sampled")
    I = mode.I_mean if mode is not None else 0.0
    R_c = mode.Rc_mean if mode is not None else params.R_c
    heat = I * I * params.R_e
    C_c, C_s, R_u, T_f = params.C_c, params.C_s, params.R_u, params.T_f
    x = np.array(init if init is not None else (T_f, T_f), dtype=float)
    period = time[1] - time[0] if len(time) > 1 else dt
    sub = max(1, int(round(period / dt)))
    h = period / sub
    out_c = np.empty(len(time))
    out_s = np.empty(len(time))
    out_c[0], out_s[0] = x
    diverged = False
    for k in range(1, len(time)):
        y = y_meas[k - 1]

        def rhs(t, z, y=y):
            q = (z[1] - z[0]) / R_c
            e = y - z[1]
            return np.array([(heat + q) / C_c + mu1 * e, ((T_f - z[1]) / R_u - q) / C_s + mu2 * e])

        try:
            x = rk4(rhs, x, time[k - 1], h, sub)[-1]
        except IntegrationError:
            diverged = True
        if diverged or abs(x[0]) > bound:
            diverged = True
            out_c[k:] = np.nan
            out_s[k:] = np.nan
            break
        out_c[k], out_s[k] = x
    return CoreEstimate(time, out_c, out_s, diverged)
