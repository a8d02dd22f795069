"""
Bounded Nelder-Mead with multi-start.

Every trial point is projected onto the box before evaluation, so the simplex
never leaves the feasible region.  The objective receives a tuple of floats;
problems here have two to four unknowns, so plain Python arithmetic beats
array overhead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

REFLECT, EXPAND, CONTRACT, SHRINK = 1.0, 2.0, 0.5, 0.5


@dataclass
class OptResult:
    x: tuple
    fun: float
    n_evals: int
    converged: bool
    history: list = field(default_factory=list, repr=False)


def _project(x, lo, hi):
    return tuple([a if v < a else (b if v > b else v) for v, a, b in zip(x, lo, hi)])


def _safe(f, x):
    try:
        v = float(f(x))
    except (ArithmeticError, ValueError):
        return math.inf
    return v if math.isfinite(v) else math.inf


def nelder_mead(f, x0, lo, hi, xatol=1e-8, fatol=1e-12, max_evals=2000, step=0.05, restarts=3):
    """Bounded Nelder-Mead from ``x0``, restarted at the converged point.

    Projection onto the box can flatten the simplex against a face, where it
    then reports convergence; a fresh, smaller simplex built at that point
    escapes.
    Restarts stop as soon as one fails to improve the value by ``fatol``.
    """
    res = _nm_run(f, x0, lo, hi, xatol, fatol, max_evals, step)
    total, history = res.n_evals, list(res.history)
    for k in range(1, restarts + 1):
        if not res.converged or total >= max_evals:
            break
        # smaller simplices fit between the face and an optimum close to it
        again = _nm_run(f, res.x, lo, hi, xatol, fatol, max_evals - total, step * 0.1**k)
        total += again.n_evals
        history += again.history
        improved = again.fun < res.fun - fatol
        if again.fun <= res.fun:
            res = again
        if not improved:
            break
    return OptResult(res.x, res.fun, total, res.converged, history)


def _nm_run(f, x0, lo, hi, xatol, fatol, max_evals, step):
    n = len(x0)
    x0 = _project(x0, lo, hi)
    simplex = [x0]
    for i in range(n):
        width = hi[i] - lo[i]
        h = step * width if math.isfinite(width) and width > 0 else (step * abs(x0[i]) or 2.5e-4)
        xi = list(x0)
        xi[i] = x0[i] + h if x0[i] + h <= hi[i] else x0[i] - h
        simplex.append(_project(xi, lo, hi))
    values = [_safe(f, p) for p in simplex]
    n_evals = n + 1
    history = []
    converged = False

    while True:
        order = sorted(range(n + 1), key=values.__getitem__)
        simplex = [simplex[k] for k in order]
        values = [values[k] for k in order]
        history.append(values[0])
        best = simplex[0]
        if values[-1] - values[0] <= fatol and all(
            abs(a - b) <= xatol for p in simplex[1:] for a, b in zip(p, best)
        ):
            converged = True
            break
        if n_evals >= max_evals:
            break

        centroid = [sum(p[j] for p in simplex[:-1]) / n for j in range(n)]
        worst = simplex[-1]
        xr = _project([c + REFLECT * (c - w) for c, w in zip(centroid, worst)], lo, hi)
        fr = _safe(f, xr)
        n_evals += 1
        if fr < values[0]:
            xe = _project([c + EXPAND * (r - c) for c, r in zip(centroid, xr)], lo, hi)
            fe = _safe(f, xe)
            n_evals += 1
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-1]:
            xc = _project([c + CONTRACT * (r - c) for c, r in zip(centroid, xr)], lo, hi)
            fc = _safe(f, xc)
            n_evals += 1
            accept = fc <= fr
        else:
            xc = _project([c + CONTRACT * (w - c) for c, w in zip(centroid, worst)], lo, hi)
            fc = _safe(f, xc)
            n_evals += 1
            accept = fc < values[-1]
        if accept:
            simplex[-1], values[-1] = xc, fc
            continue
        for k in range(1, n + 1):
            simplex[k] = _project([b + SHRINK * (p - b) for b, p in zip(best, simplex[k])], lo, hi)
            values[k] = _safe(f, simplex[k])
        n_evals += n

    return OptResult(tuple(simplex[0]), values[0], n_evals, converged, history)


def minimize(
    f: Callable,
    bounds: Sequence[tuple],
    starts: Sequence[Sequence[float]],
    xatol: float = 1e-8,
    fatol: float = 1e-12,
    max_evals: int = 2000,
    stop_below: float | None = None,
    step: float = 0.05,
    restarts: int = 3,
) -> OptResult:
    """Best result over Nelder-Mead runs launched from each start.

    Starts where the objective is not finite are skipped.  With
    ``stop_below`` the remaining starts are abandoned once a run reaches that
    value (useful for non-negative objectives where 0 certifies optimality).
    """
    lo = tuple(float(b[0]) for b in bounds)
    hi = tuple(float(b[1]) for b in bounds)
    if any(a > b for a, b in zip(lo, hi)):
        raise ValueError(f"empty box: {bounds!r}")
    best = None
    total = 0
    history = []
    for s in starts:
        s = _project(tuple(float(v) for v in s), lo, hi)
        total += 1
        if _safe(f, s) == math.inf:
            continue
        res = nelder_mead(f, s, lo, hi, xatol=xatol, fatol=fatol, max_evals=max_evals, step=step, restarts=restarts)
        total += res.n_evals
        for v in res.history:
            history.append(min(v, history[-1]) if history else v)
        if best is None or res.fun < best.fun:
            best = res
        if stop_below is not None and best.fun <= stop_below:
            break
    if best is None:
        raise ValueError("objective is not finite at any start")
    return OptResult(best.x, best.fun, total, best.converged, history)


def halton(n: int, dim: int, skip: int = 1) -> list:
    """First ``n`` points of the Halton sequence in [0, 1]^dim."""
    primes = (2, 3, 5, 7, 11, 13, 17, 19)[:dim]
    points = []
    for i in range(skip, skip + n):
        p = []
        for b in primes:
            f, r, k = 1.0, 0.0, i
            while k > 0:
                f /= b
                r += f * (k % b)
                k //= b
            p.append(r)
        points.append(tuple(p))
    return points


def box_starts(bounds, n: int, center_first: bool = True) -> list:
    """Deterministic low-discrepancy start points inside a box."""
    lo = [b[0] for b in bounds]
    hi = [b[1] for b in bounds]
    pts = []
    if center_first:
        pts.append(tuple(0.5 * (a + b) for a, b in zip(lo, hi)))
    for u in halton(n - len(pts), len(bounds)):
        pts.append(tuple(a + t * (b - a) for a, b, t in zip(lo, hi, u)))
    return pts
