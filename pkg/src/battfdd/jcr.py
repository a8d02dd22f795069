"""
Joint confidence regions of (core, surface) temperature.

A map is built by pushing standard-normal germ draws through the two
surrogates and histogramming the resulting pairs on a regular grid.
Confidence regions use the highest-density convention: the region at level
``alpha`` is the smallest set of highest-probability cells holding at least
``alpha`` of the mass.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .gpc import GpcSurrogate

PAD_SIGMAS = 3.5


@dataclass(frozen=True)
class JcrMap:
    label: str
    tc_edges: np.ndarray
    ts_edges: np.ndarray
    prob: np.ndarray  # (n_tc, n_ts)
    n_samples: int
    meta: dict = field(default_factory=dict)

    @property
    def n_bins(self):
        return self.prob.shape

    def cell_of(self, point):
        tc, ts = point
        i = np.searchsorted(self.tc_edges, tc, side="right") - 1
        j = np.searchsorted(self.ts_edges, ts, side="right") - 1
        # the upper edge belongs to the last cell
        if tc == self.tc_edges[-1]:
            i = len(self.tc_edges) - 2
        if ts == self.ts_edges[-1]:
            j = len(self.ts_edges) - 2
        if 0 <= i < self.prob.shape[0] and 0 <= j < self.prob.shape[1]:
            return int(i), int(j)
        return None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "tc_range": [float(self.tc_edges[0]), float(self.tc_edges[-1])],
            "ts_range": [float(self.ts_edges[0]), float(self.ts_edges[-1])],
            "n_bins": list(self.prob.shape),
            "n_samples": self.n_samples,
            "meta": self.meta,
            "prob": [float(v) for v in self.prob.ravel()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d) -> "JcrMap":
        n_tc, n_ts = d["n_bins"]
        return cls(
            d["label"],
            np.linspace(*d["tc_range"], n_tc + 1),
            np.linspace(*d["ts_range"], n_ts + 1),
            np.array(d["prob"], dtype=float).reshape(n_tc, n_ts),
            d["n_samples"],
            d.get("meta", {}),
        )


def _axis_range(values, center, sigma):
    lo = min(center - PAD_SIGMAS * sigma, values.min())
    hi = max(center + PAD_SIGMAS * sigma, values.max())
    if hi - lo <= 0:
        half = max(1e-6, 1e-9 * abs(center))
        lo, hi = center - half, center + half
    return lo, hi


def build_map(
    tc: GpcSurrogate,
    ts: GpcSurrogate,
    n_samples: int = 10_000,
    n_bins: int = 40,
    seed: int = 0,
    label: str = "",
) -> JcrMap:
    if tc.basis != ts.basis:
        raise ValueError("surrogates must share a basis")
    if n_samples < 100:
        raise ValueError(f"need at least 100 samples, got {n_samples}")
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((n_samples, tc.basis.n_germs))
    phi = tc.basis.evaluate(xi)
    tc_s = phi @ tc.coeffs
    ts_s = phi @ ts.coeffs
    tc_rng = _axis_range(tc_s, tc.mean(), tc.std())
    ts_rng = _axis_range(ts_s, ts.mean(), ts.std())
    counts, tc_edges, ts_edges = np.histogram2d(tc_s, ts_s, bins=n_bins, range=[tc_rng, ts_rng])
    prob = counts / counts.sum()
    meta = {"seed": seed, "tc": tc.to_dict(), "ts": ts.to_dict()}
    return JcrMap(label, tc_edges, ts_edges, prob, n_samples, meta)


def membership(m: JcrMap, point) -> float:
    cell = m.cell_of(point)
    return 0.0 if cell is None else float(m.prob[cell])


def hdr_mask(m: JcrMap, level: float) -> np.ndarray:
    """Boolean cell mask of the highest-density region at ``level``."""
    if m.prob.sum() <= 0:
        raise ValueError("empty map")
    flat = m.prob.ravel()
    if level >= 1.0:
        return m.prob > 0
    order = np.argsort(-flat, kind="stable")
    cum = np.cumsum(flat[order])
    k = int(np.searchsorted(cum, level - 1e-12))
    mask = np.zeros(flat.size, dtype=bool)
    mask[order[: k + 1]] = True
    return mask.reshape(m.prob.shape)


@dataclass
class ContourSet:
    levels: list
    polylines: dict  # level -> list of (n, 2) arrays of (T_c, T_s) vertices, closed
    masks: dict  # level -> cell mask

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["level", "polyline_id", "T_c", "T_s"])
            for level in self.levels:
                for pid, line in enumerate(self.polylines[level]):
                    for tc, ts in line:
                        w.writerow([repr(float(level)), pid, repr(float(tc)), repr(float(ts))])


def _mask_boundaries(mask, x_edges, y_edges):
    """Closed polylines along cell edges enclosing the True cells."""
    nx, ny = mask.shape
    inside = lambda i, j: 0 <= i < nx and 0 <= j < ny and mask[i, j]
    # directed edges with the region on the left (counter-clockwise loops)
    nxt = {}
    for i, j in zip(*np.nonzero(mask)):
        if not inside(i, j - 1):
            nxt.setdefault((i, j), []).append((i + 1, j))
        if not inside(i + 1, j):
            nxt.setdefault((i + 1, j), []).append((i + 1, j + 1))
        if not inside(i, j + 1):
            nxt.setdefault((i + 1, j + 1), []).append((i, j + 1))
        if not inside(i - 1, j):
            nxt.setdefault((i, j + 1), []).append((i, j))
    loops = []
    while nxt:
        start = min(nxt)
        loop = [start]
        v = start
        while True:
            targets = nxt[v]
            w = targets.pop()
            if not targets:
                del nxt[v]
            loop.append(w)
            v = w
            if v == start:
                break
        pts = np.array([(x_edges[a], y_edges[b]) for a, b in loop])
        loops.append(pts)
    return loops


def contours(m: JcrMap, levels) -> ContourSet:
    levels = [float(a) for a in levels]
    for a in levels:
        if not 0.0 < a <= 1.0:
            raise ValueError(f"levels must lie in (0, 1], got {a}")
    masks = {a: hdr_mask(m, a) for a in levels}
    lines = {a: _mask_boundaries(masks[a], m.tc_edges, m.ts_edges) for a in levels}
    return ContourSet(levels, lines, masks)


def contains(polyline: np.ndarray, point) -> bool:
    """Even-odd point-in-polygon test."""
    x, y = point
    xs, ys = polyline[:, 0], polyline[:, 1]
    inside = False
    for k in range(len(polyline) - 1):
        x1, y1, x2, y2 = xs[k], ys[k], xs[k + 1], ys[k + 1]
        if (y1 > y) != (y2 > y):
            if x < x1 + (y - y1) * (x2 - x1) / (y2 - y1):
                inside = not inside
    return inside
