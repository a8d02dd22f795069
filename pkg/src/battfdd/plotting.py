"""
File-only figures for the report subcommand (Agg backend, no display).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .jcr import contours

plt.rcParams.update({"figure.dpi": 110, "axes.grid": True, "grid.alpha": 0.3, "font.size": 9})

MODE_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple", "tab:brown")


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_trace(trace, path):
    """True and measured temperatures of a synthetic trace, mode switches shaded."""
    fig, (ax, ax_in) = plt.subplots(2, 1, figsize=(7, 5), sharex=True, height_ratios=(3, 1))
    t = trace.time / 60.0
    ax.plot(t, trace.Tc_true, "k-", lw=1, label="$T_c$ true")
    ax.plot(t, trace.Ts_true, "k--", lw=1, label="$T_s$ true")
    ax.plot(t, trace.Ts_meas, ".", ms=2, color="tab:red", label="$T_s$ measured")
    ax.set_ylabel("temperature (°C)")
    ax.legend(loc="lower right", fontsize=8)
    labels = list(dict.fromkeys(trace.mode))
    for k, lbl in enumerate(labels):
        on = trace.mode == lbl
        ax_in.fill_between(t, 0, 1, where=on, step="post", color=MODE_COLORS[k % len(MODE_COLORS)], alpha=0.4, label=lbl)
    ax_in.set_yticks([])
    ax_in.set_xlabel("time (min)")
    ax_in.legend(loc="upper right", ncol=len(labels), fontsize=7)
    return _save(fig, path)


def plot_jcr(library, path, levels=(0.5, 0.9, 0.99), points=None, truth=None):
    """HDR contours of every library mode, optionally with measured pairs on top."""
    fig, ax = plt.subplots(figsize=(6, 5))
    styles = ("-", "--", ":", "-.")
    for k, entry in enumerate(library.entries):
        color = MODE_COLORS[k % len(MODE_COLORS)]
        cs = contours(entry.jcr, levels)
        for n, level in enumerate(cs.levels):
            for line in cs.polylines[level]:
                ax.plot(line[:, 0], line[:, 1], styles[n % len(styles)], color=color, lw=1)
        ax.plot([], [], "-", color=color, label=entry.mode.label)
    if points is not None:
        points = np.asarray(points)
        if truth is None:
            ax.plot(points[:, 0], points[:, 1], "k.", ms=2, alpha=0.4)
        else:
            for k, lbl in enumerate(library.labels):
                sel = np.asarray(truth) == lbl
                ax.plot(points[sel, 0], points[sel, 1], ".", ms=2, alpha=0.4, color=MODE_COLORS[k % len(MODE_COLORS)])
    ax.set_xlabel("core temperature (°C)")
    ax.set_ylabel("surface temperature (°C)")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_gains(trajectories: dict, path):
    """One row per mode: mu1 (solid) and mu2 (dash-dot) against time."""
    n = len(trajectories)
    fig, axes = plt.subplots(n, 1, figsize=(7, 1.9 * n + 0.4), sharex=True, squeeze=False)
    for ax, (label, g) in zip(axes[:, 0], trajectories.items()):
        t = g.time / 60.0
        ax.plot(t, g.mu1, "-", color="tab:blue", lw=1, label=r"$\mu_1$")
        ax.plot(t, g.mu2, "-.", color="tab:red", lw=1, label=r"$\mu_2$")
        ax.set_ylabel(f"{label}\ngain (1/s)")
    axes[0, 0].legend(loc="upper right", fontsize=8)
    axes[-1, 0].set_xlabel("time (min)")
    return _save(fig, path)


def plot_rates(x, series: dict, path, xlabel="noise (%)"):
    """Classification rate curves, one per named series."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, y in series.items():
        ax.plot(x, np.asarray(y) * 100, "o-", label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("$r_{FCR}$ (%)")
    ax.set_ylim(0, 102)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_variance(traj, path):
    """Mean with a two-sigma band for both temperatures of a gPC trajectory."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    t = traj.time / 60.0
    var_c, var_s = traj.variances()
    for mean, var, color, name in ((traj.mean_core(), var_c, "tab:red", "core"), (traj.mean_surface(), var_s, "tab:blue", "surface")):
        sd = np.sqrt(np.maximum(var, 0))
        ax.plot(t, mean, color=color, lw=1, label=name)
        ax.fill_between(t, mean - 2 * sd, mean + 2 * sd, color=color, alpha=0.2)
    ax.set_xlabel("time (min)")
    ax.set_ylabel("temperature (°C)")
    ax.legend(fontsize=8)
    return _save(fig, path)
