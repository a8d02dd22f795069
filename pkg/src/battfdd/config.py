"""
Run configuration: layered TOML (embedded default, optional preset, user
file, command-line overrides) validated into plain dataclasses.
"""

from __future__ import annotations

import copy
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .correction import WindowSpec
from .errors import ConfigError
from .scenario import OperatingMode
from .thermal import BatteryParams

PRESETS = ("table3", "table4", "tablec1", "figure9")


def _read_packaged(name: str) -> dict:
    text = resources.files("battfdd").joinpath("presets").joinpath(f"{name}.toml").read_text()
    return tomllib.loads(text)


def default_text() -> str:
    return resources.files("battfdd").joinpath("presets").joinpath("default.toml").read_text()


def _merge(base: dict, over: dict, path: str = "") -> dict:
    """Recursive override; keys absent from ``base`` are errors."""
    out = copy.deepcopy(base)
    for key, value in over.items():
        where = f"{path}{key}"
        if key not in base:
            # modes may be added by name, everything else must already exist
            if path == "modes.":
                out[key] = copy.deepcopy(value)
                continue
            raise ConfigError(f"unknown key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{where}' must be a table")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class SimulationConfig:
    dt: float
    sample_period: float
    t_end: float
    perturbation_hold: float
    schedule: tuple
    classify_after: float


@dataclass(frozen=True)
class JcrConfig:
    n_samples: int
    n_bins: int
    levels: tuple


@dataclass(frozen=True)
class CorrectionConfig:
    window: WindowSpec
    min_fill: int | None
    box: tuple
    n_starts: int
    t_end: float


@dataclass(frozen=True)
class McSettings:
    n_samples: int
    reuse_samples: bool
    max_evals: int
    n_eval: int


@dataclass(frozen=True)
class RunConfig:
    battery: BatteryParams
    modes: tuple
    simulation: SimulationConfig
    noise_pct: float
    noise_sweep: tuple
    jcr: JcrConfig
    n_per_mode: int
    correction: CorrectionConfig
    mismatch_pct: float
    mismatch_draws: int
    mc: McSettings
    seed: int
    workers: int
    out: Path
    raw: dict = field(repr=False, compare=False, default_factory=dict)

    def mode(self, label) -> OperatingMode:
        for m in self.modes:
            if m.label == label:
                return m
        raise ConfigError(f"unknown mode '{label}'")


def _num(d, key, kind=float, positive=False, nonneg=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(f"'{key}' must be an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
    if positive and not v > 0:
        raise ConfigError(f"'{key}' must be positive, got {v}")
    if nonneg and v < 0:
        raise ConfigError(f"'{key}' must be non-negative, got {v}")
    return v


def _build(raw: dict) -> RunConfig:
    try:
        battery = BatteryParams(**{k: _num(raw["battery"], k) for k in raw["battery"]})
        modes = []
        for label, m in raw["modes"].items():
            extra = set(m) - {"I_mean", "Rc_mean", "I_std", "Rc_std"}
            if extra:
                raise ConfigError(f"unknown key 'modes.{label}.{sorted(extra)[0]}'")
            modes.append(OperatingMode(label, _num(m, "I_mean"), _num(m, "Rc_mean", positive=True),
                                       _num(m, "I_std", nonneg=True), _num(m, "Rc_std", nonneg=True)))
        if not modes:
            raise ConfigError("at least one mode is required")
        labels = {m.label for m in modes}

        s = raw["simulation"]
        schedule = tuple(s["schedule"])
        if not schedule or not set(schedule) <= labels:
            raise ConfigError(f"simulation.schedule must name configured modes, got {list(schedule)}")
        sim = SimulationConfig(_num(s, "dt", positive=True), _num(s, "sample_period", positive=True),
                               _num(s, "t_end", positive=True), _num(s, "perturbation_hold", positive=True), schedule,
                               _num(s, "classify_after", nonneg=True))

        j = raw["jcr"]
        levels = tuple(float(a) for a in j["levels"])
        if not all(0 < a <= 1 for a in levels):
            raise ConfigError(f"jcr.levels must lie in (0, 1], got {list(levels)}")
        jcr = JcrConfig(_num(j, "n_samples", int, positive=True), _num(j, "n_bins", int, positive=True), levels)

        w = raw["window"]
        fill = _num(w, "min_fill", int, nonneg=True)
        box = (_num(w, "gain_min"), _num(w, "gain_max"))
        if box[0] >= box[1]:
            raise ConfigError(f"window gain box is empty: {box}")
        corr = CorrectionConfig(
            WindowSpec(_num(w, "L", int), _num(w, "M", int)),
            fill or None, box, _num(w, "n_starts", int, positive=True), _num(w, "t_end", positive=True),
        )
        if corr.min_fill is not None and not 2 <= corr.min_fill <= corr.window.L:
            raise ConfigError(f"window.min_fill must be 0 or in [2, L], got {fill}")

        mc = raw["mc"]
        if not isinstance(mc["reuse_samples"], bool):
            raise ConfigError("mc.reuse_samples must be true or false")
        mcs = McSettings(_num(mc, "n_samples", int, positive=True), mc["reuse_samples"],
                         _num(mc, "max_evals", int, positive=True), _num(mc, "n_eval", int, positive=True))

        n = raw["noise"]
        sweep = tuple(float(v) for v in n["sweep"])
        if any(v < 0 for v in sweep):
            raise ConfigError("noise.sweep levels must be non-negative")
        r = raw["run"]
        return RunConfig(
            battery=battery,
            modes=tuple(modes),
            simulation=sim,
            noise_pct=_num(n, "pct", nonneg=True),
            noise_sweep=sweep,
            jcr=jcr,
            n_per_mode=_num(raw["suite"], "n_per_mode", int, positive=True),
            correction=corr,
            mismatch_pct=_num(raw["mismatch"], "pct", nonneg=True),
            mismatch_draws=_num(raw["mismatch"], "draws", int, positive=True),
            mc=mcs,
            seed=_num(r, "seed", int, nonneg=True),
            workers=_num(r, "workers", int, nonneg=True),
            out=Path(str(r["out"])),
            raw=raw,
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None, preset=None, overrides=None) -> RunConfig:
    """Default, then ``preset``, then the file at ``path``, then ``overrides``.

    ``overrides`` maps dotted keys (``"noise.pct"``) to values.
    """
    raw = tomllib.loads(default_text())
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}' (choose from {', '.join(PRESETS)})")
        raw = _merge(raw, _read_packaged(preset))
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        raw = _merge(raw, user)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        *head, last = dotted.split(".")
        patch = node = {}
        for h in head:
            node = node.setdefault(h, {})
        node[last] = value
        raw = _merge(raw, patch)
    return _build(raw)


def resolve_workers(n: int) -> int:
    return n if n > 0 else (os.cpu_count() or 1)
