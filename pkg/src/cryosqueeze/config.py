"""JSON run configuration.

Schema (units in the key names; defaults marked)::

    membrane        f_m_hz, gamma_hz, m_eff_kg, r_m, t_m            (all required)
    interferometer  p_in_w, lambda0_m, delta_rad=0.0, eta=1.0
    environment     temperature_k
    squeezing       r=0.0 | db, orientation="squeezed"               (section optional)
    grid            start_hz, stop_hz, n_points                      (section optional)
    synth           averages=100, seed=null, unit="displacement"
    fit             space="log", max_iterations=200, xtol=1e-8, ftol=1e-10,
                    window_linewidths=50.0, anchor_fraction=0.2
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .core_model import (
    InterferometerConfig,
    MembraneMechanics,
    ModelDomainError,
    Orientation,
    SqueezeState,
    ThermalEnvironment,
)
from .fitting import FitOptions, FitSpace
from .synth import FrequencyGrid, Unit

SECTIONS = ("membrane", "interferometer", "squeezing", "environment", "grid", "synth", "fit")
REQUIRED_SECTIONS = ("membrane", "interferometer", "environment")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


class ConfigParseError(ConfigError):
    def __init__(self, path, line: int, column: int, msg: str):
        super().__init__(f"{path}: invalid JSON at line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class SynthOptions:
    averages: int = 100
    seed: int | None = None
    unit: Unit = Unit.DISPLACEMENT


@dataclass(frozen=True)
class RunConfig:
    membrane: MembraneMechanics
    interferometer: InterferometerConfig
    environment: ThermalEnvironment
    squeezing: SqueezeState = field(default_factory=SqueezeState)
    grid: FrequencyGrid | None = None
    synth: SynthOptions = field(default_factory=SynthOptions)
    fit: FitOptions = field(default_factory=FitOptions)


_MISSING = object()


def _number(section, key, value, *, positive=False, nonneg=False, unit_interval=False):
    where = f"{section}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where} must be finite")
    if positive and value <= 0:
        raise ConfigError(f"{where} must be > 0")
    if nonneg and value < 0:
        raise ConfigError(f"{where} must be >= 0")
    if unit_interval and not 0.0 <= value <= 1.0:
        raise ConfigError(f"{where} must be in [0,1]")
    return value


def _integer(section, key, value, minimum):
    where = f"{section}.{key}"
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer")
    if value < minimum:
        raise ConfigError(f"{where} must be >= {minimum}")
    return value


class _Section:
    def __init__(self, name, data):
        if not isinstance(data, dict):
            raise ConfigError(f"{name} must be a JSON object")
        self.name = name
        self.data = data
        self.used = set()

    def get(self, key, default=_MISSING):
        self.used.add(key)
        if key in self.data:
            return self.data[key]
        if default is _MISSING:
            raise ConfigError(f"{self.name}.{key} is required")
        return default

    def finish(self):
        unknown = sorted(set(self.data) - self.used)
        if unknown:
            raise ConfigError(f"unknown key {self.name}.{unknown[0]}")


def _build(section: _Section, ctor, *args):
    try:
        return ctor(*args)
    except (ModelDomainError, ValueError) as exc:
        raise ConfigError(f"{section.name}: {exc}") from exc


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in doc:
        if key not in SECTIONS:
            raise ConfigError(f"unknown key {key}")
    for key in REQUIRED_SECTIONS:
        if key not in doc:
            raise ConfigError(f"{key} section is required")

    s = _Section("membrane", doc["membrane"])
    n = s.name
    membrane = _build(s, MembraneMechanics.from_hz,
                      _number(n, "f_m_hz", s.get("f_m_hz"), positive=True),
                      _number(n, "gamma_hz", s.get("gamma_hz"), positive=True),
                      _number(n, "m_eff_kg", s.get("m_eff_kg"), positive=True),
                      _number(n, "r_m", s.get("r_m"), unit_interval=True),
                      _number(n, "t_m", s.get("t_m"), unit_interval=True))
    s.finish()

    s = _Section("interferometer", doc["interferometer"])
    n = s.name
    interferometer = _build(s, InterferometerConfig,
                            _number(n, "p_in_w", s.get("p_in_w"), nonneg=True),
                            _number(n, "lambda0_m", s.get("lambda0_m"), positive=True),
                            _number(n, "delta_rad", s.get("delta_rad", 0.0)),
                            _number(n, "eta", s.get("eta", 1.0), unit_interval=True))
    s.finish()

    s = _Section("environment", doc["environment"])
    environment = _build(s, ThermalEnvironment,
                         _number(s.name, "temperature_k", s.get("temperature_k"), positive=True))
    s.finish()

    squeezing = SqueezeState()
    if "squeezing" in doc:
        s = _Section("squeezing", doc["squeezing"])
        orientation = s.get("orientation", Orientation.SQUEEZED.value)
        if orientation not in [o.value for o in Orientation]:
            raise ConfigError("squeezing.orientation must be 'squeezed' or 'anti-squeezed'")
        if "r" in s.data and "db" in s.data:
            raise ConfigError("squeezing: give either r or db, not both")
        if "db" in s.data:
            db = _number(s.name, "db", s.get("db"), nonneg=True)
            squeezing = SqueezeState.from_db(db, orientation)
        else:
            squeezing = SqueezeState(_number(s.name, "r", s.get("r", 0.0), nonneg=True), orientation)
        s.finish()

    grid = None
    if "grid" in doc:
        s = _Section("grid", doc["grid"])
        grid = _build(s, FrequencyGrid,
                      _number(s.name, "start_hz", s.get("start_hz"), nonneg=True),
                      _number(s.name, "stop_hz", s.get("stop_hz"), positive=True),
                      _integer(s.name, "n_points", s.get("n_points"), 2))
        s.finish()

    synth = SynthOptions()
    if "synth" in doc:
        s = _Section("synth", doc["synth"])
        seed = s.get("seed", None)
        if seed is not None:
            seed = _integer(s.name, "seed", seed, 0)
            if seed >= 2**64:
                raise ConfigError("synth.seed must be < 2^64")
        unit = s.get("unit", Unit.DISPLACEMENT.value)
        if unit not in [u.value for u in Unit]:
            raise ConfigError("synth.unit must be 'displacement' or 'shot-normalized'")
        synth = SynthOptions(_integer(s.name, "averages", s.get("averages", 100), 1), seed, Unit(unit))
        s.finish()

    fit = FitOptions()
    if "fit" in doc:
        s = _Section("fit", doc["fit"])
        space = s.get("space", "log")
        if space not in [v.value for v in FitSpace]:
            raise ConfigError("fit.space must be 'log' or 'linear'")
        window = s.get("window_linewidths", 50.0)
        if window is not None:
            window = _number(s.name, "window_linewidths", window, positive=True)
        anchor = _number(s.name, "anchor_fraction", s.get("anchor_fraction", 0.2), nonneg=True)
        if anchor >= 1:
            raise ConfigError("fit.anchor_fraction must be in [0,1)")
        fit = FitOptions(
            max_iterations=_integer(s.name, "max_iterations", s.get("max_iterations", 200), 1),
            xtol=_number(s.name, "xtol", s.get("xtol", 1e-8), positive=True),
            ftol=_number(s.name, "ftol", s.get("ftol", 1e-10), positive=True),
            space=FitSpace(space),
            window_linewidths=window,
            anchor_fraction=anchor,
        )
        s.finish()

    return RunConfig(membrane, interferometer, environment, squeezing, grid, synth, fit)


def load_config(path) -> RunConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(path, exc.lineno, exc.colno, exc.msg) from exc
    return parse_config(doc)


def _hz_for(omega: float) -> float:
    # pick the float whose 2*pi multiple reproduces omega exactly
    f = omega / (2.0 * math.pi)
    candidates = [f]
    lo = hi = f
    for _ in range(4):
        lo, hi = math.nextafter(lo, -math.inf), math.nextafter(hi, math.inf)
        candidates += [lo, hi]
    for c in candidates:
        if 2.0 * math.pi * c == omega:
            return c
    return f


def config_to_dict(cfg: RunConfig) -> dict:
    """Effective configuration, defaults filled in; reloads to an equal RunConfig."""
    m, i = cfg.membrane, cfg.interferometer
    doc = {
        "membrane": {"f_m_hz": _hz_for(m.omega_m), "gamma_hz": _hz_for(m.gamma_m), "m_eff_kg": m.m_eff,
                     "r_m": m.r_m, "t_m": m.t_m},
        "interferometer": {"p_in_w": i.p_in, "lambda0_m": i.lambda0,
                           "delta_rad": i.delta, "eta": i.eta},
        "environment": {"temperature_k": cfg.environment.temperature},
        "squeezing": {"r": cfg.squeezing.r, "orientation": cfg.squeezing.orientation.value},
    }
    if cfg.grid is not None:
        doc["grid"] = {"start_hz": cfg.grid.start_hz, "stop_hz": cfg.grid.stop_hz,
                       "n_points": cfg.grid.n_points}
    doc["synth"] = {"averages": cfg.synth.averages, "seed": cfg.synth.seed,
                    "unit": cfg.synth.unit.value}
    f = cfg.fit
    doc["fit"] = {"space": f.space.value, "max_iterations": f.max_iterations, "xtol": f.xtol,
                  "ftol": f.ftol, "window_linewidths": f.window_linewidths,
                  "anchor_fraction": f.anchor_fraction}
    return doc
