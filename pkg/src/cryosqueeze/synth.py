"""Model curves and synthetic averaged periodograms on a frequency grid."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .core_model import (
    InterferometerConfig,
    MembraneMechanics,
    SqueezeState,
    ThermalEnvironment,
    require_dark_port,
    s_out,
    s_x_effective,
)


class Unit(str, enum.Enum):
    DISPLACEMENT = "displacement"  # m^2/Hz
    SHOT_NORMALIZED = "shot-normalized"  # dimensionless


@dataclass(frozen=True)
class FrequencyGrid:
    start_hz: float
    stop_hz: float
    n_points: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.spacing != "linear":
            raise ValueError("only linear grids are supported")
        if not (math.isfinite(self.start_hz) and math.isfinite(self.stop_hz)):
            raise ValueError("grid limits must be finite")
        if self.start_hz < 0:
            raise ValueError("grid start_hz must be >= 0")
        if self.stop_hz <= self.start_hz:
            raise ValueError("grid stop_hz must exceed start_hz")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError("grid n_points must be an integer >= 2")
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def frequencies(self) -> np.ndarray:
        return np.linspace(self.start_hz, self.stop_hz, self.n_points)

    @property
    def step(self) -> float:
        return (self.stop_hz - self.start_hz) / (self.n_points - 1)


@dataclass
class SpectrumRecord:
    """One-sided PSD sampled on a grid.

    ``frequencies`` is kept explicitly so records read from files need not
    lie on an exactly reconstructible linear grid.
    """

    frequencies: np.ndarray
    psd: np.ndarray
    unit: Unit
    averages: int = 1
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.psd = np.asarray(self.psd, dtype=float)
        self.unit = Unit(self.unit)
        if self.frequencies.shape != self.psd.shape or self.psd.ndim != 1:
            raise ValueError("frequencies and psd must be 1-D arrays of equal length")
        if self.psd.size < 2:
            raise ValueError("a spectrum needs at least two bins")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(self.psd)) or np.any(self.psd <= 0):
            raise ValueError("psd values must be finite and > 0")
        if int(self.averages) != self.averages or self.averages < 1:
            raise ValueError("averages must be a positive integer")
        self.averages = int(self.averages)

    @property
    def bin_width(self) -> float:
        return float(np.median(np.diff(self.frequencies)))

    def __eq__(self, other):
        if not isinstance(other, SpectrumRecord):
            return NotImplemented
        return (
            np.array_equal(self.frequencies, other.frequencies)
            and np.array_equal(self.psd, other.psd)
            and self.unit == other.unit
            and self.averages == other.averages
            and self.seed == other.seed
            and self.metadata == other.metadata
        )


def model_values(freqs, config: InterferometerConfig, mech: MembraneMechanics,
                 sqz: SqueezeState, env: ThermalEnvironment, unit: Unit) -> np.ndarray:
    omega = 2.0 * math.pi * np.asarray(freqs, dtype=float)
    if Unit(unit) is Unit.DISPLACEMENT:
        require_dark_port(config)
        # per-rad/s density to per-Hz density
        return 2.0 * math.pi * np.asarray(s_x_effective(omega, config, mech, sqz, env))
    return np.asarray(s_out(omega, config, mech, sqz, env)) * np.ones_like(omega)


def _labels(env: ThermalEnvironment, sqz: SqueezeState) -> dict:
    return {
        "temperature_label": f"{env.temperature:g} K",
        "squeezing": "on" if sqz.r > 0 else "off",
    }


def model_curve(grid: FrequencyGrid, config, mech, sqz, env,
                unit: Unit = Unit.DISPLACEMENT) -> SpectrumRecord:
    """Noiseless spectrum; displacement units require the dark port."""
    psd = model_values(grid.frequencies, config, mech, sqz, env, unit)
    meta = _labels(env, sqz)
    meta["provenance"] = "model curve"
    return SpectrumRecord(grid.frequencies, psd, unit, averages=1, seed=None, metadata=meta)


def synth_spectrum(grid: FrequencyGrid, config, mech, sqz, env, averages: int, seed: int,
                   unit: Unit = Unit.DISPLACEMENT) -> SpectrumRecord:
    """Model curve with the scatter of a ``averages``-segment averaged periodogram.

    Each bin is Gamma(K, mean/K) distributed, i.e. the mean of K
    independent exponential periodogram ordinates.
    """
    if int(averages) != averages or averages < 1:
        raise ValueError("averages must be a positive integer")
    if seed is None:
        raise ValueError("synthetic spectra need a seed")
    averages = int(averages)
    mean = model_values(grid.frequencies, config, mech, sqz, env, unit)
    draws = rng.gamma_variates(int(seed), float(averages), grid.n_points)
    psd = mean * draws / averages
    meta = _labels(env, sqz)
    meta["provenance"] = "synthetic periodogram"
    meta["rng"] = rng.ALGORITHM
    return SpectrumRecord(grid.frequencies, psd, unit, averages=averages, seed=int(seed), metadata=meta)
