"""Noise model of a membrane read out in a Michelson-Sagnac interferometer.

All spectral densities in this module are one-sided in angular frequency
(rad/s). Conversion to per-Hz densities happens at the file/CLI boundary.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

# CODATA 2018 exact values
HBAR = 1.054571817e-34  # J s
C_LIGHT = 299792458.0  # m/s
K_B = 1.380649e-23  # J/K

MIN_GAMMA = 1e-6  # rad/s
DARK_PORT_TOL = 1e-6  # rad


class ModelDomainError(ValueError):
    """Raised for non-finite or out-of-domain model inputs."""


class PreconditionError(ValueError):
    """Raised when an operation is called outside its operating point."""


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ModelDomainError(f"{name} must be finite, got {value!r}")
    return value


def _canonical_phase(delta: float) -> float:
    # the output depends on delta only through cos^2, cos 4x, sin^2 2x: period pi
    return math.remainder(delta, math.pi)


@dataclass(frozen=True)
class MembraneMechanics:
    """Mechanical mode and optical properties of the membrane.

    ``omega_m`` and ``gamma_m`` are angular quantities in rad/s, ``r_m`` and
    ``t_m`` are power reflectivity and transmissivity.
    """

    omega_m: float
    gamma_m: float
    m_eff: float
    r_m: float
    t_m: float

    def __post_init__(self):
        for name in ("omega_m", "gamma_m", "m_eff", "r_m", "t_m"):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))
        if self.omega_m <= 0:
            raise ModelDomainError("omega_m must be > 0")
        if self.gamma_m < MIN_GAMMA:
            raise ModelDomainError(f"gamma_m must be >= {MIN_GAMMA} rad/s")
        if self.m_eff <= 0:
            raise ModelDomainError("m_eff must be > 0")
        if not 0.0 <= self.r_m <= 1.0:
            raise ModelDomainError("r_m must be in [0, 1]")
        if not 0.0 <= self.t_m <= 1.0:
            raise ModelDomainError("t_m must be in [0, 1]")
        if self.r_m + self.t_m > 1.0 + 1e-12:
            raise ModelDomainError("r_m + t_m must not exceed 1")

    @classmethod
    def from_hz(cls, f_m: float, gamma_hz: float, m_eff: float, r_m: float, t_m: float):
        return cls(2 * math.pi * f_m, 2 * math.pi * gamma_hz, m_eff, r_m, t_m)

    @property
    def f_m(self) -> float:
        return self.omega_m / (2 * math.pi)

    @property
    def gamma_hz(self) -> float:
        return self.gamma_m / (2 * math.pi)

    @property
    def q(self) -> float:
        return q_factor(self)


@dataclass(frozen=True)
class InterferometerConfig:
    """Optical operating point. ``delta`` is folded into [-pi/2, pi/2]."""

    p_in: float
    lambda0: float
    delta: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        for name in ("p_in", "lambda0", "delta", "eta"):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))
        if self.p_in < 0:
            raise ModelDomainError("p_in must be >= 0")
        if self.lambda0 <= 0:
            raise ModelDomainError("lambda0 must be > 0")
        if not 0.0 <= self.eta <= 1.0:
            raise ModelDomainError("eta must be in [0, 1]")
        object.__setattr__(self, "delta", _canonical_phase(self.delta))


class Orientation(str, enum.Enum):
    SQUEEZED = "squeezed"
    ANTI_SQUEEZED = "anti-squeezed"


@dataclass(frozen=True)
class SqueezeState:
    r: float = 0.0
    orientation: Orientation = Orientation.SQUEEZED

    def __post_init__(self):
        object.__setattr__(self, "r", _finite("r", self.r))
        if self.r < 0:
            raise ModelDomainError("squeeze parameter r must be >= 0")
        object.__setattr__(self, "orientation", Orientation(self.orientation))

    @classmethod
    def from_db(cls, db: float, orientation=Orientation.SQUEEZED) -> "SqueezeState":
        """Squeeze state whose ideal variance factor is ``db`` below vacuum."""
        return cls(float(db) * math.log(10.0) / 20.0, orientation)

    @property
    def variance_factor(self) -> float:
        sign = -1.0 if self.orientation is Orientation.SQUEEZED else 1.0
        return math.exp(sign * 2.0 * self.r)


@dataclass(frozen=True)
class ThermalEnvironment:
    temperature: float

    def __post_init__(self):
        object.__setattr__(self, "temperature", _finite("temperature", self.temperature))
        if self.temperature <= 0:
            raise ModelDomainError("temperature must be > 0")


def _omega_array(omega):
    arr = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ModelDomainError("omega must be finite")
    if np.any(arr < 0):
        raise ModelDomainError("omega must be >= 0")
    return arr


def _scalar_or_array(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def sx_thermal(omega, mech: MembraneMechanics, env: ThermalEnvironment):
    """Thermal displacement PSD of the membrane mode, m^2 s/rad."""
    w = _omega_array(omega)
    # (w_m^2 - w^2) factored to avoid cancellation near resonance
    detune = (mech.omega_m - w) * (mech.omega_m + w)
    denom = detune**2 + mech.gamma_m**2 * w**2
    out = 4.0 * K_B * env.temperature * mech.gamma_m / (mech.m_eff * denom)
    return _scalar_or_array(out)


def signal_transfer(config: InterferometerConfig, mech: MembraneMechanics) -> float:
    """Factor converting S_x (m^2 s/rad) into shot-noise-normalized output PSD."""
    return (
        16.0 * math.pi * mech.r_m * config.p_in * config.eta
        / (HBAR * config.lambda0 * C_LIGHT)
        * math.cos(config.delta) ** 2
    )


def quantum_terms(config: InterferometerConfig, mech: MembraneMechanics, sqz: SqueezeState) -> float:
    """Frequency-independent part of the normalized output PSD."""
    eta, d = config.eta, config.delta
    return (
        sqz.variance_factor * eta / 2.0 * (1.0 + mech.t_m + mech.r_m * math.cos(4.0 * d))
        + mech.r_m * eta * math.sin(2.0 * d) ** 2
        + 1.0 - eta
    )


def s_out(omega, config: InterferometerConfig, mech: MembraneMechanics,
          sqz: SqueezeState, env: ThermalEnvironment):
    """Shot-noise-normalized amplitude-quadrature PSD at the signal port."""
    thermal = np.asarray(sx_thermal(omega, mech, env))
    out = quantum_terms(config, mech, sqz) + thermal * signal_transfer(config, mech)
    return _scalar_or_array(out)


def shot_noise_floor(config: InterferometerConfig, mech: MembraneMechanics) -> float:
    """Unsqueezed displacement-referred quantum noise, m^2 s/rad."""
    if config.p_in <= 0:
        raise PreconditionError("displacement-referred floor requires p_in > 0")
    if mech.r_m <= 0:
        raise PreconditionError("displacement-referred floor requires r_m > 0")
    return HBAR * config.lambda0 * C_LIGHT / (16.0 * math.pi * mech.r_m * config.p_in)


def require_dark_port(config: InterferometerConfig) -> None:
    if abs(config.delta) >= DARK_PORT_TOL:
        raise PreconditionError(
            f"dark-port operation required: |delta| < {DARK_PORT_TOL} rad, got {config.delta}"
        )


def s_x_effective(omega, config: InterferometerConfig, mech: MembraneMechanics,
                  sqz: SqueezeState, env: ThermalEnvironment):
    """Output noise referred to membrane displacement at the dark port, m^2 s/rad."""
    require_dark_port(config)
    floor = sqz.variance_factor * shot_noise_floor(config, mech)
    out = np.asarray(sx_thermal(omega, mech, env)) + floor
    return _scalar_or_array(out)


def equipartition_variance(mech: MembraneMechanics, env: ThermalEnvironment) -> float:
    """Mean-square displacement k_B T / (m_eff omega_m^2), m^2."""
    return K_B * env.temperature / (mech.m_eff * mech.omega_m**2)


def q_factor(mech: MembraneMechanics) -> float:
    if mech.gamma_m <= 0:
        raise ModelDomainError("gamma_m must be > 0 for a quality factor")
    return mech.omega_m / mech.gamma_m


def peak_thermal_psd(mech: MembraneMechanics, env: ThermalEnvironment) -> float:
    """Closed-form resonance value 4 k_B T Q / (m_eff omega_m^3)."""
    return 4.0 * K_B * env.temperature * q_factor(mech) / (mech.m_eff * mech.omega_m**3)
