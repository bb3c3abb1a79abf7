"""Lorentzian-plus-floor fits of resonance spectra.

The fitter is a Levenberg-Marquardt loop on the logarithms of the four
parameters, so positivity never has to be enforced explicitly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma

from .core_model import C_LIGHT, HBAR, K_B, InterferometerConfig, MembraneMechanics, signal_transfer
from .decibel_loss import factor_to_db
from .synth import SpectrumRecord, Unit

REFERENCE_MASS = 100e-12  # kg, used for the scale-free temperature


class FitError(RuntimeError):
    pass


class FlatSpectrumError(FitError, ValueError):
    pass


class SingularNormalMatrixError(FitError, ArithmeticError):
    pass


class UnitMismatchError(ValueError):
    pass


class FitSpace(str, enum.Enum):
    LOG = "log"
    LINEAR = "linear"


@dataclass(frozen=True)
class FitParams:
    amplitude: float
    f_m: float
    gamma_hz: float
    floor: float

    NAMES = ("amplitude", "f_m", "gamma_hz", "floor")

    def __post_init__(self):
        for name in self.NAMES:
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"fit parameter {name} must be finite and > 0, got {value}")
            object.__setattr__(self, name, value)

    def to_array(self) -> np.ndarray:
        return np.array([self.amplitude, self.f_m, self.gamma_hz, self.floor])

    @classmethod
    def from_array(cls, values) -> "FitParams":
        return cls(*(float(v) for v in values))

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.NAMES}


@dataclass(frozen=True)
class FitOptions:
    max_iterations: int = 200
    xtol: float = 1e-8
    ftol: float = 1e-10
    space: FitSpace = FitSpace.LOG
    fd_step: float = 1e-6
    window_linewidths: float | None = 50.0
    anchor_fraction: float = 0.2
    # None: correct the log-periodogram bias whenever the record is averaged or seeded
    bias_correction: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "space", FitSpace(self.space))
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if self.xtol <= 0 or self.ftol <= 0 or self.fd_step <= 0:
            raise ValueError("tolerances and fd_step must be > 0")
        if self.window_linewidths is not None and self.window_linewidths <= 0:
            raise ValueError("window_linewidths must be > 0")
        if not 0.0 <= self.anchor_fraction < 1.0:
            raise ValueError("anchor_fraction must be in [0, 1)")


@dataclass
class FitResult:
    params: FitParams
    covariance: np.ndarray
    chi2_per_dof: float
    iterations: int
    converged: bool
    unit: Unit = Unit.DISPLACEMENT
    n_bins: int = 0
    message: str = ""
    cost_history: list = field(default_factory=list)
    initial_gradient_norm: float = float("nan")
    final_gradient_norm: float = float("nan")

    @property
    def uncertainties(self) -> dict:
        sig = np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))
        return dict(zip(FitParams.NAMES, (float(s) for s in sig)))

    @property
    def q_factor(self) -> float:
        return self.params.f_m / self.params.gamma_hz


def lorentzian_model(f, params: FitParams):
    """A*g / ((w_m^2 - w^2)^2 + g^2 w^2) + floor, with angular w, w_m and g."""
    f = np.asarray(f, dtype=float)
    w = 2.0 * math.pi * f
    g = 2.0 * math.pi * params.gamma_hz
    # subtract in Hz first: exact for nearby values, keeps small f_m steps resolvable
    detune = (2.0 * math.pi) ** 2 * (params.f_m - f) * (params.f_m + f)
    out = params.amplitude * g / (detune**2 + g**2 * w**2) + params.floor
    return float(out) if np.ndim(out) == 0 else out


def central_jacobian(func, x, steps) -> np.ndarray:
    """Central-difference Jacobian of vector ``func`` at ``x`` with per-parameter ``steps``."""
    x = np.asarray(x, dtype=float)
    steps = np.broadcast_to(np.asarray(steps, dtype=float), x.shape)
    cols = []
    for i, h in enumerate(steps):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((np.asarray(func(xp)) - np.asarray(func(xm))) / (xp[i] - xm[i]))
    return np.stack(cols, axis=-1)


def parameter_scales(params) -> np.ndarray:
    """Scale against which each finite-difference step is taken.

    The resonance frequency is stepped relative to the linewidth: a step
    relative to f_m itself is a sizeable fraction of a narrow peak.
    """
    return np.array([params.amplitude, params.gamma_hz, params.gamma_hz, params.floor])


def model_jacobian(f, params: FitParams, rel_step: float = 1e-6) -> np.ndarray:
    """Jacobian of :func:`lorentzian_model` with respect to the natural parameters."""
    return central_jacobian(lambda v: lorentzian_model(f, FitParams.from_array(v)),
                            params.to_array(), rel_step * parameter_scales(params))


def _half_max_width(freqs, excess, ipk, half) -> float | None:
    n = len(excess)
    i = ipk
    while i > 0 and excess[i] > half:
        i -= 1
    if excess[i] > half:
        return None
    left = freqs[i] + (half - excess[i]) * (freqs[i + 1] - freqs[i]) / (excess[i + 1] - excess[i])
    j = ipk
    while j < n - 1 and excess[j] > half:
        j += 1
    if excess[j] > half:
        return None
    right = freqs[j - 1] + (excess[j - 1] - half) * (freqs[j] - freqs[j - 1]) / (excess[j - 1] - excess[j])
    return right - left


def initial_guess(spec: SpectrumRecord) -> FitParams:
    """Starting point from peak position, median floor and half-maximum crossings."""
    psd = spec.psd
    if psd.size < 16:
        raise FitError("initial guess needs at least 16 bins")
    floor = float(np.median(psd))
    ipk = int(np.argmax(psd))  # first (lowest-frequency) maximum on ties
    peak = float(psd[ipk])
    if peak / floor < 2.0:
        raise FlatSpectrumError(f"no resonance: peak/median = {peak / floor:.3g} < 2")
    f_m = float(spec.frequencies[ipk])
    if f_m <= 0:
        raise FitError("peak located at zero frequency")
    excess = psd - floor
    width = _half_max_width(spec.frequencies, excess, ipk, 0.5 * (peak - floor))
    if width is None or width <= 2.0 * spec.bin_width:
        width = 5.0 * spec.bin_width
    g = 2.0 * math.pi * width
    wm = 2.0 * math.pi * f_m
    return FitParams((peak - floor) * g * wm**2, f_m, width, floor)


def fit_window(spec: SpectrumRecord, guess: FitParams, options: FitOptions) -> np.ndarray:
    """Boolean mask of bins near the peak plus floor-anchoring bins at both edges."""
    n = spec.psd.size
    if options.window_linewidths is None:
        return np.ones(n, dtype=bool)
    mask = np.abs(spec.frequencies - guess.f_m) <= options.window_linewidths * guess.gamma_hz
    n_anchor = int(round(options.anchor_fraction * n / 2))
    if n_anchor:
        mask[:n_anchor] = True
        mask[n - n_anchor:] = True
    if mask.sum() < 8:
        mask[:] = True
    return mask


def _use_bias_correction(spec: SpectrumRecord, options: FitOptions) -> bool:
    if options.bias_correction is not None:
        return options.bias_correction
    return spec.seed is not None or spec.averages > 1


def fit_spectrum(spec: SpectrumRecord, options: FitOptions | None = None,
                 initial: FitParams | None = None) -> FitResult:
    """Damped least-squares fit of :func:`lorentzian_model` to ``spec``.

    Residuals are ``log(data) - log(model)`` (log space, default) or
    ``data/model - 1`` (linear space). In log space the mean of the log of a
    Gamma(K) periodogram sits ``digamma(K) - log(K)`` below the log mean;
    that offset is added to the model when bias correction is active.
    """
    options = options or FitOptions()
    try:
        data_guess = initial_guess(spec)
    except FlatSpectrumError:
        if initial is None:
            raise
        data_guess = initial
    guess = initial if initial is not None else data_guess
    # the window depends on the data only, so refits see the same bins
    mask = fit_window(spec, data_guess, options)
    f = spec.frequencies[mask]
    data = spec.psd[mask]
    n = data.size
    if n <= 4:
        raise FitError("not enough bins in the fit window")

    if options.space is FitSpace.LOG:
        log_data = np.log(data)
        offset = 0.0
        if _use_bias_correction(spec, options):
            offset = float(digamma(spec.averages) - math.log(spec.averages))

        def residuals(p):
            with np.errstate(over="ignore", invalid="ignore"):
                model = lorentzian_model(f, _unsafe_params(p))
                return log_data - np.log(model) - offset
    else:
        def residuals(p):
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                return data / lorentzian_model(f, _unsafe_params(p)) - 1.0

    def jacobian(p):
        # a step h on a log-parameter is a relative step h on the parameter
        params = np.exp(p)
        steps = options.fd_step * parameter_scales(_unsafe_params(p)) / params
        return central_jacobian(residuals, p, steps)

    p = np.log(guess.to_array())
    r = residuals(p)
    if not np.all(np.isfinite(r)):
        raise FitError("non-finite residuals at the starting point")
    cost = 0.5 * float(r @ r)
    jac = jacobian(p)
    normal = jac.T @ jac
    grad = jac.T @ r
    if not np.all(np.isfinite(normal)) or np.linalg.matrix_rank(normal) < 4:
        raise SingularNormalMatrixError("normal matrix is singular at the starting point")
    lam = 1e-3 * float(np.max(np.diag(normal)))
    lam_ceiling = 1e16 * float(np.max(np.diag(normal)))
    g0 = float(np.linalg.norm(grad))
    history = [cost]
    converged = False
    message = "maximum iterations reached"
    iterations = 0

    while iterations < options.max_iterations:
        iterations += 1
        try:
            step = np.linalg.solve(normal + lam * np.eye(4), -grad)
        except np.linalg.LinAlgError as exc:
            raise SingularNormalMatrixError("damped normal matrix is singular") from exc
        step_size = float(np.max(np.abs(step)))
        trial = p + step
        r_trial = residuals(trial)
        cost_trial = 0.5 * float(r_trial @ r_trial) if np.all(np.isfinite(r_trial)) else math.inf

        if cost_trial <= cost:
            rel_change = (cost - cost_trial) / cost if cost > 0 else 0.0
            p, r, cost = trial, r_trial, cost_trial
            history.append(cost)
            jac = jacobian(p)
            normal = jac.T @ jac
            grad = jac.T @ r
            lam /= 3.0
            if (step_size < options.xtol and rel_change < options.ftol) or cost == 0.0:
                converged = True
                message = "relative step and cost change below tolerance"
                break
        else:
            lam *= 2.0
            if step_size < options.xtol:
                # the damped step no longer changes the parameters measurably;
                # only a stationary point counts as converged
                converged = bool(np.linalg.norm(grad) < 1e-6 * g0)
                message = ("step below tolerance; no further decrease possible" if converged
                           else "stalled: step below tolerance with gradient not reduced")
                break
            if lam > lam_ceiling:
                message = "damping diverged without decreasing the cost"
                break

    dof = max(n - 4, 1)
    chi2 = float(r @ r) / dof
    try:
        cov_log = np.linalg.inv(normal) * chi2
    except np.linalg.LinAlgError as exc:
        raise SingularNormalMatrixError("normal matrix is singular at the optimum") from exc
    best = np.exp(p)
    cov = cov_log * np.outer(best, best)
    cov = 0.5 * (cov + cov.T)
    return FitResult(
        params=FitParams.from_array(best),
        covariance=cov,
        chi2_per_dof=chi2,
        iterations=iterations,
        converged=converged,
        unit=spec.unit,
        n_bins=n,
        message=message,
        cost_history=history,
        initial_gradient_norm=g0,
        final_gradient_norm=float(np.linalg.norm(grad)),
    )


class _unsafe_params:
    """Exponentiated parameter view that skips validation inside the LM loop."""

    __slots__ = ("amplitude", "f_m", "gamma_hz", "floor")

    def __init__(self, p):
        self.amplitude, self.f_m, self.gamma_hz, self.floor = np.exp(p)


def extract_physics(result: FitResult, config: InterferometerConfig | None = None,
                    m_eff: float | None = None, r_m: float | None = None,
                    mech: MembraneMechanics | None = None) -> dict:
    """Physical quantities implied by a fit.

    Temperature follows from the Lorentzian amplitude: 4 k_B T / m_eff in
    rad/s units, times 2*pi for per-Hz displacement spectra, times the
    signal transfer for shot-normalized spectra. Without ``m_eff`` the
    temperature is reported for a 100 ng reference mass. The floor is
    converted to a squeeze level against the unsqueezed shot-noise floor.
    """
    if not result.converged:
        raise FitError("physics extraction requires a converged fit")
    if mech is not None:
        r_m = mech.r_m if r_m is None else r_m
    params = result.params
    sig = result.uncertainties
    out = {"q_factor": result.q_factor}
    out["q_factor_uncertainty"] = result.q_factor * math.hypot(
        sig["f_m"] / params.f_m, sig["gamma_hz"] / params.gamma_hz)

    if result.unit is Unit.DISPLACEMENT:
        per_mass = params.amplitude / (8.0 * math.pi * K_B)
    else:
        if config is None or r_m is None:
            raise UnitMismatchError(
                "shot-normalized spectrum needs interferometer parameters and r_m to reach displacement")
        transfer = signal_transfer(config, _optics_only(r_m))
        if transfer <= 0:
            raise UnitMismatchError("signal transfer is zero; temperature not recoverable")
        per_mass = params.amplitude / (4.0 * K_B * transfer)
    rel_amp = sig["amplitude"] / params.amplitude
    out["temperature_per_mass_k_per_kg"] = per_mass
    if m_eff is not None:
        out["temperature_k"] = per_mass * m_eff
        out["temperature_uncertainty_k"] = per_mass * m_eff * rel_amp
    else:
        out["temperature_k"] = None
        out["temperature_scaled_100ng_k"] = per_mass * REFERENCE_MASS
        out["temperature_uncertainty_k"] = per_mass * REFERENCE_MASS * rel_amp

    out["inferred_squeezing_db"] = None
    if result.unit is Unit.SHOT_NORMALIZED:
        out["inferred_squeezing_db"] = factor_to_db(params.floor)
    elif config is not None and r_m is not None and config.p_in > 0 and r_m > 0:
        shot = 2.0 * math.pi * HBAR * config.lambda0 * C_LIGHT / (16.0 * math.pi * r_m * config.p_in)
        out["inferred_squeezing_db"] = factor_to_db(params.floor / shot)
    if out["inferred_squeezing_db"] is not None:
        out["inferred_squeezing_db_uncertainty"] = 10.0 / math.log(10.0) * sig["floor"] / params.floor
    return out


def _optics_only(r_m: float) -> MembraneMechanics:
    # signal_transfer reads only r_m; mechanical values are placeholders
    return MembraneMechanics(1.0, 1.0, 1.0, r_m, 0.0)
