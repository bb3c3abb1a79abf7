"""Built-in self-test suite run by ``cryosqueeze check``.

References use scipy's CODATA constants and adaptive quadrature, so a
corrupted constant inside the model shows up as a failed check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.constants
from scipy import integrate

from . import core_model as cm
from . import decibel_loss as dl
from . import rng

_MECH = dict(f_m=400e3, gamma_hz=4.0, m_eff=100e-12, r_m=0.19, t_m=0.81)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))


def thermal_quadrature(mech: cm.MembraneMechanics, env: cm.ThermalEnvironment,
                       upper_factor: float = 100.0) -> float:
    """(1/2pi) * integral of the thermal PSD over [0, upper_factor * omega_m]."""
    wm, g = mech.omega_m, mech.gamma_m
    edges = [0.0]
    for k in (-1000, -100, -10, -1, 0, 1, 10, 100, 1000):
        x = wm + k * g
        if edges[-1] < x < upper_factor * wm:
            edges.append(x)
    edges.append(upper_factor * wm)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda w: cm.sx_thermal(w, mech, env), a, b,
                                limit=500, epsabs=0.0, epsrel=1e-10)
        total += val
    return total / (2.0 * math.pi)


def check_equipartition() -> CheckResult:
    env = cm.ThermalEnvironment(293.0)
    worst = 0.0
    for q in (1e3, 1e4, 1e5, 1e6):
        mech = cm.MembraneMechanics.from_hz(_MECH["f_m"], _MECH["f_m"] / q, _MECH["m_eff"], 0.19, 0.81)
        reference = scipy.constants.k * env.temperature / (mech.m_eff * mech.omega_m**2)
        worst = max(worst, abs(thermal_quadrature(mech, env) / reference - 1.0))
    return CheckResult("equipartition", worst < 1e-3, f"max relative deviation {worst:.2e} (limit 1e-3)")


def check_peak_identity() -> CheckResult:
    mech = cm.MembraneMechanics.from_hz(**_MECH)
    env = cm.ThermalEnvironment(293.0)
    q = mech.omega_m / mech.gamma_m
    reference = 4 * scipy.constants.k * env.temperature * q / (mech.m_eff * mech.omega_m**3)
    dev = abs(cm.sx_thermal(mech.omega_m, mech, env) / reference - 1.0)
    return CheckResult("peak_identity", dev < 1e-12, f"relative deviation {dev:.2e} (limit 1e-12)")


def check_normalization() -> CheckResult:
    mech = cm.MembraneMechanics.from_hz(**_MECH)
    cfg = cm.InterferometerConfig(0.0, 1550e-9, 0.0, 1.0)
    omega = np.linspace(0.0, 4 * mech.omega_m, 1001)
    out = cm.s_out(omega, cfg, mech, cm.SqueezeState(0.0), cm.ThermalEnvironment(293.0))
    dev = float(np.max(np.abs(out - 1.0)))
    return CheckResult("shot_noise_normalization", dev == 0.0, f"max |S_out - 1| = {dev:.2e}")


def check_dark_port_consistency() -> CheckResult:
    mech = cm.MembraneMechanics.from_hz(**_MECH)
    cfg = cm.InterferometerConfig(1e-3, 1550e-9, 0.0, 1.0)
    sqz, env = cm.SqueezeState(0.5), cm.ThermalEnvironment(293.0)
    omega = 2 * math.pi * np.linspace(390e3, 410e3, 10_000)
    lhs = cm.s_out(omega, cfg, mech, sqz, env) / cm.signal_transfer(cfg, mech)
    rhs = cm.s_x_effective(omega, cfg, mech, sqz, env)
    dev = float(np.max(np.abs(lhs / rhs - 1.0)))
    return CheckResult("dark_port_consistency", dev < 1e-12, f"max relative deviation {dev:.2e} (limit 1e-12)")


def check_db_round_trip() -> CheckResult:
    xs = np.linspace(-30.0, 30.0, 601)
    dev = max(abs(dl.factor_to_db(dl.db_to_factor(x)) - x) for x in xs)
    return CheckResult("db_round_trip", dev < 1e-12, f"max absolute deviation {dev:.2e} dB (limit 1e-12)")


def check_inference_round_trip() -> CheckResult:
    worst = 0.0
    for eta in np.linspace(0.2, 1.0, 10):
        for r in np.linspace(0.0, 2.0, 11)[1:]:
            s, a = dl.propagate_pair(eta, r)
            e2, r2 = dl.infer_eta_r(dl.SqueezeMeasurement(dl.factor_to_db(s), -dl.factor_to_db(a)))
            worst = max(worst, abs(e2 / eta - 1), abs(r2 / r - 1))
    return CheckResult("inference_round_trip", worst < 1e-10, f"max relative deviation {worst:.2e} (limit 1e-10)")


def check_rng_determinism() -> CheckResult:
    a = rng.gamma_variates(12345, 16.0, 4096)
    b = rng.gamma_variates(12345, 16.0, 4096)
    # a prefix of the same streams must not depend on how many bins are drawn
    c = rng.gamma_variates(12345, 16.0, 100)
    ok = np.array_equal(a, b) and np.array_equal(a[:100], c)
    return CheckResult("rng_determinism", bool(ok), "identical streams" if ok else "streams differ")


CHECKS: dict[str, Callable[[], CheckResult]] = {
    "equipartition": check_equipartition,
    "peak_identity": check_peak_identity,
    "shot_noise_normalization": check_normalization,
    "dark_port_consistency": check_dark_port_consistency,
    "db_round_trip": check_db_round_trip,
    "inference_round_trip": check_inference_round_trip,
    "rng_determinism": check_rng_determinism,
}


def run_checks(names=None) -> list[CheckResult]:
    results = []
    for name in names or CHECKS:
        try:
            results.append(CHECKS[name]())
        except Exception as exc:  # a crashing check is a failed check
            results.append(CheckResult(name, False, f"raised {type(exc).__name__}: {exc}"))
    return results
