"""Decibel and variance bookkeeping for squeezed vacuum passing through loss."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# below this much squeezing the efficiency is not identifiable
MIN_SQZ_DB = 0.01
# rounding slack on the antisqueezing >= squeezing ordering
_DB_SLACK = 1e-9


class NoSolutionError(ValueError):
    """The measured squeezing pair is not produced by any pure-loss model."""


@dataclass(frozen=True)
class LossStage:
    label: str
    efficiency: float

    def __post_init__(self):
        eff = float(self.efficiency)
        if not (math.isfinite(eff) and 0.0 < eff <= 1.0):
            raise ValueError(f"stage {self.label!r}: efficiency must be in (0, 1], got {eff}")
        object.__setattr__(self, "efficiency", eff)


@dataclass(frozen=True)
class LossChain:
    stages: tuple[LossStage, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(
            s if isinstance(s, LossStage) else LossStage(*s) for s in self.stages
        ))

    @classmethod
    def uniform(cls, n: int, total_efficiency: float, label: str = "stage") -> "LossChain":
        """``n`` identical stages whose product is ``total_efficiency``."""
        per_stage = total_efficiency ** (1.0 / n)
        return cls(tuple(LossStage(f"{label}{i + 1}", per_stage) for i in range(n)))


@dataclass(frozen=True)
class SqueezeMeasurement:
    """Squeezing below and antisqueezing above shot noise, both positive dB."""

    sqz_db: float
    antisqz_db: float

    def __post_init__(self):
        for name in ("sqz_db", "antisqz_db"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise NoSolutionError(f"{name} must be a finite value >= 0, got {value}")
            object.__setattr__(self, name, value)
        if self.antisqz_db < self.sqz_db - _DB_SLACK:
            raise NoSolutionError(
                f"antisqueezing ({self.antisqz_db} dB) below squeezing ({self.sqz_db} dB) "
                "cannot result from optical loss"
            )


def db_to_factor(db: float) -> float:
    """Variance factor for a suppression of ``db`` decibels (negative db = increase)."""
    return 10.0 ** (-float(db) / 10.0)


def factor_to_db(factor: float) -> float:
    if factor <= 0:
        raise ValueError("variance factor must be > 0")
    return -10.0 * math.log10(factor)


def propagate_squeezing(variance_factor: float, eta: float) -> float:
    """Variance after a beam splitter of transmission ``eta`` admits vacuum."""
    if variance_factor <= 0:
        raise ValueError("variance factor must be > 0")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must be in [0, 1]")
    return eta * variance_factor + (1.0 - eta)


def propagate_pair(eta: float, r: float) -> tuple[float, float]:
    """(squeezed, antisqueezed) variances seen after total efficiency ``eta``."""
    return (propagate_squeezing(math.exp(-2.0 * r), eta),
            propagate_squeezing(math.exp(2.0 * r), eta))


def infer_eta_r(meas: SqueezeMeasurement) -> tuple[float, float]:
    """Total efficiency and intrinsic squeeze parameter from a dB pair.

    With a = 1 - S_s and b = S_a - 1 the loss model gives
    a = eta (1 - e^{-2r}) and b = eta (e^{2r} - 1), so b/a = e^{2r}
    and eta = a b / (b - a). Equal dB values mean a lossless path (eta = 1);
    the inversion only degenerates as the squeezing itself goes to zero.
    """
    if meas.sqz_db < MIN_SQZ_DB:
        raise NoSolutionError(
            f"squeezing below {MIN_SQZ_DB} dB; efficiency and squeeze parameter "
            "are not identifiable"
        )
    # expm1 keeps a and b accurate for small dB values
    a = -math.expm1(-meas.sqz_db * math.log(10.0) / 10.0)
    b = math.expm1(meas.antisqz_db * math.log(10.0) / 10.0)
    if b <= a:
        # only reachable through rounding when eta == 1
        b = a / (1.0 - a)
    eta = a * b / (b - a)
    if eta > 1.0 + 1e-9:
        raise NoSolutionError(f"measurement implies efficiency {eta:.6g} > 1")
    r = 0.5 * math.log(b / a)
    return min(eta, 1.0), r


def compose_losses(chain: LossChain) -> float:
    """Total efficiency of a chain of loss stages."""
    return math.prod(sorted(s.efficiency for s in chain.stages))


def contrast_to_dark_residual(contrast: float) -> float:
    """Fraction of the fringe maximum left at the dark fringe for visibility ``contrast``."""
    if not 0.0 <= contrast <= 1.0:
        raise ValueError("contrast must be in [0, 1]")
    return (1.0 - contrast) / 2.0


def loss_gap_report(source_db: float, chain: LossChain | float, observed_db: float | None = None) -> dict:
    """Squeezing expected from loss alone, and any shortfall left unexplained.

    The model treats every degradation as passive loss; a positive gap to
    ``observed_db`` points at technical or phase noise.
    """
    eta = chain if isinstance(chain, float) else compose_losses(chain)
    expected = factor_to_db(propagate_squeezing(db_to_factor(source_db), eta))
    report = {
        "source_db": float(source_db),
        "efficiency": eta,
        "loss": 1.0 - eta,
        "expected_db": expected,
    }
    if observed_db is not None:
        gap = expected - float(observed_db)
        report["observed_db"] = float(observed_db)
        report["non_loss_gap_db"] = gap
        report["non_loss_degradation"] = gap > 0.05
        if gap > 0.05:
            report["note"] = (
                f"loss alone predicts {expected:.2f} dB; the remaining {gap:.2f} dB "
                "is non-loss degradation (technical or phase noise)"
            )
    return report
