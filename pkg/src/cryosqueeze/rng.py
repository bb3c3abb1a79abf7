"""Counter-addressable random streams for reproducible spectrum fixtures.

Every bin ``i`` of a spectrum owns an independent SplitMix64 stream whose
starting state is ``mix64(seed ^ mix64(i + 1))``. Draw ``j`` of that stream
is ``mix64(state + (j + 1) * GOLDEN)``, so any value can be computed from
(seed, bin, draw) alone and the output does not depend on evaluation order.

Gamma variates come from the Marsaglia-Tsang (2000) squeeze/rejection
method. Each attempt consumes exactly three draws: two uniforms for a
Box-Muller normal (cosine branch only) and one uniform for the acceptance
test. Uniforms are ``((x >> 11) + 0.5) * 2**-53``, which lies in (0, 1).
"""

from __future__ import annotations

import math

import numpy as np

ALGORITHM = "splitmix64-counter/1;gamma=marsaglia-tsang-2000;normal=box-muller-cos"

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def mix64(z):
    """SplitMix64 finalizer on uint64 scalars or arrays."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def stream_states(seed: int, n: int) -> np.ndarray:
    if not 0 <= int(seed) <= _MASK64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    idx = np.arange(1, n + 1, dtype=np.uint64)
    return mix64(np.uint64(seed) ^ mix64(idx))


def draw_bits(states: np.ndarray, counters: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return mix64(states + (counters.astype(np.uint64) + np.uint64(1)) * GOLDEN)


def _uniform(states, counters):
    bits = draw_bits(states, counters)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def gamma_variates(seed: int, shape: float, n: int, max_rounds: int = 1000) -> np.ndarray:
    """``n`` unit-scale Gamma(shape) variates, one per bin stream.

    ``shape`` must be >= 1. The result for bin ``i`` depends only on
    ``(seed, i, shape)``.
    """
    if shape < 1:
        raise ValueError("gamma shape must be >= 1")
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    states = stream_states(seed, n)
    out = np.empty(n)
    pending = np.arange(n)
    attempt = 0
    while pending.size:
        if attempt >= max_rounds:
            raise RuntimeError("gamma rejection sampler failed to terminate")
        st = states[pending]
        base = np.full(pending.size, 3 * attempt, dtype=np.uint64)
        u1 = _uniform(st, base)
        u2 = _uniform(st, base + np.uint64(1))
        u3 = _uniform(st, base + np.uint64(2))
        x = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
        v = (1.0 + c * x) ** 3
        ok = v > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            accept = ok & (np.log(u3) < 0.5 * x * x + d - d * v + d * np.log(np.where(ok, v, 1.0)))
        out[pending[accept]] = d * v[accept]
        pending = pending[~accept]
        attempt += 1
    return out
