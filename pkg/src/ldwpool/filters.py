"""Learnable 1-D wavelet filter pairs and the constraint losses that keep them wavelet-like.

All four penalty terms are low-order polynomials in the taps, so their
gradients are written out by hand in :func:`grad_loss_wavelet`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

SQRT2 = math.sqrt(2.0)
MAX_TAPS = 16
DEFAULT_WEIGHTS = (1.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True, eq=False)
class WaveletFilterPair:
    """One low-pass and one high-pass filter of ``taps`` coefficients each."""

    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        low = np.array(self.low, dtype=np.float64, copy=True).reshape(-1)
        high = np.array(self.high, dtype=np.float64, copy=True).reshape(-1)
        if low.size != high.size:
            raise ValueError(f"low and high must have equal length, got {low.size} and {high.size}")
        if not 2 <= low.size <= MAX_TAPS:
            raise ValueError(f"filter length must be in [2, {MAX_TAPS}], got {low.size}")
        if not (np.all(np.isfinite(low)) and np.all(np.isfinite(high))):
            raise ValueError("filter taps must be finite")
        low.flags.writeable = False
        high.flags.writeable = False
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def taps(self) -> int:
        return self.low.size

    def as_vector(self) -> np.ndarray:
        """Low taps followed by high taps; the layout the optimizer works on."""
        return np.concatenate([self.low, self.high])

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "WaveletFilterPair":
        vec = np.asarray(vec, dtype=np.float64)
        k = vec.size // 2
        return cls(vec[:k], vec[k:])

    def mirrored(self) -> "WaveletFilterPair":
        return WaveletFilterPair(self.low[::-1], self.high[::-1])

    def __repr__(self):
        return f"WaveletFilterPair(low={self.low.tolist()}, high={self.high.tolist()})"


class Residuals(NamedTuple):
    low_energy: float  # sum(low**2) - 1
    low_sum: float  # sum(low) - sqrt(2)
    high_sum: float  # sum(high)
    high_energy: float  # sum(high**2) - 1

    def max_abs(self) -> float:
        return max(abs(v) for v in self)


class LossTerms(NamedTuple):
    low: float
    high: float
    reverse: float
    sym: float


def haar() -> WaveletFilterPair:
    r = 1.0 / SQRT2
    return WaveletFilterPair([r, r], [r, -r])


def _unit_orthogonal_to_ones(v: np.ndarray) -> np.ndarray | None:
    w = v - v.mean()
    norm = np.linalg.norm(w)
    if norm < 1e-6:
        return None
    return w / norm


def random_constrained(taps: int, seed: int) -> WaveletFilterPair:
    """Random pair that satisfies the sum and energy constraints exactly.

    Taps are drawn uniformly in [-1, 1] and projected in closed form: the
    component along the all-ones direction is fixed by the required sum,
    and the orthogonal remainder is rescaled to reach unit energy. For
    ``taps == 2`` the low-pass is forced to Haar.
    """
    if taps < 2:
        raise ValueError(f"need at least 2 taps, got {taps}")
    if taps > MAX_TAPS:
        raise ValueError(f"at most {MAX_TAPS} taps supported, got {taps}")
    rng = np.random.default_rng(seed)
    ones = np.ones(taps) / math.sqrt(taps)
    # sum(low) = sqrt(2)  <=>  low . ones = sqrt(2 / K)
    along = math.sqrt(2.0 / taps)
    across = math.sqrt(max(0.0, 1.0 - along * along))
    while True:
        u_low = _unit_orthogonal_to_ones(rng.uniform(-1.0, 1.0, taps))
        u_high = _unit_orthogonal_to_ones(rng.uniform(-1.0, 1.0, taps))
        if u_low is not None and u_high is not None:
            break
    low = along * ones + across * u_low
    return WaveletFilterPair(low, u_high)


def random_unconstrained(taps: int, seed: int) -> WaveletFilterPair:
    if taps < 2:
        raise ValueError(f"need at least 2 taps, got {taps}")
    rng = np.random.default_rng(seed)
    return WaveletFilterPair(rng.uniform(-1.0, 1.0, taps), rng.uniform(-1.0, 1.0, taps))


def constraint_residuals(pair: WaveletFilterPair) -> Residuals:
    lo, hi = pair.low, pair.high
    return Residuals(
        float(lo @ lo - 1.0),
        float(lo.sum() - SQRT2),
        float(hi.sum()),
        float(hi @ hi - 1.0),
    )


def loss_low(pair: WaveletFilterPair) -> float:
    lo = pair.low
    return float((lo @ lo - 1.0) ** 2 + (lo.sum() - SQRT2) ** 2)


def loss_high(pair: WaveletFilterPair) -> float:
    hi = pair.high
    return float((hi @ hi - 1.0) ** 2 + hi.sum() ** 2)


def loss_reverse(pair: WaveletFilterPair) -> float:
    return float((pair.low @ pair.low + pair.high @ pair.high - 2.0) ** 2)


def _mirror_penalty(v: np.ndarray) -> float:
    half = v.size // 2
    d = v[:half] - v[::-1][:half]
    return float(d @ d)


def loss_sym(pair: WaveletFilterPair) -> float:
    """Palindrome penalty: tap i is compared with tap K-1-i (0-based)."""
    return _mirror_penalty(pair.low) + _mirror_penalty(pair.high)


def loss_terms(pair: WaveletFilterPair) -> LossTerms:
    return LossTerms(loss_low(pair), loss_high(pair), loss_reverse(pair), loss_sym(pair))


def _check_weights(weights: Sequence[float]) -> tuple[float, float, float, float]:
    w = tuple(float(x) for x in weights)
    if len(w) != 4:
        raise ValueError(f"expected 4 loss weights, got {len(w)}")
    if any(x < 0 or not math.isfinite(x) for x in w):
        raise ValueError(f"loss weights must be finite and non-negative, got {w}")
    return w


def loss_wavelet(pair: WaveletFilterPair, weights: Sequence[float] = DEFAULT_WEIGHTS) -> float:
    w = _check_weights(weights)
    return float(sum(wi * ti for wi, ti in zip(w, loss_terms(pair))))


def grad_loss_wavelet(
    pair: WaveletFilterPair, weights: Sequence[float] = DEFAULT_WEIGHTS
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of :func:`loss_wavelet` as ``(d/dlow, d/dhigh)``."""
    w_low, w_high, w_rev, w_sym = _check_weights(weights)
    lo, hi = pair.low, pair.high
    lo_energy = lo @ lo
    hi_energy = hi @ hi

    g_lo = w_low * (4.0 * (lo_energy - 1.0) * lo + 2.0 * (lo.sum() - SQRT2))
    g_hi = w_high * (4.0 * (hi_energy - 1.0) * hi + 2.0 * hi.sum())

    rev = 4.0 * (lo_energy + hi_energy - 2.0)
    g_lo = g_lo + w_rev * rev * lo
    g_hi = g_hi + w_rev * rev * hi

    # d/dv_j of sum_{i<K/2} (v_i - v_{K-1-i})^2 is 2 (v_j - v_{K-1-j}) for every j
    g_lo = g_lo + w_sym * 2.0 * (lo - lo[::-1])
    g_hi = g_hi + w_sym * 2.0 * (hi - hi[::-1])
    return g_lo, g_hi
