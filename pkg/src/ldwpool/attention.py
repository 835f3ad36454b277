"""Channel attention driven by per-channel energy instead of global average pooling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import FeatureMap, channel_normalize


@dataclass(frozen=True, eq=False)
class AttentionParams:
    """Two-layer squeeze-and-excitation weights: ``C -> C/r -> C``."""

    w1: np.ndarray  # (C/r, C)
    b1: np.ndarray  # (C/r,)
    w2: np.ndarray  # (C, C/r)
    b2: np.ndarray  # (C,)

    def __post_init__(self):
        arrays = {}
        for name in ("w1", "b1", "w2", "b2"):
            a = np.array(getattr(self, name), dtype=np.float64, copy=True)
            if not np.all(np.isfinite(a)):
                raise ValueError(f"attention parameter {name} has non-finite entries")
            a.flags.writeable = False
            arrays[name] = a
        w1, b1, w2, b2 = arrays["w1"], arrays["b1"], arrays["w2"], arrays["b2"]
        if w1.ndim != 2 or w2.ndim != 2 or b1.ndim != 1 or b2.ndim != 1:
            raise ValueError("w1, w2 must be matrices and b1, b2 vectors")
        hidden, c = w1.shape
        if b1.shape != (hidden,) or w2.shape != (c, hidden) or b2.shape != (c,):
            raise ValueError(
                f"inconsistent shapes: w1 {w1.shape}, b1 {b1.shape}, w2 {w2.shape}, b2 {b2.shape}"
            )
        if c % hidden:
            raise ValueError(f"hidden width {hidden} must divide channel count {c}")
        for name, a in arrays.items():
            object.__setattr__(self, name, a)

    @property
    def channels(self) -> int:
        return self.w1.shape[1]

    @property
    def reduction(self) -> int:
        return self.channels // self.w1.shape[0]

    @classmethod
    def zeros(cls, channels: int, reduction: int = 1) -> "AttentionParams":
        hidden = _hidden_width(channels, reduction)
        return cls(
            np.zeros((hidden, channels)), np.zeros(hidden),
            np.zeros((channels, hidden)), np.zeros(channels),
        )

    @classmethod
    def random(cls, channels: int, reduction: int = 4, seed: int = 0) -> "AttentionParams":
        """Glorot-uniform weights and zero biases, drawn from ``seed``."""
        hidden = _hidden_width(channels, reduction)
        rng = np.random.default_rng(seed)
        limit = np.sqrt(6.0 / (channels + hidden))
        return cls(
            rng.uniform(-limit, limit, (hidden, channels)), np.zeros(hidden),
            rng.uniform(-limit, limit, (channels, hidden)), np.zeros(channels),
        )


def _hidden_width(channels: int, reduction: int) -> int:
    if channels < 1 or reduction < 1 or channels % reduction:
        raise ValueError(f"reduction {reduction} must be a positive divisor of channels {channels}")
    return channels // reduction


def channel_energy(fmap: FeatureMap, normalize_first: bool = False, epsilon: float = 1e-5) -> np.ndarray:
    """Sum of squared activations per channel, optionally after per-channel standardization."""
    if normalize_first:
        fmap = channel_normalize(fmap, epsilon)
    return np.einsum("chw,chw->c", fmap.data, fmap.data)


def standardize_energies(energies: Sequence[float]) -> np.ndarray:
    """Zero mean, unit variance across channels; a constant vector maps to zeros."""
    e = np.asarray(energies, dtype=np.float64)
    centered = e - e.mean()
    std = np.sqrt(np.mean(centered**2))
    if std <= 1e-12 * max(1.0, np.abs(e).max()):
        return np.zeros_like(e)
    return centered / std


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so neither branch overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def se_gate(energies: Sequence[float], params: AttentionParams) -> np.ndarray:
    e = np.asarray(energies, dtype=np.float64)
    if e.shape != (params.channels,):
        raise ValueError(f"expected {params.channels} energies, got shape {e.shape}")
    hidden = np.maximum(params.w1 @ e + params.b1, 0.0)
    gates = _sigmoid(params.w2 @ hidden + params.b2)
    # sigmoid rounds to exactly 0 or 1 in float64 for |z| > ~37; keep the open interval
    tiny = np.finfo(np.float64).tiny
    return np.clip(gates, tiny, np.nextafter(1.0, 0.0))


def apply_attention(fmap: FeatureMap, gates: Sequence[float]) -> FeatureMap:
    g = np.asarray(gates, dtype=np.float64)
    if g.shape != (fmap.channels,):
        raise ValueError(f"expected {fmap.channels} gates, got shape {g.shape}")
    return FeatureMap(fmap.data * g[:, None, None])


def energy_attention(
    fmap: FeatureMap,
    params: AttentionParams,
    normalize_first: bool = True,
    epsilon: float = 1e-5,
) -> tuple[FeatureMap, np.ndarray, np.ndarray]:
    """Energies -> cross-channel standardization -> SE gates -> gated map.

    Returns ``(gated_map, energies, gates)``; ``energies`` are the raw
    per-channel values before standardization.
    """
    energies = channel_energy(fmap, normalize_first, epsilon)
    gates = se_gate(standardize_energies(energies), params)
    return apply_attention(fmap, gates), energies, gates
