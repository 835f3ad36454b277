"""Feature maps, per-channel normalization, PSNR and the fixed 2x2 pooling baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Returned by psnr() when the two maps are equal; compares greater than any dB value.
IDENTICAL = math.inf


class DimensionError(ValueError):
    """Raised when a map has dimensions an operation cannot accept."""


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """A C x H x W block of float64 values, stored channel-major then row-major.

    The backing array is a private read-only copy, so instances can be
    shared freely.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 3:
            raise DimensionError(f"feature map must be 3-D (C, H, W), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise DimensionError(f"feature map dimensions must be positive, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature map contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def __repr__(self):
        c, h, w = self.shape
        return f"FeatureMap(C={c}, H={h}, W={w})"


def make_feature_map(channels: int, height: int, width: int, data: Sequence[float]) -> FeatureMap:
    if channels < 1 or height < 1 or width < 1:
        raise DimensionError(f"dimensions must be positive, got C={channels} H={height} W={width}")
    flat = np.asarray(data, dtype=np.float64).reshape(-1)
    expected = channels * height * width
    if flat.size != expected:
        raise ValueError(
            f"data length mismatch: got {flat.size} values, expected C*H*W = {expected}"
        )
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        raise ValueError(f"non-finite value {flat[bad[0]]} at flat index {bad[0]}")
    return FeatureMap(flat.reshape(channels, height, width))


def _check_even(fmap: FeatureMap) -> None:
    if fmap.height % 2 or fmap.width % 2:
        raise DimensionError(
            f"height and width must be even for stride-2 pooling, got {fmap.height}x{fmap.width}"
        )


def _blocks(fmap: FeatureMap) -> np.ndarray:
    c, h, w = fmap.shape
    return fmap.data.reshape(c, h // 2, 2, w // 2, 2)


def avg_pool_2x2(fmap: FeatureMap) -> FeatureMap:
    _check_even(fmap)
    return FeatureMap(_blocks(fmap).mean(axis=(2, 4)))


def max_pool_2x2(fmap: FeatureMap) -> FeatureMap:
    _check_even(fmap)
    return FeatureMap(_blocks(fmap).max(axis=(2, 4)))


def channel_normalize(fmap: FeatureMap, epsilon: float = 1e-5) -> FeatureMap:
    """Standardize each channel over its spatial positions.

    Uses the population variance: ``(x - mean) / sqrt(var + epsilon)``.
    Constant channels come out as zeros (for ``epsilon > 0``; with
    ``epsilon == 0`` they are also mapped to zeros rather than NaN).
    """
    x = fmap.data
    mean = x.mean(axis=(1, 2), keepdims=True)
    centered = x - mean
    var = (centered**2).mean(axis=(1, 2), keepdims=True)
    denom = np.sqrt(var + epsilon)
    out = np.divide(centered, denom, out=np.zeros_like(centered), where=denom > 0)
    return FeatureMap(out)


def mse(reference: FeatureMap, test: FeatureMap) -> float:
    if reference.shape != test.shape:
        raise DimensionError(f"shape mismatch: {reference.shape} vs {test.shape}")
    return float(np.mean((reference.data - test.data) ** 2))


def psnr(reference: FeatureMap, test: FeatureMap, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, or ``IDENTICAL`` when the maps match exactly."""
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    err = mse(reference, test)
    if err == 0.0:
        return IDENTICAL
    return 10.0 * math.log10(peak * peak / err)


def format_psnr(value: float) -> str:
    return "identical" if value == IDENTICAL else f"{value:.4f} dB"
