"""Separable four-subband wavelet pooling, its adjoint, and a dense 2-D reference.

Conventions shared by every routine here:

* output sample ``p`` of a stride-2 pass reads input samples ``2p + i`` for
  taps ``i = 0..K-1`` (no centering offset);
* out-of-range samples come from the padding rule, either circular
  wrap-around or whole-sample mirror reflection;
* subband names give the horizontal filter first, then the vertical one,
  so ``LH`` is low-pass along the width and high-pass along the height.

:func:`reconstruct` is the exact adjoint of :func:`decompose` under either
padding rule. For an orthonormal filter bank with circular padding the
adjoint is also the inverse.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .filters import WaveletFilterPair
from .tensor import DimensionError, FeatureMap

SUBBAND_NAMES = ("LL", "LH", "HL", "HH")


class PaddingMode(str, enum.Enum):
    CIRCULAR = "circular"
    REFLECT = "reflect"


@dataclass(frozen=True)
class SubbandSet:
    ll: FeatureMap
    lh: FeatureMap
    hl: FeatureMap
    hh: FeatureMap
    source_height: int
    source_width: int

    def __post_init__(self):
        shapes = {m.shape for m in self.maps()}
        if len(shapes) != 1:
            raise DimensionError(f"subbands must share one shape, got {sorted(shapes)}")
        _, h, w = self.ll.shape
        if (self.source_height, self.source_width) != (2 * h, 2 * w):
            raise DimensionError(
                f"source size {self.source_height}x{self.source_width} is not twice "
                f"the subband size {h}x{w}"
            )

    def maps(self) -> tuple[FeatureMap, FeatureMap, FeatureMap, FeatureMap]:
        return (self.ll, self.lh, self.hl, self.hh)

    def named(self) -> dict[str, FeatureMap]:
        return dict(zip(SUBBAND_NAMES, self.maps()))

    def stacked(self) -> np.ndarray:
        """Array of shape (4, C, H/2, W/2) in LL, LH, HL, HH order."""
        return np.stack([m.data for m in self.maps()])

    @classmethod
    def from_arrays(cls, ll, lh, hl, hh) -> "SubbandSet":
        maps = [FeatureMap(a) for a in (ll, lh, hl, hh)]
        _, h, w = maps[0].shape
        return cls(*maps, source_height=2 * h, source_width=2 * w)

    @classmethod
    def from_stacked(cls, arr: np.ndarray) -> "SubbandSet":
        return cls.from_arrays(*arr)

    def inner(self, other: "SubbandSet") -> float:
        return float(np.sum(self.stacked() * other.stacked()))


class MacCounter:
    """Tally of multiply-accumulates, fed from the contractions a transform executes."""

    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)


class FlopReport(NamedTuple):
    separable_macs: int
    dense_macs: int
    ratio: float


def _padding(padding) -> PaddingMode:
    try:
        return PaddingMode(padding)
    except ValueError:
        raise ValueError(f"unknown padding mode {padding!r}; use 'circular' or 'reflect'") from None


def tap_indices(n: int, taps: int, padding=PaddingMode.CIRCULAR) -> np.ndarray:
    """Source index read by output ``p`` and tap ``i``, shape ``(n // 2, taps)``."""
    raw = 2 * np.arange(n // 2)[:, None] + np.arange(taps)[None, :]
    if _padding(padding) is PaddingMode.CIRCULAR:
        return raw % n
    period = 2 * n - 2
    m = raw % period
    return np.where(m >= n, period - m, m)


def _check_input(fmap: FeatureMap) -> None:
    if fmap.height % 2 or fmap.width % 2:
        raise DimensionError(f"height and width must be even, got {fmap.height}x{fmap.width}")


def _filters(pair: WaveletFilterPair) -> np.ndarray:
    return np.stack([pair.low, pair.high])


def decompose(
    fmap: FeatureMap,
    pair: WaveletFilterPair,
    padding=PaddingMode.CIRCULAR,
    counter: MacCounter | None = None,
) -> SubbandSet:
    """Horizontal low/high pass at stride 2, then a vertical low/high pass on each half."""
    _check_input(fmap)
    x = fmap.data
    c, h, w = x.shape
    k = pair.taps
    bank = _filters(pair)

    ix = tap_indices(w, k, padding)
    rows = x[:, :, ix]  # (C, H, W/2, K)
    halves = np.einsum("chqi,fi->fchq", rows, bank)  # (2, C, H, W/2): Y^L, Y^H
    if counter is not None:
        counter.add(rows.size * bank.shape[0])

    iy = tap_indices(h, k, padding)
    cols = halves[:, :, iy, :]  # (2, C, H/2, K, W/2)
    out = np.einsum("acpjq,bj->abcpq", cols, bank)  # (horizontal, vertical, C, H/2, W/2)
    if counter is not None:
        counter.add(cols.size * bank.shape[0])

    return SubbandSet(
        FeatureMap(out[0, 0]),
        FeatureMap(out[0, 1]),
        FeatureMap(out[1, 0]),
        FeatureMap(out[1, 1]),
        source_height=h,
        source_width=w,
    )


def _windows(x: np.ndarray, k: int, padding) -> np.ndarray:
    """All K x K stride-2 windows, shape (C, H/2, W/2, K, K) indexed [.., j, i]."""
    _, h, w = x.shape
    iy = tap_indices(h, k, padding)
    ix = tap_indices(w, k, padding)
    win = x[:, iy[:, None, :, None], ix[None, :, None, :]]
    return win


def dense_kernels(pair: WaveletFilterPair) -> np.ndarray:
    """Outer-product kernels, shape (4, K, K) indexed [subband, vertical j, horizontal i]."""
    bank = _filters(pair)
    # subband (a, b): horizontal filter a, vertical filter b
    return np.stack([np.outer(bank[b], bank[a]) for a in (0, 1) for b in (0, 1)])


def decompose_dense2d(
    fmap: FeatureMap,
    pair: WaveletFilterPair,
    padding=PaddingMode.CIRCULAR,
    counter: MacCounter | None = None,
) -> SubbandSet:
    """Each subband as one stride-2 K x K correlation. Reference for :func:`decompose`."""
    _check_input(fmap)
    x = fmap.data
    c, h, w = x.shape
    k = pair.taps
    kernels = dense_kernels(pair)
    win = _windows(x, k, padding)
    flat = win.reshape(-1, k * k)
    out = flat @ kernels.reshape(4, k * k).T
    if counter is not None:
        counter.add(flat.size * kernels.shape[0])
    out = np.moveaxis(out.reshape(c, h // 2, w // 2, 4), -1, 0)
    return SubbandSet.from_arrays(*out)


def _adjoint_pass(z: np.ndarray, f: np.ndarray, idx: np.ndarray, n: int, axis: int) -> np.ndarray:
    """Transpose of a stride-2 correlation along ``axis``: scatter ``f[i] * z[p]`` to ``idx[p, i]``."""
    z = np.moveaxis(z, axis, 0)
    out = np.zeros((n,) + z.shape[1:])
    for i in range(f.size):
        np.add.at(out, idx[:, i], f[i] * z)
    return np.moveaxis(out, 0, axis)


def reconstruct(
    subbands: SubbandSet, pair: WaveletFilterPair, padding=PaddingMode.CIRCULAR
) -> FeatureMap:
    """Adjoint of :func:`decompose`: undo the vertical stage, then the horizontal one."""
    h, w = subbands.source_height, subbands.source_width
    if subbands.ll.height != h // 2:
        raise DimensionError("inconsistent subband set")
    k = pair.taps
    bank = _filters(pair)
    s = subbands.stacked().reshape(2, 2, *subbands.ll.shape)  # [horizontal, vertical]

    iy = tap_indices(h, k, padding)
    ix = tap_indices(w, k, padding)
    out = np.zeros((subbands.ll.channels, h, w))
    for a in (0, 1):
        half = sum(_adjoint_pass(s[a, b], bank[b], iy, h, axis=1) for b in (0, 1))
        out += _adjoint_pass(half, bank[a], ix, w, axis=2)
    return FeatureMap(out)


def _check_cotangent(fmap: FeatureMap, upstream: SubbandSet) -> None:
    c, h, w = fmap.shape
    if upstream.ll.shape != (c, h // 2, w // 2):
        raise DimensionError(
            f"upstream subbands have shape {upstream.ll.shape}, expected {(c, h // 2, w // 2)}"
        )


def decompose_filter_jvp(
    fmap: FeatureMap,
    pair: WaveletFilterPair,
    upstream: SubbandSet,
    padding=PaddingMode.CIRCULAR,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``<upstream, decompose(fmap, pair)>`` with respect to the low and high taps.

    Every subband is bilinear in (horizontal filter, vertical filter), so each
    contributes to the gradient of both filters it uses.
    """
    _check_input(fmap)
    _check_cotangent(fmap, upstream)
    k = pair.taps
    bank = _filters(pair)
    win = _windows(fmap.data, k, padding)  # (C, H/2, W/2, K, K)
    u = upstream.stacked()  # (4, C, H/2, W/2)
    corr = np.einsum("scpq,cpqji->sji", u, win)  # (4, K, K)

    grad = np.zeros_like(bank)
    for s, (a, b) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        grad[a] += bank[b] @ corr[s]
        grad[b] += corr[s] @ bank[a]
    return grad[0], grad[1]


def reconstruct_filter_jvp(
    subbands: SubbandSet,
    pair: WaveletFilterPair,
    upstream: FeatureMap,
    padding=PaddingMode.CIRCULAR,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``<upstream, reconstruct(subbands, pair)>`` with respect to the taps.

    ``reconstruct`` is the adjoint of ``decompose`` for every tap value, so
    ``<v, R(s)> = <D(v), s>`` and the decomposition gradient applies with the
    roles of map and cotangent swapped.
    """
    if upstream.shape != (subbands.ll.channels, subbands.source_height, subbands.source_width):
        raise DimensionError(f"upstream shape {upstream.shape} does not match the subband source")
    return decompose_filter_jvp(upstream, pair, subbands, padding)


def flop_report(taps: int, channels: int, height: int, width: int) -> FlopReport:
    if height % 2 or width % 2:
        raise DimensionError(f"height and width must be even, got {height}x{width}")
    if min(taps, channels, height, width) < 1:
        raise ValueError("all sizes must be positive")
    separable = 2 * taps * width * height * channels
    dense = taps * taps * width * height * channels
    return FlopReport(separable, dense, dense / separable)
