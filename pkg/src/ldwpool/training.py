"""Learning filter taps by gradient descent on task loss plus the wavelet constraint losses.

The task loss used here is the reconstruction error of the
decompose/reconstruct round trip, averaged over an image batch. Its
gradient comes from the two filter JVPs in :mod:`ldwpool.transform`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import filters as F
from .filters import Residuals, WaveletFilterPair
from .tensor import DimensionError, FeatureMap
from .transform import (
    PaddingMode,
    decompose,
    decompose_filter_jvp,
    reconstruct,
    reconstruct_filter_jvp,
)

PROB_EPS = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 400
    weight_decay: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    wavelet_weights: tuple[float, float, float, float] = F.DEFAULT_WEIGHTS
    task_weight: float = 1.0
    seed: int = 0
    pretrain: bool = True
    padding: PaddingMode = PaddingMode.CIRCULAR
    # False folds weight decay into the gradient (plain L2) instead of AdamW-style decay
    decoupled_weight_decay: bool = True
    # step schedule: multiply lr by lr_decay every lr_step_epochs steps; None keeps it constant
    lr_step_epochs: int | None = None
    lr_decay: float = 0.1
    # stop once total loss drops below this value
    early_stop_loss: float | None = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")
        for name in ("adam_beta1", "adam_beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {b}")
        if self.adam_epsilon <= 0:
            raise ValueError("adam_epsilon must be positive")
        if self.weight_decay < 0 or self.task_weight < 0:
            raise ValueError("weight_decay and task_weight must be non-negative")
        object.__setattr__(self, "wavelet_weights", F._check_weights(self.wavelet_weights))
        object.__setattr__(self, "padding", PaddingMode(self.padding))
        if self.lr_step_epochs is not None and self.lr_step_epochs < 1:
            raise ValueError("lr_step_epochs must be a positive integer or None")

    def learning_rate_at(self, step: int) -> float:
        """Learning rate used for optimizer step ``step`` (1-based)."""
        if self.lr_step_epochs is None:
            return self.learning_rate
        return self.learning_rate * self.lr_decay ** ((step - 1) // self.lr_step_epochs)


class EpochRecord(NamedTuple):
    epoch: int
    task_loss: float
    wavelet_loss: float
    total_loss: float
    residuals: Residuals


@dataclass
class TrainReport:
    """Loss history and the learned pair.

    ``history[0]`` describes the initial filters; ``history[e]`` the filters
    after ``e`` optimizer steps. The last record therefore always matches
    ``final_pair``.
    """

    history: list[EpochRecord]
    final_pair: WaveletFilterPair
    initial_pair: WaveletFilterPair

    @property
    def final(self) -> EpochRecord:
        return self.history[-1]


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def cross_entropy(labels: Sequence[float], probabilities: Sequence[float]) -> float:
    """Binary negative log-likelihood summed over the batch."""
    y = np.asarray(labels, dtype=np.float64)
    p = np.asarray(probabilities, dtype=np.float64)
    if y.shape != p.shape:
        raise ValueError(f"labels and probabilities differ in shape: {y.shape} vs {p.shape}")
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def total_loss(task_loss: float, pair: WaveletFilterPair, config: TrainConfig) -> float:
    return config.task_weight * task_loss + F.loss_wavelet(pair, config.wavelet_weights)


def adam_step(
    params: np.ndarray, grads: np.ndarray, state: AdamState, config: TrainConfig
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Returns new arrays; inputs are not modified."""
    p = np.asarray(params, dtype=np.float64)
    g = np.asarray(grads, dtype=np.float64)
    if p.shape != g.shape or state.m.shape != p.shape:
        raise ValueError(f"shape mismatch: params {p.shape}, grads {g.shape}, state {state.m.shape}")
    if state.step < 0:
        raise ValueError("optimizer step count must be non-negative")
    b1, b2 = config.adam_beta1, config.adam_beta2
    t = state.step + 1
    lr = config.learning_rate_at(t)
    wd = config.weight_decay
    if not config.decoupled_weight_decay:
        g = g + wd * p

    m = b1 * state.m + (1.0 - b1) * g
    v = b2 * state.v + (1.0 - b2) * g * g
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    update = m_hat / (np.sqrt(v_hat) + config.adam_epsilon)
    if config.decoupled_weight_decay:
        update = update + wd * p
    return p - lr * update, AdamState(m, v, t)


def _check_images(images: Sequence[FeatureMap]) -> list[FeatureMap]:
    images = list(images)
    if not images:
        raise ValueError("need at least one training image")
    for i, img in enumerate(images):
        if img.height % 2 or img.width % 2:
            raise DimensionError(f"image {i} has odd dimensions {img.height}x{img.width}")
    return images


def reconstruction_loss(
    images: Sequence[FeatureMap],
    pair: WaveletFilterPair,
    padding=PaddingMode.CIRCULAR,
    with_grad: bool = False,
):
    """Mean over images of the per-pixel squared round-trip error.

    With ``with_grad`` returns ``(loss, d/dlow, d/dhigh)``.
    """
    images = _check_images(images)
    loss = 0.0
    g_lo = np.zeros(pair.taps)
    g_hi = np.zeros(pair.taps)
    for img in images:
        sub = decompose(img, pair, padding)
        rec = reconstruct(sub, pair, padding)
        resid = rec.data - img.data
        scale = 1.0 / (resid.size * len(images))
        loss += scale * float(np.sum(resid * resid))
        if not with_grad:
            continue
        # d/dtheta of scale * |R(D x) - x|^2 = 2 scale <r, (dR) s + R (dD) x>
        #   = 2 scale [<r, (dR) s> + <D r, (dD) x>]
        r = FeatureMap(resid)
        gr = reconstruct_filter_jvp(sub, pair, r, padding)
        gd = decompose_filter_jvp(img, pair, decompose(r, pair, padding), padding)
        g_lo += 2.0 * scale * (gr[0] + gd[0])
        g_hi += 2.0 * scale * (gr[1] + gd[1])
    if with_grad:
        return loss, g_lo, g_hi
    return loss


def evaluate(
    images: Sequence[FeatureMap], pair: WaveletFilterPair, config: TrainConfig, epoch: int = 0
) -> EpochRecord:
    task = reconstruction_loss(images, pair, config.padding)
    wav = F.loss_wavelet(pair, config.wavelet_weights)
    return EpochRecord(epoch, task, wav, config.task_weight * task + wav, F.constraint_residuals(pair))


def objective_and_grad(
    images: Sequence[FeatureMap], pair: WaveletFilterPair, config: TrainConfig
) -> tuple[EpochRecord, np.ndarray]:
    """Current losses and the gradient of the total loss over ``pair.as_vector()``."""
    task, t_lo, t_hi = reconstruction_loss(images, pair, config.padding, with_grad=True)
    wav = F.loss_wavelet(pair, config.wavelet_weights)
    w_lo, w_hi = F.grad_loss_wavelet(pair, config.wavelet_weights)
    tw = config.task_weight
    grad = np.concatenate([tw * t_lo + w_lo, tw * t_hi + w_hi])
    record = EpochRecord(0, task, wav, tw * task + wav, F.constraint_residuals(pair))
    return record, grad


def initial_pair(taps: int, config: TrainConfig) -> WaveletFilterPair:
    if config.pretrain:
        return F.random_constrained(taps, config.seed)
    return F.random_unconstrained(taps, config.seed)


def train_filters(
    images: Sequence[FeatureMap],
    taps: int,
    config: TrainConfig = TrainConfig(),
    init: WaveletFilterPair | None = None,
) -> TrainReport:
    """Full-batch Adam on the filter taps.

    Starts from ``init`` if given, otherwise from a constrained random pair
    (``config.pretrain``) or a plain uniform draw.
    """
    images = _check_images(images)
    if taps < 2:
        raise ValueError(f"need at least 2 taps, got {taps}")
    pair = init if init is not None else initial_pair(taps, config)
    if pair.taps != taps:
        raise ValueError(f"initial pair has {pair.taps} taps, expected {taps}")
    start = pair
    state = AdamState.zeros(2 * taps)

    record, grad = objective_and_grad(images, pair, config)
    history = [record]
    for epoch in range(1, config.epochs + 1):
        if config.early_stop_loss is not None and record.total_loss < config.early_stop_loss:
            break
        vec, state = adam_step(pair.as_vector(), grad, state, config)
        pair = WaveletFilterPair.from_vector(vec)
        record, grad = objective_and_grad(images, pair, config)
        history.append(record._replace(epoch=epoch))
        if not math.isfinite(record.total_loss):
            raise FloatingPointError(f"loss diverged at epoch {epoch}")
    return TrainReport(history, pair, start)


def with_weights(config: TrainConfig, weights: Sequence[float]) -> TrainConfig:
    return replace(config, wavelet_weights=tuple(weights))
