"""Learnable discrete wavelet pooling: separable subband decomposition with trainable filter taps."""

from .attention import AttentionParams, apply_attention, channel_energy, energy_attention, se_gate
from .filters import (
    WaveletFilterPair,
    constraint_residuals,
    grad_loss_wavelet,
    haar,
    loss_high,
    loss_low,
    loss_reverse,
    loss_sym,
    loss_wavelet,
    random_constrained,
)
from .tensor import (
    IDENTICAL,
    DimensionError,
    FeatureMap,
    avg_pool_2x2,
    channel_normalize,
    make_feature_map,
    max_pool_2x2,
    psnr,
)
from .training import TrainConfig, TrainReport, adam_step, cross_entropy, total_loss, train_filters
from .transform import (
    PaddingMode,
    SubbandSet,
    decompose,
    decompose_dense2d,
    decompose_filter_jvp,
    flop_report,
    reconstruct,
    reconstruct_filter_jvp,
)

__version__ = "0.1.0"
