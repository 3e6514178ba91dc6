"""sefusion: hybrid discriminative/generative speech enhancement.

A sampling-frequency-independent discriminative branch, a 16 kHz
semantic-conditioned generative branch, and a learned convex fusion of their
spectra, together with the loss family, a degradation simulator, metrics, and
a batch CLI.
"""

from .dsp import (
    SUPPORTED_RATES,
    ComplexSpectrogram,
    StftConfig,
    Waveform,
    frequency_bin_count,
    istft,
    resample,
    stft,
)
from .fusion import FusionMask, FusionNet, estimate_mask, fuse, oracle_mask, train_fusion
from .losses import (
    LossReport,
    MstftConfig,
    complex_mse,
    fusion_loss,
    gen_loss,
    l1_loss,
    magnitude_mse,
    mstft_loss,
    null_scorer,
    perceptual_surrogate,
    regression_loss,
)
from .metrics import lsd, seg_snr, si_sdr
from .pipeline import (
    EnhancerModels,
    PipelineConfig,
    disc_enhance_wave,
    gen_enhance,
    hybrid_enhance,
)
from .rng import Rng

__version__ = "0.1.0"

__all__ = [
    "SUPPORTED_RATES",
    "ComplexSpectrogram",
    "EnhancerModels",
    "FusionMask",
    "FusionNet",
    "LossReport",
    "MstftConfig",
    "PipelineConfig",
    "Rng",
    "StftConfig",
    "Waveform",
    "complex_mse",
    "disc_enhance_wave",
    "estimate_mask",
    "frequency_bin_count",
    "fuse",
    "fusion_loss",
    "gen_enhance",
    "gen_loss",
    "hybrid_enhance",
    "istft",
    "l1_loss",
    "lsd",
    "magnitude_mse",
    "mstft_loss",
    "null_scorer",
    "oracle_mask",
    "perceptual_surrogate",
    "regression_loss",
    "resample",
    "seg_snr",
    "si_sdr",
    "stft",
    "train_fusion",
]
