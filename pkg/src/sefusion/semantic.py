"""Semantic conditioner and token quantizer stubs (16 kHz only).

Stand-ins for the frozen pretrained components of the full system: a log-mel
frontend with a seeded linear adapter plays the role of the speech
representation model, and a seeded random-projection nearest-codeword
quantizer plays the role of the codec's first residual-quantizer layer.
Both are deterministic under their seeds, which is what the surrounding
architecture actually depends on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import StftConfig, Waveform, stft_raw
from .errors import SampleRateError, ShapeMismatchError
from .nn import LinearParams
from .rng import Rng

SEMANTIC_RATE_HZ = 16000
SEMANTIC_HOP_MS = 20.0  # one feature frame per 320 samples at 16 kHz
_WINDOW_MS = 40.0
_LOG_FLOOR = 1e-10


def _mel(f_hz: np.ndarray) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + f_hz / 700.0)


def mel_filterbank(n_bins: int, rate_hz: int, n_mels: int) -> np.ndarray:
    """Triangular mel filters, [bins, bands]."""
    freqs = np.arange(n_bins) * rate_hz / (2 * (n_bins - 1))
    m = _mel(freqs)
    edges = np.linspace(0.0, _mel(np.array([rate_hz / 2.0]))[0], n_mels + 2)
    bank = np.zeros((n_bins, n_mels))
    for b in range(n_mels):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        bank[:, b] = np.clip(
            np.minimum((m - lo) / (mid - lo), (hi - m) / (hi - mid)), 0.0, None
        )
    return bank


@dataclass(frozen=True)
class SemanticConfig:
    n_mels: int = 80
    feat_dim: int = 64


class SemanticEncoder:
    """Log-mel features (40 ms window / 20 ms hop) through a seeded adapter."""

    def __init__(self, config: SemanticConfig, rng: Rng):
        self.config = config
        stft_cfg = StftConfig(window_ms=_WINDOW_MS, hop_ms=SEMANTIC_HOP_MS)
        self._win = stft_cfg.window_samples(SEMANTIC_RATE_HZ)
        self._hop = stft_cfg.hop_samples(SEMANTIC_RATE_HZ)
        self._bank = mel_filterbank(self._win // 2 + 1, SEMANTIC_RATE_HZ, config.n_mels)
        self.adapter = LinearParams.init(rng, config.n_mels, config.feat_dim)

    def features(self, wave: Waveform) -> np.ndarray:
        """[frames, feat_dim] with frames = floor(len / 320) + 1."""
        if wave.sample_rate_hz != SEMANTIC_RATE_HZ:
            raise SampleRateError(
                f"semantic conditioner runs at {SEMANTIC_RATE_HZ} Hz, "
                f"got {wave.sample_rate_hz} Hz"
            )
        spec = stft_raw(wave.samples, self._win, self._hop)
        power = spec.real**2 + spec.imag**2
        logmel = np.log(power @ self._bank + _LOG_FLOOR)
        return self.adapter(logmel)


def extract_semantic(wave: Waveform, encoder: SemanticEncoder) -> np.ndarray:
    return encoder.features(wave)


@dataclass
class VectorQuantizer:
    """Frozen random projection followed by nearest-codeword lookup."""

    projection: np.ndarray  # [feat_dim, code_dim]
    codebook: np.ndarray  # [n_codes, code_dim]

    @classmethod
    def init(
        cls, rng: Rng, feat_dim: int, code_dim: int = 16, n_codes: int = 256
    ) -> "VectorQuantizer":
        return cls(
            projection=rng.fork(1).uniform((feat_dim, code_dim), -1.0, 1.0)
            / np.sqrt(feat_dim),
            codebook=rng.fork(2).uniform((n_codes, code_dim), -1.0, 1.0),
        )

    @property
    def n_codes(self) -> int:
        return self.codebook.shape[0]

    def quantize(self, features: np.ndarray) -> np.ndarray:
        """One code id per feature frame (squared-distance argmin)."""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.projection.shape[0]:
            raise ShapeMismatchError(
                f"expected [frames, {self.projection.shape[0]}] features, "
                f"got {features.shape}"
            )
        proj = features @ self.projection
        d2 = (
            np.sum(proj**2, axis=1, keepdims=True)
            - 2.0 * proj @ self.codebook.T
            + np.sum(self.codebook**2, axis=1)[None, :]
        )
        return np.argmin(d2, axis=1)


def quantize_tokens(features: np.ndarray, quantizer: VectorQuantizer) -> np.ndarray:
    return quantizer.quantize(features)
