"""Scikit-learn style facade over the enhancement pipeline.

The enhancers are transform-shaped (waveform in, waveform out) and the fusion
mask network is genuinely fit-shaped, so these wrappers expose the familiar
``fit`` / ``transform`` / ``predict`` / ``get_params`` surface for pipeline
composition, while the package's functional core stays importable on its own.

``fit`` materializes the seeded model parameters; transforms accept a single
:class:`~sefusion.dsp.Waveform`, an ``(array, rate_hz)`` pair, or a list of
either.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .config import RunConfig
from .dsp import ComplexSpectrogram, Waveform
from .errors import DataValidationError, ShapeMismatchError
from .fusion import FusionMask, FusionNet, estimate_mask, fuse, train_fusion
from .pipeline import EnhancerModels, disc_enhance_wave, gen_enhance, hybrid_enhance
from .rng import Rng


def check_waveform(value) -> Waveform:
    """Coerce a Waveform or an (array, rate_hz) pair into a Waveform."""
    if isinstance(value, Waveform):
        return value
    if isinstance(value, tuple) and len(value) == 2:
        samples, rate = value
        return Waveform(np.asarray(samples, dtype=np.float64), int(rate))
    raise DataValidationError(
        "expected a Waveform or an (array, rate_hz) pair, "
        f"got {type(value).__name__}"
    )


def check_spectrogram(value) -> ComplexSpectrogram:
    if not isinstance(value, ComplexSpectrogram):
        raise DataValidationError(
            f"expected a ComplexSpectrogram, got {type(value).__name__}"
        )
    return value


def check_triple(value) -> tuple[ComplexSpectrogram, ComplexSpectrogram, ComplexSpectrogram]:
    if not (isinstance(value, (tuple, list)) and len(value) == 3):
        raise DataValidationError("expected a (disc, gen, clean) spectrogram triple")
    disc, gen, clean = (check_spectrogram(v) for v in value)
    if not (disc.data.shape == gen.data.shape == clean.data.shape):
        raise ShapeMismatchError("triple spectrograms must share one shape")
    return disc, gen, clean


class _WaveTransformer(BaseEstimator):
    """Shared fit/transform scaffolding for the enhancer estimators."""

    def _run_config(self) -> RunConfig:
        raise NotImplementedError

    def _apply(self, wave: Waveform) -> Waveform:
        raise NotImplementedError

    def fit(self, X=None, y=None) -> "_WaveTransformer":
        """Materialize the seeded model parameters; data is not used."""
        self.models_ = EnhancerModels.build(self._run_config().pipeline())
        return self

    def transform(self, X):
        """Enhance one waveform or a list of waveforms."""
        if not hasattr(self, "models_"):
            self.fit()
        if isinstance(X, (list, tuple)) and not (
            isinstance(X, tuple) and len(X) == 2 and np.ndim(X[0]) == 1
        ):
            return [self._apply(check_waveform(item)) for item in X]
        return self._apply(check_waveform(X))


class DiscriminativeEnhancer(_WaveTransformer):
    """Native-rate enhancement through the LSTM-grid branch only."""

    def __init__(self, num_blocks=2, embed_dim=16, lstm_hidden=32,
                 window_ms=20.0, hop_ms=10.0, seed=0):
        self.num_blocks = num_blocks
        self.embed_dim = embed_dim
        self.lstm_hidden = lstm_hidden
        self.window_ms = window_ms
        self.hop_ms = hop_ms
        self.seed = seed

    def _run_config(self) -> RunConfig:
        return RunConfig(
            seed=self.seed, mode="disc", window_ms=self.window_ms,
            hop_ms=self.hop_ms, disc_blocks=self.num_blocks,
            disc_embed=self.embed_dim, disc_hidden=self.lstm_hidden,
        )

    def _apply(self, wave: Waveform) -> Waveform:
        return disc_enhance_wave(wave, self.models_)


class GenerativeEnhancer(_WaveTransformer):
    """Semantic-conditioned refinement branch; always emits 16 kHz."""

    def __init__(self, lm_layers=2, lm_hidden=64, lm_heads=4, codebook_size=256,
                 dprnn_blocks=2, dprnn_channels=32, semantic_dim=64, seed=0):
        self.lm_layers = lm_layers
        self.lm_hidden = lm_hidden
        self.lm_heads = lm_heads
        self.codebook_size = codebook_size
        self.dprnn_blocks = dprnn_blocks
        self.dprnn_channels = dprnn_channels
        self.semantic_dim = semantic_dim
        self.seed = seed

    def _run_config(self) -> RunConfig:
        return RunConfig(
            seed=self.seed, mode="gen", lm_layers=self.lm_layers,
            lm_hidden=self.lm_hidden, lm_heads=self.lm_heads,
            codebook_size=self.codebook_size, dprnn_blocks=self.dprnn_blocks,
            dprnn_channels=self.dprnn_channels, semantic_dim=self.semantic_dim,
        )

    def _apply(self, wave: Waveform) -> Waveform:
        return gen_enhance(wave, self.models_)


class HybridEnhancer(_WaveTransformer):
    """Full pipeline: both branches and the convex fusion, at native rate."""

    def __init__(self, seed=0, identity_disc=False):
        self.seed = seed
        self.identity_disc = identity_disc

    def _run_config(self) -> RunConfig:
        return RunConfig(seed=self.seed, identity_disc=self.identity_disc)

    def _apply(self, wave: Waveform) -> Waveform:
        return hybrid_enhance(wave, self.models_)


class FusionMaskEstimator(BaseEstimator):
    """Trainable per-bin fusion weights with a fit/predict surface.

    ``fit`` runs gradient descent over (disc, gen, clean) spectrogram triples;
    ``predict`` returns the mask for a (disc, gen) pair and ``transform``
    returns the fused spectrogram.
    """

    def __init__(self, hidden=16, steps=200, learning_rate=0.05, seed=0):
        self.hidden = hidden
        self.steps = steps
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y=None) -> "FusionMaskEstimator":
        triples = [check_triple(item) for item in X]
        net = FusionNet.init(Rng(self.seed), self.hidden)
        self.net_, self.history_ = train_fusion(
            net, triples, steps=self.steps, lr=self.learning_rate
        )
        return self

    def _net(self) -> FusionNet:
        if not hasattr(self, "net_"):
            self.net_ = FusionNet.init(Rng(self.seed), self.hidden)
            self.history_ = []
        return self.net_

    def predict(self, disc, gen) -> FusionMask:
        return estimate_mask(check_spectrogram(disc), check_spectrogram(gen), self._net())

    def transform(self, X):
        """Fuse one (disc, gen) pair or a list of pairs."""
        def one(pair):
            disc, gen = (check_spectrogram(v) for v in pair)
            return fuse(disc, gen, self.predict(disc, gen))

        if isinstance(X, list):
            return [one(pair) for pair in X]
        return one(X)
