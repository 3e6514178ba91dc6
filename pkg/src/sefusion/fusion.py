"""Convex time-frequency fusion of the two branch estimates.

``fuse`` is the exact per-bin blend mask * disc + (1 - mask) * gen.  The mask
comes either from a small trainable per-bin network over magnitude features,
or from the oracle rule (pick the branch closer to clean) used for testing.
Training runs plain gradient descent on the fusion objective (multi-resolution
STFT + 0.5 * L1 + pluggable quality term), with gradients chained analytically
through synthesis back to the network parameters.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import ComplexSpectrogram, Waveform, istft_raw, istft_raw_adjoint
from .errors import DataValidationError, ShapeMismatchError
from .losses import (
    LossReport,
    MstftConfig,
    SqaScorer,
    fusion_report,
    l1_loss,
    mstft_loss,
    null_scorer,
)
from .nn import sigmoid
from .rng import Rng


@dataclass(frozen=True)
class FusionMask:
    """Per-bin weights in [0, 1] for the discriminative estimate."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ShapeMismatchError("fusion mask must be 2-D (frames x bins)")
        if not np.all(np.isfinite(data)):
            raise DataValidationError("fusion mask contains non-finite entries")
        if np.any(data < 0.0) or np.any(data > 1.0):
            raise DataValidationError("fusion mask entries must lie in [0, 1]")
        object.__setattr__(self, "data", data)


def _aligned(disc: ComplexSpectrogram, gen: ComplexSpectrogram) -> None:
    if disc.data.shape != gen.data.shape:
        raise ShapeMismatchError(
            f"branch spectrograms differ in shape: "
            f"{disc.data.shape} vs {gen.data.shape}"
        )
    if disc.sample_rate_hz != gen.sample_rate_hz or disc.config != gen.config:
        raise ShapeMismatchError("branch spectrograms differ in rate or STFT config")


def fuse(
    disc: ComplexSpectrogram, gen: ComplexSpectrogram, mask: FusionMask
) -> ComplexSpectrogram:
    """mask * disc + (1 - mask) * gen, elementwise."""
    _aligned(disc, gen)
    if mask.data.shape != disc.data.shape:
        raise ShapeMismatchError(
            f"mask shape {mask.data.shape} != spectrogram shape {disc.data.shape}"
        )
    fused = mask.data * disc.data + (1.0 - mask.data) * gen.data
    return ComplexSpectrogram(fused, disc.sample_rate_hz, disc.config)


def oracle_mask(
    disc: ComplexSpectrogram, gen: ComplexSpectrogram, clean: ComplexSpectrogram
) -> FusionMask:
    """1 where the discriminative bin is at least as close to clean, else 0."""
    _aligned(disc, gen)
    _aligned(disc, clean)
    closer = np.abs(disc.data - clean.data) <= np.abs(gen.data - clean.data)
    return FusionMask(closer.astype(np.float64))


def mask_features(disc: ComplexSpectrogram, gen: ComplexSpectrogram) -> np.ndarray:
    """Per-bin input features: (|disc|, |gen|, |disc - gen|) -> [T, F, 3]."""
    _aligned(disc, gen)
    return np.stack(
        [np.abs(disc.data), np.abs(gen.data), np.abs(disc.data - gen.data)], axis=2
    )


@dataclass
class FusionNet:
    """Per-bin MLP: 3 features -> two tanh layers -> sigmoid weight.

    Each bin's (|disc|, |gen|, |disc - gen|) triple is first divided by
    |disc| + |gen| so the network sees scale-free proportions; spectral
    magnitudes span several orders of magnitude and would otherwise pin the
    tanh layers at saturation.
    """

    w1: np.ndarray  # [3, hidden]
    b1: np.ndarray
    w2: np.ndarray  # [hidden, hidden]
    b2: np.ndarray
    w3: np.ndarray  # [hidden]
    b3: float

    @classmethod
    def init(cls, rng: Rng, hidden: int = 16) -> "FusionNet":
        return cls(
            w1=rng.uniform((3, hidden), -1, 1) / np.sqrt(3),
            b1=np.zeros(hidden),
            w2=rng.uniform((hidden, hidden), -1, 1) / np.sqrt(hidden),
            b2=np.zeros(hidden),
            w3=rng.uniform(hidden, -1, 1) / np.sqrt(hidden),
            b3=0.0,
        )

    def copy(self) -> "FusionNet":
        return FusionNet(
            self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy(),
            self.w3.copy(), self.b3,
        )

    def forward(self, feats: np.ndarray) -> tuple[np.ndarray, dict]:
        """feats [N, 3] -> mask values in (0, 1), plus the backprop cache."""
        scaled = feats / (feats[:, 0:1] + feats[:, 1:2] + 1e-8)
        a1 = np.tanh(scaled @ self.w1 + self.b1)
        a2 = np.tanh(a1 @ self.w2 + self.b2)
        mask = sigmoid(a2 @ self.w3 + self.b3)
        return mask, {"feats": scaled, "a1": a1, "a2": a2, "mask": mask}

    def backward(self, cache: dict, g_mask: np.ndarray) -> dict[str, np.ndarray]:
        """Exact parameter gradients given dLoss/dmask."""
        mask, a1, a2, feats = cache["mask"], cache["a1"], cache["a2"], cache["feats"]
        g_z3 = g_mask * mask * (1.0 - mask)
        g_w3 = a2.T @ g_z3
        g_b3 = float(np.sum(g_z3))
        g_a2 = np.outer(g_z3, self.w3)
        g_z2 = g_a2 * (1.0 - a2**2)
        g_w2 = a1.T @ g_z2
        g_b2 = np.sum(g_z2, axis=0)
        g_a1 = g_z2 @ self.w2.T
        g_z1 = g_a1 * (1.0 - a1**2)
        g_w1 = feats.T @ g_z1
        g_b1 = np.sum(g_z1, axis=0)
        return {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2,
                "w3": g_w3, "b3": g_b3}

    def apply_step(self, grads: dict[str, np.ndarray], lr: float) -> None:
        self.w1 -= lr * grads["w1"]
        self.b1 -= lr * grads["b1"]
        self.w2 -= lr * grads["w2"]
        self.b2 -= lr * grads["b2"]
        self.w3 -= lr * grads["w3"]
        self.b3 -= lr * grads["b3"]

    def tensors(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2,
                "w3": self.w3, "b3": np.array([self.b3])}


def estimate_mask(
    disc: ComplexSpectrogram, gen: ComplexSpectrogram, net: FusionNet
) -> FusionMask:
    feats = mask_features(disc, gen)
    t, f, _ = feats.shape
    mask, _ = net.forward(feats.reshape(t * f, 3))
    return FusionMask(mask.reshape(t, f))


def fusion_objective_with_grads(
    net: FusionNet,
    examples: list[tuple[ComplexSpectrogram, ComplexSpectrogram, ComplexSpectrogram]],
    scorer: SqaScorer | None = None,
    cfg: MstftConfig | None = None,
) -> tuple[LossReport, dict[str, np.ndarray]]:
    """Mean fusion loss over examples and its gradient w.r.t. net parameters.

    The chain runs mask -> fused spectrum -> synthesis -> waveform losses; the
    synthesis step backpropagates through the exact overlap-add adjoint.
    """
    if not examples:
        raise DataValidationError("need at least one (disc, gen, clean) example")
    scorer = scorer or null_scorer
    cfg = cfg or MstftConfig()
    totals = {"mstft": 0.0, "l1": 0.0, "sqa": 0.0}
    grad_sum: dict[str, np.ndarray] | None = None
    for disc, gen, clean in examples:
        _aligned(disc, gen)
        _aligned(disc, clean)
        win = disc.config.window_samples(disc.sample_rate_hz)
        hop = disc.config.hop_samples(disc.sample_rate_hz)
        feats = mask_features(disc, gen)
        t, f, _ = feats.shape
        mask, cache = net.forward(feats.reshape(t * f, 3))
        diff = disc.data - gen.data
        fused = mask.reshape(t, f) * diff + gen.data
        est = istft_raw(fused, win, hop)
        ref = istft_raw(clean.data, win, hop)
        l_mstft, g_mstft = mstft_loss(est, ref, cfg)
        l_l1, g_l1 = l1_loss(est, ref)
        l_sqa, g_sqa = scorer(Waveform(est, disc.sample_rate_hz))
        g_wave = g_mstft + 0.5 * g_l1 + g_sqa
        g_spec = istft_raw_adjoint(g_wave, win, hop, t)
        g_mask = (g_spec.real * diff.real + g_spec.imag * diff.imag).reshape(t * f)
        grads = net.backward(cache, g_mask)
        totals["mstft"] += l_mstft
        totals["l1"] += l_l1
        totals["sqa"] += l_sqa
        if grad_sum is None:
            grad_sum = grads
        else:
            for key in grad_sum:
                grad_sum[key] = grad_sum[key] + grads[key]
    n = len(examples)
    report = fusion_report(totals["mstft"] / n, totals["l1"] / n, totals["sqa"] / n)
    grad_mean = {key: value / n for key, value in grad_sum.items()}
    return report, grad_mean


def train_fusion(
    net: FusionNet,
    examples: list[tuple[ComplexSpectrogram, ComplexSpectrogram, ComplexSpectrogram]],
    steps: int,
    lr: float,
    scorer: SqaScorer | None = None,
    cfg: MstftConfig | None = None,
    log_path: str | Path | None = None,
) -> tuple[FusionNet, list[LossReport]]:
    """Gradient descent on the fusion objective; branches stay frozen.

    Steps are normalized to length ``lr`` in parameter space (the raw
    objective gradients are orders of magnitude smaller than the useful
    parameter scale, and unscaled steps either stall or slam the sigmoid
    head into saturation).  Returns the trained net (the input object,
    updated in place unless ``steps == 0`` or ``lr == 0``) and the per-step
    loss reports.
    """
    history: list[LossReport] = []
    for _ in range(steps):
        report, grads = fusion_objective_with_grads(net, examples, scorer, cfg)
        history.append(report)
        if lr != 0.0:
            norm = np.sqrt(
                sum(float(np.sum(np.asarray(g) ** 2)) for g in grads.values())
            )
            scale = 1.0 / (norm + 1e-12)
            net.apply_step({k: np.asarray(g) * scale for k, g in grads.items()}, lr)
    if log_path is not None and history:
        with open(log_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "mstft", "l1", "sqa", "total"])
            for i, rep in enumerate(history):
                writer.writerow(
                    [i, rep.terms["mstft"], rep.terms["l1"], rep.terms["sqa"], rep.total]
                )
    return net, history
