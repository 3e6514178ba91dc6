"""Dual-path spectral refiner: complex mask estimation on the 16 kHz spectrum.

Input is the degraded 640/320 spectrogram as three channels (magnitude, real,
imaginary).  Two stride-2 convolutions halve the frequency axis twice; each
dual-path block runs an intra-frame BiLSTM across frequency, an inter-frame
LSTM across time, then cross attention with the language-model hidden states
as keys and values; two transposed convolutions restore the 321-bin
resolution and a 2-channel head emits the mask, whose complex magnitude is
capped at 2 by tanh scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import ComplexSpectrogram, StftConfig
from .errors import FrameAlignmentError, SampleRateError, ShapeMismatchError
from .nn import LinearParams, LstmParams, lstm_forward_batched, scaled_dot_attention
from .rng import Rng

REFINER_RATE_HZ = 16000
REFINER_STFT = StftConfig(window_ms=40.0, hop_ms=20.0)  # 640 / 320 samples
MASK_MAGNITUDE_CAP = 2.0


@dataclass(frozen=True)
class RefinerConfig:
    num_blocks: int = 2
    channels: int = 32
    attn_dim: int = 16
    lm_dim: int = 64
    # two stride-2 convolutions: 321 -> 161 -> 81 bins


@dataclass
class ConvParams:
    w: np.ndarray  # [kernel, c_in, c_out]
    b: np.ndarray  # [c_out]

    @classmethod
    def init(cls, rng: Rng, kernel: int, c_in: int, c_out: int) -> "ConvParams":
        return cls(
            w=np.stack([rng.uniform((c_in, c_out), -1, 1) / np.sqrt(kernel * c_in)
                        for _ in range(kernel)]),
            b=np.zeros(c_out),
        )

    @classmethod
    def zeros(cls, kernel: int, c_in: int, c_out: int) -> "ConvParams":
        return cls(w=np.zeros((kernel, c_in, c_out)), b=np.zeros(c_out))


def conv_freq_stride2(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Stride-2 kernel-3 convolution along the bin axis of [T, F, C]."""
    xp = np.pad(x, ((0, 0), (1, 1), (0, 0)))
    f_out = (x.shape[1] + 2 - 3) // 2 + 1
    pos = np.arange(f_out) * 2
    out = xp[:, pos, :] @ p.w[0] + xp[:, pos + 1, :] @ p.w[1] + xp[:, pos + 2, :] @ p.w[2]
    return out + p.b


def deconv_freq_stride2(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Transposed stride-2 kernel-3 convolution: [T, F, C] -> [T, 2F-1, C']."""
    t, f, _ = x.shape
    stuffed = np.zeros((t, 2 * f - 1, x.shape[2]))
    stuffed[:, ::2, :] = x
    sp = np.pad(stuffed, ((0, 0), (1, 1), (0, 0)))
    f_out = 2 * f - 1
    pos = np.arange(f_out)
    out = sp[:, pos, :] @ p.w[2] + sp[:, pos + 1, :] @ p.w[1] + sp[:, pos + 2, :] @ p.w[0]
    return out + p.b


@dataclass
class DualPathBlockParams:
    intra_fwd: LstmParams
    intra_bwd: LstmParams
    intra_proj: LinearParams
    inter: LstmParams
    inter_proj: LinearParams
    wq: np.ndarray  # [channels, attn_dim]
    wk: np.ndarray  # [lm_dim, attn_dim]
    wv: np.ndarray  # [lm_dim, channels]
    attn_out: LinearParams

    @classmethod
    def init(cls, rng: Rng, cfg: RefinerConfig) -> "DualPathBlockParams":
        ch = cfg.channels
        return cls(
            intra_fwd=LstmParams.init(rng, ch, ch),
            intra_bwd=LstmParams.init(rng, ch, ch),
            intra_proj=LinearParams.init(rng, 2 * ch, ch),
            inter=LstmParams.init(rng, ch, ch),
            inter_proj=LinearParams.init(rng, ch, ch),
            wq=rng.uniform((ch, cfg.attn_dim), -1, 1) / np.sqrt(ch),
            wk=rng.uniform((cfg.lm_dim, cfg.attn_dim), -1, 1) / np.sqrt(cfg.lm_dim),
            wv=rng.uniform((cfg.lm_dim, ch), -1, 1) / np.sqrt(cfg.lm_dim),
            attn_out=LinearParams.init(rng, ch, ch),
        )


@dataclass
class SpectrumRefiner:
    config: RefinerConfig
    enc1: ConvParams  # 3 -> channels, stride 2
    enc2: ConvParams  # channels -> channels, stride 2
    blocks: list[DualPathBlockParams]
    dec1: ConvParams  # channels -> channels, transposed stride 2
    dec2: ConvParams  # channels -> 2 (mask re, im), transposed stride 2

    @classmethod
    def init(cls, config: RefinerConfig, rng: Rng) -> "SpectrumRefiner":
        ch = config.channels
        return cls(
            config=config,
            enc1=ConvParams.init(rng.fork(1), 3, 3, ch),
            enc2=ConvParams.init(rng.fork(2), 3, ch, ch),
            blocks=[
                DualPathBlockParams.init(rng.fork(10 + i), config)
                for i in range(config.num_blocks)
            ],
            dec1=ConvParams.init(rng.fork(3), 3, ch, ch),
            dec2=ConvParams.init(rng.fork(4), 3, ch, 2),
        )

    def zero_decoder(self) -> None:
        """Zeroing the mask head forces an all-zero mask (hence zero output)."""
        self.dec2.w[:] = 0.0
        self.dec2.b[:] = 0.0

    def _dual_path(self, feats: np.ndarray, lm_hidden: np.ndarray) -> np.ndarray:
        for p in self.blocks:
            intra_in = np.ascontiguousarray(feats.transpose(1, 0, 2))
            fwd = lstm_forward_batched(intra_in, p.intra_fwd)
            bwd = lstm_forward_batched(intra_in[::-1], p.intra_bwd)[::-1]
            intra = np.concatenate([fwd, bwd], axis=2) @ p.intra_proj.w + p.intra_proj.b
            feats = feats + intra.transpose(1, 0, 2)
            inter = lstm_forward_batched(feats, p.inter)
            feats = feats + (inter @ p.inter_proj.w + p.inter_proj.b)
            t, f, ch = feats.shape
            q = feats.reshape(t * f, ch) @ p.wq
            mixed = scaled_dot_attention(q, lm_hidden @ p.wk, lm_hidden @ p.wv)
            feats = feats + (mixed @ p.attn_out.w + p.attn_out.b).reshape(t, f, ch)
        return feats

    def refine(
        self, spec: ComplexSpectrogram, lm_hidden: np.ndarray
    ) -> ComplexSpectrogram:
        """Apply the estimated complex mask to the degraded spectrum."""
        if spec.sample_rate_hz != REFINER_RATE_HZ:
            raise SampleRateError(
                f"refiner runs at {REFINER_RATE_HZ} Hz, got {spec.sample_rate_hz} Hz"
            )
        if spec.config != REFINER_STFT:
            raise ShapeMismatchError(
                "refiner expects the 40 ms / 20 ms spectrogram configuration"
            )
        lm_hidden = np.asarray(lm_hidden, dtype=np.float64)
        if lm_hidden.ndim != 2 or lm_hidden.shape[1] != self.config.lm_dim:
            raise ShapeMismatchError(
                f"expected [frames, {self.config.lm_dim}] hidden states, "
                f"got {lm_hidden.shape}"
            )
        if lm_hidden.shape[0] != spec.n_frames:
            raise FrameAlignmentError(
                f"{lm_hidden.shape[0]} conditioner frames vs "
                f"{spec.n_frames} spectrogram frames; 20 ms alignment broken"
            )
        mask = self.estimate_mask(spec, lm_hidden)
        return ComplexSpectrogram(
            mask * spec.data, spec.sample_rate_hz, spec.config
        )

    def estimate_mask(
        self, spec: ComplexSpectrogram, lm_hidden: np.ndarray
    ) -> np.ndarray:
        """Complex mask with |mask| < 2 everywhere (tanh-capped)."""
        data = spec.data
        feats = np.stack([np.abs(data), data.real, data.imag], axis=2)
        feats = np.tanh(conv_freq_stride2(feats, self.enc1))
        feats = np.tanh(conv_freq_stride2(feats, self.enc2))
        feats = self._dual_path(feats, lm_hidden)
        feats = np.tanh(deconv_freq_stride2(feats, self.dec1))
        head = deconv_freq_stride2(feats, self.dec2)
        raw = head[:, :, 0] + 1j * head[:, :, 1]
        mag = np.abs(raw)
        scale = np.where(
            mag > 0.0,
            MASK_MAGNITUDE_CAP * np.tanh(mag) / np.where(mag > 0.0, mag, 1.0),
            0.0,
        )
        return raw * scale


def dprnn_refine(
    spec: ComplexSpectrogram, lm_hidden: np.ndarray, model: SpectrumRefiner
) -> ComplexSpectrogram:
    return model.refine(spec, lm_hidden)
