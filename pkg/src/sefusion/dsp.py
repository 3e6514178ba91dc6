"""Sampling-frequency-independent STFT analysis/synthesis and resampling.

The STFT keeps window and hop fixed in *milliseconds*; the transform size
equals the window sample count at the signal's rate, so the bin count scales
with the rate while bin spacing stays constant in Hz.  Analysis uses a
periodic Hann window with reflect center-padding; synthesis is weighted
overlap-add normalized by the squared-window envelope, which reconstructs the
interior to machine precision for any integer window/hop ratio >= 2.

Sample-domain helpers (``stft_raw``/``istft_raw`` and their adjoints) back
both the public container API and the spectral losses; the adjoints implement
the exact transpose of the forward linear maps and are verified against
finite differences in the test suite.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import firwin, resample_poly

from .errors import (
    ConfigurationError,
    DataValidationError,
    ShapeMismatchError,
)

SUPPORTED_RATES = (8000, 16000, 22050, 24000, 32000, 44100, 48000)


def _require_supported_rate(rate_hz: int) -> int:
    rate = int(rate_hz)
    if rate not in SUPPORTED_RATES:
        raise ConfigurationError(
            f"unsupported sample rate {rate_hz} Hz; supported: {SUPPORTED_RATES}"
        )
    return rate


@dataclass(frozen=True)
class Waveform:
    """Mono audio: float64 samples (nominal range [-1, 1]) plus a rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise DataValidationError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise DataValidationError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(
            self, "sample_rate_hz", _require_supported_rate(self.sample_rate_hz)
        )

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class StftConfig:
    """Window/hop in milliseconds; rate-independent by construction.

    The hop must divide the window an integer number of times (>= 2, so the
    Hann overlap-add envelope never vanishes in the interior).
    """

    window_ms: float = 20.0
    hop_ms: float = 10.0
    window: str = "hann"

    def __post_init__(self):
        if self.window != "hann":
            raise ConfigurationError(f"unknown window taper {self.window!r}")
        if self.window_ms <= 0 or self.hop_ms <= 0:
            raise ConfigurationError("window and hop durations must be positive")
        ratio = self.window_ms / self.hop_ms
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 2:
            raise ConfigurationError(
                "hop must divide the window an integer number of times (>= 2); "
                f"got window {self.window_ms} ms / hop {self.hop_ms} ms"
            )

    def window_samples(self, rate_hz: int) -> int:
        exact = self.window_ms * rate_hz / 1000.0
        n = round(exact)
        if abs(exact - n) > 1e-6 or n < 2:
            raise ConfigurationError(
                f"window of {self.window_ms} ms is not an integer sample count "
                f"at {rate_hz} Hz ({exact} samples)"
            )
        return n

    def hop_samples(self, rate_hz: int) -> int:
        exact = self.hop_ms * rate_hz / 1000.0
        n = round(exact)
        if abs(exact - n) > 1e-6 or n < 1:
            raise ConfigurationError(
                f"hop of {self.hop_ms} ms is not an integer sample count "
                f"at {rate_hz} Hz ({exact} samples)"
            )
        return n


@dataclass(frozen=True)
class ComplexSpectrogram:
    """frames x bins complex matrix carrying its rate and STFT config."""

    data: np.ndarray
    sample_rate_hz: int
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != 2:
            raise ShapeMismatchError("spectrogram data must be 2-D (frames x bins)")
        if not np.all(np.isfinite(data)):
            raise DataValidationError("spectrogram contains non-finite entries")
        rate = _require_supported_rate(self.sample_rate_hz)
        expected = frequency_bin_count(rate, self.config)
        if data.shape[1] != expected:
            raise ShapeMismatchError(
                f"expected {expected} bins at {rate} Hz with "
                f"{self.config.window_ms} ms window, got {data.shape[1]}"
            )
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sample_rate_hz", rate)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]


def frequency_bin_count(sample_rate_hz: int, config: StftConfig | None = None) -> int:
    """Number of non-negative frequency bins at a rate: floor(window/2) + 1.

    Bin spacing is ``1000 / window_ms`` Hz at every rate, which is the
    rate-independence property everything downstream relies on.
    """
    config = config or StftConfig()
    rate = _require_supported_rate(sample_rate_hz)
    return config.window_samples(rate) // 2 + 1


@functools.lru_cache(maxsize=32)
def hann_periodic(n: int) -> np.ndarray:
    """Periodic Hann taper w[k] = 0.5 (1 - cos(2 pi k / n))."""
    k = np.arange(n)
    w = 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))
    w.flags.writeable = False
    return w


def _reflect_indices(n: int, left: int, right: int) -> np.ndarray:
    """Source index for each position of a reflect-padded array.

    Matches numpy's 'reflect' mode (no edge duplication); a length-1 input
    degenerates to constant padding.
    """
    idx = np.arange(-left, n + right)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.abs(idx) % period
    return np.where(idx >= n, period - idx, idx)


def frame_count(n_samples: int, hop: int) -> int:
    return n_samples // hop + 1


def _frame_geometry(n_samples: int, win_len: int, hop: int):
    n_frames = frame_count(n_samples, hop)
    pad_left = win_len // 2
    need = (n_frames - 1) * hop + win_len
    pad_right = max(0, need - n_samples - pad_left)
    return n_frames, pad_left, pad_right


def stft_raw(x: np.ndarray, win_len: int, hop: int) -> np.ndarray:
    """Center-padded STFT of a 1-D float array -> [frames, win//2+1] complex."""
    x = np.asarray(x, dtype=np.float64)
    n_frames, pad_left, pad_right = _frame_geometry(x.size, win_len, hop)
    padded = x[_reflect_indices(x.size, pad_left, pad_right)]
    offsets = np.arange(n_frames)[:, None] * hop + np.arange(win_len)[None, :]
    frames = padded[offsets] * hann_periodic(win_len)[None, :]
    return np.fft.rfft(frames, axis=1)


def _ola_envelope(n_frames: int, win_len: int, hop: int) -> np.ndarray:
    total = (n_frames - 1) * hop + win_len
    env = np.zeros(total)
    w2 = hann_periodic(win_len) ** 2
    for t in range(n_frames):
        env[t * hop : t * hop + win_len] += w2
    return env


def istft_raw(
    spec: np.ndarray, win_len: int, hop: int, length: int | None = None
) -> np.ndarray:
    """Weighted overlap-add inverse of ``stft_raw``.

    Default output length is ``(frames - 1) * hop`` — the region where the
    squared-window envelope has full overlap support; a longer ``length`` may
    reach ``win_len // 2`` further into the decaying tail.
    """
    spec = np.asarray(spec, dtype=np.complex128)
    n_frames = spec.shape[0]
    w = hann_periodic(win_len)
    frames = np.fft.irfft(spec, n=win_len, axis=1) * w[None, :]
    total = (n_frames - 1) * hop + win_len
    acc = np.zeros(total)
    for t in range(n_frames):
        acc[t * hop : t * hop + win_len] += frames[t]
    pad_left = win_len // 2
    if length is None:
        length = (n_frames - 1) * hop
    if length < 1 or pad_left + length > total:
        raise ShapeMismatchError(
            f"requested length {length} outside the synthesizable range"
        )
    env = _ola_envelope(n_frames, win_len, hop)[pad_left : pad_left + length]
    seg = acc[pad_left : pad_left + length]
    return np.where(env > 0.0, seg / np.where(env > 0.0, env, 1.0), 0.0)


def istft_raw_adjoint(
    g_wave: np.ndarray, win_len: int, hop: int, n_frames: int
) -> np.ndarray:
    """Transpose of ``istft_raw`` (for gradients w.r.t. the spectrogram)."""
    g_wave = np.asarray(g_wave, dtype=np.float64)
    total = (n_frames - 1) * hop + win_len
    pad_left = win_len // 2
    length = g_wave.size
    env = _ola_envelope(n_frames, win_len, hop)[pad_left : pad_left + length]
    g_acc = np.zeros(total)
    g_acc[pad_left : pad_left + length] = np.where(
        env > 0.0, g_wave / np.where(env > 0.0, env, 1.0), 0.0
    )
    w = hann_periodic(win_len)
    offsets = np.arange(n_frames)[:, None] * hop + np.arange(win_len)[None, :]
    g_frames = g_acc[offsets] * w[None, :]
    # transpose of irfft w.r.t. the stored (re, im) half-spectrum parts
    g_spec = np.fft.rfft(g_frames, axis=1)
    scale = np.full(g_spec.shape[1], 2.0 / win_len)
    scale[0] = 1.0 / win_len
    if win_len % 2 == 0:
        scale[-1] = 1.0 / win_len
    return g_spec * scale[None, :]


def stft_raw_adjoint(
    g_spec: np.ndarray, win_len: int, hop: int, n_samples: int
) -> np.ndarray:
    """Transpose of ``stft_raw`` (for gradients w.r.t. the waveform)."""
    g_spec = np.asarray(g_spec, dtype=np.complex128)
    n_frames, pad_left, pad_right = _frame_geometry(n_samples, win_len, hop)
    if g_spec.shape[0] != n_frames:
        raise ShapeMismatchError(
            f"gradient has {g_spec.shape[0]} frames, expected {n_frames}"
        )
    halved = g_spec.copy()
    hi = win_len // 2 if win_len % 2 == 0 else (win_len + 1) // 2
    halved[:, 1:hi] *= 0.5
    g_frames = np.fft.irfft(halved, n=win_len, axis=1) * win_len
    g_frames *= hann_periodic(win_len)[None, :]
    g_padded = np.zeros(n_samples + pad_left + pad_right)
    for t in range(n_frames):
        g_padded[t * hop : t * hop + win_len] += g_frames[t]
    g_x = np.zeros(n_samples)
    np.add.at(g_x, _reflect_indices(n_samples, pad_left, pad_right), g_padded)
    return g_x


def stft(wave: Waveform, config: StftConfig | None = None) -> ComplexSpectrogram:
    """Analyze a waveform; frames = floor(len / hop) + 1."""
    config = config or StftConfig()
    win_len = config.window_samples(wave.sample_rate_hz)
    hop = config.hop_samples(wave.sample_rate_hz)
    data = stft_raw(wave.samples, win_len, hop)
    return ComplexSpectrogram(data, wave.sample_rate_hz, config)


def istft(spec: ComplexSpectrogram, length: int | None = None) -> Waveform:
    """Synthesize a waveform; inverts ``stft`` on the interior samples."""
    win_len = spec.config.window_samples(spec.sample_rate_hz)
    hop = spec.config.hop_samples(spec.sample_rate_hz)
    samples = istft_raw(spec.data, win_len, hop, length=length)
    return Waveform(samples, spec.sample_rate_hz)


# --- resampling ------------------------------------------------------------

_RESAMPLE_ATTEN_DB = 80.0
_KAISER_BETA = 0.1102 * (_RESAMPLE_ATTEN_DB - 8.7)


def _kaiser_numtaps(atten_db: float, transition_hz: float, rate_hz: float) -> int:
    """Kaiser length estimate; forced odd for integer group delay."""
    width = 2.0 * np.pi * transition_hz / rate_hz
    n = int(math.ceil((atten_db - 7.95) / (2.285 * width)))
    return n + 1 if n % 2 == 0 else n


@functools.lru_cache(maxsize=64)
def _resample_filter(source_hz: int, target_hz: int) -> tuple[np.ndarray, int, int]:
    g = math.gcd(source_hz, target_hz)
    up, down = target_hz // g, source_hz // g
    lo = min(source_hz, target_hz)
    # flat (+-0.1 dB) below 0.45*lo, >= 80 dB down beyond the folding frequency
    f_pass, f_stop = 0.45 * lo, 0.5 * lo
    hi_rate = source_hz * up
    numtaps = _kaiser_numtaps(_RESAMPLE_ATTEN_DB, f_stop - f_pass, hi_rate)
    taps = firwin(
        numtaps, (f_pass + f_stop) / 2.0, window=("kaiser", _KAISER_BETA), fs=hi_rate
    )
    taps.flags.writeable = False
    return taps, up, down


def resample(wave: Waveform, target_rate_hz: int) -> Waveform:
    """Polyphase windowed-sinc rate conversion.

    Same-rate calls return the samples unchanged.  Output length is
    ``ceil(len * target / source)`` (within one sample of the exact ratio).
    """
    target = _require_supported_rate(target_rate_hz)
    if target == wave.sample_rate_hz:
        return wave
    taps, up, down = _resample_filter(wave.sample_rate_hz, target)
    out = resample_poly(wave.samples, up, down, window=taps)
    return Waveform(out, target)


def design_lowpass(cutoff_hz: float, rate_hz: int, atten_db: float = 60.0) -> np.ndarray:
    """Kaiser-windowed sinc low-pass used by the degradation simulator.

    Passband edge at ``cutoff_hz``; the stopband starts by ``1.2 * cutoff``
    (clamped below Nyquist), comfortably exceeding 40 dB there.
    """
    if not 0.0 < cutoff_hz < rate_hz / 2.0:
        raise ConfigurationError(
            f"cutoff {cutoff_hz} Hz must lie in (0, {rate_hz / 2} Hz)"
        )
    f_stop = min(1.2 * cutoff_hz, 0.5 * rate_hz)
    transition = max(f_stop - cutoff_hz, 0.02 * rate_hz)
    numtaps = _kaiser_numtaps(atten_db, transition, rate_hz)
    beta = 0.1102 * (atten_db - 8.7)
    return firwin(
        numtaps, min(cutoff_hz + transition / 2.0, 0.499 * rate_hz),
        window=("kaiser", beta), fs=rate_hz,
    )
