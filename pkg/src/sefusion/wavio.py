"""Mono WAV read/write (RIFF PCM 16-bit and IEEE float 32-bit)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .dsp import SUPPORTED_RATES, Waveform
from .errors import DataValidationError, SampleRateError

_PCM16_SCALE = 32768.0


def read_wav(path: str | Path) -> Waveform:
    """Read a mono WAV file; multi-channel or non-PCM16/float32 data is
    rejected with an explicit error."""
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise DataValidationError(f"{path}: unreadable WAV ({exc})") from exc
    if data.ndim != 1:
        raise DataValidationError(
            f"{path}: {data.shape[1]} channels; only mono input is supported"
        )
    if rate not in SUPPORTED_RATES:
        raise SampleRateError(
            f"{path}: rate {rate} Hz unsupported; supported: {SUPPORTED_RATES}"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / _PCM16_SCALE
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise DataValidationError(
            f"{path}: sample format {data.dtype} unsupported "
            "(use PCM 16-bit or IEEE float 32-bit)"
        )
    return Waveform(samples, int(rate))


def write_wav(path: str | Path, wave: Waveform, fmt: str = "float32") -> None:
    """Write a mono WAV file as IEEE float 32-bit (default) or PCM 16-bit."""
    if fmt == "float32":
        wavfile.write(path, wave.sample_rate_hz, wave.samples.astype(np.float32))
    elif fmt == "pcm16":
        clipped = np.clip(wave.samples, -1.0, 32767.0 / _PCM16_SCALE)
        wavfile.write(
            path,
            wave.sample_rate_hz,
            np.round(clipped * _PCM16_SCALE).astype(np.int16),
        )
    else:
        raise DataValidationError(f"unknown WAV format {fmt!r}")
