"""Intrusive evaluation metrics: SI-SDR, log-spectral distance, segmental SNR."""

from __future__ import annotations

import numpy as np

from .dsp import Waveform, stft_raw
from .errors import DegenerateSignalError, SampleRateError, ShapeMismatchError

# sentinel caps for perfect reconstruction / orthogonal estimates
SI_SDR_CEILING_DB = 300.0
SI_SDR_FLOOR_DB = -300.0

_LSD_WIN, _LSD_HOP = 512, 256
_SEG_FRAME, _SEG_HOP = 320, 160
_SEG_CLAMP = (-10.0, 35.0)
_SEG_SILENCE = 1e-8
_EPS = 1e-10


def _pair(est: Waveform, ref: Waveform) -> tuple[np.ndarray, np.ndarray]:
    if est.sample_rate_hz != ref.sample_rate_hz:
        raise SampleRateError("estimate and reference rates differ")
    if len(est) != len(ref):
        raise ShapeMismatchError(
            f"length mismatch: estimate {len(est)} vs reference {len(ref)}"
        )
    return est.samples, ref.samples


def si_sdr(est: Waveform, ref: Waveform) -> float:
    """Scale-invariant signal-to-distortion ratio in dB.

    Both signals are de-meaned first.  Perfect reconstruction reports the
    +300 dB ceiling; an estimate orthogonal to the reference reports the
    -300 dB floor.
    """
    e, r = _pair(est, ref)
    e = e - e.mean()
    r = r - r.mean()
    ref_power = float(np.dot(r, r))
    if ref_power == 0.0:
        raise DegenerateSignalError("silent reference; SI-SDR undefined")
    target = (np.dot(e, r) / ref_power) * r
    target_power = float(np.dot(target, target))
    noise_power = float(np.sum((e - target) ** 2))
    if target_power == 0.0:
        return SI_SDR_FLOOR_DB
    if noise_power == 0.0:
        return SI_SDR_CEILING_DB
    value = 10.0 * np.log10(target_power / noise_power)
    return float(np.clip(value, SI_SDR_FLOOR_DB, SI_SDR_CEILING_DB))


def lsd(est: Waveform, ref: Waveform) -> float:
    """Log-spectral distance in dB (512/256 STFT, per-frame RMS over bins)."""
    e, r = _pair(est, ref)
    spec_e = np.abs(stft_raw(e, _LSD_WIN, _LSD_HOP))
    spec_r = np.abs(stft_raw(r, _LSD_WIN, _LSD_HOP))
    diff_db = 20.0 * (np.log10(spec_e + _EPS) - np.log10(spec_r + _EPS))
    return float(np.mean(np.sqrt(np.mean(diff_db**2, axis=1))))


def seg_snr(est: Waveform, ref: Waveform) -> float:
    """Segmental SNR in dB over 320/160 frames.

    Frames whose reference energy falls below 1e-8 are excluded; per-frame
    values clamp to [-10, 35] dB.
    """
    e, r = _pair(est, ref)
    n_frames = max((len(r) - _SEG_FRAME) // _SEG_HOP + 1, 0)
    values = []
    for t in range(n_frames):
        seg_r = r[t * _SEG_HOP : t * _SEG_HOP + _SEG_FRAME]
        seg_e = e[t * _SEG_HOP : t * _SEG_HOP + _SEG_FRAME]
        ref_energy = float(np.dot(seg_r, seg_r))
        if ref_energy < _SEG_SILENCE:
            continue
        err_energy = float(np.sum((seg_r - seg_e) ** 2))
        if err_energy == 0.0:
            values.append(_SEG_CLAMP[1])
            continue
        values.append(
            float(np.clip(10.0 * np.log10(ref_energy / err_energy), *_SEG_CLAMP))
        )
    if not values:
        raise DegenerateSignalError("no frames above the silence threshold")
    return float(np.mean(values))


def evaluate_pair(est: Waveform, ref: Waveform) -> dict[str, float]:
    return {
        "si_sdr_db": si_sdr(est, ref),
        "lsd_db": lsd(est, ref),
        "seg_snr_db": seg_snr(est, ref),
    }
