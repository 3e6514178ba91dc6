"""Deterministic degradation simulator: noise, bandlimiting, clipping, reverb.

A recipe is an ordered list of steps plus a seed; identical (clean, recipe,
seed) always reproduces the degraded file bit for bit.  Steps are written in
config text as ``name(key=value, ...)`` separated by ``|``, e.g.::

    additive_noise(snr_db=10) | bandlimit(cutoff_hz=4000) | clip(threshold=0.8)
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .dsp import Waveform, design_lowpass
from .errors import (
    ConfigurationError,
    DegenerateSignalError,
    SampleRateError,
)
from .rng import Rng


@dataclass(frozen=True)
class NoiseStep:
    snr_db: float

    def __post_init__(self):
        if not -10.0 <= self.snr_db <= 40.0:
            raise ConfigurationError(f"snr_db {self.snr_db} outside [-10, 40]")


@dataclass(frozen=True)
class BandlimitStep:
    cutoff_hz: float

    def __post_init__(self):
        if self.cutoff_hz <= 0:
            raise ConfigurationError("cutoff_hz must be positive")


@dataclass(frozen=True)
class ClipStep:
    threshold: float

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigurationError(f"threshold {self.threshold} outside (0, 1]")


@dataclass(frozen=True)
class ReverbStep:
    rt60_s: float

    def __post_init__(self):
        if self.rt60_s <= 0:
            raise ConfigurationError("rt60_s must be positive")


Step = NoiseStep | BandlimitStep | ClipStep | ReverbStep

_STEP_TYPES = {
    "additive_noise": NoiseStep,
    "bandlimit": BandlimitStep,
    "clip": ClipStep,
    "reverb": ReverbStep,
}

_STEP_RE = re.compile(r"^\s*(\w+)\s*\(([^()]*)\)\s*$")


@dataclass(frozen=True)
class DegradationRecipe:
    name: str
    steps: tuple[Step, ...]
    seed: int = 0


def parse_steps(text: str) -> tuple[Step, ...]:
    steps = []
    for part in text.split("|"):
        match = _STEP_RE.match(part)
        if not match:
            raise ConfigurationError(f"cannot parse degradation step {part.strip()!r}")
        name, arg_text = match.group(1), match.group(2)
        if name not in _STEP_TYPES:
            raise ConfigurationError(
                f"unknown degradation step {name!r}; "
                f"known: {sorted(_STEP_TYPES)}"
            )
        kwargs = {}
        for item in filter(None, (s.strip() for s in arg_text.split(","))):
            if "=" not in item:
                raise ConfigurationError(f"step argument {item!r} must be key=value")
            key, value = (s.strip() for s in item.split("=", 1))
            kwargs[key] = float(value)
        try:
            steps.append(_STEP_TYPES[name](**kwargs))
        except TypeError as exc:
            raise ConfigurationError(f"bad arguments for step {name!r}: {exc}") from exc
    return tuple(steps)


def white_noise(n_samples: int, rate_hz: int, rng: Rng) -> Waveform:
    return Waveform(rng.normal(n_samples) * 0.1, rate_hz)


def add_noise_at_snr(
    clean: Waveform, noise: Waveform, snr_db: float, seed: int
) -> Waveform:
    """Mix noise into clean at exactly the requested SNR.

    The noise is tiled/cropped to the clean length starting from a
    seed-derived offset, then scaled so 10 log10(P_clean / P_noise) equals
    ``snr_db`` to floating-point accuracy.
    """
    if clean.sample_rate_hz != noise.sample_rate_hz:
        raise SampleRateError("clean and noise rates differ")
    clean_power = float(np.dot(clean.samples, clean.samples))
    if clean_power == 0.0:
        raise DegenerateSignalError("silent clean signal; SNR undefined")
    offset = int(Rng(seed).integers(1, len(noise))[0])
    reps = int(np.ceil((offset + len(clean)) / len(noise)))
    segment = np.tile(noise.samples, reps)[offset : offset + len(clean)]
    noise_power = float(np.dot(segment, segment))
    if noise_power == 0.0:
        raise DegenerateSignalError("silent noise signal; SNR undefined")
    alpha = np.sqrt(clean_power / (noise_power * 10.0 ** (snr_db / 10.0)))
    return Waveform(clean.samples + alpha * segment, clean.sample_rate_hz)


def bandlimit(wave: Waveform, cutoff_hz: float) -> Waveform:
    """Low-pass the signal with the shared Kaiser-sinc design."""
    if not 0.0 < cutoff_hz < wave.sample_rate_hz / 2.0:
        raise ConfigurationError(
            f"cutoff {cutoff_hz} Hz must lie below Nyquist "
            f"({wave.sample_rate_hz / 2} Hz)"
        )
    taps = design_lowpass(cutoff_hz, wave.sample_rate_hz)
    filtered = fftconvolve(wave.samples, taps, mode="same")
    return Waveform(filtered, wave.sample_rate_hz)


def clip(wave: Waveform, threshold: float) -> Waveform:
    if not 0.0 < threshold <= 1.0:
        raise ConfigurationError(f"clip threshold {threshold} outside (0, 1]")
    return Waveform(
        np.clip(wave.samples, -threshold, threshold), wave.sample_rate_hz
    )


def make_rir(rate_hz: int, rt60_s: float, seed: int, max_s: float = 0.5) -> Waveform:
    """Synthetic room impulse response: unit-energy exponentially decaying
    noise reaching -60 dB at rt60."""
    duration = min(rt60_s, max_s)
    n = max(int(round(duration * rate_hz)), 8)
    t = np.arange(n) / rate_hz
    envelope = np.exp(-np.log(1000.0) * t / rt60_s)
    rir = Rng(seed).normal(n) * envelope
    return Waveform(rir / np.linalg.norm(rir), rate_hz)


def reverb_fir(wave: Waveform, rir: Waveform) -> Waveform:
    """Full convolution with the impulse response, truncated to input length."""
    if wave.sample_rate_hz != rir.sample_rate_hz:
        raise SampleRateError("signal and impulse response rates differ")
    if len(rir) > wave.sample_rate_hz // 2:
        raise ConfigurationError("impulse response longer than 0.5 s")
    wet = fftconvolve(wave.samples, rir.samples, mode="full")[: len(wave)]
    return Waveform(wet, wave.sample_rate_hz)


def apply_recipe(clean: Waveform, recipe: DegradationRecipe) -> Waveform:
    """Run the recipe's steps in order, all randomness derived from its seed."""
    rng = Rng(recipe.seed)
    out = clean
    for i, step in enumerate(recipe.steps):
        stream = rng.fork(i)
        if isinstance(step, NoiseStep):
            noise = white_noise(len(out), out.sample_rate_hz, stream.fork(1))
            out = add_noise_at_snr(out, noise, step.snr_db, seed=stream.fork(2).seed)
        elif isinstance(step, BandlimitStep):
            out = bandlimit(out, step.cutoff_hz)
        elif isinstance(step, ClipStep):
            out = clip(out, step.threshold)
        elif isinstance(step, ReverbStep):
            rir = make_rir(out.sample_rate_hz, step.rt60_s, seed=stream.fork(3).seed)
            out = reverb_fir(out, rir)
    return out
