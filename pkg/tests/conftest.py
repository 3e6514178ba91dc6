import numpy as np
import pytest

from sefusion.dsp import ComplexSpectrogram, StftConfig, Waveform
from sefusion.rng import Rng


@pytest.fixture
def rng():
    return Rng(1234)


def random_spec(rng, frames, rate=16000, config=None):
    config = config or StftConfig()
    bins = config.window_samples(rate) // 2 + 1
    data = rng.uniform((frames, bins), -1, 1) + 1j * rng.uniform((frames, bins), -1, 1)
    return ComplexSpectrogram(data, rate, config)


def random_wave(rng, n, rate=16000, amp=0.5):
    return Waveform(rng.uniform(n, -amp, amp), rate)


def fd_gradient(f, x, coords, h=1e-6):
    """Central finite differences of a scalar function at selected coords."""
    out = {}
    for c in coords:
        xp = x.copy()
        xp[c] += h
        xm = x.copy()
        xm[c] -= h
        out[c] = (f(xp) - f(xm)) / (2 * h)
    return out


def max_rel_err(analytic, numeric_by_coord):
    worst = 0.0
    for c, num in numeric_by_coord.items():
        ana = analytic[c]
        worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), 1e-12))
    return worst
