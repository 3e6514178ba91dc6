"""Deterministic random number generation.

A counter-based SplitMix64 generator: output ``i`` is ``mix64(seed + i * GAMMA)``
with the standard finalizer constants, so whole blocks of draws vectorize and
the stream depends only on ``(seed, position)``.  Every value is derived from
pure 64-bit integer arithmetic, which makes streams bit-identical across
platforms and BLAS builds.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = 0xFFFFFFFFFFFFFFFF


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _mix64_int(z: int) -> int:
    z &= _U64_MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64_MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64_MASK
    return z ^ (z >> 31)


class Rng:
    """SplitMix64 stream addressed by (seed, position).

    Parameters
    ----------
    seed : int
        Any integer; reduced modulo 2**64.
    """

    def __init__(self, seed: int):
        self._seed = np.uint64(int(seed) & _U64_MASK)
        self._pos = 0

    @property
    def seed(self) -> int:
        return int(self._seed)

    def fork(self, stream: int) -> "Rng":
        """Derive an independent child stream; children of distinct ids and
        distinct parents never collide in practice."""
        tag = int(stream) & _U64_MASK
        gamma = int(_GAMMA)
        child = _mix64_int(int(self._seed) + gamma * (tag + 0x632BE59BD9B4E019))
        return Rng(child)

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit words."""
        idx = np.arange(self._pos + 1, self._pos + n + 1, dtype=np.uint64)
        self._pos += n
        return _mix64(self._seed + idx * _GAMMA)

    def uniform(self, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """Uniform float64 draws in [low, high) with 53-bit resolution."""
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) / float(1 << 53)
        return (low + (high - low) * u).reshape(shape)

    def normal(self, shape) -> np.ndarray:
        """Standard normal draws via Box-Muller on paired uniforms."""
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        m = (n + 1) // 2
        # u1 shifted into (0, 1] so the log never sees zero
        u1 = ((self.raw(m) >> np.uint64(11)).astype(np.float64) + 1.0) / float(1 << 53)
        u2 = (self.raw(m) >> np.uint64(11)).astype(np.float64) / float(1 << 53)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return z.reshape(shape)

    def integers(self, n: int, bound: int) -> np.ndarray:
        """``n`` integers in [0, bound) by modulo reduction (bias is
        negligible for bound << 2**64 and irrelevant for plumbing use)."""
        return (self.raw(n) % np.uint64(bound)).astype(np.int64)
