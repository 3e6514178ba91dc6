"""Decoder-only transformer that predicts clean-speech token sequences.

The conditioner features form a soft prefix; generation starts from a BOS
embedding and proceeds greedily, one token per 20 ms frame.  Causality comes
from an explicit lower-triangular attention mask, so logits at a position
never depend on anything to its right — verified directly by the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError
from .nn import LinearParams, init_weight, layer_norm, softmax
from .rng import Rng


@dataclass(frozen=True)
class ArLmConfig:
    """Desk-scale defaults; the reference-scale model uses 12 layers of
    width 512."""

    num_layers: int = 2
    hidden_dim: int = 64
    num_heads: int = 4
    ffn_mult: int = 4
    codebook_size: int = 256
    prefix_dim: int = 64

    def __post_init__(self):
        if self.hidden_dim % self.num_heads != 0:
            raise ValueError("hidden_dim must be divisible by num_heads")

    @property
    def vocab_size(self) -> int:  # token ids plus the BOS embedding row
        return self.codebook_size + 1

    @property
    def bos_id(self) -> int:
        return self.codebook_size


@dataclass
class _LayerParams:
    ln1_g: np.ndarray
    ln1_b: np.ndarray
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    ln2_g: np.ndarray
    ln2_b: np.ndarray
    ffn1: LinearParams
    ffn2: LinearParams

    @classmethod
    def init(cls, rng: Rng, dim: int, ffn_mult: int) -> "_LayerParams":
        return cls(
            ln1_g=np.ones(dim),
            ln1_b=np.zeros(dim),
            wq=init_weight(rng, (dim, dim), dim),
            wk=init_weight(rng, (dim, dim), dim),
            wv=init_weight(rng, (dim, dim), dim),
            wo=init_weight(rng, (dim, dim), dim),
            ln2_g=np.ones(dim),
            ln2_b=np.zeros(dim),
            ffn1=LinearParams.init(rng, dim, ffn_mult * dim),
            ffn2=LinearParams.init(rng, ffn_mult * dim, dim),
        )


def sinusoidal_positions(n_positions: int, dim: int) -> np.ndarray:
    pos = np.arange(n_positions)[:, None]
    i = np.arange(dim // 2)[None, :]
    angles = pos / np.power(10000.0, 2.0 * i / dim)
    pe = np.zeros((n_positions, dim))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


def _causal_multihead(x: np.ndarray, p: _LayerParams, n_heads: int) -> np.ndarray:
    s, dim = x.shape
    hd = dim // n_heads
    q = (x @ p.wq).reshape(s, n_heads, hd)
    k = (x @ p.wk).reshape(s, n_heads, hd)
    v = (x @ p.wv).reshape(s, n_heads, hd)
    scores = np.einsum("qhd,khd->hqk", q, k) / np.sqrt(hd)
    mask = np.triu(np.full((s, s), -1e30), k=1)
    attn = softmax(scores + mask[None, :, :], axis=2)
    out = np.einsum("hqk,khd->qhd", attn, v).reshape(s, dim)
    return out @ p.wo


@dataclass
class ArLm:
    config: ArLmConfig
    prefix_proj: LinearParams
    token_emb: np.ndarray  # [vocab, hidden]
    layers: list[_LayerParams]
    final_g: np.ndarray
    final_b: np.ndarray
    head: LinearParams  # [hidden -> codebook_size]
    _pos_cache: np.ndarray = field(default=None, repr=False)

    @classmethod
    def init(cls, config: ArLmConfig, rng: Rng) -> "ArLm":
        dim = config.hidden_dim
        return cls(
            config=config,
            prefix_proj=LinearParams.init(rng.fork(1), config.prefix_dim, dim),
            token_emb=init_weight(rng.fork(2), (config.vocab_size, dim), dim),
            layers=[
                _LayerParams.init(rng.fork(10 + i), dim, config.ffn_mult)
                for i in range(config.num_layers)
            ],
            final_g=np.ones(dim),
            final_b=np.zeros(dim),
            head=LinearParams.init(rng.fork(3), dim, config.codebook_size),
        )

    def _positions(self, n: int) -> np.ndarray:
        if self._pos_cache is None or self._pos_cache.shape[0] < n:
            self._pos_cache = sinusoidal_positions(max(n, 512), self.config.hidden_dim)
        return self._pos_cache[:n]

    def forward_hidden(self, embeds: np.ndarray) -> np.ndarray:
        """Causal transformer over already-positioned embeddings -> [S, H]."""
        x = embeds
        for layer in self.layers:
            normed = layer_norm(x, layer.ln1_g, layer.ln1_b)
            x = x + _causal_multihead(normed, layer, self.config.num_heads)
            normed = layer_norm(x, layer.ln2_g, layer.ln2_b)
            x = x + layer.ffn2(np.tanh(layer.ffn1(normed)))
        return layer_norm(x, self.final_g, self.final_b)

    def _prefix_embeds(self, prefix: np.ndarray) -> np.ndarray:
        prefix = np.asarray(prefix, dtype=np.float64)
        if prefix.ndim != 2 or prefix.shape[0] < 1:
            raise ShapeMismatchError("prefix must be a non-empty [frames, dim] matrix")
        if prefix.shape[1] != self.config.prefix_dim:
            raise ShapeMismatchError(
                f"prefix dim {prefix.shape[1]} != configured {self.config.prefix_dim}"
            )
        return self.prefix_proj(prefix)

    def decode(self, prefix: np.ndarray, max_len: int) -> tuple[np.ndarray, np.ndarray]:
        """Greedy decode of exactly ``max_len`` tokens.

        Returns (ids, hidden) where ``hidden[i]`` is the last-layer
        representation that produced token ``i`` — the rows later consumed by
        the spectral refiner.
        """
        p_len = len(prefix)
        pos = self._positions(p_len + 1 + max_len)
        embeds = np.concatenate(
            [
                self._prefix_embeds(prefix) + pos[:p_len],
                (self.token_emb[self.config.bos_id] + pos[p_len])[None, :],
            ]
        )
        ids = np.empty(max_len, dtype=np.int64)
        hidden = np.empty((max_len, self.config.hidden_dim))
        for i in range(max_len):
            h = self.forward_hidden(embeds)
            hidden[i] = h[-1]
            logits = self.head(h[-1:])[0]
            ids[i] = int(np.argmax(logits))
            if i + 1 < max_len:
                nxt = self.token_emb[ids[i]] + pos[p_len + 1 + i]
                embeds = np.concatenate([embeds, nxt[None, :]])
        return ids, hidden

    def token_logits(self, prefix: np.ndarray, tokens: np.ndarray) -> np.ndarray:
        """Teacher-forced logits, row i aligned with tokens[i] -> [n, codes]."""
        tokens = np.asarray(tokens, dtype=np.int64)
        if np.any(tokens < 0) or np.any(tokens >= self.config.codebook_size):
            raise IndexError("token id outside the codebook")
        p_len = len(prefix)
        n = tokens.size
        pos = self._positions(p_len + 1 + n)
        rows = [
            self._prefix_embeds(prefix) + pos[:p_len],
            (self.token_emb[self.config.bos_id] + pos[p_len])[None, :],
        ]
        if n > 1:
            rows.append(self.token_emb[tokens[:-1]] + pos[p_len + 1 : p_len + n])
        h = self.forward_hidden(np.concatenate(rows))
        return self.head(h[p_len : p_len + n])


def ar_decode(
    prefix: np.ndarray, lm: ArLm, max_len: int
) -> tuple[np.ndarray, np.ndarray]:
    return lm.decode(prefix, max_len)
