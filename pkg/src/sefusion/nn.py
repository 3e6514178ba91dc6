"""Dense neural building blocks on float64 numpy matrices.

Forward-only by design; the only analytic gradients live in
``softmax_cross_entropy_with_grad`` (token prediction) and the fusion network.
Parameters initialize from a seeded :class:`~sefusion.rng.Rng` with
uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), so a seed pins every weight bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError
from .rng import Rng


def _check_2d(name: str, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got shape {x.shape}")
    return x


def init_weight(rng: Rng, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(shape, -bound, bound)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


@dataclass
class LstmParams:
    """Stacked gate parameters, gate order (input, forget, candidate, output)."""

    input_dim: int
    hidden_dim: int
    w_x: np.ndarray  # [input_dim, 4*hidden]
    w_h: np.ndarray  # [hidden, 4*hidden]
    bias: np.ndarray  # [4*hidden]

    @classmethod
    def init(cls, rng: Rng, input_dim: int, hidden_dim: int) -> "LstmParams":
        return cls(
            input_dim=input_dim,
            hidden_dim=hidden_dim,
            w_x=init_weight(rng, (input_dim, 4 * hidden_dim), input_dim),
            w_h=init_weight(rng, (hidden_dim, 4 * hidden_dim), hidden_dim),
            bias=np.zeros(4 * hidden_dim),
        )

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "LstmParams":
        return cls(
            input_dim=input_dim,
            hidden_dim=hidden_dim,
            w_x=np.zeros((input_dim, 4 * hidden_dim)),
            w_h=np.zeros((hidden_dim, 4 * hidden_dim)),
            bias=np.zeros(4 * hidden_dim),
        )

    def tensors(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.w_x": self.w_x, f"{prefix}.w_h": self.w_h,
                f"{prefix}.bias": self.bias}


def lstm_forward_batched(seq: np.ndarray, params: LstmParams) -> np.ndarray:
    """LSTM over [T, B, D_in] with zero initial state -> [T, B, hidden]."""
    if seq.ndim != 3 or seq.shape[2] != params.input_dim:
        raise ShapeMismatchError(
            f"expected [T, B, {params.input_dim}] input, got {seq.shape}"
        )
    t_len, batch, _ = seq.shape
    hid = params.hidden_dim
    h = np.zeros((batch, hid))
    c = np.zeros((batch, hid))
    out = np.empty((t_len, batch, hid))
    x_proj = seq @ params.w_x + params.bias  # [T, B, 4H]
    for t in range(t_len):
        z = x_proj[t] + h @ params.w_h
        i = sigmoid(z[:, :hid])
        f = sigmoid(z[:, hid : 2 * hid])
        g = np.tanh(z[:, 2 * hid : 3 * hid])
        o = sigmoid(z[:, 3 * hid :])
        c = f * c + i * g
        h = o * np.tanh(c)
        out[t] = h
    return out


def lstm_forward(seq: np.ndarray, params: LstmParams) -> np.ndarray:
    """Single-sequence LSTM: [T, D_in] -> [T, hidden]."""
    seq = _check_2d("lstm input", seq)
    return lstm_forward_batched(seq[:, None, :], params)[:, 0, :]


def scaled_dot_attention(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """softmax(q kT / sqrt(d)) v; each output row is a convex mix of v rows."""
    q = _check_2d("query", q)
    k = _check_2d("key", k)
    v = _check_2d("value", v)
    if q.shape[1] != k.shape[1]:
        raise ShapeMismatchError(
            f"query dim {q.shape[1]} != key dim {k.shape[1]}"
        )
    if k.shape[0] != v.shape[0]:
        raise ShapeMismatchError(
            f"key rows {k.shape[0]} != value rows {v.shape[0]}"
        )
    scores = q @ k.T / np.sqrt(q.shape[1])
    return softmax(scores, axis=1) @ v


def layer_norm(
    x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-6
) -> np.ndarray:
    """Per-row standardization followed by the affine (gamma, beta)."""
    x = _check_2d("layer_norm input", x)
    gamma = np.asarray(gamma, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeMismatchError("gamma/beta length must equal the column count")
    mean = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * gamma + beta


def softmax_cross_entropy_with_grad(
    logits: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its exact gradient.

    loss = mean_t -log softmax(logits[t])[targets[t]]
    grad = (softmax(logits) - onehot(targets)) / T
    """
    logits = _check_2d("logits", logits)
    targets = np.asarray(targets, dtype=np.int64)
    t_len, n_classes = logits.shape
    if targets.shape != (t_len,):
        raise ShapeMismatchError(
            f"targets must have shape ({t_len},), got {targets.shape}"
        )
    if np.any(targets < 0) or np.any(targets >= n_classes):
        raise IndexError(f"target ids must lie in [0, {n_classes})")
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=1))
    picked = shifted[np.arange(t_len), targets]
    loss = float(np.mean(log_z - picked))
    grad = np.exp(shifted - log_z[:, None])
    grad[np.arange(t_len), targets] -= 1.0
    grad /= t_len
    return loss, grad


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Affine map x @ w + b with w of shape [in, out]."""
    x = _check_2d("linear input", x)
    w = _check_2d("weight", w)
    if x.shape[1] != w.shape[0]:
        raise ShapeMismatchError(
            f"input dim {x.shape[1]} != weight rows {w.shape[0]}"
        )
    out = x @ w
    if b is not None:
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (w.shape[1],):
            raise ShapeMismatchError("bias length must equal the output dim")
        out = out + b
    return out


@dataclass
class LinearParams:
    w: np.ndarray  # [in, out]
    b: np.ndarray  # [out]

    @classmethod
    def init(cls, rng: Rng, d_in: int, d_out: int, bias: bool = True) -> "LinearParams":
        return cls(
            w=init_weight(rng, (d_in, d_out), d_in),
            b=np.zeros(d_out) if bias else np.zeros(d_out),
        )

    @classmethod
    def zeros(cls, d_in: int, d_out: int) -> "LinearParams":
        return cls(w=np.zeros((d_in, d_out)), b=np.zeros(d_out))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return linear(x, self.w, self.b)

    def tensors(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}
