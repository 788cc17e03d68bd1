"""Sequence encoder: stacked LSTM, attention, and the two latent heads.

The LSTM stack turns the scaled input window into a feature sequence;
dropout follows every LSTM layer in training mode.  The attention stack
(residual connections between blocks) contextualizes the sequence, which
is then mean-pooled over time so the summary width is independent of the
window length.  Two dense heads map the summary to the rule-activation
latent ``z`` (tanh-bounded, which keeps it friendly to Gaussian
clustering) and to the exogenous sequence ``u`` with one entry per
forecast step.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .attention import MultiHeadAttention
from .exceptions import ShapeError
from .kernels import lstm as lstm_kernels


def lstm_step(x, h, c, wx, wh, b):
    """Single LSTM cell update on plain arrays (reference path for tests).

    Gate order in the fused matrices is input, forget, candidate, output.
    """
    x, h, c = np.asarray(x, float), np.asarray(h, float), np.asarray(c, float)
    dh = wh.shape[0]
    if x.shape[-1] != wx.shape[0] or h.shape[-1] != dh or c.shape[-1] != dh:
        raise ShapeError(
            f"lstm_step: dimensions {x.shape}/{h.shape}/{c.shape} do not match "
            f"weights {wx.shape}/{wh.shape}"
        )
    acts = x @ wx + h @ wh + b
    with np.errstate(over="ignore"):
        i = 1.0 / (1.0 + np.exp(-acts[..., :dh]))
        f = 1.0 / (1.0 + np.exp(-acts[..., dh : 2 * dh]))
        g = np.tanh(acts[..., 2 * dh : 3 * dh])
        o = 1.0 / (1.0 + np.exp(-acts[..., 3 * dh :]))
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def lstm_scan(x, wx, wh, b):
    """Graph op: run one LSTM layer over a batch of windows.

    x: (B, N, D_in) tensor -> (B, N, D_h).  Forward and backward run in
    the fused kernel (time-major internally); the graph sees one node.
    """
    x, wx, wh, b = ad.astensor(x), ad.astensor(wx), ad.astensor(wh), ad.astensor(b)
    if x.data.ndim != 3 or x.data.shape[-1] != wx.data.shape[0]:
        raise ShapeError(
            f"lstm_scan: input {x.data.shape} does not match weights {wx.data.shape}"
        )
    if wx.data.shape[1] != 4 * wh.data.shape[0] or wh.data.shape[1] != 4 * wh.data.shape[0]:
        raise ShapeError(
            f"lstm_scan: inconsistent gate widths {wx.data.shape}/{wh.data.shape}"
        )
    xt = np.ascontiguousarray(np.swapaxes(x.data, 0, 1))
    h_all, i_all, f_all, g_all, o_all, c_all = lstm_kernels.lstm_forward(
        xt, wx.data, wh.data, b.data
    )

    def vjp(g):
        gt = np.ascontiguousarray(np.swapaxes(g, 0, 1))
        dx, dwx, dwh, db = lstm_kernels.lstm_backward(
            xt, wx.data, wh.data, gt, h_all, i_all, f_all, g_all, o_all, c_all
        )
        return np.swapaxes(dx, 0, 1), dwx, dwh, db

    return ad.custom_op("lstm_scan", np.swapaxes(h_all, 0, 1), (x, wx, wh, b), vjp)


class LstmLayer:
    """Parameters of one LSTM layer (fused input/hidden gate weights)."""

    def __init__(self, d_in, d_h, rng):
        self.d_in = d_in
        self.d_h = d_h
        self.wx = ad.parameter(ad.uniform_init(rng, (d_in, 4 * d_h), d_in))
        self.wh = ad.parameter(ad.uniform_init(rng, (d_h, 4 * d_h), d_h))
        self.b = ad.parameter(ad.uniform_init(rng, (4 * d_h,), d_h))

    def __call__(self, x):
        return lstm_scan(x, self.wx, self.wh, self.b)

    def parameters(self):
        return [("wx", self.wx), ("wh", self.wh), ("b", self.b)]


class Dense:
    def __init__(self, d_in, d_out, rng, activation=None):
        self.w = ad.parameter(ad.uniform_init(rng, (d_in, d_out), d_in))
        self.b = ad.parameter(ad.uniform_init(rng, (d_out,), d_in))
        self.activation = activation

    def __call__(self, x):
        y = ad.add(ad.matmul(x, self.w), self.b)
        if self.activation == "tanh":
            return ad.tanh(y)
        return y

    def parameters(self):
        return [("w", self.w), ("b", self.b)]


@dataclass
class EncoderOutput:
    """Batched encoder products; ``attention_weights[layer][head]``."""

    sequence_features: ad.Tensor  # (B, N, D_h) LSTM-stack output
    z_latent: ad.Tensor           # (B, D_Z)
    u_latent: ad.Tensor           # (B, H)
    attended: ad.Tensor           # (B, N, D_h) post-attention sequence
    attention_weights: list = field(default_factory=list)


class Encoder:
    """LSTM stack + attention stack + the z/u dense heads."""

    def __init__(
        self,
        d_x,
        d_h,
        lstm_layers,
        mha_layers,
        n_heads,
        d_z,
        horizon,
        dropout_rate,
        rng,
        attention_residual=True,
    ):
        self.d_x = d_x
        self.d_h = d_h
        self.dropout_rate = float(dropout_rate)
        self.attention_residual = bool(attention_residual)
        self.lstm_layers = [
            LstmLayer(d_x if i == 0 else d_h, d_h, rng) for i in range(lstm_layers)
        ]
        self.mha_layers = [MultiHeadAttention(d_h, n_heads, rng) for _ in range(mha_layers)]
        self.z_head = Dense(d_h, d_z, rng, activation="tanh")
        self.u_head = Dense(d_h, horizon, rng)

    def __call__(self, x, training=False, rng=None) -> EncoderOutput:
        """x: (B, N, D_X) tensor of scaled windows."""
        x = ad.astensor(x)
        if x.data.ndim != 3 or x.data.shape[-1] != self.d_x:
            raise ShapeError(
                f"encoder: expected (B, N, {self.d_x}) input, got {x.data.shape}"
            )
        h = x
        for layer in self.lstm_layers:
            h = layer(h)
            h = ad.dropout(h, self.dropout_rate, rng, training)
        seq = h
        attended = h
        all_weights = []
        for mha in self.mha_layers:
            m, weights = mha(attended)
            attended = ad.add(attended, m) if self.attention_residual else m
            all_weights.append(weights)
        pooled = ad.tmean(attended, axis=1)
        z = self.z_head(pooled)
        u = self.u_head(pooled)
        return EncoderOutput(
            sequence_features=seq,
            z_latent=z,
            u_latent=u,
            attended=attended,
            attention_weights=all_weights,
        )

    def parameters(self):
        named = []
        for i, layer in enumerate(self.lstm_layers):
            named.extend((f"lstm{i}.{n}", t) for n, t in layer.parameters())
        for i, mha in enumerate(self.mha_layers):
            named.extend((f"mha{i}.{n}", t) for n, t in mha.parameters())
        named.extend((f"z_head.{n}", t) for n, t in self.z_head.parameters())
        named.extend((f"u_head.{n}", t) for n, t in self.u_head.parameters())
        return named
