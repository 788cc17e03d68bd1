"""Temporal multi-head self-attention over the encoded feature sequence.

Each head carries its own query/key projections while all heads share a
single value projection; head outputs are concatenated and recombined by
an output projection.  Head width is ``d_in / n_heads`` so the input
features are distributed across head subspaces.
"""

import numpy as np

from . import autodiff as ad
from .exceptions import ConfigError, ShapeError


def scaled_dot_attention(q, k, v):
    """softmax(Q K^T / sqrt(D_h)) V with row-wise softmax.

    q, k: (..., N, D_h); v: (..., N, d_out).  Returns (output, weights);
    the weight rows are non-negative and sum to one, and are kept around
    for interpretability export (as plain values, not a graph path).

    Fused into a single graph node: the (N x N) weight matrices are the
    largest intermediates in the network, so the backward pass is
    hand-derived instead of composed from primitives.
    """
    q, k, v = ad.astensor(q), ad.astensor(k), ad.astensor(v)
    if k.data.shape[-2] != v.data.shape[-2]:
        raise ShapeError(
            f"scaled_dot_attention: key/value row counts differ ({k.data.shape}, {v.data.shape})"
        )
    if q.data.shape[-1] != k.data.shape[-1]:
        raise ShapeError(
            f"scaled_dot_attention: query/key widths differ ({q.data.shape}, {k.data.shape})"
        )
    Q, K, V = q.data, k.data, v.data
    scale = 1.0 / np.sqrt(K.shape[-1])
    try:
        scores = np.matmul(Q, np.swapaxes(K, -1, -2))
    except ValueError as exc:
        raise ShapeError(
            f"scaled_dot_attention: incompatible shapes {Q.shape} and {K.shape}"
        ) from exc
    scores *= scale
    scores -= np.max(scores, axis=-1, keepdims=True)
    W = np.exp(scores)
    W /= np.sum(W, axis=-1, keepdims=True)
    out_data = np.matmul(W, V)

    def vjp(g):
        dV = ad._unbroadcast(np.matmul(np.swapaxes(W, -1, -2), g), V.shape)
        dW = np.matmul(g, np.swapaxes(V, -1, -2))
        dW *= W
        dS = dW - W * np.sum(dW, axis=-1, keepdims=True)  # softmax adjoint
        dS *= scale
        dQ = ad._unbroadcast(np.matmul(dS, K), Q.shape)
        dK = ad._unbroadcast(np.matmul(np.swapaxes(dS, -1, -2), Q), K.shape)
        return dQ, dK, dV

    out = ad.custom_op("scaled_dot_attention", out_data, (q, k, v), vjp)
    return out, ad.Tensor(W)


class MultiHeadAttention:
    """One attention block: per-head W_Q/W_K, shared W_V, output W_O."""

    def __init__(self, d_in, n_heads, rng, d_out=None):
        if d_in % n_heads != 0:
            raise ConfigError(f"attention width {d_in} is not divisible by {n_heads} heads")
        self.d_in = d_in
        self.n_heads = n_heads
        self.head_dim = d_in // n_heads
        self.d_out = d_in if d_out is None else d_out
        hd = self.head_dim
        self.w_q = [ad.parameter(ad.uniform_init(rng, (d_in, hd), d_in)) for _ in range(n_heads)]
        self.w_k = [ad.parameter(ad.uniform_init(rng, (d_in, hd), d_in)) for _ in range(n_heads)]
        self.w_v = ad.parameter(ad.uniform_init(rng, (d_in, hd), d_in))
        self.w_o = ad.parameter(ad.uniform_init(rng, (n_heads * hd, self.d_out), n_heads * hd))

    def __call__(self, s):
        """s: (..., N, D_in) -> ((..., N, D_out), per-head weight tensors)."""
        s = ad.astensor(s)
        if s.data.shape[-1] != self.d_in:
            raise ShapeError(
                f"multi_head: expected feature width {self.d_in}, got {s.data.shape[-1]}"
            )
        v = ad.matmul(s, self.w_v)
        heads = []
        weights = []
        for h in range(self.n_heads):
            out, w = scaled_dot_attention(
                ad.matmul(s, self.w_q[h]), ad.matmul(s, self.w_k[h]), v
            )
            heads.append(out)
            weights.append(w)
        merged = ad.matmul(ad.concat(heads, axis=-1), self.w_o)
        return merged, weights

    def parameters(self):
        named = []
        for h in range(self.n_heads):
            named.append((f"head{h}.w_q", self.w_q[h]))
            named.append((f"head{h}.w_k", self.w_k[h]))
        named.append(("w_v", self.w_v))
        named.append(("w_o", self.w_o))
        return named
