from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ._base import EmbeddingClassifier, glorot_uniform


class CnnClassifier(EmbeddingClassifier):
    """Embedding -> Conv1D -> global average pooling -> dropout -> dense + sigmoid.

    Parameters
    ----------
    vocab_size : int or None
        Number of token ids. Inferred from the training data when None.
    embedding_dim : int
    filters : int
        Number of convolution filters.
    kernel_size : int
        Convolution window width; the conv output has ``L - kernel_size + 1`` steps.
    activation : {"relu", "linear"}
        Non-linearity after the convolution.
    pooling : {"masked", "mean"}
        ``"masked"`` averages only windows that contain at least one real
        token; ``"mean"`` averages all ``L - kernel_size + 1`` windows.
    dropout : float
        Inverted dropout rate on the pooled features (training only).
    """

    kind = "cnn"

    def __init__(self, vocab_size=None, embedding_dim=16, filters=16, kernel_size=5,
                 activation="relu", pooling="masked", dropout=0.5, learning_rate=1e-3,
                 batch_size=64, epochs=10, beta1=0.9, beta2=0.999, adam_epsilon=1e-8,
                 random_state=0):
        self.vocab_size = vocab_size
        self.embedding_dim = embedding_dim
        self.filters = filters
        self.kernel_size = kernel_size
        self.activation = activation
        self.pooling = pooling
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_epsilon = adam_epsilon
        self.random_state = random_state

    def _init_params(self, vocab_size, rng):
        if self.activation not in ("relu", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.pooling not in ("masked", "mean"):
            raise ValueError(f"unknown pooling {self.pooling!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        W, D, F = self.kernel_size, self.embedding_dim, self.filters
        return {
            "embedding": self._embedding_init(vocab_size, rng),
            "conv_kernel": glorot_uniform(rng, (W, D, F), W * D, W * F),
            "conv_bias": np.zeros(F),
            "dense_kernel": glorot_uniform(rng, (F,), F, 1),
            "dense_bias": np.zeros(()),
        }

    def _forward(self, emb, present, training=False, rng=None):
        P = self.params_
        B, L, D = emb.shape
        W = self.kernel_size
        T = L - W + 1
        if T < 1:
            raise ValueError(f"sequence length {L} shorter than kernel size {W}")
        # (B, T, D, W) -> (B, T, W, D) -> (B*T, W*D)
        windows = sliding_window_view(emb, W, axis=1).transpose(0, 1, 3, 2).reshape(B * T, W * D)
        kernel = P["conv_kernel"].reshape(W * D, -1)
        # einsum, not BLAS gemm: rows must round identically at any batch size
        pre = np.einsum("nk,kf->nf", windows, kernel).reshape(B, T, -1) + P["conv_bias"]
        act = np.maximum(pre, 0.0) if self.activation == "relu" else pre

        if self.pooling == "masked":
            win_mask = sliding_window_view(present, W, axis=1).any(axis=2).astype(float)
            # a sequence without real tokens falls back to the plain mean
            win_mask[win_mask.sum(axis=1) == 0] = 1.0
        else:
            win_mask = np.ones((B, T))
        weights = win_mask / win_mask.sum(axis=1, keepdims=True)
        pooled = np.einsum("bt,btf->bf", weights, act)

        keep = None
        if training and self.dropout > 0:
            keep = (rng.random(pooled.shape) >= self.dropout) / (1.0 - self.dropout)
            pooled = pooled * keep
        # row-wise reduction keeps single and batched inference bit-identical
        logits = (pooled * P["dense_kernel"]).sum(axis=1) + P["dense_bias"]
        cache = (windows, pre, weights, pooled, keep, (B, L, D, T))
        return logits, cache

    def _conv_transpose(self, dpre):
        """Map ``(B, T, F)`` conv-output cotangents back to ``(B, L, D)`` embeddings."""
        B, T, _ = dpre.shape
        W, D = self.kernel_size, self.embedding_dim
        dwin = (dpre.reshape(B * T, -1) @ self.params_["conv_kernel"].reshape(W * D, -1).T)
        dwin = dwin.reshape(B, T, W, D)
        demb = np.zeros((B, T + W - 1, D))
        for w in range(W):
            demb[:, w:w + T] += dwin[:, :, w]
        return demb

    def path_gradient_sum(self, x_emb, b_emb, alphas, mask=None, chunk=None):
        """Exploit conv linearity: interpolate pre-activations, transpose-convolve once."""
        x_emb, present, _ = self._prep_emb(x_emb, mask)
        b_emb = np.asarray(b_emb, dtype=float)[None]
        _, (_, pre_x, weights, *_rest) = self._forward(x_emb, present)
        _, (_, pre_b, *_rest) = self._forward(b_emb, present)
        alphas = np.asarray(alphas, dtype=float)[:, None, None]
        pre = pre_b + alphas * (pre_x - pre_b)
        act = np.maximum(pre, 0.0) if self.activation == "relu" else pre
        v = self.params_["dense_kernel"]
        pooled = np.einsum("t,stf->sf", weights[0], act)
        p = expit((pooled * v).sum(axis=1) + self.params_["dense_bias"])
        dpre = (p * (1.0 - p))[:, None, None] * weights[0][None, :, None] * v[None, None, :]
        if self.activation == "relu":
            dpre = dpre * (pre > 0)
        return self._conv_transpose(dpre.sum(axis=0)[None])[0]

    def _backward(self, cache, dlogits, param_grads=True):
        P = self.params_
        windows, pre, weights, pooled, keep, (B, L, D, T) = cache
        W = self.kernel_size
        grads = {}
        dpooled = dlogits[:, None] * P["dense_kernel"][None, :]
        if keep is not None:
            dpooled = dpooled * keep
        dact = weights[:, :, None] * dpooled[:, None, :]
        dpre = dact * (pre > 0) if self.activation == "relu" else dact
        dpre2 = dpre.reshape(B * T, -1)
        if param_grads:
            grads["dense_kernel"] = pooled.T @ dlogits
            grads["dense_bias"] = np.asarray(dlogits.sum())
            grads["conv_kernel"] = (windows.T @ dpre2).reshape(W, D, -1)
            grads["conv_bias"] = dpre2.sum(axis=0)
        return grads, self._conv_transpose(dpre)
