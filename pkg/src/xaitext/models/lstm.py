from __future__ import annotations

import numpy as np
from scipy.special import expit

from ._base import EmbeddingClassifier, glorot_uniform


class LstmClassifier(EmbeddingClassifier):
    """Embedding -> single LSTM layer (last hidden state) -> dense + sigmoid.

    Gate blocks in the stacked ``(.., 4H)`` tensors are ordered input, forget,
    cell candidate, output. The recurrence runs over all ``L`` steps, PAD
    included.

    ``dropout`` masks the input features and ``recurrent_dropout`` masks the
    hidden state fed back into the recurrence; both masks are drawn once per
    sequence and reused at every step (training only).
    """

    kind = "lstm"

    def __init__(self, vocab_size=None, embedding_dim=16, hidden_size=16, dropout=0.2,
                 recurrent_dropout=0.2, learning_rate=1e-3, batch_size=64, epochs=10,
                 beta1=0.9, beta2=0.999, adam_epsilon=1e-8, random_state=0):
        self.vocab_size = vocab_size
        self.embedding_dim = embedding_dim
        self.hidden_size = hidden_size
        self.dropout = dropout
        self.recurrent_dropout = recurrent_dropout
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_epsilon = adam_epsilon
        self.random_state = random_state

    def _init_params(self, vocab_size, rng):
        for rate in (self.dropout, self.recurrent_dropout):
            if not 0.0 <= rate < 1.0:
                raise ValueError("dropout rates must be in [0, 1)")
        D, H = self.embedding_dim, self.hidden_size
        bias = np.zeros(4 * H)
        bias[H:2 * H] = 1.0
        limit = 1.0 / np.sqrt(H)
        return {
            "embedding": self._embedding_init(vocab_size, rng),
            "lstm_kernel": glorot_uniform(rng, (D, 4 * H), D, 4 * H),
            "lstm_recurrent": rng.uniform(-limit, limit, size=(H, 4 * H)),
            "lstm_bias": bias,
            "dense_kernel": glorot_uniform(rng, (H,), H, 1),
            "dense_bias": np.zeros(()),
        }

    def _forward(self, emb, present, training=False, rng=None):
        P = self.params_
        B, L, D = emb.shape
        H = self.hidden_size
        in_keep = rec_keep = None
        if training and self.dropout > 0:
            in_keep = (rng.random((B, D)) >= self.dropout) / (1.0 - self.dropout)
            emb = emb * in_keep[:, None, :]
        if training and self.recurrent_dropout > 0:
            rec_keep = (rng.random((B, H)) >= self.recurrent_dropout) / (1.0 - self.recurrent_dropout)

        x_proj = np.einsum("nd,dk->nk", emb.reshape(B * L, D), P["lstm_kernel"])
        x_proj = x_proj.reshape(B, L, 4 * H) + P["lstm_bias"]
        U = P["lstm_recurrent"]
        hs = np.zeros((L + 1, B, H))
        cs = np.zeros((L + 1, B, H))
        gates = np.empty((L, B, 4 * H))
        for t in range(L):
            h_in = hs[t] if rec_keep is None else hs[t] * rec_keep
            # einsum, not BLAS: a batch of one must round exactly like a large batch
            a = x_proj[:, t] + np.einsum("bh,hk->bk", h_in, U)
            g = gates[t]
            g[:, :2 * H] = expit(a[:, :2 * H])
            g[:, 2 * H:3 * H] = np.tanh(a[:, 2 * H:3 * H])
            g[:, 3 * H:] = expit(a[:, 3 * H:])
            cs[t + 1] = g[:, H:2 * H] * cs[t] + g[:, :H] * g[:, 2 * H:3 * H]
            hs[t + 1] = g[:, 3 * H:] * np.tanh(cs[t + 1])
        logits = (hs[L] * P["dense_kernel"]).sum(axis=1) + P["dense_bias"]
        return logits, (emb, hs, cs, gates, in_keep, rec_keep)

    def _backward(self, cache, dlogits, param_grads=True):
        P = self.params_
        emb, hs, cs, gates, in_keep, rec_keep = cache
        B, L, D = emb.shape
        H = self.hidden_size
        Wk, U = P["lstm_kernel"], P["lstm_recurrent"]
        grads = {
            "dense_kernel": hs[L].T @ dlogits,
            "dense_bias": np.asarray(dlogits.sum()),
        }
        dh = dlogits[:, None] * P["dense_kernel"][None, :]
        dc = np.zeros((B, H))
        da_all = np.empty((B, L, 4 * H))
        dU = np.zeros_like(U)
        for t in reversed(range(L)):
            g = gates[t]
            i, f, c_hat, o = g[:, :H], g[:, H:2 * H], g[:, 2 * H:3 * H], g[:, 3 * H:]
            tc = np.tanh(cs[t + 1])
            dc = dc + dh * o * (1.0 - tc * tc)
            da = da_all[:, t]
            da[:, :H] = dc * c_hat * i * (1.0 - i)
            da[:, H:2 * H] = dc * cs[t] * f * (1.0 - f)
            da[:, 2 * H:3 * H] = dc * i * (1.0 - c_hat * c_hat)
            da[:, 3 * H:] = dh * tc * o * (1.0 - o)
            h_in = hs[t] if rec_keep is None else hs[t] * rec_keep
            if param_grads:
                dU += h_in.T @ da
            dh = da @ U.T
            if rec_keep is not None:
                dh = dh * rec_keep
            dc = dc * f
        flat = da_all.reshape(B * L, 4 * H)
        if param_grads:
            grads["lstm_kernel"] = emb.reshape(B * L, D).T @ flat
            grads["lstm_recurrent"] = dU
            grads["lstm_bias"] = flat.sum(axis=0)
        else:
            grads = {}
        demb = (flat @ Wk.T).reshape(B, L, D)
        if in_keep is not None:
            demb = demb * in_keep[:, None, :]
        return grads, demb
