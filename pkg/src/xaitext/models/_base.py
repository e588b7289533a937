"""Shared estimator machinery for the embedding-based binary classifiers."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..text import PAD_ID, validate_sequences

logger = logging.getLogger(__name__)

PROB_EPS = 1e-7


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss."""


def bce_loss(p, y, eps: float = PROB_EPS):
    """Binary cross-entropy with ``p`` clamped to ``[eps, 1 - eps]``."""
    p = np.clip(np.asarray(p, dtype=float), eps, 1.0 - eps)
    y = np.asarray(y, dtype=float)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def as_float32_exact(params: dict) -> None:
    """Round every tensor in place to the nearest float32 value.

    Parameters live in float64 for exact gradients, but always hold values a
    float32 checkpoint can store without loss.
    """
    for arr in params.values():
        arr[...] = arr.astype(np.float32)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class TrainingHistory:
    train_loss: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "epochs": len(self.train_loss),
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
        }


class Adam:
    def __init__(self, params: dict, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, epsilon
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, g in grads.items():
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _check_labels(y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("y must be 1-D")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return y.astype(np.int64)


class EmbeddingClassifier(ClassifierMixin, BaseEstimator):
    """Embedding lookup followed by an architecture-specific head.

    Subclasses implement ``_init_params``, ``_forward`` and ``_backward``.
    ``_forward`` maps embedded inputs ``(B, L, D)`` to logits ``(B,)``;
    ``_backward`` maps a logit cotangent to parameter gradients and the
    gradient with respect to the embedded inputs.
    """

    kind: str = ""

    # -- subclass hooks ---------------------------------------------------
    def _init_params(self, vocab_size, rng) -> dict:
        raise NotImplementedError

    def _forward(self, emb, present, training=False, rng=None):
        raise NotImplementedError

    def _backward(self, cache, dlogits, param_grads=True):
        raise NotImplementedError

    # -- construction -----------------------------------------------------
    def _embedding_init(self, vocab_size, rng):
        emb = rng.uniform(-0.05, 0.05, size=(vocab_size, self.embedding_dim))
        emb[PAD_ID] = 0.0
        return emb

    def initialize(self, vocab_size: int | None = None):
        """Draw fresh parameters from ``random_state`` without training."""
        vocab_size = vocab_size or self.vocab_size
        if vocab_size is None or vocab_size < 2:
            raise ValueError("vocab_size must be known and >= 2")
        rng = np.random.default_rng(self.random_state)
        self.params_ = self._init_params(int(vocab_size), rng)
        as_float32_exact(self.params_)
        self.vocab_size_ = int(vocab_size)
        self.classes_ = np.array([0, 1])
        self.history_ = TrainingHistory()
        return self

    # -- training ----------------------------------------------------------
    def train_config(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.batch_size, self.epochs, self.random_state,
                           self.beta1, self.beta2, self.adam_epsilon)

    def fit(self, X, y, validation_data=None):
        """Mini-batch Adam on mean binary cross-entropy.

        ``validation_data`` is an optional ``(X_val, y_val)`` pair scored after
        every epoch. Training is bit-reproducible for a fixed ``random_state``.
        """
        X = validate_sequences(X)
        y = _check_labels(y)
        if len(X) != len(y) or len(X) == 0:
            raise ValueError("X and y must be non-empty and of equal length")
        vocab_size = self.vocab_size or int(X.max()) + 1
        self.initialize(vocab_size)
        X = validate_sequences(X, self.vocab_size_)
        if validation_data is not None:
            X_val = validate_sequences(validation_data[0], self.vocab_size_)
            y_val = _check_labels(validation_data[1])
        cfg = self.train_config()
        opt = Adam(self.params_, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
        rng = np.random.default_rng([cfg.seed, 1])
        n = len(X)
        for epoch in range(cfg.epochs):
            order = rng.permutation(n)
            for b, start in enumerate(range(0, n, cfg.batch_size)):
                idx = order[start:start + cfg.batch_size]
                ids = X[idx]
                emb = self.params_["embedding"][ids]
                logits, cache = self._forward(emb, ids != PAD_ID, training=True, rng=rng)
                p = expit(logits)
                loss = float(bce_loss(p, y[idx]).mean())
                if not np.isfinite(loss):
                    raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {b}")
                grads, demb = self._backward(cache, (p - y[idx]) / len(idx))
                grads["embedding"] = self._scatter_embedding_grad(ids, demb)
                opt.step(self.params_, grads)
                self.params_["embedding"][PAD_ID] = 0.0
                as_float32_exact(self.params_)
            acc, loss = self.evaluate(X, y)
            self.history_.train_loss.append(loss)
            self.history_.train_accuracy.append(acc)
            if validation_data is not None and len(X_val):
                acc, loss = self.evaluate(X_val, y_val)
                self.history_.val_loss.append(loss)
                self.history_.val_accuracy.append(acc)
            logger.info("epoch %d: train loss %.4f acc %.4f", epoch + 1,
                        self.history_.train_loss[-1], self.history_.train_accuracy[-1])
        return self

    def _scatter_embedding_grad(self, ids, demb):
        g = np.zeros_like(self.params_["embedding"])
        np.add.at(g, ids.ravel(), demb.reshape(-1, demb.shape[-1]))
        g[PAD_ID] = 0.0
        return g

    # -- inference ---------------------------------------------------------
    def embed(self, seq) -> np.ndarray:
        """Embedding rows for ``seq``; ``(L, D)`` for one sequence, ``(B, L, D)`` for many."""
        check_is_fitted(self, "params_")
        ids = np.asarray(seq)
        validate_sequences(ids if ids.ndim else ids[None], self.vocab_size_)
        return self.params_["embedding"][ids.astype(np.int64)]

    def _prep_emb(self, emb, mask):
        check_is_fitted(self, "params_")
        emb = np.asarray(emb, dtype=float)
        single = emb.ndim == 2
        if single:
            emb = emb[None]
        if emb.ndim != 3 or emb.shape[2] != self.embedding_dim:
            raise ValueError(f"expected embeddings of shape (L, {self.embedding_dim}), got {emb.shape}")
        if not np.isfinite(emb).all():
            raise ValueError("embeddings contain non-finite values")
        if mask is None:
            present = np.any(emb != 0.0, axis=2)
        else:
            present = np.broadcast_to(np.asarray(mask, dtype=bool), emb.shape[:2])
        return emb, present, single

    def forward_from_embeddings(self, emb, training: bool = False, mask=None, rng=None):
        """Positive-class probability from embedded input(s).

        ``mask`` marks real (non-PAD) positions; by default a position counts as
        real when its embedding row is non-zero.
        """
        emb, present, single = self._prep_emb(emb, mask)
        if training and rng is None:
            rng = np.random.default_rng(self.random_state)
        logits, _ = self._forward(emb, present, training=training, rng=rng)
        p = np.clip(expit(logits), PROB_EPS, 1.0 - PROB_EPS)
        return float(p[0]) if single else p

    def gradient_wrt_embeddings(self, emb, mask=None) -> np.ndarray:
        """Exact d P(1) / d emb in inference mode, same shape as ``emb``."""
        emb, present, single = self._prep_emb(emb, mask)
        logits, cache = self._forward(emb, present)
        p = expit(logits)
        _, demb = self._backward(cache, p * (1.0 - p), param_grads=False)
        if not np.isfinite(demb).all():
            raise FloatingPointError("non-finite gradient with respect to embeddings")
        return demb[0] if single else demb

    def path_gradient_sum(self, x_emb, b_emb, alphas, mask=None, chunk: int = 64) -> np.ndarray:
        """Sum of d P(1) / d emb over the points ``b_emb + alpha * (x_emb - b_emb)``."""
        alphas = np.asarray(alphas, dtype=float)
        delta = x_emb - b_emb
        total = np.zeros_like(np.asarray(x_emb, dtype=float))
        for start in range(0, len(alphas), chunk):
            a = alphas[start:start + chunk, None, None]
            total += self.gradient_wrt_embeddings(b_emb + a * delta, mask=mask).sum(axis=0)
        return total

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = validate_sequences(X, self.vocab_size_)
        logits, _ = self._forward(self.params_["embedding"][X], X != PAD_ID)
        return logits

    def predict_proba(self, X) -> np.ndarray:
        """``[P(0), P(1)]`` rows in input order (inference mode)."""
        p1 = np.clip(expit(self.decision_function(X)), PROB_EPS, 1.0 - PROB_EPS)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)

    def evaluate(self, X, y) -> tuple[float, float]:
        """Accuracy at the ``P(1) >= 0.5`` threshold and mean BCE."""
        y = _check_labels(y)
        if len(y) == 0:
            raise ValueError("evaluation set is empty")
        p1 = self.predict_proba(X)[:, 1]
        acc = float(np.mean((p1 >= 0.5).astype(np.int64) == y))
        return acc, float(bce_loss(p1, y).mean())

    def parameter_gradients(self, X, y) -> dict:
        """Gradients of the mean BCE over ``(X, y)`` for every parameter (inference mode)."""
        check_is_fitted(self, "params_")
        X = validate_sequences(X, self.vocab_size_)
        y = _check_labels(y)
        logits, cache = self._forward(self.params_["embedding"][X], X != PAD_ID)
        grads, demb = self._backward(cache, (expit(logits) - y) / len(y))
        grads["embedding"] = self._scatter_embedding_grad(X, demb)
        return grads

    def mean_loss(self, X, y) -> float:
        """Mean unclamped BCE, the function ``parameter_gradients`` differentiates."""
        X = validate_sequences(X, self.vocab_size_)
        z = self.decision_function(X)
        y = _check_labels(y)
        # log(1 + exp(-z)) for y=1, log(1 + exp(z)) for y=0
        return float(np.mean(np.logaddexp(0.0, np.where(y == 1, -z, z))))

    def save(self, path) -> None:
        from .checkpoint import save_model
        save_model(self, path)

    @classmethod
    def load(cls, path):
        from .checkpoint import load_model
        return load_model(path, kind=cls.kind)
