from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..text import active_positions
from .base import Timer, as_sequence, finish, masked_variants, positive_proba


class DegenerateDesignError(np.linalg.LinAlgError):
    pass


def cosine_distance_to_full(keep: np.ndarray) -> np.ndarray:
    """Cosine distance between each binary mask and the all-ones mask.

    An empty mask has no direction and is assigned distance 1.
    """
    n = keep.shape[1]
    kept = keep.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(kept > 0, kept / np.sqrt(np.maximum(kept, 1) * n), 0.0)
    return 1.0 - sim


def weighted_ridge(Z, y, w, alpha):
    """Weighted ridge regression with an unpenalized intercept.

    Returns ``(coef, intercept)`` minimizing
    ``sum(w * (y - intercept - Z @ coef)**2) + alpha * |coef|**2``.
    """
    Z = np.asarray(Z, dtype=float)
    w = np.asarray(w, dtype=float)
    sw = w.sum()
    z_mean = (w @ Z) / sw
    y_mean = (w @ y) / sw
    Zc = Z - z_mean
    yc = y - y_mean
    G = (Zc.T * w) @ Zc + alpha * np.eye(Z.shape[1])
    try:
        if alpha == 0.0 and np.linalg.matrix_rank(G) < G.shape[0]:
            raise np.linalg.LinAlgError("rank deficient")
        coef = np.linalg.solve(G, (Zc.T * w) @ yc)
    except np.linalg.LinAlgError as exc:
        raise DegenerateDesignError(
            f"degenerate LIME design matrix ({len(Z)} samples, {Z.shape[1]} features): {exc}"
        ) from None
    return coef, y_mean - z_mean @ coef


def keep_top_k(coef: np.ndarray, k: int) -> np.ndarray:
    """Zero all but the ``k`` largest ``|coef|``; ties keep the lower index."""
    order = np.lexsort((np.arange(len(coef)), -np.abs(coef)))
    out = np.zeros_like(coef)
    out[order[:k]] = coef[order[:k]]
    return out


def lime_explain(model, seq, n_samples: int = 1000, top_k: int = 20, kernel_width=None,
                 alpha: float = 1e-3, seed: int = 0):
    """LIME with deletion perturbations and a weighted ridge surrogate.

    Each active position is kept with probability 1/2 (the first sample keeps
    everything). Samples are weighted by ``exp(-d**2 / kernel_width**2)`` with
    ``d`` the cosine distance to the unperturbed mask; ``kernel_width``
    defaults to ``0.75 * sqrt(n_active)``.
    """
    if n_samples < 10:
        raise ValueError("n_samples must be >= 10")
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    seq = as_sequence(seq)
    idx = active_positions(seq)
    n = len(idx)
    config = {"n_samples": n_samples, "top_k": top_k, "kernel_width": kernel_width, "alpha": alpha}
    with Timer() as timer:
        scores = np.zeros(len(seq))
        if n:
            rng = np.random.default_rng(seed)
            keep = rng.random((n_samples, n)) < 0.5
            keep[0] = True
            y = positive_proba(model, masked_variants(seq, idx, keep))
            width = kernel_width if kernel_width is not None else 0.75 * np.sqrt(n)
            w = np.exp(-cosine_distance_to_full(keep) ** 2 / width**2)
            coef, _ = weighted_ridge(keep, y, w, alpha)
            scores[idx] = keep_top_k(coef, top_k)
    return finish(scores, seq, "lime", timer, seed=seed, config=config)


class Lime(BaseEstimator):
    name = "lime"

    def __init__(self, n_samples: int = 1000, top_k: int = 20, kernel_width=None,
                 alpha: float = 1e-3, random_state: int = 0):
        self.n_samples = n_samples
        self.top_k = top_k
        self.kernel_width = kernel_width
        self.alpha = alpha
        self.random_state = random_state

    def explain(self, model, seq):
        return lime_explain(model, seq, self.n_samples, self.top_k, self.kernel_width,
                            self.alpha, seed=self.random_state)

    __call__ = explain
