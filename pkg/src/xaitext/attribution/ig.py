from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..text import PAD_ID
from .base import Timer, as_sequence, finish


def integrated_gradients(model, seq, steps: int = 50):
    """Integrated Gradients in embedding space from the all-PAD baseline.

    Gradients are averaged over ``steps`` midpoint interpolants
    ``b + (i - 1/2)/steps * (x - b)`` and contracted with ``x - b`` over the
    embedding dimension, giving one score per position. ``model`` must offer
    ``embed`` and ``path_gradient_sum`` (see
    :class:`~xaitext.models.EmbeddingClassifier`).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    seq = as_sequence(seq)
    with Timer() as timer:
        x_emb = model.embed(seq)
        b_emb = model.embed(np.full_like(seq, PAD_ID))
        delta = x_emb - b_emb
        present = seq != PAD_ID
        alphas = (np.arange(steps) + 0.5) / steps
        total = model.path_gradient_sum(x_emb, b_emb, alphas, mask=present)
        scores = ((total / steps) * delta).sum(axis=1)
    return finish(scores, seq, "ig", timer, config={"steps": steps})


class IntegratedGradients(BaseEstimator):
    name = "ig"

    def __init__(self, steps: int = 50):
        self.steps = steps

    def explain(self, model, seq):
        return integrated_gradients(model, seq, steps=self.steps)

    __call__ = explain
