"""Shapley values over token positions with PAD substitution as "absence".

The value of a coalition ``S`` of non-PAD positions is ``P(1)`` of the
sequence where every active position outside ``S`` is replaced by PAD.
"""
from __future__ import annotations

import logging
from math import comb, factorial

import numpy as np
from sklearn.base import BaseEstimator

from ..text import active_positions
from .base import Timer, as_sequence, finish, masked_variants, positive_proba

logger = logging.getLogger(__name__)

MAX_EXACT_ACTIVE = 14
MAX_EXHAUSTIVE_ACTIVE = 16


class TooManyTokensError(ValueError):
    pass


def _all_coalitions(n: int) -> np.ndarray:
    codes = np.arange(2**n)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(bool)


def exact_shapley(model, seq, max_active: int = MAX_EXACT_ACTIVE):
    """Brute-force Shapley values (``2**n`` model queries for ``n`` active tokens)."""
    seq = as_sequence(seq)
    idx = active_positions(seq)
    n = len(idx)
    if n > max_active:
        raise TooManyTokensError(f"{n} active tokens exceed the exact limit of {max_active}")
    with Timer() as timer:
        phi = np.zeros(n)
        if n:
            keep = _all_coalitions(n)
            v = positive_proba(model, masked_variants(seq, idx, keep))
            sizes = keep.sum(axis=1)
            weight = np.array([factorial(s) * factorial(n - s - 1) / factorial(n)
                               for s in range(n)])
            codes = np.arange(2**n)
            for j in range(n):
                without = codes[(codes >> j) & 1 == 0]
                phi[j] = np.sum(weight[sizes[without]] * (v[without | (1 << j)] - v[without]))
        scores = np.zeros(len(seq))
        scores[idx] = phi
    return finish(scores, seq, "exact_shapley", timer, config={"max_active": max_active})


def shapley_kernel_weight(n: int, size) -> np.ndarray:
    size = np.asarray(size)
    return (n - 1) / (np.array([comb(n, int(s)) for s in size.ravel()]).reshape(size.shape)
                      * size * (n - size))


def _sample_coalitions(n: int, count: int, rng) -> np.ndarray:
    """Paired draws: a subset with size from the Shapley kernel, then its complement."""
    sizes = np.arange(1, n)
    p = (n - 1) / (sizes * (n - sizes))
    p /= p.sum()
    out = np.zeros((count, n), dtype=bool)
    for row in range(0, count, 2):
        s = rng.choice(sizes, p=p)
        members = rng.choice(n, size=s, replace=False)
        out[row, members] = True
        if row + 1 < count:
            out[row + 1] = ~out[row]
    return out


def _solve_constrained(Z, y, w, total, ridge=0.0):
    """Weighted least squares for ``y ~ Z @ phi`` subject to ``sum(phi) == total``."""
    A = Z[:, :-1].astype(float) - Z[:, -1:].astype(float)
    t = y - Z[:, -1] * total
    AtW = A.T * w
    G = AtW @ A
    rhs = AtW @ t
    if ridge == 0.0 and np.linalg.matrix_rank(G) < G.shape[0]:
        ridge = 1e-8 * max(np.trace(G) / G.shape[0], 1e-12)
        logger.info("singular Shapley regression (%d coalitions, %d tokens); ridge %.3g added",
                       len(Z), Z.shape[1], ridge)
    head = np.linalg.solve(G + ridge * np.eye(G.shape[0]), rhs)
    return np.append(head, total - head.sum())


def sampled_shap(model, seq, n_coalitions: int = 100, seed: int = 0, exhaustive: bool = False):
    """Kernel SHAP estimate from ``n_coalitions`` masked variants.

    The empty and full coalitions are always evaluated and enter as the
    efficiency constraint. When ``exhaustive`` is set, or the budget covers
    every coalition anyway, all ``2**n - 2`` proper coalitions are used with
    exact kernel weights and the result equals the exact Shapley values.
    """
    if n_coalitions < 2:
        raise ValueError("n_coalitions must be >= 2")
    seq = as_sequence(seq)
    idx = active_positions(seq)
    n = len(idx)
    if exhaustive and n > MAX_EXHAUSTIVE_ACTIVE:
        raise TooManyTokensError(f"exhaustive enumeration over {n} tokens is infeasible")
    config = {"n_coalitions": n_coalitions, "exhaustive": exhaustive}
    with Timer() as timer:
        scores = np.zeros(len(seq))
        if n:
            ends = positive_proba(model, masked_variants(seq, idx, np.array([[False] * n, [True] * n])))
            v_empty, v_full = ends
            total = v_full - v_empty
            if n == 1:
                phi = np.array([total])
            else:
                if exhaustive or 2**n <= n_coalitions:
                    Z = _all_coalitions(n)[1:-1]
                    w = shapley_kernel_weight(n, Z.sum(axis=1))
                else:
                    rng = np.random.default_rng(seed)
                    Z = _sample_coalitions(n, n_coalitions - 2, rng)
                    w = np.ones(len(Z))
                y = positive_proba(model, masked_variants(seq, idx, Z)) - v_empty
                phi = _solve_constrained(Z, y, w, total)
            scores[idx] = phi
    return finish(scores, seq, "shap", timer, seed=seed, config=config)


class KernelShap(BaseEstimator):
    name = "shap"

    def __init__(self, n_coalitions: int = 100, exhaustive: bool = False, random_state: int = 0):
        self.n_coalitions = n_coalitions
        self.exhaustive = exhaustive
        self.random_state = random_state

    def explain(self, model, seq):
        return sampled_shap(model, seq, self.n_coalitions, seed=self.random_state,
                            exhaustive=self.exhaustive)

    __call__ = explain


class ExactShapley(BaseEstimator):
    name = "exact_shapley"

    def __init__(self, max_active: int = MAX_EXACT_ACTIVE):
        self.max_active = max_active

    def explain(self, model, seq):
        return exact_shapley(model, seq, self.max_active)

    __call__ = explain
