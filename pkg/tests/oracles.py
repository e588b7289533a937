"""Deliberately naive reference implementations used as test oracles.

Nothing here imports the code under test beyond the model's predict_proba.
"""
import itertools
from math import factorial

import numpy as np


def p_of(model, seq, cls):
    return model.predict_proba(np.array([seq]))[0, cls]


def naive_ranking(scores, seq):
    active = [i for i in range(len(seq)) if seq[i] != 0]
    return sorted(active, key=lambda i: (-abs(scores[i]), i))


def naive_class(model, seq, mode):
    if mode == "positive":
        return 1
    return 1 if p_of(model, seq, 1) >= 0.5 else 0


def naive_comp(model, seq, scores, k, mode):
    seq = list(seq)
    S = naive_ranking(scores, seq)[:k]
    removed = [0 if i in S else t for i, t in enumerate(seq)]
    c = naive_class(model, seq, mode)
    return p_of(model, seq, c) - p_of(model, removed, c)


def naive_suff(model, seq, scores, k, mode):
    seq = list(seq)
    S = naive_ranking(scores, seq)[:k]
    kept = [t if i in S else 0 for i, t in enumerate(seq)]
    c = naive_class(model, seq, mode)
    return p_of(model, seq, c) - p_of(model, kept, c)


def naive_aopc(model, seq, scores, m, mode):
    seq = list(seq)
    ranking = naive_ranking(scores, seq)
    c = naive_class(model, seq, mode)
    p0 = p_of(model, seq, c)
    steps = min(m, len(ranking))
    if steps == 0:
        return 0.0
    drops = []
    for i in range(1, steps + 1):
        # rebuild x(i) from scratch every time
        gone = set(ranking[:i])
        xi = [0 if j in gone else t for j, t in enumerate(seq)]
        drops.append(p0 - p_of(model, xi, c))
    return float(np.mean(drops))


def naive_flip(model, seq, scores, k):
    seq = list(seq)
    ranking = naive_ranking(scores, seq)
    base = p_of(model, seq, 1) >= 0.5
    for i in range(1, min(k, len(ranking)) + 1):
        gone = set(ranking[:i])
        xi = [0 if j in gone else t for j, t in enumerate(seq)]
        if (p_of(model, xi, 1) >= 0.5) != base:
            return i
    return None


def brute_force_shapley(value, n):
    """Shapley values of ``value(frozenset)`` over players 0..n-1 by full enumeration."""
    phi = [0.0] * n
    for j in range(n):
        others = [i for i in range(n) if i != j]
        for r in range(n):
            for S in itertools.combinations(others, r):
                S = frozenset(S)
                w = factorial(len(S)) * factorial(n - len(S) - 1) / factorial(n)
                phi[j] += w * (value(S | {j}) - value(S))
    return phi


def central_difference(f, x, index, h=1e-4):
    old = x[index]
    x[index] = old + h
    up = f()
    x[index] = old - h
    down = f()
    x[index] = old
    return (up - down) / (2 * h)
