"""Seeded generator for a small, linearly separable news-like corpus.

Each document is filler text with a few class keywords planted at random
positions, so a bag-of-words model separates the classes perfectly.
"""
from __future__ import annotations

import numpy as np

from .text import LabeledExample

FILLER = (
    "the of and to in a is that for on said with as was by at from it be "
    "have has are this an will its not but after year which their more about "
    "people been over who new two one also would were first last they into "
    "there other when time some than city government week could state "
    "country told report national three before million since most under "
    "while during between group public president house market according "
    "many percent second world years police party members local told early "
    "plan water school area former united later office family support "
    "health policy system service military court league team season center "
    "program community council election minister economy trade energy "
    "company business industry workers union board member project data"
).split()

TRUE_KEYWORDS = ("reuters", "spokesman", "officials", "ministry", "confirmed", "statement")
FAKE_KEYWORDS = ("shocking", "hoax", "exposed", "outrage", "secretly", "unbelievable")


def make_corpus(n: int = 600, seed: int = 0, min_words: int = 12, max_words: int = 48,
                keywords_per_doc: tuple[int, int] = (1, 3)) -> list[LabeledExample]:
    """Return ``n`` examples with labels alternating 1, 0, 1, ... (balanced).

    Filler words are drawn from a Zipf-like distribution over :data:`FILLER`.
    """
    rng = np.random.default_rng(seed)
    ranks = np.arange(1, len(FILLER) + 1, dtype=float)
    probs = 1.0 / ranks
    probs /= probs.sum()
    out = []
    for i in range(n):
        label = 1 if i % 2 == 0 else 0
        length = int(rng.integers(min_words, max_words + 1))
        words = [FILLER[j] for j in rng.choice(len(FILLER), size=length, p=probs)]
        keywords = TRUE_KEYWORDS if label == 1 else FAKE_KEYWORDS
        n_kw = int(rng.integers(keywords_per_doc[0], keywords_per_doc[1] + 1))
        for _ in range(n_kw):
            pos = int(rng.integers(0, len(words) + 1))
            words.insert(pos, keywords[int(rng.integers(len(keywords)))])
        text = " ".join(words)
        out.append(LabeledExample(text[0].upper() + text[1:] + ".", label))
    return out
