from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..text import PAD_ID, active_positions, decode, validate_sequences


@dataclass
class AttributionVector:
    """Per-position scores aligned with the explained sequence.

    ``scores[j]`` belongs to the token at position ``j``; PAD positions hold 0.
    """

    scores: np.ndarray
    method: str
    explained_class: int = 1
    wall_time: float = 0.0
    seed: int | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if self.scores.ndim != 1:
            raise ValueError("scores must be a vector")
        if not np.isfinite(self.scores).all():
            raise FloatingPointError(f"{self.method}: non-finite attribution scores")

    def __len__(self):
        return len(self.scores)

    def to_record(self, seq, vocab=None, model_id: str = "", include_time: bool = True) -> dict:
        seq = np.asarray(seq)
        return {
            "method": self.method,
            "model_id": model_id,
            "sequence": seq.tolist(),
            "tokens": decode(seq, vocab) if vocab is not None else None,
            "scores": self.scores.tolist(),
            "explained_class": self.explained_class,
            "seed": self.seed,
            "wall_time_s": self.wall_time if include_time else None,
            "config": self.config,
        }


def as_sequence(seq) -> np.ndarray:
    seq = np.asarray(seq)
    if seq.ndim != 1:
        raise ValueError(f"expected a single id sequence, got shape {seq.shape}")
    return validate_sequences(seq)[0]


def align_to_sequence(word_scores, seq) -> np.ndarray:
    """Spread scores given in decode order onto the non-PAD positions of ``seq``."""
    seq = as_sequence(seq)
    idx = active_positions(seq)
    word_scores = np.asarray(word_scores, dtype=float)
    if word_scores.shape != (len(idx),):
        raise ValueError(f"got {word_scores.size} scores for {len(idx)} non-PAD positions")
    out = np.zeros(len(seq))
    out[idx] = word_scores
    return out


def masked_variants(seq, positions, keep) -> np.ndarray:
    """Copies of ``seq`` where ``positions[i]`` is PAD-substituted wherever ``keep[:, i]`` is False."""
    keep = np.asarray(keep, dtype=bool)
    out = np.tile(seq, (len(keep), 1))
    out[:, positions] = np.where(keep, seq[positions], PAD_ID)
    return out


def positive_proba(model, seqs, chunk: int = 4096) -> np.ndarray:
    seqs = np.asarray(seqs)
    return np.concatenate([model.predict_proba(seqs[i:i + chunk])[:, 1]
                           for i in range(0, len(seqs), chunk)])


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def finish(scores, seq, method, timer, seed=None, config=None) -> AttributionVector:
    scores = np.array(scores, dtype=float)
    scores[seq == PAD_ID] = 0.0
    return AttributionVector(scores, method, 1, timer.elapsed, seed, dict(config or {}))
