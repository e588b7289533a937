"""Text ingestion, vocabulary construction and fixed-length id encoding.

Every downstream component (classifiers, explainers, faithfulness metrics)
consumes the same representation: an integer vector of exact length ``L``
with ``PAD = 0`` as a contiguous suffix and ``OOV = 1`` for unknown words.
"""
from __future__ import annotations

import csv
import json
import math
import re
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

PAD_ID = 0
OOV_ID = 1
PAD_TOKEN = "<PAD>"
OOV_TOKEN = "<OOV>"

VOCAB_FORMAT = "xaitext-vocabulary"
VOCAB_VERSION = 1

_BOUNDARY_PUNCT = re.compile(r"^[\W_]+|[\W_]+$")


class DatasetError(ValueError):
    """Raised when a labeled CSV file cannot be ingested."""


@dataclass(frozen=True)
class LabeledExample:
    text: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if not self.text.strip():
            raise ValueError("text is empty")


def load_csv(path) -> list[LabeledExample]:
    """Read a ``text,label`` CSV (UTF-8, RFC-4180 quoting).

    Row numbers in error messages count data rows from 1 (header excluded).
    All bad rows are collected before raising.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset not found: {path}")
    csv.field_size_limit(min(sys.maxsize, 2**31 - 1))
    examples = []
    bad = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in ("text", "label") if c not in header]
        if missing:
            raise DatasetError(f"{path}: missing column(s) {', '.join(missing)}")
        for row_no, row in enumerate(reader, start=1):
            text = row["text"] or ""
            raw_label = (row["label"] or "").strip()
            if not text.strip():
                bad.append(f"row {row_no}: empty text")
                continue
            if raw_label not in ("0", "1"):
                bad.append(f"row {row_no}: label {raw_label!r} is not 0 or 1")
                continue
            examples.append(LabeledExample(text, int(raw_label)))
    if bad:
        shown = "; ".join(bad[:20])
        more = f" (+{len(bad) - 20} more)" if len(bad) > 20 else ""
        raise DatasetError(f"{path}: {len(bad)} invalid row(s): {shown}{more}")
    return examples


def write_csv(examples: Iterable[LabeledExample], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["text", "label"])
        for ex in examples:
            writer.writerow([ex.text, ex.label])


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip punctuation at token boundaries.

    Inner punctuation survives (``"don't"`` stays one token); tokens that are
    pure punctuation disappear.

    >>> tokenize("The CAT sat.")
    ['the', 'cat', 'sat']
    """
    tokens = []
    for raw in text.lower().split():
        tok = _BOUNDARY_PUNCT.sub("", raw)
        if tok:
            tokens.append(tok)
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    """Frequency-ranked word index with reserved PAD and OOV ids."""

    token_to_id: dict
    capacity: int
    id_to_token: tuple = field(init=False, repr=False)

    def __post_init__(self):
        inverse = [PAD_TOKEN, OOV_TOKEN] + [None] * len(self.token_to_id)
        for word, idx in self.token_to_id.items():
            if not 2 <= idx < len(inverse) or inverse[idx] is not None:
                raise ValueError(f"invalid id {idx} for word {word!r}")
            inverse[idx] = word
        object.__setattr__(self, "id_to_token", tuple(inverse))

    def __len__(self):
        return len(self.id_to_token)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def to_json(self) -> str:
        payload = {
            "format": VOCAB_FORMAT,
            "version": VOCAB_VERSION,
            "pad_id": PAD_ID,
            "oov_id": OOV_ID,
            "pad_token": PAD_TOKEN,
            "oov_token": OOV_TOKEN,
            "capacity": self.capacity,
            "word_index": dict(sorted(self.token_to_id.items(), key=lambda kv: kv[1])),
        }
        return json.dumps(payload, ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        payload = json.loads(text)
        if payload.get("format") != VOCAB_FORMAT:
            raise ValueError("not a vocabulary file")
        if payload.get("version") != VOCAB_VERSION:
            raise ValueError(f"unsupported vocabulary version {payload.get('version')}")
        if payload.get("pad_id") != PAD_ID or payload.get("oov_id") != OOV_ID:
            raise ValueError("reserved ids do not match PAD=0, OOV=1")
        return cls({str(k): int(v) for k, v in payload["word_index"].items()},
                   int(payload["capacity"]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def build_vocabulary(corpus: Sequence, capacity: int) -> Vocabulary:
    """Keep the ``capacity`` most frequent words; ties go to the smaller word.

    ``corpus`` items may be :class:`LabeledExample` or raw strings.
    """
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    if not corpus:
        raise ValueError("corpus is empty")
    counts = Counter()
    for item in corpus:
        counts.update(tokenize(item.text if isinstance(item, LabeledExample) else item))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:capacity]
    return Vocabulary({w: i + 2 for i, (w, _) in enumerate(ranked)}, capacity)


def encode(text: str, vocab: Vocabulary, length: int) -> np.ndarray:
    """Map ``text`` to exactly ``length`` ids: tail-truncate, post-pad."""
    if length < 1:
        raise ValueError("length must be >= 1")
    ids = np.full(length, PAD_ID, dtype=np.int64)
    tokens = tokenize(text)[:length]
    lookup = vocab.token_to_id
    ids[: len(tokens)] = [lookup.get(t, OOV_ID) for t in tokens]
    return ids


def decode(seq, vocab: Vocabulary) -> list[str]:
    seq = np.asarray(seq)
    if seq.size and (seq.min() < 0 or seq.max() >= vocab.size):
        raise ValueError(f"id outside vocabulary range [0, {vocab.size})")
    return [vocab.id_to_token[i] for i in seq.tolist() if i != PAD_ID]


def validate_sequences(X, vocab_size: int | None = None) -> np.ndarray:
    """Return ``X`` as a 2-D int64 id array, checking the id range."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a 1-D or 2-D id array, got shape {X.shape}")
    if X.size and not np.issubdtype(X.dtype, np.integer):
        if not np.all(np.equal(np.mod(X, 1), 0)):
            raise ValueError("token ids must be integers")
    X = X.astype(np.int64, copy=False)
    if X.size and X.min() < 0:
        raise ValueError("negative token id")
    if vocab_size is not None and X.size and X.max() >= vocab_size:
        raise ValueError(f"token id {X.max()} out of range for vocabulary of {vocab_size}")
    return X


def active_positions(seq) -> np.ndarray:
    """Indices of the non-PAD positions of a single sequence."""
    return np.flatnonzero(np.asarray(seq) != PAD_ID)


@dataclass(frozen=True)
class DatasetSplit:
    train: list
    validation: list
    test: list
    seed: int
    indices: dict = field(default_factory=dict)


def split_sizes(n: int, ratios=(0.63, 0.07, 0.30)) -> tuple[int, int, int]:
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)!r}")
    # the epsilon keeps 100 * 0.29 from flooring to 28
    n_train = int(math.floor(n * ratios[0] + 1e-9))
    n_val = int(math.floor(n * ratios[1] + 1e-9))
    return n_train, n_val, n - n_train - n_val


def split_dataset(corpus: Sequence, ratios=(0.63, 0.07, 0.30), seed: int = 42) -> DatasetSplit:
    """Seeded shuffle followed by a contiguous train/validation/test cut."""
    n_train, n_val, _ = split_sizes(len(corpus), ratios)
    order = np.random.default_rng(seed).permutation(len(corpus))
    parts = order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:]
    train, val, test = ([corpus[i] for i in part] for part in parts)
    indices = {name: part.tolist() for name, part in zip(("train", "validation", "test"), parts)}
    return DatasetSplit(train, val, test, seed, indices)


class TextVectorizer(TransformerMixin, BaseEstimator):
    """Fit a capped vocabulary and turn texts into ``(n, max_length)`` id arrays.

    Parameters
    ----------
    capacity : int
        Number of real words kept in the dictionary.
    max_length : int
        Output sequence length ``L``.
    """

    def __init__(self, capacity: int = 20000, max_length: int = 750):
        self.capacity = capacity
        self.max_length = max_length

    def fit(self, X, y=None):
        texts = [x.text if isinstance(x, LabeledExample) else x for x in X]
        self.vocabulary_ = build_vocabulary(texts, self.capacity)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "vocabulary_")
        texts = [x.text if isinstance(x, LabeledExample) else x for x in X]
        out = np.zeros((len(texts), self.max_length), dtype=np.int64)
        for i, text in enumerate(texts):
            out[i] = encode(text, self.vocabulary_, self.max_length)
        return out

    def inverse_transform(self, X) -> list[list[str]]:
        check_is_fitted(self, "vocabulary_")
        return [decode(row, self.vocabulary_) for row in validate_sequences(X)]

    @classmethod
    def from_vocabulary(cls, vocab: Vocabulary, max_length: int) -> "TextVectorizer":
        vec = cls(capacity=vocab.capacity, max_length=max_length)
        vec.vocabulary_ = vocab
        return vec
