import numpy as np
import pytest

from xaitext.models import CnnClassifier, LstmClassifier
from xaitext.synthetic import make_corpus
from xaitext.text import PAD_ID, TextVectorizer, split_dataset


class MaskLinearModel:
    """Black box whose P(1) is affine in the token-presence mask."""

    def __init__(self, weights, intercept, length=None):
        self.weights = np.asarray(weights, dtype=float)
        self.intercept = intercept

    def predict_proba(self, X):
        X = np.atleast_2d(X)
        p1 = self.intercept + (X != PAD_ID) @ self.weights
        return np.column_stack([1.0 - p1, p1])


class ConstantModel:
    def __init__(self, p1=0.7):
        self.p1 = p1

    def predict_proba(self, X):
        X = np.atleast_2d(X)
        return np.column_stack([np.full(len(X), 1.0 - self.p1), np.full(len(X), self.p1)])


@pytest.fixture(scope="session")
def desk_data():
    corpus = make_corpus(2000, seed=0)
    split = split_dataset(corpus, seed=42)
    vec = TextVectorizer(capacity=20000, max_length=64).fit(corpus)

    def enc(part):
        return vec.transform(part), np.array([e.label for e in part])

    return {
        "vectorizer": vec,
        "train": enc(split.train),
        "validation": enc(split.validation),
        "test": enc(split.test),
    }


@pytest.fixture(scope="session")
def trained_cnn(desk_data):
    vocab_size = desk_data["vectorizer"].vocabulary_.size
    model = CnnClassifier(vocab_size=vocab_size, epochs=10, random_state=7)
    return model.fit(*desk_data["train"], validation_data=desk_data["validation"])


@pytest.fixture(scope="session")
def trained_lstm(desk_data):
    vocab_size = desk_data["vectorizer"].vocabulary_.size
    model = LstmClassifier(vocab_size=vocab_size, epochs=10, random_state=7)
    return model.fit(*desk_data["train"], validation_data=desk_data["validation"])


def perturbed_model(kind, rng, vocab_size=40, scale=0.3, **params):
    """Randomly initialized model with every parameter jittered away from its init."""
    cls = CnnClassifier if kind == "cnn" else LstmClassifier
    model = cls(vocab_size=vocab_size, random_state=int(rng.integers(2**31)), **params).initialize()
    for name, arr in model.params_.items():
        arr += rng.normal(0.0, scale, arr.shape)
        if name == "embedding":
            arr[PAD_ID] = 0.0
    return model


def random_sequence(rng, length, vocab_size, n_active=None):
    n = int(rng.integers(1, length + 1)) if n_active is None else n_active
    seq = np.zeros(length, dtype=np.int64)
    seq[:n] = rng.integers(1, vocab_size, size=n)
    return seq


def random_triples(n, seed=0, length=16, vocab_size=40):
    """(model, sequence, attribution, k, m, mode) draws for the metric oracles."""
    rng = np.random.default_rng(seed)
    models = [perturbed_model(kind, rng, vocab_size=vocab_size, scale=0.6, kernel_size=3)
              if kind == "cnn" else perturbed_model(kind, rng, vocab_size=vocab_size, scale=0.6)
              for kind in ("cnn", "lstm") for _ in range(4)]
    for _ in range(n):
        model = models[int(rng.integers(len(models)))]
        seq = random_sequence(rng, length, vocab_size)
        if rng.random() < 0.5:
            # small integer scores force many ties in |a|
            attr = rng.integers(-2, 3, size=length).astype(float)
        else:
            attr = rng.normal(size=length)
        attr[seq == PAD_ID] = 0.0
        k = int(rng.integers(1, length + 4))
        m = int(rng.integers(1, length + 4))
        mode = "predicted" if rng.random() < 0.7 else "positive"
        yield model, seq, attr, k, m, mode
