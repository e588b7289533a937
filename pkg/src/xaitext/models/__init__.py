from ._base import (
    Adam,
    DivergenceError,
    EmbeddingClassifier,
    TrainConfig,
    TrainingHistory,
    bce_loss,
)
from .checkpoint import (
    ArchitectureMismatchError,
    CheckpointError,
    ChecksumError,
    load_model,
    save_model,
)
from .cnn import CnnClassifier
from .lstm import LstmClassifier


def make_model(kind: str, **params):
    classes = {"cnn": CnnClassifier, "lstm": LstmClassifier}
    if kind not in classes:
        raise ValueError(f"unknown model kind {kind!r}; expected cnn or lstm")
    return classes[kind](**params)


def train(model, split, config: TrainConfig):
    """Fit ``model`` on an encoded :class:`~xaitext.text.DatasetSplit`.

    ``split.train`` / ``split.validation`` hold ``(ids, label)`` pairs.
    Returns the fitted model and its history.
    """
    import numpy as np

    X = np.array([ids for ids, _ in split.train])
    y = np.array([label for _, label in split.train])
    val = None
    if split.validation:
        val = (np.array([ids for ids, _ in split.validation]),
               np.array([label for _, label in split.validation]))
    model.set_params(learning_rate=config.learning_rate, batch_size=config.batch_size,
                     epochs=config.epochs, random_state=config.seed, beta1=config.beta1,
                     beta2=config.beta2, adam_epsilon=config.epsilon)
    model.fit(X, y, validation_data=val)
    return model, model.history_


__all__ = [
    "Adam", "ArchitectureMismatchError", "CheckpointError", "ChecksumError",
    "CnnClassifier", "DivergenceError", "EmbeddingClassifier", "LstmClassifier",
    "TrainConfig", "TrainingHistory", "bce_loss", "load_model", "make_model",
    "save_model", "train",
]
