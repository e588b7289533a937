"""Single-file model checkpoints.

Layout (all integers little-endian)::

    magic        8 bytes   b"XTXCKPT\\x00"
    version      uint16
    arch tag     4 bytes   b"CNN " or b"LSTM"
    header size  uint32
    header       UTF-8 JSON: hyperparameters, vocab size, tensor names and shapes
    tensors      float32 little-endian, in header order
    crc32        uint32 over every preceding byte
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ._base import TrainingHistory

MAGIC = b"XTXCKPT\x00"
FORMAT_VERSION = 1
_TAGS = {"cnn": b"CNN ", "lstm": b"LSTM"}


class CheckpointError(ValueError):
    pass


class ChecksumError(CheckpointError):
    pass


class ArchitectureMismatchError(CheckpointError):
    pass


def _model_classes():
    from .cnn import CnnClassifier
    from .lstm import LstmClassifier
    return {"cnn": CnnClassifier, "lstm": LstmClassifier}


def to_bytes(model) -> bytes:
    params = model.params_
    for name, arr in params.items():
        if not np.array_equal(arr.astype(np.float32).astype(np.float64), arr):
            raise CheckpointError(f"parameter {name!r} is not float32-representable")
    header = {
        "hyperparameters": model.get_params(),
        "vocab_size": model.vocab_size_,
        "tensors": [[name, list(arr.shape)] for name, arr in params.items()],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = bytearray(MAGIC)
    body += struct.pack("<H", FORMAT_VERSION)
    body += _TAGS[model.kind]
    body += struct.pack("<I", len(header_bytes))
    body += header_bytes
    for arr in params.values():
        body += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    body += struct.pack("<I", zlib.crc32(body))
    return bytes(body)


def from_bytes(data: bytes, kind: str | None = None):
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a model checkpoint (bad magic bytes)")
    if len(data) < len(MAGIC) + 14:
        raise ChecksumError("checkpoint truncated")
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != crc:
        raise ChecksumError("checkpoint checksum mismatch (file truncated or corrupted)")
    pos = len(MAGIC)
    (version,) = struct.unpack_from("<H", data, pos)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    tag = data[pos + 2:pos + 6]
    stored = {v: k for k, v in _TAGS.items()}.get(tag)
    if stored is None:
        raise CheckpointError(f"unknown architecture tag {tag!r}")
    if kind is not None and kind != stored:
        raise ArchitectureMismatchError(f"checkpoint holds a {stored} model, not {kind}")
    (hsize,) = struct.unpack_from("<I", data, pos + 6)
    pos += 10
    header = json.loads(data[pos:pos + hsize].decode("utf-8"))
    pos += hsize
    model = _model_classes()[stored](**header["hyperparameters"])
    params = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
        params[name] = arr.astype(np.float64).reshape(shape)
        pos += 4 * count
    if pos != len(data) - 4:
        raise CheckpointError("checkpoint size does not match its header")
    model.params_ = params
    model.vocab_size_ = int(header["vocab_size"])
    model.classes_ = np.array([0, 1])
    model.history_ = TrainingHistory()
    return model


def save_model(model, path) -> None:
    Path(path).write_bytes(to_bytes(model))


def load_model(path, kind: str | None = None):
    """Load a checkpoint; ``kind`` ("cnn"/"lstm") asserts the architecture."""
    return from_bytes(Path(path).read_bytes(), kind=kind)
