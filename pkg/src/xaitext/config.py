"""Run configuration: one flat TOML document, validated before any work starts."""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: str = "synthetic"
    synthetic_size: int = 2000
    vocab_capacity: int = 20000
    max_length: int = 64
    model: str = "cnn"
    embedding_dim: int = 16
    filters: int = 16
    kernel_size: int = 5
    conv_activation: str = "relu"
    pooling: str = "masked"
    cnn_dropout: float = 0.5
    hidden_size: int = 16
    lstm_dropout: float = 0.2
    recurrent_dropout: float = 0.2
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    methods: list = field(default_factory=lambda: ["ig", "shap", "lime"])
    ig_steps: int = 50
    shap_coalitions: int = 100
    lime_samples: int = 1000
    lime_top_k: int = 20
    lime_kernel_width: float = 0.0
    lime_alpha: float = 1e-3
    eval_k: int = 20
    eval_m: int = 0
    n_instances: int = 60
    class_mode: str = "predicted"
    instances: str = "2"
    out: str = "runs/xaitext"
    seed: int = 42
    record_timing: bool = True

    def validate(self) -> "RunConfig":
        positive = ("synthetic_size", "vocab_capacity", "max_length", "embedding_dim", "filters",
                    "kernel_size", "hidden_size", "batch_size", "ig_steps", "eval_k", "n_instances",
                    "lime_top_k")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epochs < 0 or self.eval_m < 0:
            raise ConfigError("epochs and eval_m must be >= 0")
        if self.shap_coalitions < 2:
            raise ConfigError("shap_coalitions must be >= 2")
        if self.lime_samples < 10:
            raise ConfigError("lime_samples must be >= 10")
        if self.learning_rate < 0 or self.lime_alpha < 0 or self.lime_kernel_width < 0:
            raise ConfigError("learning_rate, lime_alpha and lime_kernel_width must be >= 0")
        for name in ("cnn_dropout", "lstm_dropout", "recurrent_dropout"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must be in [0, 1)")
        choices = {"model": ("cnn", "lstm"), "conv_activation": ("relu", "linear"),
                   "pooling": ("masked", "mean"), "class_mode": ("predicted", "positive")}
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {', '.join(allowed)}")
        if not self.methods:
            raise ConfigError("methods is empty")
        bad = [m for m in self.methods if m not in ("ig", "shap", "lime")]
        if bad:
            raise ConfigError(f"unknown method(s): {', '.join(bad)}")
        if self.model == "cnn" and self.kernel_size > self.max_length:
            raise ConfigError("kernel_size exceeds max_length")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        parse_instances(self.instances)
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, value):
    kind = _TYPES[name]
    if kind == "bool":
        if isinstance(value, bool):
            return value
    elif kind == "int":
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif kind == "float":
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif kind == "str":
        if isinstance(value, str):
            return value
        if name == "instances" and isinstance(value, int):
            return str(value)
    elif kind == "list":
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        if isinstance(value, list) and all(isinstance(v, str) for v in value):
            return list(value)
    raise ConfigError(f"{name}: expected {kind}, got {type(value).__name__} {value!r}")


def parse_instances(spec: str):
    """``"5"`` -> 5 (first five test instances); ``"3,17"`` -> [3, 17] (example ids)."""
    spec = str(spec).strip()
    try:
        if "," in spec or spec.startswith("["):
            ids = [int(s) for s in spec.strip("[]").split(",") if s.strip()]
            if not ids or min(ids) < 0:
                raise ValueError
            return ids
        n = int(spec)
    except ValueError:
        raise ConfigError(f"instances must be a count or a comma-separated id list, got {spec!r}") from None
    if n < 1:
        raise ConfigError("instances count must be >= 1")
    return n


def load_config(path=None, **overrides) -> RunConfig:
    """Read a TOML file (optional), apply non-None overrides, validate.

    A relative ``dataset`` path in the file is resolved against the file's
    directory.
    """
    values = {}
    if path is not None:
        path = Path(path)
        try:
            values = tomllib.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        nested = [k for k, v in values.items() if isinstance(v, dict)]
        if nested:
            raise ConfigError(f"config must be flat; found table(s) {', '.join(nested)}")
        ds = values.get("dataset")
        if isinstance(ds, str) and ds != "synthetic" and not Path(ds).is_absolute():
            values["dataset"] = str(path.parent / ds)
    values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(values) - set(_TYPES))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    return cfg.validate()


def derive_seed(master: int, component: str) -> int:
    """Stable per-component seed: adding a component never shifts the others."""
    digest = hashlib.sha256(f"{master}:{component}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1
