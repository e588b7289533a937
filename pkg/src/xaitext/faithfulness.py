"""Perturbation-based faithfulness metrics for token attributions.

Tokens are ranked by ``|a_i|`` (ties: lower position first) and perturbed by
PAD substitution, which keeps the sequence length fixed. ``f`` is the model
probability selected by the class mode:

* ``"predicted"`` (default): probability of the label the model predicts for
  the unperturbed input, so a faithful ranking always lowers ``f``.
* ``"positive"``: ``P(1)`` for every instance.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .text import PAD_ID, active_positions, validate_sequences

logger = logging.getLogger(__name__)

NO_FLIP = None
CLASS_MODES = ("predicted", "positive")
CSV_HEADER = ("method", "delta_comp", "delta_suff", "aopc", "flip_at_k", "time_s")


@dataclass(frozen=True)
class TopKSet:
    indices: tuple
    k: int

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)


@dataclass
class EvalConfig:
    k: int = 20
    m: int | None = None
    n_instances: int = 60
    seed: int = 0
    class_mode: str = "predicted"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.m is not None and self.m < 1:
            raise ValueError("m must be >= 1")
        if self.n_instances < 1:
            raise ValueError("n_instances must be >= 1")
        if self.class_mode not in CLASS_MODES:
            raise ValueError(f"class_mode must be one of {CLASS_MODES}")

    @property
    def path_length(self) -> int:
        return self.k if self.m is None else self.m


@dataclass
class MetricsRecord:
    comp: float
    suff: float
    aopc: float
    flip_at_k: int | None
    explain_time_s: float | None
    instance_id: int | None = None
    method: str = ""

    def flip_value(self, k: int) -> int:
        """Flip@k for averaging: the no-flip sentinel counts as ``k + 1``."""
        return k + 1 if self.flip_at_k is NO_FLIP else self.flip_at_k

    def to_json(self) -> str:
        d = asdict(self)
        d["flipped"] = self.flip_at_k is not NO_FLIP
        return json.dumps(d, sort_keys=True)


@dataclass
class AggregateRow:
    method: str
    delta_comp: float
    delta_suff: float
    aopc: float
    flip_at_k: float
    time_s: float | None
    n_instances: int = 0
    n_excluded: int = 0


@dataclass
class EvaluationResult:
    records: list
    aggregate: AggregateRow
    failures: list = field(default_factory=list)


def _scores(attr) -> np.ndarray:
    return np.asarray(getattr(attr, "scores", attr), dtype=float)


def _seq(seq) -> np.ndarray:
    seq = np.asarray(seq)
    if seq.ndim != 1:
        raise ValueError("expected a single id sequence")
    return validate_sequences(seq)[0]


def top_k(attr, seq, k: int) -> TopKSet:
    """Active positions ordered by descending ``|a_i|``, ties by position; at most ``k``."""
    seq = _seq(seq)
    scores = _scores(attr)
    if scores.shape != seq.shape:
        raise ValueError(f"attribution length {scores.size} != sequence length {seq.size}")
    if k < 0:
        raise ValueError("k must be >= 0")
    idx = active_positions(seq)
    order = idx[np.lexsort((idx, -np.abs(scores[idx])))]
    return TopKSet(tuple(int(i) for i in order[:k]), k)


def _check_positions(seq, S) -> np.ndarray:
    S = np.asarray(list(S), dtype=np.int64)
    if S.size and (S.min() < 0 or S.max() >= len(seq)):
        raise IndexError(f"position out of range for length {len(seq)}")
    if S.size and np.any(seq[S] == PAD_ID):
        raise ValueError("cannot perturb a position that is already PAD")
    return S


def mask_remove(seq, S) -> np.ndarray:
    """``x \\ S``: positions in ``S`` replaced by PAD."""
    seq = _seq(seq)
    S = _check_positions(seq, S)
    out = seq.copy()
    out[S] = PAD_ID
    return out


def mask_keep(seq, S) -> np.ndarray:
    """``x | S``: every position outside ``S`` replaced by PAD."""
    seq = _seq(seq)
    S = _check_positions(seq, S)
    out = np.full_like(seq, PAD_ID)
    out[S] = seq[S]
    return out


def _class_probs(model, seqs, cls: int) -> np.ndarray:
    return model.predict_proba(np.asarray(seqs))[:, cls]


def _reference_class(p1: float, mode: str) -> int:
    if mode == "positive":
        return 1
    if mode == "predicted":
        return int(p1 >= 0.5)
    raise ValueError(f"unknown class mode {mode!r}")


def _evaluate(model, seqs, mode):
    """``f`` on a batch whose first row is the unperturbed input."""
    p1 = model.predict_proba(np.asarray(seqs))[:, 1]
    cls = _reference_class(p1[0], mode)
    return p1 if cls == 1 else 1.0 - p1


def comprehensiveness(model, seq, attr, k: int, mode: str = "predicted") -> float:
    seq = _seq(seq)
    S = top_k(attr, seq, k)
    f = _evaluate(model, [seq, mask_remove(seq, S)], mode)
    return float(f[0] - f[1])


def sufficiency(model, seq, attr, k: int, mode: str = "predicted") -> float:
    seq = _seq(seq)
    S = top_k(attr, seq, k)
    f = _evaluate(model, [seq, mask_keep(seq, S)], mode)
    return float(f[0] - f[1])


def removal_path(seq, attr, m: int) -> np.ndarray:
    """``x(0), ..., x(r)`` with ``r = min(m, n_active)``; ``x(i)`` lacks the top ``i`` tokens."""
    seq = _seq(seq)
    order = top_k(attr, seq, m).indices
    path = np.tile(seq, (len(order) + 1, 1))
    for i, pos in enumerate(order, start=1):
        path[i:, pos] = PAD_ID
    return path


def aopc(model, seq, attr, m: int, mode: str = "predicted") -> float:
    """Mean confidence drop along the removal path.

    When fewer than ``m`` tokens are active the path ends early and the mean
    is taken over the realized steps.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    path = removal_path(seq, attr, m)
    if len(path) == 1:
        return 0.0
    f = _evaluate(model, path, mode)
    return float(np.mean(f[0] - f[1:]))


def flip_at_k(model, seq, attr, k: int, mode: str = "predicted"):
    """Smallest ``i <= k`` whose removal path step changes the 0.5-threshold label.

    Returns :data:`NO_FLIP` (None) when no step within ``k`` flips. The label
    is always read from ``P(1)``, so ``mode`` does not change the result.
    """
    path = removal_path(seq, attr, k)
    labels = model.predict_proba(path)[:, 1] >= 0.5
    flips = np.flatnonzero(labels[1:] != labels[0])
    return int(flips[0]) + 1 if flips.size else NO_FLIP


def compute_metrics(model, seq, attr, cfg: EvalConfig, explain_time_s=None,
                    instance_id=None, method="") -> MetricsRecord:
    """All four metrics for one instance from a single batched model query."""
    seq = _seq(seq)
    k, m = cfg.k, cfg.path_length
    S = top_k(attr, seq, k)
    path = removal_path(seq, attr, max(k, m))
    batch = np.vstack([path, mask_remove(seq, S)[None], mask_keep(seq, S)[None]])
    p1 = model.predict_proba(batch)[:, 1]
    cls = _reference_class(p1[0], cfg.class_mode)
    f = p1 if cls == 1 else 1.0 - p1
    f_path, f_removed, f_kept = f[:len(path)], f[-2], f[-1]
    steps = min(m, len(path) - 1)
    aopc_value = float(np.mean(f_path[0] - f_path[1:steps + 1])) if steps else 0.0
    labels = p1[:min(k, len(path) - 1) + 1] >= 0.5
    flips = np.flatnonzero(labels[1:] != labels[0])
    return MetricsRecord(
        comp=float(f[0] - f_removed),
        suff=float(f[0] - f_kept),
        aopc=aopc_value,
        flip_at_k=int(flips[0]) + 1 if flips.size else NO_FLIP,
        explain_time_s=explain_time_s,
        instance_id=instance_id,
        method=method,
    )


def aggregate(records, k: int, method: str = "", n_excluded: int = 0) -> AggregateRow:
    if not records:
        raise ValueError("no successful records to aggregate")
    times = [r.explain_time_s for r in records]
    return AggregateRow(
        method=method or records[0].method,
        delta_comp=float(np.mean([r.comp for r in records])),
        delta_suff=float(np.mean([r.suff for r in records])),
        aopc=float(np.mean([r.aopc for r in records])),
        flip_at_k=float(np.mean([r.flip_value(k) for r in records])),
        time_s=None if any(t is None for t in times) else float(np.mean(times)),
        n_instances=len(records),
        n_excluded=n_excluded,
    )


def select_instances(n_available: int, n: int, seed: int = 0) -> np.ndarray:
    """Sorted, seeded sample of ``min(n, n_available)`` indices."""
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_available, size=min(n, n_available), replace=False))


def evaluate_explainer(model, instances, explainer, cfg: EvalConfig, instance_ids=None,
                       record_time: bool = True) -> EvaluationResult:
    """Explain every instance, score it, and average the scores.

    ``explainer`` is any object with ``explain(model, seq)`` (or a callable of
    the same signature) returning an attribution. Instances whose explanation
    raises are logged, excluded and counted.
    """
    explain = getattr(explainer, "explain", explainer)
    name = getattr(explainer, "name", getattr(explainer, "__name__", "explainer"))
    X = validate_sequences(instances)
    ids = list(range(len(X))) if instance_ids is None else [int(i) for i in instance_ids]
    records, failures = [], []
    for iid, seq in zip(ids, X):
        try:
            attr = explain(model, seq)
        except Exception as exc:  # noqa: BLE001 - one bad instance must not stop the run
            logger.warning("%s failed on instance %s: %s", name, iid, exc)
            failures.append((iid, f"{type(exc).__name__}: {exc}"))
            continue
        t = getattr(attr, "wall_time", None) if record_time else None
        records.append(compute_metrics(model, seq, attr, cfg, t, iid, name))
    if failures:
        logger.warning("%s: %d of %d instances excluded", name, len(failures), len(X))
    row = aggregate(records, cfg.k, name, len(failures))
    return EvaluationResult(records, row, failures)


def _fmt(value) -> str:
    return "" if value is None else f"{value:.6f}"


def aggregate_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([r.method, _fmt(r.delta_comp), _fmt(r.delta_suff), _fmt(r.aopc),
                         _fmt(r.flip_at_k), _fmt(r.time_s)])
    return buf.getvalue()


def write_aggregate_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(aggregate_csv(rows))


def write_records_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")
