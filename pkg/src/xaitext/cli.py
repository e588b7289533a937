"""``xaitext prepare|train|explain|eval`` -- the end-to-end workflow.

Every command reads the same flat TOML config; each writes under the run's
output directory and updates ``files.json`` with the artifacts it produced.
Exit codes: 0 success, 1 internal failure, 2 user or config error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attribution import make_explainer
from .config import ConfigError, RunConfig, derive_seed, load_config, parse_instances
from .faithfulness import (
    EvalConfig,
    evaluate_explainer,
    select_instances,
    write_aggregate_csv,
    write_records_jsonl,
)
from .models import CheckpointError, load_model, make_model
from .report import render_heatmap, render_metrics_table
from .synthetic import make_corpus
from .text import DatasetError, TextVectorizer, Vocabulary, load_csv, split_dataset, write_csv

logger = logging.getLogger("xaitext")


class StageError(Exception):
    def __init__(self, stage: str, message: str, code: int = 2):
        super().__init__(message)
        self.stage = stage
        self.code = code


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _record_outputs(out: Path, produced) -> None:
    index = out / "files.json"
    files = set(json.loads(index.read_text())["files"]) if index.exists() else set()
    files.update(str(Path(p).relative_to(out)) for p in produced)
    _write_json(index, {"files": sorted(files)})


def _corpus(cfg: RunConfig, out: Path):
    if cfg.dataset == "synthetic":
        path = out / "corpus.csv"
        if not path.exists():
            raise StageError("load", f"{path} missing; run `prepare` first")
    else:
        path = Path(cfg.dataset)
    try:
        return load_csv(path), path
    except (FileNotFoundError, DatasetError) as exc:
        raise StageError("load", str(exc)) from None


def _model_dir(cfg: RunConfig, out: Path) -> Path:
    d = out / cfg.model
    d.mkdir(parents=True, exist_ok=True)
    return d


def _encoded_partitions(cfg: RunConfig, out: Path):
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise StageError("load", f"{manifest_path} missing; run `prepare` first")
    manifest = json.loads(manifest_path.read_text())
    corpus, _ = _corpus(cfg, out)
    vocab = Vocabulary.load(out / "vocab.json")
    vec = TextVectorizer.from_vocabulary(vocab, manifest["max_length"])
    parts = {}
    for name, ids in manifest["split"].items():
        examples = [corpus[i] for i in ids]
        X = vec.transform(examples) if examples else np.zeros((0, vec.max_length), dtype=np.int64)
        parts[name] = (np.asarray(ids, dtype=np.int64), X, np.array([e.label for e in examples]))
    return vocab, parts


def _build_model(cfg: RunConfig, vocab_size: int):
    common = dict(vocab_size=vocab_size, embedding_dim=cfg.embedding_dim, epochs=cfg.epochs,
                  batch_size=cfg.batch_size, learning_rate=cfg.learning_rate,
                  random_state=derive_seed(cfg.seed, "model"))
    if cfg.model == "cnn":
        return make_model("cnn", filters=cfg.filters, kernel_size=cfg.kernel_size,
                          activation=cfg.conv_activation, pooling=cfg.pooling,
                          dropout=cfg.cnn_dropout, **common)
    return make_model("lstm", hidden_size=cfg.hidden_size, dropout=cfg.lstm_dropout,
                      recurrent_dropout=cfg.recurrent_dropout, **common)


def _load_checkpoint(cfg: RunConfig, out: Path):
    path = out / cfg.model / "model.ckpt"
    if not path.exists():
        raise StageError("load", f"{path} missing; run `train` first")
    try:
        return load_model(path, kind=cfg.model)
    except CheckpointError as exc:
        raise StageError("load", f"{path}: {exc}") from None


def _explainers(cfg: RunConfig, methods):
    params = {
        "ig": dict(steps=cfg.ig_steps),
        "shap": dict(n_coalitions=cfg.shap_coalitions, random_state=derive_seed(cfg.seed, "shap")),
        "lime": dict(n_samples=cfg.lime_samples, top_k=cfg.lime_top_k,
                     kernel_width=cfg.lime_kernel_width or None, alpha=cfg.lime_alpha,
                     random_state=derive_seed(cfg.seed, "lime")),
    }
    return [make_explainer(m, **params[m]) for m in methods]


def _select(spec, test_ids):
    sel = parse_instances(spec)
    if isinstance(sel, int):
        return list(range(min(sel, len(test_ids))))
    where = {int(e): i for i, e in enumerate(test_ids)}
    missing = [i for i in sel if i not in where]
    if missing:
        raise ConfigError(f"example id(s) {missing} are not in the test partition")
    return [where[i] for i in sel]


def cmd_prepare(cfg: RunConfig, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    produced = []
    if cfg.dataset == "synthetic":
        corpus_path = out / "corpus.csv"
        write_csv(make_corpus(cfg.synthetic_size, seed=derive_seed(cfg.seed, "synthetic")), corpus_path)
        produced.append(corpus_path)
    corpus, source = _corpus(cfg, out)
    try:
        vectorizer = TextVectorizer(cfg.vocab_capacity, cfg.max_length).fit(corpus)
    except ValueError as exc:
        raise StageError("vocabulary", str(exc)) from None
    split = split_dataset(list(range(len(corpus))), seed=derive_seed(cfg.seed, "split"))
    vocab_path = out / "vocab.json"
    vectorizer.vocabulary_.save(vocab_path)
    manifest = {
        "config_fingerprint": cfg.fingerprint(),
        "dataset": "synthetic" if cfg.dataset == "synthetic" else str(source),
        "n_examples": len(corpus),
        "max_length": cfg.max_length,
        "vocab_size": vectorizer.vocabulary_.size,
        "split_seed": split.seed,
        "sizes": {k: len(v) for k, v in split.indices.items()},
        "split": split.indices,
    }
    _write_json(out / "manifest.json", manifest)
    produced += [vocab_path, out / "manifest.json"]
    _record_outputs(out, produced)
    print(f"prepared {len(corpus)} examples: " +
          ", ".join(f"{k}={v}" for k, v in manifest["sizes"].items()))


def cmd_train(cfg: RunConfig, out: Path):
    vocab, parts = _encoded_partitions(cfg, out)
    _, X_tr, y_tr = parts["train"]
    _, X_val, y_val = parts["validation"]
    _, X_te, y_te = parts["test"]
    if len(X_tr) == 0:
        raise StageError("train", "training partition is empty")
    model = _build_model(cfg, vocab.size)
    val = (X_val, y_val) if len(X_val) else None
    if cfg.epochs == 0:
        model.initialize()
    else:
        model.fit(X_tr, y_tr, validation_data=val)
    # test data is touched only after training has finished
    test_acc, test_loss = model.evaluate(X_te, y_te) if len(X_te) else (None, None)
    d = _model_dir(cfg, out)
    model.save(d / "model.ckpt")
    history = model.history_.to_dict()
    history.update(test_accuracy=test_acc, test_loss=test_loss, model=cfg.model)
    _write_json(d / "history.json", history)
    _record_outputs(out, [d / "model.ckpt", d / "history.json"])
    print(f"{cfg.model}: test accuracy {test_acc:.4f}, test loss {test_loss:.4f}"
          if test_acc is not None else f"{cfg.model}: trained (no test partition)")


def cmd_explain(cfg: RunConfig, out: Path):
    vocab, parts = _encoded_partitions(cfg, out)
    model = _load_checkpoint(cfg, out)
    test_ids, X_te, _ = parts["test"]
    rows = _select(cfg.instances, test_ids)
    d = _model_dir(cfg, out) / "explanations"
    d.mkdir(exist_ok=True)
    produced, failed = [], 0
    for row in rows:
        seq, eid = X_te[row], int(test_ids[row])
        for explainer in _explainers(cfg, cfg.methods):
            try:
                attr = explainer.explain(model, seq)
            except Exception as exc:  # noqa: BLE001 - keep going, report at the end
                logger.error("%s failed on example %d: %s", explainer.name, eid, exc)
                failed += 1
                continue
            record = attr.to_record(seq, vocab, model_id=cfg.model, include_time=cfg.record_timing)
            record["example_id"] = eid
            stem = d / f"example{eid}_{explainer.name}"
            _write_json(stem.with_suffix(".json"), record)
            render_heatmap(seq, attr, vocab, stem.with_suffix(".html"),
                           caption=f"{explainer.name.upper()} / {cfg.model.upper()} / example {eid}")
            produced += [stem.with_suffix(".json"), stem.with_suffix(".html")]
    _record_outputs(out, produced)
    print(f"wrote {len(produced) // 2} explanation(s) to {d}" + (f"; {failed} failed" if failed else ""))


def cmd_eval(cfg: RunConfig, out: Path, instances=None):
    _, parts = _encoded_partitions(cfg, out)
    model = _load_checkpoint(cfg, out)
    test_ids, X_te, _ = parts["test"]
    if len(X_te) == 0:
        raise StageError("eval", "test partition is empty")
    if instances is not None:
        rows = np.asarray(_select(instances, test_ids))
    else:
        rows = select_instances(len(X_te), cfg.n_instances, derive_seed(cfg.seed, "eval"))
    ecfg = EvalConfig(k=cfg.eval_k, m=cfg.eval_m or None, n_instances=len(rows),
                      seed=derive_seed(cfg.seed, "eval"), class_mode=cfg.class_mode)
    d = _model_dir(cfg, out)
    records, table = [], []
    for explainer in _explainers(cfg, cfg.methods):
        try:
            result = evaluate_explainer(model, X_te[rows], explainer, ecfg,
                                        instance_ids=test_ids[rows], record_time=cfg.record_timing)
        except ValueError as exc:
            raise StageError("eval", f"{explainer.name}: {exc}", code=1) from None
        records += result.records
        table.append(result.aggregate)
    write_records_jsonl(records, d / "records.jsonl")
    csv_path = d / f"metrics_{cfg.model}.csv"
    write_aggregate_csv(table, csv_path)
    md_path = d / f"metrics_{cfg.model}.md"
    md_path.write_text(render_metrics_table(table, "markdown"), encoding="utf-8")
    _record_outputs(out, [d / "records.jsonl", csv_path, md_path])
    print(render_metrics_table(table, "markdown"), end="")


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "explain": cmd_explain, "eval": cmd_eval}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xaitext", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="flat TOML run configuration")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--model", choices=("cnn", "lstm"))
        p.add_argument("--methods", help="comma-separated subset of ig,shap,lime")
        p.add_argument("--instances", help="count of test instances or comma-separated example ids")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    stage = "config"
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out, model=args.model,
                          methods=args.methods,
                          instances=args.instances if args.command == "explain" else None)
        stage = args.command
        out = Path(cfg.out)
        if args.command == "eval":
            cmd_eval(cfg, out, instances=args.instances)
        else:
            COMMANDS[args.command](cfg, out)
    except StageError as exc:
        print(f"xaitext: error [{exc.stage}]: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, CheckpointError) as exc:
        print(f"xaitext: error [{stage}]: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.debug("internal failure", exc_info=True)
        print(f"xaitext: internal error [{stage}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
