"""Command-line entry point wiring the pipeline stages together.

Every subcommand resolves its configuration as defaults < config file <
explicit flags, creates a fresh timestamped run directory under --out,
writes the fully resolved configuration next to its outputs, and prints one
JSON line naming the run directory and key artifacts. Exit codes: 0 success,
1 validation/runtime failure, 2 unknown flag or config key.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from pathlib import Path

import numpy as np

from . import corpus, training
from .annotation import AnnotationService, AnnotationStore, agreement_report
from .embeddings import EmbeddingTable, train_skipgram
from .metrics import full_report
from .model import RacConfig, RacModel, predict as model_predict
from .numerics import Rng, load_arrays, save_arrays
from .training import TrainConfig, augment, train


class CliError(ValueError):
    pass


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON file with flag defaults")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("runs"), help="parent directory for run outputs")


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--d", type=int, default=300)
    parser.add_argument("--n-x", type=int, default=4096)
    parser.add_argument("--n-t", type=int, default=36)
    parser.add_argument("--d-ff", type=int, default=1024)
    parser.add_argument("--sam-layers", type=int, default=4)
    parser.add_argument("--conv-kernel", type=int, default=10)
    parser.add_argument("--reader-conv-layers", type=int, default=2)
    parser.add_argument("--dropout", type=float, default=0.1)
    parser.add_argument("--use-code-titles", action=argparse.BooleanOptionalAction, default=True)
    parser.add_argument("--output-bias", action=argparse.BooleanOptionalAction, default=True)
    parser.add_argument("--mask-pad", action=argparse.BooleanOptionalAction, default=False)


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--learning-rate", type=float, default=8e-5)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--patience", type=int, default=3)
    parser.add_argument("--swa-interval-epochs", type=int, default=5)
    parser.add_argument("--augment-fold", type=int, default=3)
    parser.add_argument("--max-epochs", type=int, default=50)
    parser.add_argument("--swa-from-first-epoch", action=argparse.BooleanOptionalAction, default=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a dataset with planted trigger phrases")
    _add_common(p)
    p.add_argument("--docs", type=int, default=300)
    p.add_argument("--codes", type=int, default=50)
    p.add_argument("--vocab-size", type=int, default=400)
    p.add_argument("--min-labels", type=int, default=5)
    p.add_argument("--max-labels", type=int, default=8)
    p.add_argument("--noise-sentences", type=int, default=5)
    p.add_argument("--train-count", type=int, default=None)
    p.add_argument("--val-count", type=int, default=None)
    p.add_argument("--test-count", type=int, default=None)

    p = sub.add_parser("preprocess", help="build the vocabulary from the training split")
    _add_common(p)
    p.add_argument("--notes", type=Path, required=True)
    p.add_argument("--codes", type=Path, required=True)
    p.add_argument("--splits", type=Path, required=True)
    p.add_argument("--min-count", type=int, default=10)

    p = sub.add_parser("pretrain-embeddings", help="skip-gram pretraining on the training split")
    _add_common(p)
    p.add_argument("--notes", type=Path, required=True)
    p.add_argument("--codes", type=Path, required=True)
    p.add_argument("--splits", type=Path, required=True)
    p.add_argument("--vocab", type=Path, required=True)
    p.add_argument("--d", type=int, default=300)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.025)
    p.add_argument("--min-lr", type=float, default=0.0001)

    p = sub.add_parser("augment", help="write sentence-permuted copies of the training split")
    _add_common(p)
    p.add_argument("--notes", type=Path, required=True)
    p.add_argument("--codes", type=Path, required=True)
    p.add_argument("--splits", type=Path, required=True)
    p.add_argument("--fold", type=int, default=3)

    p = sub.add_parser("train", help="train the model")
    _add_common(p)
    p.add_argument("--notes", type=Path, required=True)
    p.add_argument("--codes", type=Path, required=True)
    p.add_argument("--splits", type=Path, required=True)
    p.add_argument("--vocab", type=Path, required=True)
    p.add_argument("--embeddings", type=Path, default=None, help="pretrained embedding container")
    _add_model_flags(p)
    _add_train_flags(p)

    p = sub.add_parser("evaluate", help="score a split and print the ranking report")
    _add_common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--notes", type=Path, required=True)
    p.add_argument("--codes", type=Path, required=True)
    p.add_argument("--splits", type=Path, required=True)
    p.add_argument("--vocab", type=Path, required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("predict", help="write a score matrix (and optional attention positions)")
    _add_common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--notes", type=Path, required=True)
    p.add_argument("--codes", type=Path, required=True)
    p.add_argument("--vocab", type=Path, required=True)
    p.add_argument("--attention-top-k", type=int, default=0,
                   help="if > 0, also write top-k attended positions for the top-scored codes")
    p.add_argument("--attention-top-codes", type=int, default=8)

    p = sub.add_parser("serve", help="run the annotation server")
    _add_common(p)
    p.add_argument("--notes", type=Path, required=True)
    p.add_argument("--codes", type=Path, required=True)
    p.add_argument("--annotations-log", type=Path, required=True)
    p.add_argument("--sample-size", type=int, default=None)
    p.add_argument("--predictions", type=Path, default=None)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--frontend", type=Path, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    p = sub.add_parser("compare", help="offline agreement report from annotation files")
    _add_common(p)
    p.add_argument("--annotations", type=Path, action="append", required=True,
                   help="annotation JSONL file; repeat per annotator file")
    p.add_argument("--notes", type=Path, required=True, help="notes file holding the reference codes")
    p.add_argument("--codes", type=Path, required=True)
    p.add_argument("--predictions", type=Path, default=None)
    p.add_argument("--threshold", type=float, default=0.5)

    return parser


def _explicit_dests(parser: argparse.ArgumentParser, argv: list[str]) -> set[str]:
    """Destinations of flags literally present on the command line."""
    tokens = {t.split("=", 1)[0] for t in argv if t.startswith("--")}
    if not argv or parser._subparsers is None:
        return set()
    subparser = parser._subparsers._group_actions[0].choices.get(argv[0])
    if subparser is None:
        return set()
    explicit = set()
    for action in subparser._actions:
        if any(opt in tokens for opt in action.option_strings):
            explicit.add(action.dest)
    return explicit


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """defaults < config file < explicit flags; unknown config keys exit 2."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    try:
        overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"--config {args.config}: {exc}")
    if not isinstance(overrides, dict):
        parser.error(f"--config {args.config}: expected a JSON object")

    explicit = _explicit_dests(parser, argv)
    known = set(vars(args))
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest not in known or dest == "config":
            parser.exit(2, f"unknown config key {key!r}\n")
        if dest not in explicit:
            current = getattr(args, dest)
            if isinstance(current, Path) and isinstance(value, str):
                value = Path(value)
            setattr(args, dest, value)
    return args


def _make_run_dir(out_root: Path, command: str) -> Path:
    out_root.mkdir(parents=True, exist_ok=True)
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%d-%H%M%S")
    base = out_root / f"{command}-{stamp}"
    run_dir = base
    counter = 1
    while run_dir.exists():
        run_dir = Path(f"{base}-{counter}")
        counter += 1
    run_dir.mkdir(parents=True)
    return run_dir


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    return value


def _write_resolved_config(run_dir: Path, args: argparse.Namespace) -> None:
    payload = {
        k: _jsonable(v)
        for k, v in sorted(vars(args).items())
        if k not in ("config",)
    }
    (run_dir / "resolved_config.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _emit(run_dir: Path, **outputs) -> None:
    payload = {"run_dir": str(run_dir)}
    payload.update({k: (str(v) if isinstance(v, Path) else v) for k, v in outputs.items()})
    print(json.dumps(payload, sort_keys=True))


def _load_split_docs(args, split_names=None):
    docs, table = corpus.load_dataset(args.notes, args.codes)
    manifest = corpus.load_split_manifest(args.splits)
    splits = corpus.split_dataset(docs, manifest)
    return docs, table, splits


def _load_model_and_vocab(args) -> tuple[RacModel, corpus.Vocabulary]:
    model = RacModel.load(args.model)
    vocab = corpus.Vocabulary.load(args.vocab)
    expected = model.fingerprints.get("vocabulary")
    if expected and expected != vocab.fingerprint():
        raise CliError(f"vocabulary {args.vocab} does not match the checkpoint's fingerprint")
    return model, vocab


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen_synthetic(args) -> None:
    run_dir = _make_run_dir(args.out, "gen-synthetic")
    _write_resolved_config(run_dir, args)
    dataset = corpus.generate_synthetic(
        n_docs=args.docs, n_codes=args.codes, vocab_size=args.vocab_size, seed=args.seed,
        min_labels=args.min_labels, max_labels=args.max_labels,
        noise_sentences=args.noise_sentences,
    )
    n = len(dataset.documents)
    n_train = args.train_count if args.train_count is not None else int(round(0.7 * n))
    n_val = args.val_count if args.val_count is not None else int(round(0.15 * n))
    n_test = args.test_count if args.test_count is not None else n - n_train - n_val
    manifest = dataset.split_manifest(n_train, n_val, n_test)

    notes_path = run_dir / "notes.jsonl"
    codes_path = run_dir / "codes.tsv"
    splits_path = run_dir / "splits.json"
    corpus.save_documents(dataset.documents, notes_path)
    dataset.code_table.to_tsv(codes_path)
    corpus.save_split_manifest(manifest, splits_path)
    _emit(run_dir, notes=notes_path, codes=codes_path, splits=splits_path,
          docs=n, n_codes=len(dataset.code_table))


def _cmd_preprocess(args) -> None:
    run_dir = _make_run_dir(args.out, "preprocess")
    _write_resolved_config(run_dir, args)
    _, table, splits = _load_split_docs(args)
    vocab = corpus.Vocabulary.build(splits["train"], min_count=args.min_count)
    vocab_path = run_dir / "vocab.json"
    vocab.save(vocab_path)
    stats = {
        "vocab_size": len(vocab),
        "n_codes": len(table),
        "split_sizes": {k: len(v) for k, v in splits.items()},
    }
    (run_dir / "stats.json").write_text(json.dumps(stats, sort_keys=True, indent=2) + "\n")
    _emit(run_dir, vocab=vocab_path, **stats["split_sizes"], vocab_size=len(vocab))


def _cmd_pretrain_embeddings(args) -> None:
    run_dir = _make_run_dir(args.out, "pretrain-embeddings")
    _write_resolved_config(run_dir, args)
    _, _, splits = _load_split_docs(args)
    vocab = corpus.Vocabulary.load(args.vocab)
    sequences = [vocab.encode(corpus.tokenize(d.text)) for d in splits["train"]]
    sequences = [s for s in sequences if s]
    table = train_skipgram(
        sequences, vocab, d=args.d, window=args.window, epochs=args.epochs,
        negatives=args.negatives, lr=args.lr, min_lr=args.min_lr, rng=Rng(args.seed),
    )
    out_path = run_dir / "embeddings.rac"
    table.save(out_path)
    _emit(run_dir, embeddings=out_path, vocab_size=len(table), d=table.dim)


def _cmd_augment(args) -> None:
    run_dir = _make_run_dir(args.out, "augment")
    _write_resolved_config(run_dir, args)
    docs, _, splits = _load_split_docs(args)
    augmented_train = augment(splits["train"], fold=args.fold, rng=Rng(args.seed))
    keep = {d.id for d in splits["val"]} | {d.id for d in splits["test"]}
    passthrough = [d for d in docs if d.id in keep]
    notes_path = run_dir / "notes_augmented.jsonl"
    corpus.save_documents(augmented_train + passthrough, notes_path)
    manifest = {
        "train": [d.id for d in augmented_train],
        "val": [d.id for d in splits["val"]],
        "test": [d.id for d in splits["test"]],
    }
    splits_path = run_dir / "splits_augmented.json"
    corpus.save_split_manifest(manifest, splits_path)
    _emit(run_dir, notes=notes_path, splits=splits_path, train_size=len(augmented_train))


def _cmd_train(args) -> None:
    run_dir = _make_run_dir(args.out, "train")
    _write_resolved_config(run_dir, args)
    _, table, splits = _load_split_docs(args)
    vocab = corpus.Vocabulary.load(args.vocab)

    pretrained = None
    if args.embeddings is not None:
        pretrained = EmbeddingTable.load(args.embeddings, vocab)

    config = RacConfig(
        n_y=len(table), d=args.d, n_x=args.n_x, n_t=args.n_t, d_ff=args.d_ff,
        sam_layers=args.sam_layers, conv_kernel=args.conv_kernel,
        reader_conv_layers=args.reader_conv_layers, dropout=args.dropout,
        use_code_titles=args.use_code_titles, output_bias=args.output_bias,
        mask_pad=args.mask_pad,
    )
    train_config = TrainConfig(
        learning_rate=args.learning_rate, batch_size=args.batch_size,
        patience=args.patience, swa_interval_epochs=args.swa_interval_epochs,
        augment_fold=args.augment_fold, max_epochs=args.max_epochs, seed=args.seed,
        swa_from_first_epoch=args.swa_from_first_epoch,
    )

    rng = Rng(args.seed)
    fingerprints = {"vocabulary": vocab.fingerprint(), "code_table": table.fingerprint()}
    model = RacModel.init(config, len(vocab), rng, pretrained=pretrained, fingerprints=fingerprints)

    train_docs = augment(splits["train"], fold=train_config.augment_fold, rng=rng.child("augment"))
    title_matrix = corpus.build_title_matrix(table, vocab, n_t=config.n_t)
    train_examples = [corpus.encode_document(d, vocab, table, config.n_x) for d in train_docs]
    val_examples = [corpus.encode_document(d, vocab, table, config.n_x) for d in splits["val"]]

    result = train(model, train_examples, val_examples, title_matrix, train_config)

    best_path = run_dir / "best.ckpt"
    swa_path = run_dir / "swa.ckpt"
    result.best_model.save(best_path)
    result.swa_model.save(swa_path)
    (run_dir / "trainlog.jsonl").write_text(result.log.to_jsonl(), encoding="utf-8")
    _emit(run_dir, best=best_path, swa=swa_path,
          best_epoch=result.log.best_epoch, stopped_epoch=result.log.stopped_epoch)


def _score_split(model: RacModel, vocab, table, docs):
    title_matrix = corpus.build_title_matrix(table, vocab, n_t=model.config.n_t)
    examples = [corpus.encode_document(d, vocab, table, model.config.n_x) for d in docs]
    from .model import score_documents

    scores = score_documents(model, examples, title_matrix)
    labels = np.stack([ex.label_vector for ex in examples]) if examples else np.zeros((0, len(table)))
    return scores, labels, title_matrix


def _cmd_evaluate(args) -> None:
    run_dir = _make_run_dir(args.out, "evaluate")
    _write_resolved_config(run_dir, args)
    _, table, splits = _load_split_docs(args)
    model, vocab = _load_model_and_vocab(args)
    docs = splits[args.split]
    scores, labels, _ = _score_split(model, vocab, table, docs)
    report = full_report(scores, labels, mode="ranking", threshold=args.threshold)
    report_path = run_dir / "report.json"
    report_path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    save_arrays(run_dir / "scores.rac", {"scores": scores},
                meta={"note_ids": [d.id for d in docs]})
    print(json.dumps(report.to_dict(), sort_keys=True))
    _emit(run_dir, report=report_path, scores=run_dir / "scores.rac", split=args.split, n_docs=len(docs))


def _cmd_predict(args) -> None:
    run_dir = _make_run_dir(args.out, "predict")
    _write_resolved_config(run_dir, args)
    docs, table = corpus.load_dataset(args.notes, args.codes)
    model, vocab = _load_model_and_vocab(args)
    title_matrix = corpus.build_title_matrix(table, vocab, n_t=model.config.n_t)

    rows = []
    attention_out = {}
    from .numerics import no_grad

    for doc in docs:
        example = corpus.encode_document(doc, vocab, table, model.config.n_x)
        with no_grad():
            acts = model_predict(example.token_ids, title_matrix, model)
        rows.append(acts.y.data.copy())
        if args.attention_top_k > 0:
            y = acts.y.data
            attn = acts.attention.data
            top_codes = np.argsort(-y, kind="stable")[: args.attention_top_codes]
            attention_out[doc.id] = [
                {
                    "code": table.entries[int(c)].code,
                    "score": float(y[int(c)]),
                    "positions": [int(p) for p in np.argsort(-attn[int(c)], kind="stable")[: args.attention_top_k]],
                }
                for c in top_codes
            ]

    scores = np.stack(rows) if rows else np.zeros((0, len(table)))
    scores_path = run_dir / "scores.rac"
    save_arrays(scores_path, {"scores": scores}, meta={"note_ids": [d.id for d in docs]})
    outputs = {"scores": scores_path, "n_docs": len(docs)}
    if attention_out:
        attn_path = run_dir / "attention.json"
        attn_path.write_text(json.dumps(attention_out, sort_keys=True, indent=2) + "\n")
        outputs["attention"] = attn_path
    _emit(run_dir, **outputs)


def _load_prediction_file(path) -> dict[str, np.ndarray]:
    arrays, meta = load_arrays(path)
    scores = arrays["scores"]
    note_ids = meta.get("note_ids")
    if note_ids is None or len(note_ids) != scores.shape[0]:
        raise CliError(f"{path}: prediction container is missing aligned note_ids metadata")
    return {note_id: scores[i] for i, note_id in enumerate(note_ids)}


def _cmd_serve(args) -> None:
    import uvicorn

    from .server import create_app

    run_dir = _make_run_dir(args.out, "serve")
    _write_resolved_config(run_dir, args)
    docs, table = corpus.load_dataset(args.notes, args.codes)
    store = AnnotationStore(args.annotations_log)
    service = AnnotationService(
        [d.id for d in docs], table, store,
        sample_size=args.sample_size, seed=args.seed,
    )
    model_scores = _load_prediction_file(args.predictions) if args.predictions else None
    app = create_app(docs, table, service, model_scores=model_scores,
                     threshold=args.threshold, frontend_dir=args.frontend)
    _emit(run_dir, host=args.host, port=args.port, sample_size=len(service.sample))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def _cmd_compare(args) -> None:
    run_dir = _make_run_dir(args.out, "compare")
    _write_resolved_config(run_dir, args)
    docs, table = corpus.load_dataset(args.notes, args.codes)
    references = {d.id: set(d.codes) for d in docs}

    annotations: dict[str, dict[str, set[str]]] = {}
    for path in args.annotations:
        store = AnnotationStore(path)
        for annotator in store.annotators():
            merged = annotations.setdefault(annotator, {})
            for note_id, rec in store.by_annotator(annotator).items():
                merged[note_id] = set(rec.codes)

    model_scores = _load_prediction_file(args.predictions) if args.predictions else None
    report = agreement_report(annotations, references, table,
                              model_scores=model_scores, threshold=args.threshold)
    report_path = run_dir / "agreement.json"
    report_path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    print(json.dumps(report.to_dict(), sort_keys=True))
    _emit(run_dir, report=report_path, annotators=sorted(report.rows))


_COMMANDS = {
    "gen-synthetic": _cmd_gen_synthetic,
    "preprocess": _cmd_preprocess,
    "pretrain-embeddings": _cmd_pretrain_embeddings,
    "augment": _cmd_augment,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "predict": _cmd_predict,
    "serve": _cmd_serve,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config_file(parser, list(sys.argv[1:] if argv is None else argv))
    try:
        _COMMANDS[args.command](args)
    except (CliError, corpus.CorpusError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
