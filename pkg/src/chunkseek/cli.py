"""Command-line entry point: ingest, query, train, eval, synth, cost, sweep.

Exit codes: 0 success, 1 usage, 2 bad or inconsistent data, 3 numeric
failure. Human-readable tables by default; ``--format lines`` switches the
query/eval/sweep commands to one JSON record per line.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import binio, evaluation, synthetic, training
from .chunking import ChunkConfig, tokenize_video
from .errors import DecodeError, NumericError, UsageError, ValidationError
from .retrieval import retrieve
from .store import ChunkStore, import_frame_features, load_annotations, save_annotations


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 1
        raise UsageError(message)


def _load_config_section(path: str | None, section: str) -> dict:
    if path is None:
        return {}
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DecodeError(f"{path}: unreadable config ({exc})") from exc
    value = config.get(section, {})
    if not isinstance(value, dict):
        raise DecodeError(f"{path}: config section {section!r} must be an object")
    return value


def _merged_chunk_config(args) -> ChunkConfig:
    merged = dataclasses.asdict(ChunkConfig())
    merged.update(_load_config_section(args.config, "chunk"))
    for key in ("frames_per_chunk", "spatial_stride", "top_k"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    try:
        return ChunkConfig(**merged)
    except TypeError as exc:
        raise UsageError(f"bad chunk config: {exc}") from exc


def _merged_train_config(args) -> training.TrainConfig:
    merged = dataclasses.asdict(training.TrainConfig())
    merged.update(_load_config_section(args.config, "train"))
    overrides = {
        "learning_rate": args.learning_rate,
        "batch_size": args.batch_size,
        "epochs": args.epochs,
        "soft_match_weight": args.soft_match_weight,
        "hidden_dim": args.hidden_dim,
        "optimizer": args.optimizer,
        "seed": args.seed,
    }
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return training.TrainConfig(**merged)
    except TypeError as exc:
        raise UsageError(f"bad train config: {exc}") from exc


def cmd_ingest(args) -> int:
    cfg = _merged_chunk_config(args)
    store = ChunkStore()
    for feature_path in args.features:
        frames = import_frame_features(feature_path)
        chunks = tokenize_video(frames, cfg)
        store.add_video(chunks)
        print(f"{frames.video_id}: {len(chunks)} chunks, {chunks[0].token_count} tokens/chunk")
    store.save(args.out)
    print(f"wrote {store.n_videos} videos ({store.n_chunks} chunks) to {args.out}")
    return 0


def cmd_query(args) -> int:
    store = ChunkStore.load(args.store)
    encoder = binio.read_encoder(args.encoder)
    features = binio.read_query_features(args.query_features)
    if not 0 <= args.row < features.shape[0]:
        raise UsageError(f"--row {args.row} out of range for {features.shape[0]} query features")
    cfg = _merged_chunk_config(args)
    result = retrieve(
        features[args.row].astype(np.float64), args.video, store, encoder, cfg,
        export_tokens=False,
    )
    if args.format == "lines":
        for rank, (idx, score) in enumerate(result.ranked, start=1):
            print(json.dumps({"rank": rank, "chunk": idx, "score": score}))
        print(json.dumps({"selected_time_ordered": result.selected_time_ordered}))
    else:
        print(f"video {args.video}: top {len(result.ranked)} of {len(store.get_chunks(args.video))} chunks")
        for rank, (idx, score) in enumerate(result.ranked, start=1):
            print(f"  {rank:2d}. chunk {idx:4d}  score {score:+.6f}")
        print("time-ordered selection:", " ".join(str(i) for i in result.selected_time_ordered))
    return 0


def cmd_train(args) -> int:
    store = ChunkStore.load(args.store)
    annotations = load_annotations(args.annotations, store)
    cfg = _merged_train_config(args)
    dataset = training.build_training_examples(store, annotations)
    result = training.fit(dataset, cfg)
    binio.write_encoder(args.out, result.encoder)
    loss_log = args.loss_log or f"{args.out}.losses.tsv"
    with open(loss_log, "w", encoding="utf-8") as fh:
        for epoch, step, loss in result.step_losses:
            fh.write(f"{epoch}\t{step}\t{loss:.17g}\n")
    print(f"trained on {len(dataset)} examples for {cfg.epochs} epochs")
    for epoch, loss in enumerate(result.epoch_losses):
        print(f"epoch {epoch}: mean loss {loss:.6f}")
    print(f"wrote encoder to {args.out}, loss log to {loss_log}")
    return 0


def _print_report(report: evaluation.EvalReport, fmt: str) -> None:
    if fmt == "lines":
        for line in report.to_lines():
            print(line)
        return
    print(f"K = {report.k}")
    print(f"{'strategy':<12} {'recall@K':>10} {'mean_best_rank':>16} {'queries':>9}")
    for name, metrics in report.per_strategy.items():
        print(
            f"{name:<12} {metrics.recall_at_k:>10.4f} "
            f"{metrics.mean_best_rank:>16.2f} {metrics.n_queries:>9d}"
        )


def _eval_strategies(args) -> tuple[str, ...]:
    strategies = tuple(s.strip() for s in args.strategies.split(",") if s.strip())
    if not strategies:
        raise UsageError("--strategies must name at least one strategy")
    return strategies


def cmd_eval(args) -> int:
    store = ChunkStore.load(args.store)
    annotations = load_annotations(args.annotations, store)
    encoder = binio.read_encoder(args.encoder) if args.encoder else None
    report = evaluation.compare_strategies(
        store, annotations, encoder, ChunkConfig(top_k=args.k), _eval_strategies(args)
    )
    _print_report(report, args.format)
    return 0


def cmd_sweep(args) -> int:
    store = ChunkStore.load(args.store)
    annotations = load_annotations(args.annotations, store)
    encoder = binio.read_encoder(args.encoder) if args.encoder else None
    try:
        k_values = [int(k) for k in args.k_values.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad --k-values: {exc}") from exc
    reports = evaluation.k_sweep(store, annotations, encoder, k_values, _eval_strategies(args))
    for report in reports:
        _print_report(report, args.format)
        if args.format != "lines":
            print()
    return 0


def cmd_synth(args) -> int:
    overrides = {}
    if args.spec:
        try:
            overrides = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DecodeError(f"{args.spec}: unreadable synth spec ({exc})") from exc
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        spec = synthetic.SynthSpec(**overrides)
    except TypeError as exc:
        raise UsageError(f"bad synth spec: {exc}") from exc
    store, annotations, _ = synthetic.generate_corpus(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    store_path = out_dir / "corpus.store.rvlm"
    ann_path = out_dir / "corpus.annotations.jsonl"
    store.save(store_path)
    save_annotations(annotations, ann_path)
    print(
        f"generated {store.n_videos} videos x {spec.chunks_per_video} chunks "
        f"({len(annotations)} queries, gap={spec.gap}, seed={spec.seed})"
    )
    print(f"wrote {store_path} and {ann_path}")
    return 0


def cmd_cost(args) -> int:
    fraction = evaluation.flops_savings(args.chunks, args.tokens_per_chunk, args.k, args.dtext)
    print(f"{evaluation.savings_percent(fraction)}%")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="chunkseek", description=__doc__)
    parser.add_argument("--config", help="JSON config file with 'chunk' and 'train' sections")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("ingest", help="tokenize frame-feature files into a chunk store")
    p.add_argument("--features", nargs="+", required=True, help="frame-feature .rvlm files")
    p.add_argument("--out", required=True, help="output chunk-store path")
    p.add_argument("--frames-per-chunk", dest="frames_per_chunk", type=int)
    p.add_argument("--stride", dest="spatial_stride", type=int)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", help="rank one video's chunks for a query feature")
    p.add_argument("--store", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--query-features", dest="query_features", required=True)
    p.add_argument("--row", type=int, default=0, help="row in the query-feature file")
    p.add_argument("--video", required=True)
    p.add_argument("--k", dest="top_k", type=int)
    p.add_argument("--format", choices=("table", "lines"), default="table")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("train", help="fit the query encoder on annotated data")
    p.add_argument("--store", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True, help="output encoder checkpoint")
    p.add_argument("--loss-log", dest="loss_log")
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--sm-weight", dest="soft_match_weight", type=float)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--optimizer", choices=("adam", "sgd"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="compare selection strategies on annotations")
    p.add_argument("--store", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--encoder", help="encoder checkpoint (omit to skip the retrieval strategy)")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--strategies", default="retrieval,uniform,clip_match")
    p.add_argument("--format", choices=("table", "lines"), default="table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="evaluate a range of K values")
    p.add_argument("--store", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--encoder")
    p.add_argument("--k-values", dest="k_values", default="1,3,5,7")
    p.add_argument("--strategies", default="retrieval,uniform,clip_match")
    p.add_argument("--format", choices=("table", "lines"), default="table")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic planted corpus")
    p.add_argument("--spec", help="JSON file with synthetic-corpus fields")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cost", help="decoder FLOPs saved by top-K selection")
    p.add_argument("--chunks", type=int, required=True)
    p.add_argument("--tokens-per-chunk", dest="tokens_per_chunk", type=int, default=68)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--dtext", type=int, default=80)
    p.set_defaults(func=cmd_cost)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            raise UsageError("missing subcommand (see --help)")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DecodeError, ValidationError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
