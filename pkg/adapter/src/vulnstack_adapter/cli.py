"""Command line entry points: convert, finetune, export."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .convert import convert_corpus
from .errors import AdapterError
from .export import export_probs
from .finetune import FinetuneSpec, finetune


def cmd_convert(args) -> int:
    report = convert_corpus(args.input, args.out, args.log)
    print(
        f"kept {report.kept} of {report.total} rows "
        f"({report.dropped} unflagged dropped, {report.resolved} multi-label "
        f"resolved) -> {report.out_path}"
    )
    print(f"conversion log -> {report.log_path}")
    return 0


def cmd_finetune(args) -> int:
    spec = FinetuneSpec(
        checkpoint=args.checkpoint,
        batch_size=args.batch_size,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        max_tokens=args.max_tokens,
        seed=args.seed,
    )
    out = finetune(
        spec,
        args.train,
        args.validation,
        args.out,
        progress=lambda entry: print(
            f"epoch {entry['epoch']}: train loss {entry['train_loss']:.4f}, "
            f"validation loss {entry['validation_loss']:.4f}"
        ),
    )
    print(f"checkpoint -> {out}")
    return 0


def cmd_export(args) -> int:
    count = export_probs(
        args.checkpoint,
        args.corpus,
        args.out,
        model_name=args.model_name,
        batch_size=args.batch_size,
        max_tokens=args.max_tokens,
    )
    print(f"wrote {count} probability rows -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vulnstack-adapter",
        description=(
            "Bridge between transformer checkpoints and the stacking "
            "pipeline's corpus and probability files."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"vulnstack-adapter {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    convert = sub.add_parser(
        "convert", help="convert an upstream HDF5 corpus to JSONL"
    )
    convert.add_argument("--input", required=True, help="upstream HDF5 file")
    convert.add_argument("--out", required=True, help="corpus JSONL to write")
    convert.add_argument(
        "--log", default=None,
        help="conversion log path (default <out>.log.json)",
    )
    convert.set_defaults(func=cmd_convert)

    tune = sub.add_parser(
        "finetune", help="fine-tune a checkpoint for five-class classification"
    )
    tune.add_argument(
        "--checkpoint", required=True,
        help="pre-trained checkpoint name or local directory",
    )
    tune.add_argument("--train", required=True, help="training corpus JSONL")
    tune.add_argument(
        "--validation", required=True, help="validation corpus JSONL"
    )
    tune.add_argument("--out", required=True, help="output checkpoint directory")
    tune.add_argument("--batch-size", type=int, default=16)
    tune.add_argument("--epochs", type=int, default=10)
    tune.add_argument("--learning-rate", type=float, default=2e-5)
    tune.add_argument("--max-tokens", type=int, default=512)
    tune.add_argument("--seed", type=int, default=0)
    tune.set_defaults(func=cmd_finetune)

    export = sub.add_parser(
        "export", help="write a checkpoint's probabilities for a corpus"
    )
    export.add_argument(
        "--checkpoint", required=True, help="checkpoint name or directory"
    )
    export.add_argument("--corpus", required=True, help="corpus JSONL to score")
    export.add_argument("--out", required=True, help="probability JSONL to write")
    export.add_argument(
        "--model-name", default=None,
        help="model name for the header (default: checkpoint basename)",
    )
    export.add_argument("--batch-size", type=int, default=32)
    export.add_argument("--max-tokens", type=int, default=512)
    export.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (AdapterError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
