"""Command-line entry points.

Three batch subcommands: ``prepare`` splits (and optionally caps) a
corpus into member files, ``run`` executes a configured pipeline and
writes its reports, ``report`` re-renders a result document.  Exit
codes: 0 success, 1 pipeline failure (message names the stage), 2
usage or input error.

Every output directory receives a ``manifest.json`` recording the tool
version, the exact configuration, SHA-256 digests of the inputs, and
per-stage timings, which is enough to reproduce the run bit for bit.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .corpus import (
    SplitSet,
    clean,
    downsample,
    load_corpus,
    stratified_split,
    write_corpus_jsonl,
    write_split_manifest,
)
from .errors import PipelineError, VulnstackError
from .report import render, render_distribution
from .stacking import PipelineConfig, ablation_sweep


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path: Path, document: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _manifest(
    command: str, config: dict, inputs: list[Path], timings: dict
) -> dict:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return {
        "tool": "vulnstack",
        "tool_version": __version__,
        "command": command,
        "created": datetime.now(timezone.utc).isoformat(),
        "config": config,
        "config_hash": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "inputs": {str(p): _sha256(p) for p in sorted(set(inputs))},
        "timings": {k: round(v, 6) for k, v in timings.items()},
    }


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"expected 3 comma-separated ratios, got {text!r}")
    return tuple(float(p) for p in parts)


def _parse_caps(text: str) -> tuple[int, ...]:
    parts = text.split(",")
    if len(parts) != 5:
        raise ValueError(f"expected 5 comma-separated caps, got {text!r}")
    return tuple(int(p) for p in parts)


def _slug(label: str) -> str:
    return re.sub(r"-+", "-", re.sub(r"[^a-z0-9]+", "-", label.lower())).strip("-")


def cmd_prepare(args: argparse.Namespace) -> int:
    timings: dict[str, float] = {}
    start = time.perf_counter()
    corpus_path = Path(args.corpus)
    corpus = clean(load_corpus(corpus_path, args.format))
    timings["load"] = time.perf_counter() - start

    start = time.perf_counter()
    ratios = _parse_ratios(args.ratios)
    split = stratified_split(corpus, ratios, args.seed)
    train = split.train
    if args.caps:
        train = downsample(train, _parse_caps(args.caps), args.seed)
    timings["prepare"] = time.perf_counter() - start

    start = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    members = {
        "train": train,
        "validation": split.validation,
        "test": split.test,
    }
    for name, member in members.items():
        write_corpus_jsonl(member, out / f"{name}.jsonl")
    # The split manifest documents the materialized members, so a capped
    # train member is listed as written.
    write_split_manifest(
        SplitSet(
            train=train,
            validation=split.validation,
            test=split.test,
            seed=split.seed,
            ratios=split.ratios,
        ),
        out / "split_manifest.json",
    )
    distributions = {
        name: member.distribution().to_dict() for name, member in members.items()
    }
    _write_json(out / "distribution.json", distributions)
    timings["write"] = time.perf_counter() - start

    config_echo = {
        "corpus": str(corpus_path),
        "format": args.format,
        "ratios": list(ratios),
        "caps": list(_parse_caps(args.caps)) if args.caps else None,
        "seed": args.seed,
        "out": str(out),
    }
    _write_json(
        out / "manifest.json",
        _manifest("prepare", config_echo, [corpus_path], timings),
    )
    sys.stdout.write(render_distribution(distributions))
    return 0


def _resolve_config_paths(raw: dict, base: Path) -> dict:
    """Paths inside a config file are relative to the file's directory."""

    def resolve(value: str) -> str:
        return str((base / value).resolve()) if not Path(value).is_absolute() else value

    data = raw.get("data")
    if isinstance(data, dict):
        if isinstance(data.get("corpus"), str):
            data["corpus"] = resolve(data["corpus"])
        if isinstance(data.get("splits"), dict):
            data["splits"] = {
                k: resolve(v) if isinstance(v, str) else v
                for k, v in data["splits"].items()
            }
    for spec in raw.get("base_models", []):
        if isinstance(spec, dict):
            if isinstance(spec.get("path"), str):
                spec["path"] = resolve(spec["path"])
            if isinstance(spec.get("paths"), list):
                spec["paths"] = [
                    resolve(p) if isinstance(p, str) else p for p in spec["paths"]
                ]
    return raw


def _config_input_paths(config: PipelineConfig) -> list[Path]:
    paths = []
    if config.data.corpus is not None:
        paths.append(Path(config.data.corpus))
    for _, path in config.data.splits:
        paths.append(Path(path))
    for spec in config.base_models:
        paths.extend(Path(p) for p in spec.paths)
    return paths


def cmd_run(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    with open(config_path, encoding="utf-8") as handle:
        raw = json.load(handle)
    if not isinstance(raw, dict):
        raise VulnstackError(f"{config_path.name}: config must be a JSON object")
    raw = _resolve_config_paths(raw, config_path.parent)
    config = PipelineConfig.from_dict(raw)

    output = ablation_sweep(config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "result.json", "wb") as handle:
        handle.write(output.to_json_bytes())

    rows_dir = out / "rows"
    rows_dir.mkdir(exist_ok=True)
    for report in output.individuals:
        _write_json(rows_dir / f"individual-{_slug(report.model)}.json", report.to_dict())
    for pipeline in output.pipelines:
        for row in pipeline.rows:
            _write_json(rows_dir / f"{_slug(row.label)}.json", row.to_dict())

    document = output.to_dict()
    with open(out / "report.txt", "w", encoding="utf-8") as handle:
        handle.write(render(document, "text"))
    _write_json(
        out / "manifest.json",
        _manifest("run", config.to_dict(), _config_input_paths(config), output.timings),
    )
    sys.stdout.write(render(document, args.render))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    result_path = Path(args.result)
    with open(result_path, encoding="utf-8") as handle:
        document = json.load(handle)
    if not isinstance(document, dict) or (
        "individuals" not in document and "pipelines" not in document
    ):
        raise VulnstackError(
            f"{result_path.name}: not a result document "
            "(expected 'individuals' and 'pipelines')"
        )
    sys.stdout.write(render(document, args.render))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vulnstack",
        description="Stacked-ensemble pipeline for five-class code classification.",
    )
    parser.add_argument(
        "--version", action="version", version=f"vulnstack {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    prepare = sub.add_parser(
        "prepare", help="split a corpus into train/validation/test files"
    )
    prepare.add_argument("--corpus", required=True, help="corpus file to split")
    prepare.add_argument(
        "--format", choices=("jsonl", "csv"), default="jsonl",
        help="corpus file format (default jsonl)",
    )
    prepare.add_argument(
        "--ratios", default="0.8,0.1,0.1",
        help="train,validation,test fractions (default 0.8,0.1,0.1)",
    )
    prepare.add_argument(
        "--caps", default=None,
        help="five per-class caps applied to the train member, e.g. 100,100,50,100,100",
    )
    prepare.add_argument("--seed", type=int, default=42, help="split seed (default 42)")
    prepare.add_argument("--out", required=True, help="output directory")
    prepare.set_defaults(func=cmd_prepare)

    run = sub.add_parser("run", help="run a configured stacking pipeline")
    run.add_argument("--config", required=True, help="pipeline config JSON")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument(
        "--render", choices=("text", "json", "csv"), default="text",
        help="format echoed to stdout (default text)",
    )
    run.set_defaults(func=cmd_run)

    report = sub.add_parser("report", help="re-render a result document")
    report.add_argument("--result", required=True, help="result.json from a run")
    report.add_argument(
        "--render", choices=("text", "json", "csv"), default="text",
        help="output format (default text)",
    )
    report.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (VulnstackError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
