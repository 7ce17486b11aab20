"""Fine-tune a pre-trained code transformer for five-class classification.

Training minimizes cross-entropy with AdamW.  Every epoch logs mean
train and validation loss to ``training_log.json`` in the checkpoint
directory; a fixed seed gives an identical loss sequence on identical
hardware.  Non-finite loss aborts the run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer

from .corpus_io import NUM_CLASSES, CodeRow, encode_rows, read_corpus
from .errors import AdapterError

KNOWN_CHECKPOINTS = (
    "microsoft/codebert-base",
    "microsoft/graphcodebert-base",
    "microsoft/unixcoder-base",
)


@dataclass(frozen=True)
class FinetuneSpec:
    checkpoint: str
    batch_size: int = 16
    epochs: int = 10
    learning_rate: float = 2e-5
    optimizer: str = "AdamW"
    max_tokens: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.checkpoint not in KNOWN_CHECKPOINTS and not Path(self.checkpoint).is_dir():
            raise ValueError(
                f"checkpoint must be a local directory or one of "
                f"{', '.join(KNOWN_CHECKPOINTS)}, got {self.checkpoint!r}"
            )
        for name in ("batch_size", "epochs", "max_tokens"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be an integer >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.optimizer != "AdamW":
            raise ValueError(f"optimizer must be AdamW, got {self.optimizer!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ValueError("seed must be an integer")

    def to_dict(self) -> dict:
        return {
            "checkpoint": self.checkpoint,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "optimizer": self.optimizer,
            "max_tokens": self.max_tokens,
            "seed": self.seed,
        }


def _device() -> torch.device:
    return torch.device("cuda" if torch.cuda.is_available() else "cpu")


def _guard_oom(exc: RuntimeError) -> None:
    if "out of memory" in str(exc).lower():
        raise AdapterError(
            "out of memory; lower batch_size or max_tokens, or move to a "
            "larger device"
        ) from None
    raise exc


def _mean_loss(model, tokenizer, rows: list[CodeRow], spec: FinetuneSpec, device) -> float:
    model.eval()
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(rows), spec.batch_size):
            chunk = rows[start : start + spec.batch_size]
            batch = encode_rows(tokenizer, chunk, spec.max_tokens).to(device)
            labels = torch.tensor([row.label for row in chunk], device=device)
            try:
                loss = model(**batch, labels=labels).loss
            except RuntimeError as exc:
                _guard_oom(exc)
            total += float(loss.detach()) * len(chunk)
    model.train()
    return total / len(rows)


def finetune(
    spec: FinetuneSpec,
    train_path: str | Path,
    validation_path: str | Path,
    out_dir: str | Path,
    progress: Callable[[dict], None] | None = None,
) -> Path:
    """Train per the spec and save the checkpoint; return its directory."""
    train = read_corpus(train_path)
    validation = read_corpus(validation_path)
    if not train:
        raise AdapterError("training corpus is empty")
    if not validation:
        raise AdapterError("validation corpus is empty")

    # Seed before loading: a fresh classification head is initialized
    # inside from_pretrained.
    torch.manual_seed(spec.seed)
    tokenizer = AutoTokenizer.from_pretrained(spec.checkpoint)
    model = AutoModelForSequenceClassification.from_pretrained(
        spec.checkpoint, num_labels=NUM_CLASSES
    )
    device = _device()
    model.to(device)
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=spec.learning_rate)
    shuffler = torch.Generator().manual_seed(spec.seed)

    log: list[dict] = []
    for epoch in range(1, spec.epochs + 1):
        order = torch.randperm(len(train), generator=shuffler).tolist()
        running = 0.0
        for start in range(0, len(order), spec.batch_size):
            chunk = [train[i] for i in order[start : start + spec.batch_size]]
            batch = encode_rows(tokenizer, chunk, spec.max_tokens).to(device)
            labels = torch.tensor([row.label for row in chunk], device=device)
            try:
                loss = model(**batch, labels=labels).loss
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            except RuntimeError as exc:
                _guard_oom(exc)
            value = float(loss.detach())
            if not math.isfinite(value):
                raise AdapterError(
                    f"training diverged: non-finite loss in epoch {epoch}"
                )
            running += value * len(chunk)
        entry = {
            "epoch": epoch,
            "train_loss": running / len(train),
            "validation_loss": _mean_loss(model, tokenizer, validation, spec, device),
        }
        log.append(entry)
        if progress is not None:
            progress(entry)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    document = dict(
        spec.to_dict(),
        device=str(device),
        train_samples=len(train),
        validation_samples=len(validation),
        log=log,
    )
    with open(out_dir / "training_log.json", "w", encoding="utf-8") as handle:
        handle.write(json.dumps(document, indent=2, sort_keys=True) + "\n")
    return out_dir
