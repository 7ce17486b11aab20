"""Reading canonical corpus rows and turning them into model inputs.

The corpus format is one JSON object per line with ``id`` (non-empty,
unique), ``code`` (string), and ``label`` (integer 0..4).  This module
is the adapter's own reader; the pipeline package is coupled to the
adapter only through the files themselves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import AdapterError

NUM_CLASSES = 5


@dataclass(frozen=True)
class CodeRow:
    id: str
    code: str
    label: int


def read_corpus(path: str | Path) -> list[CodeRow]:
    """Load a corpus file, rejecting malformed rows and id collisions."""
    path = Path(path)
    rows: list[CodeRow] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            where = f"{path.name} line {lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AdapterError(f"{where}: malformed JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise AdapterError(f"{where}: record is not an object")
            missing = {"id", "code", "label"} - set(record)
            if missing:
                raise AdapterError(f"{where}: missing key(s) {sorted(missing)}")
            sample_id, code, label = record["id"], record["code"], record["label"]
            if not isinstance(sample_id, str) or not sample_id:
                raise AdapterError(f"{where}: id must be a non-empty string")
            if sample_id in seen:
                raise AdapterError(f"{where}: duplicate id {sample_id!r}")
            if not isinstance(code, str):
                raise AdapterError(f"{where}: code must be a string")
            if isinstance(label, bool) or not isinstance(label, int):
                raise AdapterError(f"{where}: label must be an integer")
            if not 0 <= label < NUM_CLASSES:
                raise AdapterError(
                    f"{where}: label {label} outside 0..{NUM_CLASSES - 1}"
                )
            seen.add(sample_id)
            rows.append(CodeRow(id=sample_id, code=code, label=label))
    return rows


def encode_rows(tokenizer, rows: list[CodeRow], max_tokens: int):
    """Tokenize a batch, naming the offending row if tokenization fails."""
    try:
        return tokenizer(
            [row.code for row in rows],
            padding=True,
            truncation=True,
            max_length=max_tokens,
            return_tensors="pt",
        )
    except Exception:
        for row in rows:
            try:
                tokenizer(row.code, truncation=True, max_length=max_tokens)
            except Exception as exc:
                raise AdapterError(
                    f"sample {row.id!r}: tokenization failed ({exc})"
                ) from None
        raise
