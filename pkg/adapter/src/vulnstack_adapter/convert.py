"""Convert an upstream HDF5 function corpus to the canonical JSONL format.

The upstream file stores one dataset of function bodies plus one boolean
dataset per CWE class.  Rows with no flag set are dropped (the five-class
formulation has no benign class).  Rows with several flags collapse to
one label by rarest-class-first priority so minority classes keep their
support; every such resolution is recorded in the conversion log.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import h5py
import numpy as np

from .errors import AdapterError

SOURCE_DATASET = "functionSource"
CLASS_FLAGS = ("CWE-119", "CWE-120", "CWE-469", "CWE-476", "CWE-other")
# Label indices ordered rarest class first.
FLAG_PRIORITY = (2, 3, 1, 0, 4)

_CHUNK = 10_000


@dataclass(frozen=True)
class ConversionReport:
    total: int
    kept: int
    dropped: int
    resolved: int
    out_path: Path
    log_path: Path


def _decode(value, index: int) -> str:
    if isinstance(value, bytes):
        try:
            return value.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise AdapterError(f"row {index}: code is not valid UTF-8 ({exc})") from None
    return str(value)


def convert_corpus(
    hdf5_path: str | Path,
    out_path: str | Path,
    log_path: str | Path | None = None,
) -> ConversionReport:
    """Write the canonical corpus and a conversion log; return the counts."""
    hdf5_path, out_path = Path(hdf5_path), Path(out_path)
    log_path = (
        Path(log_path)
        if log_path is not None
        else out_path.with_name(out_path.name + ".log.json")
    )
    try:
        handle = h5py.File(hdf5_path, "r")
    except (OSError, FileNotFoundError) as exc:
        raise AdapterError(f"cannot read {hdf5_path}: {exc}") from None

    with handle:
        missing = [
            name for name in (SOURCE_DATASET, *CLASS_FLAGS) if name not in handle
        ]
        if missing:
            raise AdapterError(f"{hdf5_path.name}: missing dataset(s) {missing}")
        source = handle[SOURCE_DATASET]
        total = len(source)
        bad = [
            name for name in CLASS_FLAGS if len(handle[name]) != total
        ]
        if bad:
            raise AdapterError(
                f"{hdf5_path.name}: dataset(s) {bad} do not match "
                f"{total} source rows"
            )
        flags = np.column_stack(
            [np.asarray(handle[name][...], dtype=bool) for name in CLASS_FLAGS]
        ) if total else np.zeros((0, len(CLASS_FLAGS)), dtype=bool)

        kept = dropped = resolved = 0
        multi_label: list[dict] = []
        with open(out_path, "w", encoding="utf-8") as out:
            for start in range(0, total, _CHUNK):
                chunk = source[start : start + _CHUNK]
                for offset, raw in enumerate(chunk):
                    index = start + offset
                    row_flags = flags[index]
                    if not row_flags.any():
                        dropped += 1
                        continue
                    label = next(c for c in FLAG_PRIORITY if row_flags[c])
                    sample_id = f"fn{index:07d}"
                    if row_flags.sum() > 1:
                        resolved += 1
                        multi_label.append(
                            {
                                "id": sample_id,
                                "flags": [
                                    name
                                    for name, on in zip(CLASS_FLAGS, row_flags)
                                    if on
                                ],
                                "label": int(label),
                            }
                        )
                    out.write(
                        json.dumps(
                            {
                                "id": sample_id,
                                "code": _decode(raw, index),
                                "label": int(label),
                            },
                            ensure_ascii=False,
                        )
                        + "\n"
                    )
                    kept += 1

    log = {
        "source": hdf5_path.name,
        "total": total,
        "kept": kept,
        "dropped_unflagged": dropped,
        "multi_label": multi_label,
    }
    with open(log_path, "w", encoding="utf-8") as out:
        out.write(json.dumps(log, indent=2, sort_keys=True) + "\n")
    return ConversionReport(
        total=total,
        kept=kept,
        dropped=dropped,
        resolved=resolved,
        out_path=out_path,
        log_path=log_path,
    )
