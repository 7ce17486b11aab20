"""Export a checkpoint's class probabilities in the probability wire format.

One header line naming the model, then one ``{"id", "probs"}`` row per
corpus sample; softmax over the five logits, so every row sums to 1.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer

from .corpus_io import NUM_CLASSES, encode_rows, read_corpus
from .errors import AdapterError


def export_probs(
    checkpoint: str | Path,
    corpus_path: str | Path,
    out_path: str | Path,
    model_name: str | None = None,
    batch_size: int = 32,
    max_tokens: int = 512,
) -> int:
    """Write one probability row per sample; return the row count."""
    rows = read_corpus(corpus_path)
    if not rows:
        raise AdapterError("corpus is empty")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")

    tokenizer = AutoTokenizer.from_pretrained(checkpoint)
    model = AutoModelForSequenceClassification.from_pretrained(checkpoint)
    if model.config.num_labels != NUM_CLASSES:
        raise AdapterError(
            f"checkpoint has {model.config.num_labels} output classes, "
            f"expected {NUM_CLASSES}"
        )
    device = torch.device("cuda" if torch.cuda.is_available() else "cpu")
    model.to(device)
    model.eval()
    name = model_name or Path(checkpoint).name

    with open(out_path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps({"model": name, "classes": NUM_CLASSES}) + "\n")
        with torch.no_grad():
            for start in range(0, len(rows), batch_size):
                chunk = rows[start : start + batch_size]
                batch = encode_rows(tokenizer, chunk, max_tokens).to(device)
                probs = torch.softmax(model(**batch).logits, dim=-1).cpu().numpy()
                for row, vector in zip(chunk, probs):
                    handle.write(
                        json.dumps(
                            {"id": row.id, "probs": [float(v) for v in vector]}
                        )
                        + "\n"
                    )
    return len(rows)
