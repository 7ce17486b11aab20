import json
import math
from pathlib import Path

import pytest
import torch
from conftest import save_tiny_model
from corpusgen import corpus_rows, write_corpus
from transformers import AutoModelForSequenceClassification, AutoTokenizer
from vulnstack_adapter import AdapterError, export_probs

from vulnstack.base_models import ExternalModel, load_external_probs
from vulnstack.corpus import load_corpus
from vulnstack.stacking import build_meta_features


def test_export_writes_a_header_and_simplex_rows(tiny_checkpoint, tmp_path):
    corpus = write_corpus(tmp_path / "c.jsonl", corpus_rows(3))
    out = tmp_path / "probs.jsonl"
    count = export_probs(
        tiny_checkpoint, corpus, out, model_name="tiny", max_tokens=64
    )
    assert count == 3
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    assert json.loads(lines[0]) == {"model": "tiny", "classes": 5}
    for i, line in enumerate(lines[1:]):
        row = json.loads(line)
        assert row["id"] == f"s{i:04d}"
        probs = row["probs"]
        assert len(probs) == 5
        assert all(math.isfinite(p) and p >= 0 for p in probs)
        assert abs(sum(probs) - 1.0) <= 1e-6


def test_exported_file_feeds_the_pipeline(tiny_checkpoint, tmp_path):
    corpus_path = write_corpus(tmp_path / "c.jsonl", corpus_rows(10))
    out = tmp_path / "probs.jsonl"
    export_probs(tiny_checkpoint, corpus_path, out, model_name="tiny", max_tokens=64)

    table = load_external_probs(out)
    assert table.model == "tiny"
    assert len(table.rows) == 10

    corpus = load_corpus(corpus_path)
    data = build_meta_features([ExternalModel("tiny", table)], corpus)
    assert data.Z.shape == (10, 5)


def test_file_argmax_matches_direct_inference(tiny_checkpoint, tmp_path):
    rows = corpus_rows(40)
    corpus = write_corpus(tmp_path / "c.jsonl", rows)
    out = tmp_path / "probs.jsonl"
    export_probs(tiny_checkpoint, corpus, out, max_tokens=64)

    lines = out.read_text().splitlines()[1:]
    by_id = {r["id"]: r["probs"] for r in map(json.loads, lines)}
    file_hits = sum(
        max(range(5), key=by_id[row["id"]].__getitem__) == row["label"]
        for row in rows
    )

    tokenizer = AutoTokenizer.from_pretrained(tiny_checkpoint)
    model = AutoModelForSequenceClassification.from_pretrained(tiny_checkpoint)
    model.eval()
    direct_hits = 0
    with torch.no_grad():
        for start in range(0, len(rows), 32):
            chunk = rows[start : start + 32]
            batch = tokenizer(
                [r["code"] for r in chunk],
                padding=True,
                truncation=True,
                max_length=64,
                return_tensors="pt",
            )
            picks = model(**batch).logits.argmax(dim=-1).tolist()
            direct_hits += sum(
                pick == row["label"] for pick, row in zip(picks, chunk)
            )
    assert abs(file_hits - direct_hits) / len(rows) <= 0.01


def test_model_name_defaults_to_the_checkpoint_basename(tiny_checkpoint, tmp_path):
    corpus = write_corpus(tmp_path / "c.jsonl", corpus_rows(2))
    out = tmp_path / "probs.jsonl"
    export_probs(tiny_checkpoint, corpus, out, max_tokens=64)
    header = json.loads(out.read_text().splitlines()[0])
    assert header["model"] == Path(tiny_checkpoint).name


def test_wrong_head_width_is_an_error(tiny_checkpoint, tmp_path):
    narrow = tmp_path / "narrow"
    tokenizer = AutoTokenizer.from_pretrained(tiny_checkpoint)
    tokenizer.save_pretrained(narrow)
    save_tiny_model(str(narrow), tokenizer, num_labels=3)
    corpus = write_corpus(tmp_path / "c.jsonl", corpus_rows(2))
    with pytest.raises(AdapterError, match="3 output classes"):
        export_probs(str(narrow), corpus, tmp_path / "probs.jsonl", max_tokens=64)


def test_duplicate_corpus_ids_are_an_error(tiny_checkpoint, tmp_path):
    rows = corpus_rows(2)
    rows[1]["id"] = rows[0]["id"]
    corpus = write_corpus(tmp_path / "c.jsonl", rows)
    with pytest.raises(AdapterError, match="duplicate id"):
        export_probs(tiny_checkpoint, corpus, tmp_path / "probs.jsonl")


def test_empty_corpus_is_an_error(tiny_checkpoint, tmp_path):
    corpus = write_corpus(tmp_path / "c.jsonl", [])
    with pytest.raises(AdapterError, match="empty"):
        export_probs(tiny_checkpoint, corpus, tmp_path / "probs.jsonl")


def test_export_is_deterministic(tiny_checkpoint, tmp_path):
    corpus = write_corpus(tmp_path / "c.jsonl", corpus_rows(8))
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    export_probs(tiny_checkpoint, corpus, first, max_tokens=64)
    export_probs(tiny_checkpoint, corpus, second, max_tokens=64)
    assert first.read_bytes() == second.read_bytes()
