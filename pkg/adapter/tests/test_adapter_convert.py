import json

import h5py
import numpy as np
import pytest
from corpusgen import flag_row, write_hdf5
from vulnstack_adapter import AdapterError, CLASS_FLAGS, convert_corpus

from vulnstack.corpus import load_corpus


def read_log(report):
    with open(report.log_path, encoding="utf-8") as handle:
        return json.load(handle)


def test_single_flag_rows_map_to_their_class(tmp_path):
    codes = [f"void f{i}();" for i in range(5)]
    src = write_hdf5(tmp_path / "in.h5", codes, [flag_row(i) for i in range(5)])
    report = convert_corpus(src, tmp_path / "out.jsonl")
    assert (report.total, report.kept, report.dropped, report.resolved) == (5, 5, 0, 0)
    corpus = load_corpus(report.out_path)
    assert corpus.ids() == tuple(f"fn{i:07d}" for i in range(5))
    assert corpus.labels() == (0, 1, 2, 3, 4)
    assert read_log(report)["multi_label"] == []


def test_unflagged_rows_are_dropped(tmp_path):
    src = write_hdf5(
        tmp_path / "in.h5",
        ["a();", "b();", "c();"],
        [flag_row(0), flag_row(), flag_row(4)],
    )
    report = convert_corpus(src, tmp_path / "out.jsonl")
    assert (report.kept, report.dropped) == (2, 1)
    corpus = load_corpus(report.out_path)
    # Ids stay positional, so dropped rows leave a visible gap.
    assert corpus.ids() == ("fn0000000", "fn0000002")
    assert read_log(report)["dropped_unflagged"] == 1


@pytest.mark.parametrize(
    "indices, label",
    [
        ((0, 1), 1),
        ((3, 4), 3),
        ((0, 2, 4), 2),
        ((0, 4), 0),
        ((0, 1, 2, 3, 4), 2),
    ],
)
def test_multi_label_rows_resolve_to_the_rarest_class(tmp_path, indices, label):
    src = write_hdf5(tmp_path / "in.h5", ["f();"], [flag_row(*indices)])
    report = convert_corpus(src, tmp_path / "out.jsonl")
    assert report.resolved == 1
    assert load_corpus(report.out_path).labels() == (label,)
    (entry,) = read_log(report)["multi_label"]
    assert entry == {
        "id": "fn0000000",
        "flags": [CLASS_FLAGS[i] for i in sorted(indices)],
        "label": label,
    }


def test_code_round_trip_is_exact(tmp_path):
    codes = [
        'int π(void) {\n\treturn "κλμ";\t}\n',
        "void f() { /* spaced  out */ }",
    ]
    src = write_hdf5(tmp_path / "in.h5", codes, [flag_row(0), flag_row(1)])
    report = convert_corpus(src, tmp_path / "out.jsonl")
    assert [s.code for s in load_corpus(report.out_path)] == codes


def test_output_is_a_canonical_corpus(tmp_path):
    n = 25
    codes = [f"int g{i}();" for i in range(n)]
    src = write_hdf5(tmp_path / "in.h5", codes, [flag_row(i % 5) for i in range(n)])
    report = convert_corpus(src, tmp_path / "out.jsonl")
    corpus = load_corpus(report.out_path)
    assert len(corpus) == n
    assert corpus.distribution().counts == (5, 5, 5, 5, 5)


def test_empty_input_gives_an_empty_corpus(tmp_path):
    src = write_hdf5(tmp_path / "in.h5", [], np.zeros((0, 5)))
    report = convert_corpus(src, tmp_path / "out.jsonl")
    assert (report.total, report.kept) == (0, 0)
    assert len(load_corpus(report.out_path)) == 0


def test_missing_dataset_is_an_error(tmp_path):
    path = tmp_path / "in.h5"
    with h5py.File(path, "w") as handle:
        handle.create_dataset("functionSource", data=["f();"], dtype=h5py.string_dtype())
        for name in CLASS_FLAGS[:-1]:
            handle.create_dataset(name, data=[True])
    with pytest.raises(AdapterError, match="CWE-other"):
        convert_corpus(path, tmp_path / "out.jsonl")


def test_flag_length_mismatch_is_an_error(tmp_path):
    path = tmp_path / "in.h5"
    with h5py.File(path, "w") as handle:
        handle.create_dataset(
            "functionSource", data=["f();", "g();"], dtype=h5py.string_dtype()
        )
        for name in CLASS_FLAGS:
            handle.create_dataset(name, data=[True])
    with pytest.raises(AdapterError, match="do not match 2 source rows"):
        convert_corpus(path, tmp_path / "out.jsonl")


def test_unreadable_input_is_an_error(tmp_path):
    with pytest.raises(AdapterError, match="cannot read"):
        convert_corpus(tmp_path / "nope.h5", tmp_path / "out.jsonl")
    not_hdf5 = tmp_path / "plain.txt"
    not_hdf5.write_text("not an hdf5 file")
    with pytest.raises(AdapterError, match="cannot read"):
        convert_corpus(not_hdf5, tmp_path / "out.jsonl")


def test_conversion_is_deterministic(tmp_path):
    codes = [f"int h{i}();" for i in range(20)]
    flags = [flag_row(i % 5, (i + 1) % 5) for i in range(20)]
    src = write_hdf5(tmp_path / "in.h5", codes, flags)
    first = convert_corpus(src, tmp_path / "a.jsonl")
    second = convert_corpus(src, tmp_path / "b.jsonl")
    assert first.out_path.read_bytes() == second.out_path.read_bytes()
    assert read_log(first)["multi_label"] == read_log(second)["multi_label"]


def test_log_defaults_next_to_the_output(tmp_path):
    src = write_hdf5(tmp_path / "in.h5", ["f();"], [flag_row(3)])
    report = convert_corpus(src, tmp_path / "out.jsonl")
    assert report.log_path == tmp_path / "out.jsonl.log.json"
    log = read_log(report)
    assert log["total"] == 1 and log["kept"] == 1 and log["source"] == "in.h5"
