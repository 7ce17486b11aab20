"""Rendering of run results as text, CSV, or canonical JSON.

The text table mirrors the usual three-section presentation: individual
models, stacks over a single base model, and ensemble stacks.  Values
are percentages at two decimals (half-even); the best value in each
metric column across the whole table is flagged with ``*``.  The AUC
column shows the macro average; CSV and JSON carry both averages.
"""

from __future__ import annotations

import csv
import io
import json

from .corpus import CLASS_NAMES, NUM_CLASSES
from .meta import KIND_LABELS
from .metrics import format_percent

SECTION_INDIVIDUAL = "Individual Models"
SECTION_STACKED = "Stacked Models with Individual Base Models"
SECTION_ENSEMBLE = "Ensemble Stacking Models"

_METRIC_COLUMNS = (
    ("Accuracy (%)", "accuracy"),
    ("Precision (%)", "precision"),
    ("Recall (%)", "recall"),
    ("F1-Score (%)", "f1"),
    ("AUC-Score (%)", "auc_macro"),
)


def _table_rows(document: dict) -> list[tuple[str, str, dict]]:
    """(section, label, test report dict) for every table row."""
    rows = []
    for report in document.get("individuals", []):
        rows.append((SECTION_INDIVIDUAL, report["model"], report))
    for section_key, section_name in (
        ("stacked", SECTION_STACKED),
        ("ensemble", SECTION_ENSEMBLE),
    ):
        for pipeline in document.get("pipelines", []):
            if pipeline["section"] != section_key:
                continue
            for row in pipeline["rows"]:
                rows.append((section_name, row["label"], row["test"]))
    return rows


def render_text(document: dict) -> str:
    rows = _table_rows(document)
    if not rows:
        return "no results\n"

    rendered = [
        (section, label, [format_percent(report[key]) for _, key in _METRIC_COLUMNS])
        for section, label, report in rows
    ]
    best = []
    for column in range(len(_METRIC_COLUMNS)):
        best.append(max(float(values[column]) for _, _, values in rendered))
    flagged = [
        (
            section,
            label,
            [
                value + ("*" if float(value) == best[column] else "")
                for column, value in enumerate(values)
            ],
        )
        for section, label, values in rendered
    ]

    label_width = max(len("Model"), max(len(label) for _, label, _ in flagged))
    widths = [
        max(
            len(_METRIC_COLUMNS[column][0]),
            max(len(values[column]) for _, _, values in flagged),
        )
        for column in range(len(_METRIC_COLUMNS))
    ]

    def format_line(label: str, cells: list[str]) -> str:
        parts = [label.ljust(label_width)]
        parts.extend(cell.rjust(widths[i]) for i, cell in enumerate(cells))
        return "  ".join(parts).rstrip()

    lines = []
    for section_name in (SECTION_INDIVIDUAL, SECTION_STACKED, SECTION_ENSEMBLE):
        section_rows = [r for r in flagged if r[0] == section_name]
        if not section_rows:
            continue
        lines.append(section_name)
        lines.append(
            format_line("Model", [name for name, _ in _METRIC_COLUMNS])
        )
        for _, label, values in section_rows:
            lines.append(format_line(label, values))
        lines.append("")

    for pipeline in document.get("pipelines", []):
        lines.append(
            "Selected for {}: {} (validation {} {})".format(
                pipeline["subset_label"],
                KIND_LABELS[pipeline["selected_kind"]],
                pipeline["selection_metric"],
                format_percent(pipeline["selected_score"]),
            )
        )
    distributions = document.get("distributions")
    if distributions:
        lines.append("")
        lines.append(render_distribution(distributions))
    return "\n".join(lines).rstrip("\n") + "\n"


def render_distribution(distributions: dict) -> str:
    """Class-by-member count table."""
    members = [m for m in ("train", "validation", "test") if m in distributions]
    header = ["Class"] + [m.capitalize() for m in members]
    body = []
    for c in range(NUM_CLASSES):
        row = [f"{c} ({CLASS_NAMES[c]})"]
        row.extend(str(distributions[m]["counts"][c]) for m in members)
        body.append(row)
    totals = ["Total"] + [str(distributions[m]["total"]) for m in members]
    body.append(totals)

    widths = [
        max(len(header[i]), max(len(row[i]) for row in body))
        for i in range(len(header))
    ]
    lines = ["Class distribution"]
    lines.append(
        "  ".join(
            header[i].ljust(widths[i]) if i == 0 else header[i].rjust(widths[i])
            for i in range(len(header))
        ).rstrip()
    )
    for row in body:
        lines.append(
            "  ".join(
                row[i].ljust(widths[i]) if i == 0 else row[i].rjust(widths[i])
                for i in range(len(row))
            ).rstrip()
        )
    return "\n".join(lines) + "\n"


_CSV_FIELDS = (
    "section",
    "split",
    "model",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "auc_macro",
    "auc_weighted",
    "averaging",
    "warnings",
    "confusion",
)


def _csv_record(section: str, split: str, report: dict) -> dict:
    return {
        "section": section,
        "split": split,
        "model": report["model"],
        "accuracy": repr(report["accuracy"]),
        "precision": repr(report["precision"]),
        "recall": repr(report["recall"]),
        "f1": repr(report["f1"]),
        "auc_macro": repr(report["auc_macro"]),
        "auc_weighted": repr(report["auc_weighted"]),
        "averaging": report["averaging"],
        "warnings": "; ".join(report["warnings"]),
        "confusion": ";".join(
            " ".join(str(v) for v in row) for row in report["confusion"]
        ),
    }


def render_csv(document: dict) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=_CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for report in document.get("individuals", []):
        writer.writerow(_csv_record("individual", "test", report))
    for pipeline in document.get("pipelines", []):
        for row in pipeline["rows"]:
            writer.writerow(
                _csv_record(pipeline["section"], "validation", row["validation"])
            )
            writer.writerow(_csv_record(pipeline["section"], "test", row["test"]))
    return buffer.getvalue()


def render_json(document: dict) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def render(document: dict, format: str) -> str:
    if format == "text":
        return render_text(document)
    if format == "csv":
        return render_csv(document)
    if format == "json":
        return render_json(document)
    raise ValueError(f"unknown render format {format!r}")
