"""Stacked-ensemble orchestration.

The pipeline runs the standard stacking recipe: split the corpus,
downsample the training member, fit base models on it, score the
validation member to build meta-features (the concatenated five-class
probability vectors, in declared model order), train every requested
meta-classifier kind on those features, pick a winner by stratified
cross-validation within the validation set, and only then touch the
test member for the final reports.

Test labels are read through one choke point, ``_corpus_labels``, and
only during the ``evaluate_test`` stage; ``label_access_hook`` lets a
test build observe every access and verify that ordering.

``ablation_sweep`` evaluates many base-model subsets while sharing the
splits and base trainings; ``run_pipeline`` is the single-subset case.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import meta
from .base_models import (
    BUILTIN_KINDS,
    BaseModel,
    ExternalModel,
    ProbTable,
    TrainConfig,
    load_external_probs,
    predict_proba_base,
    train_builtin,
)
from .corpus import (
    NUM_CLASSES,
    ClassDistribution,
    Corpus,
    clean,
    downsample,
    load_corpus,
    stratified_split,
)
from .errors import (
    ConfigError,
    CoverageError,
    PipelineError,
    ProbFormatError,
)
from .meta import KIND_LABELS, KIND_ORDER, canonical_kind
from .metrics import EvalReport, evaluate
from .rng import derive

TOOL_VERSION = "0.1.0"

META_FEATURE_SUM_TOLERANCE = 1e-5

# Instrumentation seam: when set, called as hook(role=..., stage=...) on
# every label read of a split member.  Production runs leave it None.
label_access_hook: Callable | None = None


def _corpus_labels(corpus: Corpus, role: str, stage: str) -> np.ndarray:
    if label_access_hook is not None:
        label_access_hook(role=role, stage=stage)
    return np.array(corpus.labels(), dtype=np.int64)


@dataclass
class MetaDataset:
    """Meta-features: one row per sample, five columns per base model."""

    Z: np.ndarray
    y: np.ndarray
    ids: tuple[str, ...]
    model_order: tuple[str, ...]


def _prob_matrix(model: BaseModel, corpus: Corpus) -> np.ndarray:
    if isinstance(model, ExternalModel):
        missing = [s.id for s in corpus if s.id not in model.table.rows]
        if missing:
            shown = ", ".join(repr(i) for i in missing[:20])
            more = f" (+{len(missing) - 20} more)" if len(missing) > 20 else ""
            raise CoverageError(
                f"external model {model.name!r} is missing probabilities for "
                f"{len(missing)} sample id(s): {shown}{more}"
            )
    return np.vstack([predict_proba_base(model, s) for s in corpus])


def _validate_meta_matrix(Z: np.ndarray, k: int) -> None:
    if np.any(Z < 0) or np.any(Z > 1):
        raise ValueError("meta-feature entries must lie in [0, 1]")
    sums = Z.sum(axis=1)
    if np.any(np.abs(sums - k) > META_FEATURE_SUM_TOLERANCE):
        worst = float(np.abs(sums - k).max())
        raise ValueError(
            f"meta-feature rows must sum to {k} "
            f"(worst deviation {worst:.3e})"
        )


def build_meta_features(
    models: Sequence[BaseModel],
    corpus: Corpus,
    role: str = "adhoc",
    stage: str = "build_meta_features",
) -> MetaDataset:
    """Concatenate base-model probability vectors in model order."""
    if not models:
        raise ValueError("need at least one base model")
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ValueError(f"base model names must be unique, got {names}")
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    Z = np.hstack([_prob_matrix(m, corpus) for m in models])
    _validate_meta_matrix(Z, len(models))
    y = _corpus_labels(corpus, role, stage)
    return MetaDataset(Z=Z, y=y, ids=corpus.ids(), model_order=tuple(names))


def select_meta(
    candidates: Sequence[tuple], metric: str = "accuracy"
) -> object:
    """Pick the winner among (model, validation report) pairs.

    Ties break by the fixed kind order LR < RF < SVM < GBT, then by
    position in the candidate list.
    """
    if not candidates:
        raise ValueError("no candidates to select from")
    best_index = min(
        range(len(candidates)),
        key=lambda i: (
            -candidates[i][1].metric(metric),
            KIND_ORDER.index(candidates[i][0].kind),
            i,
        ),
    )
    return candidates[best_index][0]


@dataclass(frozen=True)
class BaseModelSpec:
    name: str
    kind: str  # a builtin kind or "external"
    train: TrainConfig | None = None
    paths: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, raw: dict) -> "BaseModelSpec":
        known = {
            "name", "kind", "dim", "epochs", "learning_rate", "l2", "seed",
            "path", "paths",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"base model: unknown key(s) {sorted(unknown)}")
        for key in ("name", "kind"):
            if key not in raw:
                raise ConfigError(f"base model: missing key {key!r}")
        name, kind = str(raw["name"]), str(raw["kind"])
        if kind == "external":
            paths = raw.get("paths", [raw["path"]] if "path" in raw else [])
            if not paths:
                raise ConfigError(
                    f"external model {name!r}: need 'path' or 'paths'"
                )
            return cls(name=name, kind=kind, paths=tuple(str(p) for p in paths))
        if kind not in BUILTIN_KINDS:
            raise ConfigError(
                f"base model {name!r}: unknown kind {kind!r}; expected one of "
                f"{', '.join(BUILTIN_KINDS)} or external"
            )
        fields = {
            k: raw[k]
            for k in ("dim", "epochs", "learning_rate", "l2", "seed")
            if k in raw
        }
        try:
            train = TrainConfig(**fields)
        except ValueError as exc:
            raise ConfigError(f"base model {name!r}: {exc}") from None
        return cls(name=name, kind=kind, train=train)

    def to_dict(self) -> dict:
        if self.kind == "external":
            return {"name": self.name, "kind": self.kind, "paths": list(self.paths)}
        return {
            "name": self.name,
            "kind": self.kind,
            "dim": self.train.dim,
            "epochs": self.train.epochs,
            "learning_rate": self.train.learning_rate,
            "l2": self.train.l2,
            "seed": self.train.seed,
        }


@dataclass(frozen=True)
class DataConfig:
    corpus: str | None = None
    format: str = "jsonl"
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    splits: tuple[tuple[str, str], ...] = ()  # (member, path) pairs

    @classmethod
    def from_dict(cls, raw: dict) -> "DataConfig":
        unknown = set(raw) - {"corpus", "format", "ratios", "splits"}
        if unknown:
            raise ConfigError(f"data: unknown key(s) {sorted(unknown)}")
        has_corpus = "corpus" in raw
        has_splits = "splits" in raw
        if has_corpus == has_splits:
            raise ConfigError("data: give exactly one of 'corpus' or 'splits'")
        if has_corpus:
            ratios = raw.get("ratios", (0.8, 0.1, 0.1))
            if len(ratios) != 3:
                raise ConfigError(f"data: expected 3 ratios, got {len(ratios)}")
            return cls(
                corpus=str(raw["corpus"]),
                format=str(raw.get("format", "jsonl")),
                ratios=tuple(float(r) for r in ratios),
            )
        splits = raw["splits"]
        missing = {"train", "validation", "test"} - set(splits)
        if missing:
            raise ConfigError(f"data: splits missing member(s) {sorted(missing)}")
        unknown = set(splits) - {"train", "validation", "test"}
        if unknown:
            raise ConfigError(f"data: splits has unknown member(s) {sorted(unknown)}")
        return cls(
            splits=tuple(
                (member, str(splits[member]))
                for member in ("train", "validation", "test")
            ),
            format=str(raw.get("format", "jsonl")),
        )

    def to_dict(self) -> dict:
        if self.corpus is not None:
            return {
                "corpus": self.corpus,
                "format": self.format,
                "ratios": list(self.ratios),
            }
        return {"splits": dict(self.splits), "format": self.format}


_SELECTION_METRICS = (
    "accuracy", "precision", "recall", "f1", "auc_macro", "auc_weighted"
)


@dataclass(frozen=True)
class PipelineConfig:
    data: DataConfig
    base_models: tuple[BaseModelSpec, ...]
    meta_kinds: tuple[str, ...] = KIND_ORDER
    selection_metric: str = "accuracy"
    seed: int = 42
    caps: tuple[int, ...] | None = None
    subsets: tuple[tuple[str, ...], ...] | None = None
    cv_folds: int = 5
    meta_overrides: tuple[tuple[str, tuple], ...] = ()

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        known = {
            "data", "base_models", "meta_classifiers", "selection_metric",
            "seed", "caps", "subsets", "cv_folds", "meta_overrides",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"config: unknown key(s) {sorted(unknown)}")
        if "data" not in raw:
            raise ConfigError("config: missing 'data'")
        if "base_models" not in raw or not raw["base_models"]:
            raise ConfigError("config: need at least one base model")

        data = DataConfig.from_dict(raw["data"])
        base_models = tuple(
            BaseModelSpec.from_dict(spec) for spec in raw["base_models"]
        )
        names = [spec.name for spec in base_models]
        if len(set(names)) != len(names):
            raise ConfigError(f"config: duplicate base model names in {names}")

        kinds = tuple(
            canonical_kind(k)
            for k in raw.get("meta_classifiers", list(KIND_ORDER))
        )
        if not kinds:
            raise ConfigError("config: need at least one meta-classifier kind")
        if len(set(kinds)) != len(kinds):
            raise ConfigError("config: duplicate meta-classifier kinds")

        metric = raw.get("selection_metric", "accuracy")
        if metric not in _SELECTION_METRICS:
            raise ConfigError(
                f"config: unknown selection metric {metric!r}; expected one "
                f"of {', '.join(_SELECTION_METRICS)}"
            )

        caps = raw.get("caps")
        if caps is not None:
            if isinstance(caps, int):
                caps = [caps] * NUM_CLASSES
            if len(caps) != NUM_CLASSES or any(
                not isinstance(c, int) or c < 1 for c in caps
            ):
                raise ConfigError(
                    f"config: caps must be {NUM_CLASSES} integers >= 1"
                )
            caps = tuple(caps)

        subsets = raw.get("subsets")
        if subsets is not None:
            if not subsets:
                raise ConfigError("config: subsets must be non-empty when given")
            parsed = []
            for subset in subsets:
                if not subset:
                    raise ConfigError("config: empty subset")
                bad = [n for n in subset if n not in names]
                if bad:
                    raise ConfigError(
                        f"config: subset names {bad} not among base models"
                    )
                if len(set(subset)) != len(subset):
                    raise ConfigError(f"config: duplicate names in subset {subset}")
                parsed.append(tuple(subset))
            if len(set(parsed)) != len(parsed):
                raise ConfigError("config: duplicate subsets")
            subsets = tuple(parsed)

        cv_folds = raw.get("cv_folds", 5)
        if not isinstance(cv_folds, int) or cv_folds < 2:
            raise ConfigError("config: cv_folds must be an integer >= 2")

        overrides_raw = raw.get("meta_overrides", {})
        overrides = []
        for kind_name, params in overrides_raw.items():
            kind = canonical_kind(kind_name)
            try:
                meta.make_params(kind, params)
            except (TypeError, ValueError) as exc:
                raise ConfigError(
                    f"config: bad meta_overrides for {kind}: {exc}"
                ) from None
            overrides.append((kind, tuple(sorted(params.items()))))

        seed = raw.get("seed", 42)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError("config: seed must be an integer")

        return cls(
            data=data,
            base_models=base_models,
            meta_kinds=kinds,
            selection_metric=metric,
            seed=seed,
            caps=caps,
            subsets=subsets,
            cv_folds=cv_folds,
            meta_overrides=tuple(overrides),
        )

    def to_dict(self) -> dict:
        out = {
            "data": self.data.to_dict(),
            "base_models": [spec.to_dict() for spec in self.base_models],
            "meta_classifiers": list(self.meta_kinds),
            "selection_metric": self.selection_metric,
            "seed": self.seed,
            "cv_folds": self.cv_folds,
        }
        if self.caps is not None:
            out["caps"] = list(self.caps)
        if self.subsets is not None:
            out["subsets"] = [list(s) for s in self.subsets]
        if self.meta_overrides:
            out["meta_overrides"] = {
                kind: dict(params) for kind, params in self.meta_overrides
            }
        return out

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def params_for(self, kind: str):
        for name, params in self.meta_overrides:
            if name == kind:
                return meta.make_params(kind, dict(params))
        return meta.default_params(kind)


@dataclass
class CandidateRow:
    subset: tuple[str, ...]
    kind: str
    label: str
    validation: EvalReport
    test: EvalReport

    def to_dict(self) -> dict:
        return {
            "subset": list(self.subset),
            "kind": self.kind,
            "label": self.label,
            "validation": self.validation.to_dict(),
            "test": self.test.to_dict(),
        }


@dataclass
class PipelineResult:
    subset: tuple[str, ...]
    subset_label: str
    section: str  # "stacked" for one base model, "ensemble" for several
    rows: list[CandidateRow]
    selected_kind: str
    selection_metric: str
    selected_score: float
    provenance: dict
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "subset": list(self.subset),
            "subset_label": self.subset_label,
            "section": self.section,
            "rows": [row.to_dict() for row in self.rows],
            "selected_kind": self.selected_kind,
            "selection_metric": self.selection_metric,
            "selected_score": self.selected_score,
            "provenance": dict(self.provenance),
            "warnings": list(self.warnings),
        }


@dataclass
class RunOutput:
    individuals: list[EvalReport]
    pipelines: list[PipelineResult]
    provenance: dict
    distributions: dict
    timings: dict = field(default_factory=dict)  # not part of the result document

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "provenance": dict(self.provenance),
            "distributions": dict(self.distributions),
            "individuals": [report.to_dict() for report in self.individuals],
            "pipelines": [pipeline.to_dict() for pipeline in self.pipelines],
        }

    def to_json_bytes(self) -> bytes:
        return (
            json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"
        ).encode("utf-8")


def subset_label(subset: Sequence[str]) -> str:
    return "+".join(subset)


def row_label(subset: Sequence[str], kind: str) -> str:
    prefix = "Stacking" if len(subset) == 1 else "Ensemble Stacking"
    return f"{prefix} {subset_label(subset)} ({KIND_LABELS[kind]})"


def _stratified_fold_ids(y: np.ndarray, n_folds: int, rng) -> np.ndarray:
    fold = np.empty(len(y), dtype=np.int64)
    for cls_label in sorted(set(y.tolist())):
        group = np.flatnonzero(y == cls_label).tolist()
        rng.shuffle(group)
        for position, row in enumerate(group):
            fold[row] = position % n_folds
    return fold


def _cross_validated_report(
    kind: str,
    Z: np.ndarray,
    y: np.ndarray,
    fold_ids: np.ndarray | None,
    params,
    label: str,
) -> tuple[EvalReport, list[str]]:
    """Out-of-fold validation report; degrades to resubstitution when
    the smallest class cannot populate two folds."""
    warnings: list[str] = []
    if fold_ids is None:
        model = meta.fit(kind, Z, y, params)
        report = evaluate(
            y, model.predict_proba(Z), model=label, allow_missing_classes=True
        )
        warnings.append(
            "validation score is resubstitution (too few samples per class "
            "for cross-validation)"
        )
        report.warnings.extend(warnings)
        return report, warnings
    oof = np.zeros((len(y), NUM_CLASSES))
    for f in sorted(set(fold_ids.tolist())):
        held = fold_ids == f
        model = meta.fit(kind, Z[~held], y[~held], params)
        oof[held] = model.predict_proba(Z[held])
    report = evaluate(y, oof, model=label, allow_missing_classes=True)
    return report, warnings


class _Stopwatch:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def stage(self, name: str):
        return _StageTimer(self, name)


class _StageTimer:
    def __init__(self, watch: _Stopwatch, name: str):
        self.watch = watch
        self.name = name

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.watch.timings[self.name] = (
            self.watch.timings.get(self.name, 0.0)
            + time.perf_counter()
            - self.start
        )
        return False


def _wrap_stage_errors(stage: str, func):
    try:
        return func()
    except (PipelineError, CoverageError, ProbFormatError, FileNotFoundError):
        raise
    except Exception as exc:
        raise PipelineError(stage, str(exc)) from exc


def _load_data(config: PipelineConfig) -> tuple[Corpus, Corpus, Corpus]:
    data = config.data
    if data.corpus is not None:
        raw = load_corpus(data.corpus, data.format)
        cleaned = clean(raw)
        split = stratified_split(cleaned, data.ratios, config.seed)
        return split.train, split.validation, split.test
    members = dict(data.splits)
    return (
        load_corpus(members["train"], data.format),
        load_corpus(members["validation"], data.format),
        load_corpus(members["test"], data.format),
    )


def _train_base(spec: BaseModelSpec, train: Corpus) -> BaseModel:
    if spec.kind == "external":
        rows: dict[str, np.ndarray] = {}
        for path in spec.paths:
            table = load_external_probs(path)
            for sample_id, probs in table.rows.items():
                if sample_id in rows:
                    raise ProbFormatError(
                        f"external model {spec.name!r}: id {sample_id!r} "
                        f"appears in more than one file"
                    )
                rows[sample_id] = probs
        return ExternalModel(name=spec.name, table=ProbTable(spec.name, rows))
    return train_builtin(spec.kind, train, spec.train, name=spec.name)


def ablation_sweep(config: PipelineConfig) -> RunOutput:
    """Run the full pipeline, sharing data preparation and base-model
    training across every requested base-model subset."""
    watch = _Stopwatch()

    with watch.stage("load"):
        train, validation, test = _load_data(config)

    with watch.stage("prepare"):
        if config.caps is not None:
            train = downsample(train, config.caps, config.seed)
        # Test-member labels stay untouched until the evaluate_test stage;
        # its distribution row is filled in there.
        distributions = {
            "train": ClassDistribution.from_labels(
                _corpus_labels(train, "train", "prepare")
            ).to_dict(),
            "validation": ClassDistribution.from_labels(
                _corpus_labels(validation, "validation", "prepare")
            ).to_dict(),
        }

    with watch.stage("train_bases"):
        models = _wrap_stage_errors(
            "train_bases",
            lambda: [_train_base(spec, train) for spec in config.base_models],
        )
        by_name = {model.name: model for model in models}

    subsets = config.subsets or (tuple(s.name for s in config.base_models),)

    with watch.stage("meta_validation"):
        def _validation_work():
            val_probs = {m.name: _prob_matrix(m, validation) for m in models}
            y_val = _corpus_labels(validation, "validation", "meta_validation")
            counts = np.bincount(y_val, minlength=NUM_CLASSES)
            smallest = int(counts[counts > 0].min())
            folds = min(config.cv_folds, smallest)
            fold_ids = (
                _stratified_fold_ids(y_val, folds, derive(config.seed, "cv"))
                if folds >= 2
                else None
            )
            validation_reports: dict[tuple, EvalReport] = {}
            fitted: dict[tuple, object] = {}
            for subset in subsets:
                Z_val = np.hstack([val_probs[name] for name in subset])
                for kind in config.meta_kinds:
                    params = config.params_for(kind)
                    label = row_label(subset, kind)
                    report, _ = _cross_validated_report(
                        kind, Z_val, y_val, fold_ids, params, label
                    )
                    validation_reports[(subset, kind)] = report
                    fitted[(subset, kind)] = meta.fit(kind, Z_val, y_val, params)
            return val_probs, validation_reports, fitted, folds

        val_probs, validation_reports, fitted, folds_used = _wrap_stage_errors(
            "meta_validation", _validation_work
        )

    with watch.stage("select"):
        selected: dict[tuple, str] = {}
        for subset in subsets:
            candidates = [
                (fitted[(subset, kind)], validation_reports[(subset, kind)])
                for kind in config.meta_kinds
            ]
            winner = select_meta(candidates, config.selection_metric)
            selected[subset] = winner.kind

    with watch.stage("evaluate_test"):
        def _test_work():
            test_probs = {m.name: _prob_matrix(m, test) for m in models}
            y_test = _corpus_labels(test, "test", "evaluate_test")
            individuals = [
                evaluate(
                    y_test,
                    test_probs[spec.name],
                    model=spec.name,
                    allow_missing_classes=True,
                )
                for spec in config.base_models
            ]
            test_reports: dict[tuple, EvalReport] = {}
            for subset in subsets:
                Z_test = np.hstack([test_probs[name] for name in subset])
                for kind in config.meta_kinds:
                    test_reports[(subset, kind)] = evaluate(
                        y_test,
                        fitted[(subset, kind)].predict_proba(Z_test),
                        model=row_label(subset, kind),
                        allow_missing_classes=True,
                    )
            return individuals, test_reports

        individuals, test_reports = _wrap_stage_errors(
            "evaluate_test", _test_work
        )
        distributions["test"] = ClassDistribution.from_labels(
            _corpus_labels(test, "test", "evaluate_test")
        ).to_dict()

    provenance = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "selection_metric": config.selection_metric,
        "cv_folds_requested": config.cv_folds,
        "cv_folds_used": folds_used,
        "base_model_order": [spec.name for spec in config.base_models],
        "tool_version": TOOL_VERSION,
    }

    pipelines = []
    for subset in subsets:
        rows = [
            CandidateRow(
                subset=subset,
                kind=kind,
                label=row_label(subset, kind),
                validation=validation_reports[(subset, kind)],
                test=test_reports[(subset, kind)],
            )
            for kind in config.meta_kinds
        ]
        warnings = sorted(
            {w for row in rows for w in row.validation.warnings}
            | {w for row in rows for w in row.test.warnings}
        )
        pipelines.append(
            PipelineResult(
                subset=subset,
                subset_label=subset_label(subset),
                section="stacked" if len(subset) == 1 else "ensemble",
                rows=rows,
                selected_kind=selected[subset],
                selection_metric=config.selection_metric,
                selected_score=validation_reports[
                    (subset, selected[subset])
                ].metric(config.selection_metric),
                provenance={
                    "config_hash": provenance["config_hash"],
                    "seed": config.seed,
                    "model_order": list(subset),
                },
                warnings=warnings,
            )
        )

    return RunOutput(
        individuals=individuals,
        pipelines=pipelines,
        provenance=provenance,
        distributions=distributions,
        timings=watch.timings,
    )


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Single-subset pipeline: all configured base models in one stack."""
    if config.subsets is not None and len(config.subsets) != 1:
        raise ConfigError(
            "run_pipeline expects a single subset; use ablation_sweep for more"
        )
    return ablation_sweep(config).pipelines[0]
