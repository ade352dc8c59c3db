"""Experiment runners: size/condition ablations, model comparison, transfer.

Every cell of an ablation grid is an independent task keyed by
(master seed, size, condition): the subsample and the 60/20/20 resplit
are derived from that key alone, so cells can run in any order or in
parallel and still produce byte-identical result tables.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classifiers import Dataset, ModelSpec, TrainedModel, display_name, train
from .corpus import Corpus, InputCondition, LabelScheme, stratified_split, subsample
from .embeddings import EmbeddingSet
from .metrics import ClassificationReport, evaluate
from .rng import derive_seed

DEFAULT_SPLIT = (0.6, 0.2, 0.2)


def build_dataset(corpus: Corpus, embeddings: EmbeddingSet, level: str,
                  ids=None) -> Dataset:
    """Features from the embedding set, labels from the corpus, at one level."""
    if level not in ("domain", "skill"):
        raise ValueError(f"level must be 'domain' or 'skill', got {level!r}")
    if ids is None:
        ids = [it.id for it in corpus.items]
    by_id = {it.id: it for it in corpus.items}
    missing = [i for i in ids if i not in embeddings.records]
    if missing:
        raise ValueError(f"no embedding for item {missing[0]!r} "
                         f"({len(missing)} missing in total)")
    features = np.stack([embeddings.vector(i) for i in ids])
    if level == "domain":
        labels = np.array([by_id[i].domain - 1 for i in ids])
        names = corpus.scheme.domains
    else:
        labels = np.array([by_id[i].skill - 1 for i in ids])
        names = corpus.scheme.skills
    return Dataset(features=features, labels=labels, class_names=tuple(names))


def split_datasets(corpus: Corpus, embeddings: EmbeddingSet, level: str,
                   seed: int, fractions=DEFAULT_SPLIT):
    """(train, validation, test) Datasets from a seeded stratified split."""
    assignment = stratified_split(corpus, fractions, seed=seed, stratify_by=level)
    parts = []
    for name in ("train", "validation", "test"):
        ids = assignment.ids_of(name)
        parts.append(build_dataset(corpus, embeddings, level, ids) if ids else None)
    return tuple(parts)


# -- Ablation ------------------------------------------------------------------


def default_sizes(corpus_size: int) -> tuple[int, ...]:
    return tuple(s for s in (500, 750, 1000) if s < corpus_size) + (corpus_size,)


@dataclass(frozen=True)
class AblationGrid:
    sizes: tuple[int, ...]
    conditions: tuple[InputCondition, ...]
    level: str
    model: ModelSpec
    seed: int = 0
    fractions: tuple[float, float, float] = DEFAULT_SPLIT

    def __post_init__(self):
        if not self.sizes or not self.conditions:
            raise ValueError("grid needs at least one size and one condition")
        if any(s < 1 for s in self.sizes):
            raise ValueError("sizes must be positive")
        if self.level not in ("domain", "skill"):
            raise ValueError(f"level must be 'domain' or 'skill', got {self.level!r}")


@dataclass(frozen=True)
class ExperimentCell:
    size: int
    condition: InputCondition
    report: ClassificationReport
    wall_time: float


def _run_cell(grid: AblationGrid, corpus: Corpus, embeddings: EmbeddingSet,
              size: int, condition: InputCondition) -> ExperimentCell:
    started = time.perf_counter()
    cell_seed = derive_seed(grid.seed, size, condition.value)
    sub = subsample(corpus, size, seed=cell_seed)
    train_d, val_d, test_d = split_datasets(sub, embeddings, grid.level,
                                            seed=cell_seed, fractions=grid.fractions)
    if train_d is None or test_d is None:
        raise ValueError(f"cell (size={size}, condition={condition.value}) "
                         f"left an empty train or test split")
    model = train(grid.model, train_d, validation=val_d)
    pred = model.predict(test_d.features)
    rep = evaluate(test_d.labels, pred.labels, test_d.class_names)
    return ExperimentCell(size, condition, rep, time.perf_counter() - started)


def run_ablation(grid: AblationGrid, corpus: Corpus,
                 embeddings: dict[InputCondition, EmbeddingSet],
                 workers: int = 1) -> list[ExperimentCell]:
    """One trained-and-evaluated cell per (size, condition), complete grid."""
    for condition in grid.conditions:
        if condition not in embeddings:
            raise ValueError(f"missing embeddings for condition {condition.value!r}")
        have = embeddings[condition].records
        absent = [it.id for it in corpus.items if it.id not in have]
        if absent:
            raise ValueError(f"condition {condition.value!r} lacks embeddings for "
                             f"{len(absent)} items (first: {absent[0]!r})")
    for size in grid.sizes:
        if size > len(corpus):
            raise ValueError(f"size {size} exceeds corpus size {len(corpus)}")

    keys = [(size, cond) for size in grid.sizes for cond in grid.conditions]
    if workers <= 1:
        cells = [_run_cell(grid, corpus, embeddings[c], s, c) for s, c in keys]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {key: pool.submit(_run_cell, grid, corpus,
                                        embeddings[key[1]], *key)
                       for key in keys}
            # assembly follows grid order, whatever order the futures finish in
            cells = [futures[key].result() for key in keys]
    return cells


_METRIC_COLUMNS = ("accuracy", "precision", "recall", "weighted_f1", "kappa")


def _cell_metrics(cell: ExperimentCell) -> tuple[float, ...]:
    r = cell.report
    return (r.accuracy, r.weighted_precision, r.weighted_recall, r.weighted_f1, r.kappa)


def render_ablation_csv(cells) -> str:
    """Full-precision CSV; wall-time is deliberately left out so reruns of the
    same seed are byte-identical."""
    lines = ["size,condition," + ",".join(_METRIC_COLUMNS)]
    for cell in cells:
        values = ",".join(repr(float(v)) for v in _cell_metrics(cell))
        lines.append(f"{cell.size},{cell.condition.value},{values}")
    return "\n".join(lines) + "\n"


def render_ablation_markdown(cells) -> str:
    lines = [
        "| Size | Condition | Accuracy | Precision | Recall | Weighted F1 | Cohen's Kappa |",
        "|---|---|---|---|---|---|---|",
    ]
    last_size = None
    for cell in cells:
        shown = str(cell.size) if cell.size != last_size else ""
        last_size = cell.size
        values = " | ".join(f"{v:.3f}" for v in _cell_metrics(cell))
        lines.append(f"| {shown} | {cell.condition.value} | {values} |")
    return "\n".join(lines) + "\n"


# -- Model comparison ----------------------------------------------------------


def run_model_comparison(models, train_data: Dataset, test_data: Dataset,
                         validation: Dataset | None = None, workers: int = 1
                         ) -> dict[str, ClassificationReport]:
    """One report per model, keyed by display name, in input order.

    Models train independently, so the worker count never changes results.
    """
    models = list(models)
    if not models:
        raise ValueError("no models given")
    if workers < 1:
        raise ValueError("workers must be positive")

    def fit_and_score(spec):
        model = train(spec, train_data, validation=validation)
        pred = model.predict(test_data.features)
        return evaluate(test_data.labels, pred.labels, test_data.class_names)

    if workers == 1 or len(models) == 1:
        results = [fit_and_score(spec) for spec in models]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fit_and_score, models))

    reports: dict[str, ClassificationReport] = {}
    for spec, rep in zip(models, results):
        name = display_name(spec)
        if name in reports:
            suffix = 2
            while f"{name} #{suffix}" in reports:
                suffix += 1
            name = f"{name} #{suffix}"
        reports[name] = rep
    return reports


# -- Cross-corpus generalization -------------------------------------------------


@dataclass(frozen=True)
class CrossTestSpec:
    train_corpus: str
    test_corpus: str
    level: str
    models: tuple[ModelSpec, ...]
    seed: int = 0
    fractions: tuple[float, float, float] = DEFAULT_SPLIT

    def __post_init__(self):
        if self.level not in ("domain", "skill"):
            raise ValueError(f"level must be 'domain' or 'skill', got {self.level!r}")
        if not self.models:
            raise ValueError("no models given")


@dataclass(frozen=True)
class GeneralizationResult:
    spec: CrossTestSpec
    internal: dict[str, ClassificationReport]  # on the train corpus's test split
    external: dict[str, ClassificationReport]  # on the whole external corpus


def run_generalization(spec: CrossTestSpec, corpora: dict[str, Corpus],
                       embeddings: dict[str, EmbeddingSet]) -> GeneralizationResult:
    """Train on corpus A's training portion, evaluate on all of corpus B.

    Input compatibility (shared label scheme, same embedding provider and
    condition, same width) is verified before any training starts.
    """
    try:
        corpus_a = corpora[spec.train_corpus]
        corpus_b = corpora[spec.test_corpus]
        embs_a = embeddings[spec.train_corpus]
        embs_b = embeddings[spec.test_corpus]
    except KeyError as exc:
        raise ValueError(f"unknown corpus {exc.args[0]!r}") from None
    if corpus_a.scheme != corpus_b.scheme:
        raise ValueError("corpora use different label schemes")
    ha, hb = embs_a.header, embs_b.header
    for field_name in ("provider", "condition", "dim"):
        va, vb = getattr(ha, field_name), getattr(hb, field_name)
        if va != vb:
            raise ValueError(f"embedding {field_name} mismatch: {va!r} vs {vb!r}")

    train_d, val_d, test_d = split_datasets(corpus_a, embs_a, spec.level,
                                            seed=spec.seed, fractions=spec.fractions)
    external_d = build_dataset(corpus_b, embs_b, spec.level)
    internal: dict[str, ClassificationReport] = {}
    external: dict[str, ClassificationReport] = {}
    for model_spec in spec.models:
        name = display_name(model_spec)
        if name in external:
            suffix = 2
            while f"{name} #{suffix}" in external:
                suffix += 1
            name = f"{name} #{suffix}"
        model = train(model_spec, train_d, validation=val_d)
        if test_d is not None:
            pred = model.predict(test_d.features)
            internal[name] = evaluate(test_d.labels, pred.labels, test_d.class_names)
        pred = model.predict(external_d.features)
        external[name] = evaluate(external_d.labels, pred.labels,
                                  external_d.class_names)
    return GeneralizationResult(spec=spec, internal=internal, external=external)


# -- Hierarchy consistency --------------------------------------------------------


def skills_to_domains(skill_labels, scheme: LabelScheme) -> np.ndarray:
    """Map 0-based skill labels to the 0-based domains that own them."""
    mapping = np.array([scheme.skill_to_domain[s] - 1 for s in range(1, 11)])
    return mapping[np.asarray(skill_labels)]


def domain_report_from_skills(true_skills, predicted_skills,
                              scheme: LabelScheme) -> ClassificationReport:
    """Evaluate skill predictions at domain granularity.

    Whenever the skill is right the domain is right too, so this report's
    accuracy is always at least the skill-level accuracy.
    """
    true_d = skills_to_domains(true_skills, scheme)
    pred_d = skills_to_domains(predicted_skills, scheme)
    return evaluate(true_d, pred_d, tuple(scheme.domains))
