"""Confusion matrices and the five-metric evaluation protocol.

All metrics are computed in exact rational arithmetic from the integer
confusion counts and converted to float only at the API boundary.  In
particular `accuracy == weighted recall` holds exactly, which is the
support-weighted averaging signature visible in published model-comparison
tables (one published Random Forest row violates it; that row's averaging
is unexplained and is not reproduced here).

Zero-division convention: precision/recall/F1 of a class with an empty
column/row is 0.  Values are stored at full precision and rounded to three
decimals only for rendering.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i][j] = number of items with true class i predicted as j."""

    counts: tuple[tuple[int, ...], ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        k = len(self.class_names)
        if k < 1:
            raise ValueError("need at least one class")
        if len(self.counts) != k or any(len(row) != k for row in self.counts):
            raise ValueError("counts must be a KxK matrix matching class_names")
        if any(c < 0 for row in self.counts for c in row):
            raise ValueError("counts must be nonnegative")

    @property
    def k(self) -> int:
        return len(self.class_names)

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def row_sums(self) -> list[int]:
        return [sum(row) for row in self.counts]

    def col_sums(self) -> list[int]:
        return [sum(row[j] for row in self.counts) for j in range(self.k)]


def confusion(
    true_labels,
    predicted_labels,
    k: int,
    class_names: tuple[str, ...] | None = None,
) -> ConfusionMatrix:
    """Count (true, predicted) pairs into a KxK matrix."""
    true_labels = list(true_labels)
    predicted_labels = list(predicted_labels)
    if len(true_labels) != len(predicted_labels):
        raise ValueError(
            f"label sequences differ in length: {len(true_labels)} vs {len(predicted_labels)}"
        )
    if not true_labels:
        raise ValueError("cannot build a confusion matrix from empty label sequences")
    counts = [[0] * k for _ in range(k)]
    for t, p in zip(true_labels, predicted_labels):
        if not (0 <= t < k) or not (0 <= p < k):
            raise ValueError(f"label pair ({t}, {p}) out of range for K={k}")
        counts[t][p] += 1
    names = class_names or tuple(f"class {i}" for i in range(k))
    return ConfusionMatrix(tuple(tuple(row) for row in counts), tuple(names))


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    kappa: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class_precision: tuple[float, ...]
    per_class_recall: tuple[float, ...]
    per_class_f1: tuple[float, ...]
    support: tuple[int, ...]
    confusion: ConfusionMatrix

    @property
    def class_names(self) -> tuple[str, ...]:
        return self.confusion.class_names


def report(cm: ConfusionMatrix) -> ClassificationReport:
    """Accuracy, weighted precision/recall/F1, Cohen's kappa, per-class values.

    kappa = (p_o - p_e) / (1 - p_e) with p_e from the marginal products; a
    perfectly agreeing degenerate matrix (p_e = 1) gets kappa = 1.
    """
    total = cm.total
    if total < 1:
        raise ValueError("confusion matrix is empty")
    k = cm.k
    rows = cm.row_sums()
    cols = cm.col_sums()
    diag = [cm.counts[i][i] for i in range(k)]

    precision = [Fraction(diag[i], cols[i]) if cols[i] else Fraction(0) for i in range(k)]
    recall = [Fraction(diag[i], rows[i]) if rows[i] else Fraction(0) for i in range(k)]
    f1 = [
        2 * p * r / (p + r) if p + r > 0 else Fraction(0)
        for p, r in zip(precision, recall)
    ]

    def weighted(values: list[Fraction]) -> Fraction:
        return sum((rows[i] * values[i] for i in range(k)), Fraction(0)) / total

    accuracy = Fraction(sum(diag), total)
    p_e = sum((Fraction(rows[i] * cols[i], total * total) for i in range(k)), Fraction(0))
    kappa = Fraction(1) if p_e == 1 else (accuracy - p_e) / (1 - p_e)

    return ClassificationReport(
        accuracy=float(accuracy),
        weighted_precision=float(weighted(precision)),
        weighted_recall=float(weighted(recall)),
        weighted_f1=float(weighted(f1)),
        kappa=float(kappa),
        macro_precision=float(sum(precision, Fraction(0)) / k),
        macro_recall=float(sum(recall, Fraction(0)) / k),
        macro_f1=float(sum(f1, Fraction(0)) / k),
        per_class_precision=tuple(float(p) for p in precision),
        per_class_recall=tuple(float(r) for r in recall),
        per_class_f1=tuple(float(f) for f in f1),
        support=tuple(rows),
        confusion=cm,
    )


def evaluate(true_labels, predicted_labels, class_names: tuple[str, ...]) -> ClassificationReport:
    """Convenience: confusion + report in one step."""
    cm = confusion(true_labels, predicted_labels, len(class_names), class_names)
    return report(cm)


# ---------------------------------------------------------------------------
# Rendering

_SUMMARY_COLUMNS = ("Precision", "Recall", "Accuracy", "Weighted F1", "Cohen's Kappa")


def _summary_values(rep: ClassificationReport) -> tuple[float, ...]:
    return (rep.weighted_precision, rep.weighted_recall, rep.accuracy,
            rep.weighted_f1, rep.kappa)


def render_report_csv(reports: dict[str, ClassificationReport]) -> str:
    lines = ["model,precision,recall,accuracy,weighted_f1,kappa"]
    for name, rep in reports.items():
        values = ",".join(f"{v:.3f}" for v in _summary_values(rep))
        lines.append(f"{name},{values}")
    return "\n".join(lines) + "\n"


def render_report_markdown(reports: dict[str, ClassificationReport]) -> str:
    header = "| Model | " + " | ".join(_SUMMARY_COLUMNS) + " |"
    rule = "|" + "---|" * (len(_SUMMARY_COLUMNS) + 1)
    lines = [header, rule]
    for name, rep in reports.items():
        values = " | ".join(f"{v:.3f}" for v in _summary_values(rep))
        lines.append(f"| {name} | {values} |")
    return "\n".join(lines) + "\n"


def confusion_csv(cm: ConfusionMatrix) -> str:
    """Confusion matrix as CSV with a header row and column of class names."""
    lines = ["true\\predicted," + ",".join(cm.class_names)]
    for name, row in zip(cm.class_names, cm.counts):
        lines.append(name + "," + ",".join(str(c) for c in row))
    return "\n".join(lines) + "\n"


def per_class_f1_table(reports: dict[str, ClassificationReport]) -> list[list[str]]:
    """Rows of [model, F1 class 1, ..., F1 class K], 3-decimal strings.

    The first row is the header.  All reports must share class names.
    """
    if not reports:
        raise ValueError("no reports given")
    names = None
    for rep in reports.values():
        if names is None:
            names = rep.class_names
        elif rep.class_names != names:
            raise ValueError(
                f"reports disagree on class names: {names} vs {rep.class_names}"
            )
    table = [["Model", *names]]
    for model, rep in reports.items():
        table.append([model, *(f"{v:.3f}" for v in rep.per_class_f1)])
    return table


def render_table_csv(table: list[list[str]]) -> str:
    def cell(value: str) -> str:
        return f'"{value}"' if ("," in value or '"' in value) else value

    return "\n".join(",".join(cell(v) for v in row) for row in table) + "\n"


def render_table_markdown(table: list[list[str]]) -> str:
    header, *rows = table
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"
