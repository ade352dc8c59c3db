"""Average pairwise cosine similarity between item groups.

The headline quantity for a pair of embedding groups A (m vectors) and
B (n vectors) is

    (1 / mn) * sum_i sum_j  a_i . b_j / (|a_i| |b_j|)

accumulated with an order-independent compensated summation, so the same
groups give bitwise-identical results regardless of chunking or pair
order. Group membership is named by (corpus, level, label-index)
selectors, and tables of pairs are sectioned into between-corpus and
within-corpus rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..corpus import Corpus
from ..embeddings import EmbeddingSet


@dataclass(frozen=True)
class GroupSelector:
    """Names one labeled group of item embeddings, e.g. (test-A, skill, 4)."""

    corpus: str
    level: str
    label: int

    def __post_init__(self):
        if self.level not in ("domain", "skill"):
            raise ValueError(f"level must be 'domain' or 'skill', got {self.level!r}")
        bound = 4 if self.level == "domain" else 10
        if not 1 <= self.label <= bound:
            raise ValueError(f"{self.level} index out of range: {self.label}")

    def describe(self) -> str:
        return f"{self.corpus} {self.level} {self.label}"


class GroupIndex:
    """Resolves selectors against named (corpus, embeddings) pairs."""

    def __init__(self, sources: dict[str, tuple[Corpus, EmbeddingSet]]):
        self.sources = dict(sources)
        for name, (corpus, embs) in self.sources.items():
            missing = [it.id for it in corpus.items if it.id not in embs.records]
            if missing:
                raise ValueError(
                    f"corpus {name!r}: no embedding for item {missing[0]!r} "
                    f"({len(missing)} missing in total)")

    def ids_of(self, selector: GroupSelector) -> list[str]:
        try:
            corpus, _ = self.sources[selector.corpus]
        except KeyError:
            raise ValueError(f"unknown corpus {selector.corpus!r}") from None
        if selector.level == "domain":
            ids = [it.id for it in corpus.items if it.domain == selector.label]
        else:
            ids = [it.id for it in corpus.items if it.skill == selector.label]
        if not ids:
            raise ValueError(f"empty group: {selector.describe()}")
        return ids

    def matrix_of(self, selector: GroupSelector) -> np.ndarray:
        ids = self.ids_of(selector)
        _, embs = self.sources[selector.corpus]
        return np.stack([embs.vector(i) for i in ids])


def _unit_rows(matrix: np.ndarray, side: str) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1:
        raise ValueError(f"group {side} must be a nonempty matrix of vectors")
    norms = np.linalg.norm(m, axis=1)
    zero = np.nonzero(norms == 0.0)[0]
    if zero.size:
        raise ValueError(f"group {side} contains a zero vector at row {int(zero[0])}")
    return m / norms[:, None]


def avg_pairwise_cosine(group_a: np.ndarray, group_b: np.ndarray) -> float:
    """Mean cosine over all cross pairs; symmetric and scale-invariant."""
    a = _unit_rows(group_a, "A")
    b = _unit_rows(group_b, "B")
    sims = a @ b.T
    # fsum gives the correctly rounded total, independent of accumulation order
    return math.fsum(sims.ravel().tolist()) / (a.shape[0] * b.shape[0])


@dataclass(frozen=True)
class SimilarityRow:
    group_a: GroupSelector
    group_b: GroupSelector
    value: float

    @property
    def section(self) -> str:
        return "within" if self.group_a.corpus == self.group_b.corpus else "between"


@dataclass(frozen=True)
class SimilarityTable:
    rows: tuple[SimilarityRow, ...] = field(default=())

    def __post_init__(self):
        for row in self.rows:
            if not -1.0 - 1e-12 <= row.value <= 1.0 + 1e-12:
                raise ValueError(f"cosine out of range: {row.value}")

    def section_rows(self, section: str) -> list[SimilarityRow]:
        return [r for r in self.rows if r.section == section]


def cosine_table(pairs, index: GroupIndex) -> SimilarityTable:
    """One AvgCos row per selector pair, in input order."""
    rows = []
    for sel_a, sel_b in pairs:
        value = avg_pairwise_cosine(index.matrix_of(sel_a), index.matrix_of(sel_b))
        rows.append(SimilarityRow(sel_a, sel_b, value))
    return SimilarityTable(tuple(rows))


def render_similarity_csv(table: SimilarityTable) -> str:
    lines = ["section,group_a,group_b,avg_cosine"]
    for section in ("between", "within"):
        for row in table.section_rows(section):
            lines.append(f"{section},{row.group_a.describe()},"
                         f"{row.group_b.describe()},{row.value:.3f}")
    return "\n".join(lines) + "\n"


def render_similarity_markdown(table: SimilarityTable) -> str:
    lines = [
        "| Group A | Group B | Avg cosine |",
        "| --- | --- | --- |",
    ]
    for section in ("between", "within"):
        rows = table.section_rows(section)
        if rows:
            lines.append(f"| **{section}-corpus** | | |")
        for row in rows:
            lines.append(f"| {row.group_a.describe()} | {row.group_b.describe()} "
                         f"| {row.value:.3f} |")
    return "\n".join(lines) + "\n"
