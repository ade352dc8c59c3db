"""Shared train/predict contract for the embedding-based classifier suite.

Every variant trains deterministically from (spec, data, seed) and predicts
only classes it saw during training: trainers work in a compacted label
space of the classes present, and probability rows are expanded back to the
full class set with zeros for absent classes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with integer class labels in [0, K)."""

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError(f"features must be a nonempty n x d matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("features must be finite")
        if y.shape != (x.shape[0],):
            raise ValueError("labels must be one class index per row")
        k = len(self.class_names)
        if k < 1:
            raise ValueError("need at least one class name")
        if y.min() < 0 or y.max() >= k:
            raise ValueError(f"labels must lie in [0, {k})")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def k(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class PredictionSet:
    """Hard predictions plus, where the model defines them, probability rows."""

    labels: np.ndarray
    probabilities: np.ndarray | None = None

    def __post_init__(self):
        if self.probabilities is not None:
            probs = np.asarray(self.probabilities, dtype=np.float64)
            if np.any(probs < 0):
                raise ValueError("probabilities must be nonnegative")
            if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-9):
                raise ValueError("probability rows must sum to 1")
            if not np.array_equal(np.argmax(probs, axis=1), self.labels):
                raise ValueError("argmax of probabilities must equal the hard prediction")


class TrainedModel:
    """A fitted classifier; immutable, safe for concurrent prediction."""

    kind: str = ""

    def __init__(self, spec, class_names: tuple[str, ...], present: np.ndarray):
        self.spec = spec
        self.class_names = tuple(class_names)
        self.present = np.asarray(present, dtype=np.int64)
        self.d: int = 0  # set by subclasses after fitting

    def _check_width(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.d:
            raise ValueError(
                f"feature width {x.shape[1] if x.ndim == 2 else '?'} does not match "
                f"training width {self.d}"
            )
        return x

    def _expand(self, compact_labels: np.ndarray,
                compact_probs: np.ndarray | None) -> PredictionSet:
        """Map compact (present-class) outputs back to the full class space."""
        labels = self.present[compact_labels]
        probs = None
        if compact_probs is not None:
            probs = np.zeros((compact_probs.shape[0], len(self.class_names)))
            probs[:, self.present] = compact_probs
        return PredictionSet(labels=labels, probabilities=probs)

    def predict(self, features: np.ndarray) -> PredictionSet:
        raise NotImplementedError

    def params_to_json(self) -> dict:
        raise NotImplementedError


def compact_labels(data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """(present class indices sorted ascending, labels remapped onto 0..len-1)."""
    present = np.unique(data.labels)
    if len(present) == 1:
        warnings.warn(
            f"training data contains a single class "
            f"({data.class_names[int(present[0])]!r}); fitting a constant predictor",
            stacklevel=3,
        )
    lookup = {int(c): i for i, c in enumerate(present)}
    compact = np.array([lookup[int(y)] for y in data.labels], dtype=np.int64)
    return present, compact


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], k))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out
