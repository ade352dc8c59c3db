"""k-nearest-neighbor voting with a fully deterministic tie policy.

Neighbors are ranked by (Euclidean distance, training label, training row
index), so equidistant points resolve the same way on every platform. Vote
ties go to the smaller class index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Dataset, PredictionSet, TrainedModel, compact_labels


@dataclass(frozen=True)
class KNNSpec:
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")


class KNNModel(TrainedModel):
    kind = "knn"

    def __init__(self, spec, class_names, present, train_x, train_y):
        super().__init__(spec, class_names, present)
        self.train_x = train_x
        self.train_y = train_y  # compact labels
        self.d = train_x.shape[1]

    def predict(self, features: np.ndarray) -> PredictionSet:
        x = self._check_width(features)
        n_train = self.train_x.shape[0]
        k_eff = min(self.spec.k, n_train)
        n_classes = len(self.present)
        order_idx = np.arange(n_train)
        labels = np.empty(x.shape[0], dtype=np.int64)
        probs = np.empty((x.shape[0], n_classes))
        for i, row in enumerate(x):
            diff = self.train_x - row
            dist = np.sqrt((diff * diff).sum(axis=1))
            order = np.lexsort((order_idx, self.train_y, dist))[:k_eff]
            counts = np.bincount(self.train_y[order], minlength=n_classes)
            labels[i] = int(np.argmax(counts))
            probs[i] = counts / k_eff
        return self._expand(labels, probs)

    def params_to_json(self) -> dict:
        return {
            "train_x": self.train_x.tolist(),
            "train_y": self.train_y.tolist(),
        }


def train_knn(spec: KNNSpec, data: Dataset, validation: Dataset | None = None) -> KNNModel:
    present, y = compact_labels(data)
    return KNNModel(spec, data.class_names, present, data.features.copy(), y)
