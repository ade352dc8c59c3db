"""Gaussian naive Bayes over embedding features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Dataset, PredictionSet, TrainedModel, compact_labels, softmax_rows


@dataclass(frozen=True)
class GaussianNBSpec:
    var_smoothing: float = 1e-9

    def __post_init__(self):
        if self.var_smoothing < 0:
            raise ValueError("var_smoothing must be nonnegative")


class GaussianNBModel(TrainedModel):
    kind = "gaussian_nb"

    def __init__(self, spec, class_names, present, means, variances, log_priors):
        super().__init__(spec, class_names, present)
        self.means = means          # k x d
        self.variances = variances  # k x d, already smoothed
        self.log_priors = log_priors
        self.d = means.shape[1]

    def _joint_log_likelihood(self, x: np.ndarray) -> np.ndarray:
        out = np.empty((x.shape[0], self.means.shape[0]))
        for cls in range(self.means.shape[0]):
            var = self.variances[cls]
            diff = x - self.means[cls]
            ll = -0.5 * (np.log(2.0 * np.pi * var) + diff * diff / var).sum(axis=1)
            out[:, cls] = ll + self.log_priors[cls]
        return out

    def predict(self, features: np.ndarray) -> PredictionSet:
        x = self._check_width(features)
        jll = self._joint_log_likelihood(x)
        # argmax takes the first maximum, so exact ties go to the smaller class index
        probs = softmax_rows(jll)
        return self._expand(np.argmax(jll, axis=1), probs)

    def params_to_json(self) -> dict:
        return {
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "log_priors": self.log_priors.tolist(),
        }


def train_gaussian_nb(spec: GaussianNBSpec, data: Dataset,
                      validation: Dataset | None = None) -> GaussianNBModel:
    present, y = compact_labels(data)
    k = len(present)
    x = data.features
    means = np.empty((k, data.d))
    variances = np.empty((k, data.d))
    counts = np.empty(k)
    for cls in range(k):
        rows = x[y == cls]
        counts[cls] = rows.shape[0]
        means[cls] = rows.mean(axis=0)
        variances[cls] = rows.var(axis=0)
    # floor keyed to the largest overall feature variance, so all-constant
    # features (and single-example classes) stay numerically safe
    eps = spec.var_smoothing * float(x.var(axis=0).max())
    if eps == 0.0:
        eps = max(spec.var_smoothing, 1e-12)
    variances += eps
    log_priors = np.log(counts / counts.sum())
    return GaussianNBModel(spec, data.class_names, present, means, variances, log_priors)
