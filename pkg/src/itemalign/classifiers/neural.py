"""Single-hidden-layer perceptron trained with minibatch SGD.

Architecture is fixed: one ReLU hidden layer, softmax output, mean
cross-entropy loss. Initialization and the per-epoch shuffles are keyed
off MLPSpec.seed, so training is reproducible. When a validation set is
supplied, the parameters from the best validation-accuracy epoch are
restored at the end (ties keep the earlier epoch).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import derive_seed
from .base import Dataset, PredictionSet, TrainedModel, compact_labels, one_hot, softmax_rows


@dataclass(frozen=True)
class MLPSpec:
    hidden: int = 256
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1 or self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("invalid MLP hyperparameters")


def mlp_forward(params, x):
    w1, b1, w2, b2 = params
    z1 = x @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    return z1, a1, softmax_rows(a1 @ w2 + b2)


def mlp_loss_grad(params, x, y):
    """Mean cross-entropy of the two-layer net and its parameter gradients."""
    w1, b1, w2, b2 = params
    n = x.shape[0]
    z1, a1, probs = mlp_forward(params, x)
    loss = float(-np.log(probs[np.arange(n), y] + 1e-300).mean())
    dlogits = (probs - one_hot(y, w2.shape[1])) / n
    grad_w2 = a1.T @ dlogits
    grad_b2 = dlogits.sum(axis=0)
    da1 = dlogits @ w2.T
    dz1 = da1 * (z1 > 0.0)
    grad_w1 = x.T @ dz1
    grad_b1 = dz1.sum(axis=0)
    return loss, (grad_w1, grad_b1, grad_w2, grad_b2)


def mlp_init(spec: MLPSpec, d: int, k: int):
    rng = np.random.default_rng(derive_seed(spec.seed, "mlp-init"))
    w1 = rng.standard_normal((d, spec.hidden)) * np.sqrt(2.0 / d)
    b1 = np.zeros(spec.hidden)
    w2 = rng.standard_normal((spec.hidden, k)) * np.sqrt(1.0 / spec.hidden)
    b2 = np.zeros(k)
    return w1, b1, w2, b2


class MLPModel(TrainedModel):
    kind = "mlp"

    def __init__(self, spec, class_names, present, params, best_epoch):
        super().__init__(spec, class_names, present)
        self.params = params
        self.best_epoch = best_epoch
        self.d = params[0].shape[0]

    def predict(self, features: np.ndarray) -> PredictionSet:
        x = self._check_width(features)
        _, _, probs = mlp_forward(self.params, x)
        return self._expand(np.argmax(probs, axis=1), probs)

    def params_to_json(self) -> dict:
        w1, b1, w2, b2 = self.params
        return {
            "w1": w1.tolist(), "b1": b1.tolist(),
            "w2": w2.tolist(), "b2": b2.tolist(),
            "best_epoch": self.best_epoch,
        }


def train_mlp(spec: MLPSpec, data: Dataset, validation: Dataset | None = None) -> MLPModel:
    present, y = compact_labels(data)
    k = len(present)
    x = data.features
    n = data.n
    params = list(mlp_init(spec, data.d, k))

    val_x = val_y = None
    if validation is not None:
        if validation.d != data.d or validation.class_names != data.class_names:
            raise ValueError("validation set must share feature width and class names")
        val_x = validation.features
        # validation labels mapped into the compact space; unseen classes can
        # never be matched, which only lowers the score used for selection
        lookup = {int(c): i for i, c in enumerate(present)}
        val_y = np.array([lookup.get(int(v), -1) for v in validation.labels])

    best = None  # (accuracy, epoch, params snapshot)
    for epoch in range(spec.epochs):
        order = np.random.default_rng(
            derive_seed(spec.seed, "shuffle", epoch)).permutation(n)
        for start in range(0, n, spec.batch_size):
            batch = order[start:start + spec.batch_size]
            _, grads = mlp_loss_grad(params, x[batch], y[batch])
            for p, g in zip(params, grads):
                p -= spec.learning_rate * g
        if val_x is not None:
            _, _, probs = mlp_forward(params, val_x)
            acc = float((np.argmax(probs, axis=1) == val_y).mean())
            if best is None or acc > best[0]:
                best = (acc, epoch, [p.copy() for p in params])

    best_epoch = spec.epochs - 1
    if best is not None:
        _, best_epoch, params = best
    return MLPModel(spec, data.class_names, present, tuple(params), best_epoch)
