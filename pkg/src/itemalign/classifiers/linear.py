"""Linear classifiers: multinomial logistic regression and a one-vs-rest SVM.

Both are trained from scratch on numpy. Softmax regression uses full-batch
gradient descent from a zero initialization, so runs are deterministic
without any seed. The SVM uses a seeded Pegasos-style subgradient schedule
with the regularization strength lambda = 1 / (C * n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import derive_seed
from .base import Dataset, PredictionSet, TrainedModel, compact_labels, one_hot, softmax_rows


@dataclass(frozen=True)
class SoftmaxRegressionSpec:
    learning_rate: float = 0.1
    l2: float = 1e-4
    max_iters: int = 500
    tol: float = 1e-7

    def __post_init__(self):
        if self.learning_rate <= 0 or self.max_iters < 1 or self.l2 < 0 or self.tol < 0:
            raise ValueError("invalid softmax regression hyperparameters")


def softmax_loss_grad(weights: np.ndarray, bias: np.ndarray, x: np.ndarray,
                      y: np.ndarray, l2: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy + (l2/2)*||W||^2 and its gradients.

    The bias column is left out of the penalty.
    """
    n = x.shape[0]
    probs = softmax_rows(x @ weights + bias)
    # log through the stabilized probs; they are bounded away from 0 by the shift
    nll = -np.log(probs[np.arange(n), y] + 1e-300).mean()
    loss = nll + 0.5 * l2 * float((weights * weights).sum())
    delta = (probs - one_hot(y, weights.shape[1])) / n
    grad_w = x.T @ delta + l2 * weights
    grad_b = delta.sum(axis=0)
    return float(loss), grad_w, grad_b


class SoftmaxRegressionModel(TrainedModel):
    kind = "softmax_regression"

    def __init__(self, spec, class_names, present, weights, bias, loss_history):
        super().__init__(spec, class_names, present)
        self.weights = weights
        self.bias = bias
        self.loss_history = loss_history
        self.d = weights.shape[0]

    def predict(self, features: np.ndarray) -> PredictionSet:
        x = self._check_width(features)
        probs = softmax_rows(x @ self.weights + self.bias)
        return self._expand(np.argmax(probs, axis=1), probs)

    def params_to_json(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "loss_history": [float(v) for v in self.loss_history],
        }


def train_softmax_regression(spec: SoftmaxRegressionSpec, data: Dataset,
                             validation: Dataset | None = None) -> SoftmaxRegressionModel:
    present, y = compact_labels(data)
    k = len(present)
    x = data.features
    weights = np.zeros((data.d, k))
    bias = np.zeros(k)
    history: list[float] = []
    prev = None
    for _ in range(spec.max_iters):
        loss, grad_w, grad_b = softmax_loss_grad(weights, bias, x, y, spec.l2)
        history.append(loss)
        if prev is not None and abs(prev - loss) < spec.tol:
            break
        prev = loss
        weights -= spec.learning_rate * grad_w
        bias -= spec.learning_rate * grad_b
    return SoftmaxRegressionModel(spec, data.class_names, present, weights, bias, history)


@dataclass(frozen=True)
class LinearSVMSpec:
    c: float = 1.0
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.c <= 0 or self.epochs < 1:
            raise ValueError("invalid SVM hyperparameters")


class LinearSVMModel(TrainedModel):
    kind = "linear_svm"

    def __init__(self, spec, class_names, present, weights, bias):
        super().__init__(spec, class_names, present)
        self.weights = weights  # k x d, one hyperplane per present class
        self.bias = bias
        self.d = weights.shape[1]

    def decision_function(self, features: np.ndarray) -> np.ndarray:
        x = self._check_width(features)
        return x @ self.weights.T + self.bias

    def predict(self, features: np.ndarray) -> PredictionSet:
        scores = self.decision_function(features)
        return self._expand(np.argmax(scores, axis=1), None)

    def params_to_json(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias.tolist()}


def train_linear_svm(spec: LinearSVMSpec, data: Dataset,
                     validation: Dataset | None = None) -> LinearSVMModel:
    present, y = compact_labels(data)
    k = len(present)
    x = data.features
    n = data.n
    lam = 1.0 / (spec.c * n)
    weights = np.zeros((k, data.d))
    bias = np.zeros(k)
    for cls in range(k):
        sign = np.where(y == cls, 1.0, -1.0)
        rng = np.random.default_rng(derive_seed(spec.seed, "svm", cls))
        w = weights[cls]
        b = 0.0
        t = 0
        for _ in range(spec.epochs):
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (lam * t)
                margin = sign[i] * (w @ x[i] + b)
                # bias shrinks with the weights (augmented-feature view);
                # an undamped bias keeps the huge first-step kicks forever
                shrink = 1.0 - eta * lam
                w *= shrink
                b *= shrink
                if margin < 1.0:
                    w += eta * sign[i] * x[i]
                    b += eta * sign[i]
        bias[cls] = b
    return LinearSVMModel(spec, data.class_names, present, weights, bias)
