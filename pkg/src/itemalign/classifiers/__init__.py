"""Supervised classifier suite with one train/predict contract.

Nine named model families map onto seven implementations (the boosting
trio shares one). All of them are written here on numpy; nothing is
delegated to an external ML library, so behavior is identical on any
platform with the same inputs and seeds.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from .base import Dataset, PredictionSet, TrainedModel
from .bayes import GaussianNBModel, GaussianNBSpec, train_gaussian_nb
from .linear import (
    LinearSVMModel,
    LinearSVMSpec,
    SoftmaxRegressionModel,
    SoftmaxRegressionSpec,
    softmax_loss_grad,
    train_linear_svm,
    train_softmax_regression,
)
from .neighbors import KNNModel, KNNSpec, train_knn
from .neural import MLPModel, MLPSpec, mlp_init, mlp_loss_grad, train_mlp
from .trees import (
    GradientBoostingModel,
    GradientBoostingSpec,
    RandomForestModel,
    RandomForestSpec,
    lightgbm_spec,
    train_gradient_boosting,
    train_random_forest,
    xgboost_spec,
)

ModelSpec = (
    SoftmaxRegressionSpec | LinearSVMSpec | GaussianNBSpec | RandomForestSpec
    | GradientBoostingSpec | MLPSpec | KNNSpec
)

_TRAINERS = {
    SoftmaxRegressionSpec: train_softmax_regression,
    LinearSVMSpec: train_linear_svm,
    GaussianNBSpec: train_gaussian_nb,
    RandomForestSpec: train_random_forest,
    GradientBoostingSpec: train_gradient_boosting,
    MLPSpec: train_mlp,
    KNNSpec: train_knn,
}

_SPEC_BY_KIND = {
    "softmax_regression": SoftmaxRegressionSpec,
    "linear_svm": LinearSVMSpec,
    "gaussian_nb": GaussianNBSpec,
    "random_forest": RandomForestSpec,
    "gradient_boosting": GradientBoostingSpec,
    "mlp": MLPSpec,
    "knn": KNNSpec,
}

# command-line / config names, including the boosting aliases
SPEC_FACTORIES = {
    "softmax_regression": SoftmaxRegressionSpec,
    "linear_svm": LinearSVMSpec,
    "gaussian_nb": GaussianNBSpec,
    "random_forest": RandomForestSpec,
    "gradient_boosting": GradientBoostingSpec,
    "xgboost": xgboost_spec,
    "lightgbm": lightgbm_spec,
    "mlp": MLPSpec,
    "knn": KNNSpec,
}

MODEL_NAMES = tuple(SPEC_FACTORIES)

_DISPLAY = {
    "softmax_regression": "Logistic Regression",
    "linear_svm": "SVM",
    "gaussian_nb": "Naive Bayes",
    "random_forest": "Random Forest",
    "gradient_boosting": "Gradient Boosting",
    "xgboost": "XGBoost",
    "lightgbm": "LightGBM",
    "mlp": "MLP",
    "knn": "KNN",
}


def spec_from_name(name: str, **overrides) -> ModelSpec:
    """Build a model spec from its command-line name, applying overrides."""
    try:
        factory = SPEC_FACTORIES[name]
    except KeyError:
        raise ValueError(
            f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}"
        ) from None
    return factory(**overrides)


def display_name(spec: ModelSpec) -> str:
    if isinstance(spec, GradientBoostingSpec):
        return _DISPLAY[spec.family]
    for name, cls in _SPEC_FACTORIES_FLAT.items():
        if type(spec) is cls:
            return _DISPLAY[name]
    raise ValueError(f"unknown spec type {type(spec).__name__}")


_SPEC_FACTORIES_FLAT = {k: v for k, v in SPEC_FACTORIES.items()
                        if isinstance(v, type)}


def train(spec: ModelSpec, data: Dataset, validation: Dataset | None = None) -> TrainedModel:
    """Fit the model `spec` names; deterministic given (spec, data, seed)."""
    try:
        trainer = _TRAINERS[type(spec)]
    except KeyError:
        raise TypeError(f"unknown model spec type {type(spec).__name__}") from None
    return trainer(spec, data, validation)


def _flatten(arrays):
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays])


def _max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float((np.abs(analytic - numeric) / denom).max())


def gradient_check(spec: ModelSpec, data: Dataset, step: float = 1e-5) -> float:
    """Compare analytic gradients against central finite differences.

    Evaluated at a seeded random parameter point on the given (small)
    dataset; returns the max relative error over all parameters.
    """
    if data.n > 50 or data.d > 10:
        raise ValueError("gradient check expects a small dataset (n <= 50, d <= 10)")
    y = data.labels
    k = int(y.max()) + 1
    x = data.features

    if isinstance(spec, SoftmaxRegressionSpec):
        rng = np.random.default_rng(12345)
        shapes = [(data.d, k), (k,)]
        params = [rng.standard_normal(s) * 0.5 for s in shapes]

        def objective(flat):
            w, b = _unflatten(flat, shapes)
            loss, _, _ = softmax_loss_grad(w, b, x, y, spec.l2)
            return loss

        _, gw, gb = softmax_loss_grad(params[0], params[1], x, y, spec.l2)
        analytic = _flatten([gw, gb])
    elif isinstance(spec, MLPSpec):
        init = mlp_init(spec, data.d, k)
        shapes = [p.shape for p in init]
        params = list(init)

        def objective(flat):
            loss, _ = mlp_loss_grad(_unflatten(flat, shapes), x, y)
            return loss

        _, grads = mlp_loss_grad(tuple(params), x, y)
        analytic = _flatten(grads)
    else:
        raise TypeError("gradient check is defined for softmax regression and MLP specs")

    flat = _flatten(params)
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + step
        hi = objective(bumped)
        bumped[i] = flat[i] - step
        lo = objective(bumped)
        numeric[i] = (hi - lo) / (2.0 * step)
    return _max_relative_error(analytic, numeric)


def _unflatten(flat: np.ndarray, shapes) -> tuple:
    out = []
    pos = 0
    for s in shapes:
        size = int(np.prod(s))
        out.append(flat[pos:pos + size].reshape(s))
        pos += size
    return tuple(out)


MODEL_FORMAT = "itemalign-model"
MODEL_FORMAT_VERSION = 1


def save_model(model: TrainedModel, path) -> None:
    """Serialize a fitted model to versioned JSON; floats keep full precision."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "spec": dataclasses.asdict(model.spec),
        "class_names": list(model.class_names),
        "present": [int(c) for c in model.present],
        "params": model.params_to_json(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a model file: format {doc.get('format')!r}")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')!r}")
    kind = doc["kind"]
    try:
        spec = _SPEC_BY_KIND[kind](**doc["spec"])
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}") from None
    names = tuple(doc["class_names"])
    present = np.asarray(doc["present"], dtype=np.int64)
    p = doc["params"]
    arr = lambda v: np.asarray(v, dtype=np.float64)
    if kind == "softmax_regression":
        return SoftmaxRegressionModel(spec, names, present, arr(p["weights"]),
                                      arr(p["bias"]), list(p["loss_history"]))
    if kind == "linear_svm":
        return LinearSVMModel(spec, names, present, arr(p["weights"]), arr(p["bias"]))
    if kind == "gaussian_nb":
        return GaussianNBModel(spec, names, present, arr(p["means"]),
                               arr(p["variances"]), arr(p["log_priors"]))
    if kind == "random_forest":
        return RandomForestModel(spec, names, present, p["trees"], int(p["d"]))
    if kind == "gradient_boosting":
        return GradientBoostingModel(spec, names, present, p["rounds"], int(p["d"]))
    if kind == "mlp":
        params = (arr(p["w1"]), arr(p["b1"]), arr(p["w2"]), arr(p["b2"]))
        return MLPModel(spec, names, present, params, int(p["best_epoch"]))
    if kind == "knn":
        return KNNModel(spec, names, present, arr(p["train_x"]),
                        np.asarray(p["train_y"], dtype=np.int64))
    raise ValueError(f"unknown model kind {kind!r}")


__all__ = [
    "Dataset", "PredictionSet", "TrainedModel", "ModelSpec",
    "SoftmaxRegressionSpec", "LinearSVMSpec", "GaussianNBSpec",
    "RandomForestSpec", "GradientBoostingSpec", "MLPSpec", "KNNSpec",
    "SoftmaxRegressionModel", "LinearSVMModel", "GaussianNBModel",
    "RandomForestModel", "GradientBoostingModel", "MLPModel", "KNNModel",
    "xgboost_spec", "lightgbm_spec", "spec_from_name", "display_name",
    "MODEL_NAMES", "train", "gradient_check", "save_model", "load_model",
]
