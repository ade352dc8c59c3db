"""Decision-tree ensembles built on one CART core.

The same split search serves both ensemble families: random forests grow
Gini classification trees on bootstrap resamples with a random feature
subset per node, and gradient boosting grows small variance-reduction
regression trees on softmax residuals with Friedman leaf values. Splits
compare feature values against midpoint thresholds, so predictions are
invariant to any positive rescaling of the features.

Gradient Boosting, XGBoost, and LightGBM collapse to the one boosted-trees
implementation here; the three names differ only in default
hyperparameters (each alias mirrors the published defaults of its
namesake library).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..rng import derive_seed
from .base import Dataset, PredictionSet, TrainedModel, compact_labels, one_hot, softmax_rows

# -- CART core ---------------------------------------------------------------


def _best_split_gini(x, y, idx, features, k, min_leaf):
    """Lowest weighted Gini split over the candidate features, or None."""
    n = idx.shape[0]
    best = None
    labels = y[idx]
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    parent = n - float((counts * counts).sum()) / n  # n * gini(parent)
    best_score = parent
    for f in features:
        col = x[idx, f]
        order = np.argsort(col, kind="stable")
        vals = col[order]
        hot = one_hot(labels[order], k)
        left = np.cumsum(hot, axis=0)[:-1]
        nl = np.arange(1, n, dtype=np.float64)
        nr = n - nl
        right = counts - left
        score = (nl - (left * left).sum(axis=1) / nl) + (nr - (right * right).sum(axis=1) / nr)
        valid = (vals[1:] > vals[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
        score = np.where(valid, score, np.inf)
        pos = int(np.argmin(score))
        if score[pos] < best_score:
            best_score = score[pos]
            best = (f, (vals[pos] + vals[pos + 1]) / 2.0)
    return best


def _best_split_sse(x, r, idx, features, min_leaf):
    """Split maximizing squared-sum concentration of the residuals, or None."""
    n = idx.shape[0]
    resid = r[idx]
    total = float(resid.sum())
    parent = total * total / n
    best = None
    best_score = parent
    for f in features:
        col = x[idx, f]
        order = np.argsort(col, kind="stable")
        vals = col[order]
        s = np.cumsum(resid[order])[:-1]
        nl = np.arange(1, n, dtype=np.float64)
        nr = n - nl
        score = s * s / nl + (total - s) * (total - s) / nr
        valid = (vals[1:] > vals[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
        score = np.where(valid, score, -np.inf)
        pos = int(np.argmax(score))
        if score[pos] > best_score:
            best_score = score[pos]
            best = (f, (vals[pos] + vals[pos + 1]) / 2.0)
    return best


def _grow(x, target, idx, depth, *, mode, k, max_depth, min_leaf, rng, m, leaf_value):
    d = x.shape[1]
    def leaf():
        return {"v": leaf_value(idx)}

    if idx.shape[0] < 2 * min_leaf or (max_depth is not None and depth >= max_depth):
        return leaf()
    if mode == "gini" and np.all(target[idx] == target[idx][0]):
        return leaf()
    if rng is not None and m < d:
        features = np.sort(rng.choice(d, size=m, replace=False))
    else:
        features = np.arange(d)
    if mode == "gini":
        split = _best_split_gini(x, target, idx, features, k, min_leaf)
    else:
        split = _best_split_sse(x, target, idx, features, min_leaf)
    if split is None:
        return leaf()
    f, t = split
    mask = x[idx, f] <= t
    kwargs = dict(mode=mode, k=k, max_depth=max_depth, min_leaf=min_leaf,
                  rng=rng, m=m, leaf_value=leaf_value)
    return {
        "f": int(f),
        "t": float(t),
        "l": _grow(x, target, idx[mask], depth + 1, **kwargs),
        "r": _grow(x, target, idx[~mask], depth + 1, **kwargs),
    }


def _tree_apply(node, row):
    while "f" in node:
        node = node["l"] if row[node["f"]] <= node["t"] else node["r"]
    return node["v"]


def _tree_apply_matrix(node, x):
    return [_tree_apply(node, row) for row in x]


# -- Random forest -----------------------------------------------------------


@dataclass(frozen=True)
class RandomForestSpec:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int | None = None  # None means ceil(sqrt(d))
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.min_leaf < 1:
            raise ValueError("invalid random forest hyperparameters")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive when set")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be positive when set")


class RandomForestModel(TrainedModel):
    kind = "random_forest"

    def __init__(self, spec, class_names, present, trees, d):
        super().__init__(spec, class_names, present)
        self.trees = trees
        self.d = d

    def predict(self, features: np.ndarray) -> PredictionSet:
        x = self._check_width(features)
        probs = np.zeros((x.shape[0], len(self.present)))
        for tree in self.trees:
            probs += np.asarray(_tree_apply_matrix(tree, x))
        probs /= len(self.trees)
        return self._expand(np.argmax(probs, axis=1), probs)

    def params_to_json(self) -> dict:
        return {"trees": self.trees, "d": self.d}


def train_random_forest(spec: RandomForestSpec, data: Dataset,
                        validation: Dataset | None = None) -> RandomForestModel:
    present, y = compact_labels(data)
    k = len(present)
    x = data.features
    n = data.n
    m = spec.features_per_split or math.isqrt(data.d - 1) + 1

    def leaf_value(idx):
        counts = np.bincount(y[idx], minlength=k).astype(np.float64)
        return (counts / counts.sum()).tolist()

    trees = []
    for t in range(spec.n_trees):
        # one seed per tree index, so a parallel build matches the sequential one
        rng = np.random.default_rng(derive_seed(spec.seed, "tree", t))
        sample = rng.integers(0, n, size=n)
        trees.append(_grow(x, y, sample, 0, mode="gini", k=k,
                           max_depth=spec.max_depth, min_leaf=spec.min_leaf,
                           rng=rng, m=m, leaf_value=leaf_value))
    return RandomForestModel(spec, data.class_names, present, trees, data.d)


# -- Gradient-boosted trees --------------------------------------------------


@dataclass(frozen=True)
class GradientBoostingSpec:
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_leaf: int = 1
    seed: int = 0
    family: str = "gradient_boosting"

    def __post_init__(self):
        if self.n_rounds < 1 or self.learning_rate <= 0 or self.max_depth < 1:
            raise ValueError("invalid gradient boosting hyperparameters")
        if self.min_leaf < 1:
            raise ValueError("invalid gradient boosting hyperparameters")
        if self.family not in ("gradient_boosting", "xgboost", "lightgbm"):
            raise ValueError(f"unknown boosting family {self.family!r}")


def xgboost_spec(**overrides) -> GradientBoostingSpec:
    base = dict(n_rounds=100, learning_rate=0.3, max_depth=6, family="xgboost")
    base.update(overrides)
    return GradientBoostingSpec(**base)


def lightgbm_spec(**overrides) -> GradientBoostingSpec:
    # min_leaf=20 mirrors the namesake's min_data_in_leaf default
    base = dict(n_rounds=100, learning_rate=0.1, max_depth=5, min_leaf=20,
                family="lightgbm")
    base.update(overrides)
    return GradientBoostingSpec(**base)


class GradientBoostingModel(TrainedModel):
    kind = "gradient_boosting"

    def __init__(self, spec, class_names, present, rounds, d):
        super().__init__(spec, class_names, present)
        self.rounds = rounds  # list of per-round lists of k trees
        self.d = d

    def _scores(self, x: np.ndarray) -> np.ndarray:
        k = len(self.present)
        f = np.zeros((x.shape[0], k))
        for round_trees in self.rounds:
            for cls in range(k):
                f[:, cls] += self.spec.learning_rate * np.asarray(
                    _tree_apply_matrix(round_trees[cls], x))
        return f

    def predict(self, features: np.ndarray) -> PredictionSet:
        x = self._check_width(features)
        probs = softmax_rows(self._scores(x))
        return self._expand(np.argmax(probs, axis=1), probs)

    def params_to_json(self) -> dict:
        return {"rounds": self.rounds, "d": self.d}


def train_gradient_boosting(spec: GradientBoostingSpec, data: Dataset,
                            validation: Dataset | None = None) -> GradientBoostingModel:
    present, y = compact_labels(data)
    k = len(present)
    x = data.features
    n = data.n
    hot = one_hot(y, k)
    scores = np.zeros((n, k))
    all_idx = np.arange(n)
    rounds = []
    for _ in range(spec.n_rounds):
        probs = softmax_rows(scores)
        round_trees = []
        for cls in range(k):
            resid = hot[:, cls] - probs[:, cls]

            def leaf_value(idx, resid=resid):
                # Friedman's one-step Newton value for the softmax deviance
                num = float(resid[idx].sum())
                den = float((np.abs(resid[idx]) * (1.0 - np.abs(resid[idx]))).sum())
                if den < 1e-150:
                    return 0.0
                return (k - 1) / k * num / den

            tree = _grow(x, resid, all_idx, 0, mode="sse", k=None,
                         max_depth=spec.max_depth, min_leaf=spec.min_leaf,
                         rng=None, m=x.shape[1], leaf_value=leaf_value)
            scores[:, cls] += spec.learning_rate * np.asarray(_tree_apply_matrix(tree, x))
            round_trees.append(tree)
        rounds.append(round_trees)
    return GradientBoostingModel(spec, data.class_names, present, rounds, data.d)
