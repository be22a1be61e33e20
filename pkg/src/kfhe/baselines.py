"""Reference ensembles: bootstrap aggregation, multi-class AdaBoost (SAMME), single tree."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cart import TreeModel, TreeParams, as_feature_matrix, fit_tree, grow_tree, predict_scores
from .core import classify
from .dataset import Dataset, resample_indices, rng_stream


@dataclass(eq=False)
class BaggingModel:
    trees: list[TreeModel]
    class_count: int
    schema: tuple

    def __post_init__(self):
        if not self.trees:
            raise ValueError("bagging needs at least one tree")
        if any(t.class_count != self.class_count for t in self.trees):
            raise ValueError("all trees must share class_count")


@dataclass(eq=False)
class SammeModel:
    stages: list[tuple[TreeModel, float]]
    class_count: int
    schema: tuple

    def __post_init__(self):
        if any(not math.isfinite(a) for _, a in self.stages):
            raise ValueError("stage weights must be finite")


@dataclass(eq=False)
class CartModel:
    tree: TreeModel

    @property
    def class_count(self) -> int:
        return self.tree.class_count

    @property
    def schema(self) -> tuple:
        return self.tree.schema


def bagging_train(dataset: Dataset, iterations: int = 100, params: TreeParams = TreeParams(),
                  seed: int = 0) -> BaggingModel:
    """Fit ``iterations`` trees, tree ``b`` on a uniform bootstrap drawn from stream ``(seed, b)``."""
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    X, y, n = dataset.features, dataset.labels, dataset.n
    trees = []
    for b in range(iterations):
        idx = rng_stream(seed, b).integers(0, n, size=n)
        trees.append(grow_tree(X[idx], y[idx], dataset.class_count, dataset.schema, params))
    return BaggingModel(trees, dataset.class_count, dataset.schema)


def bagging_predict(model: BaggingModel, features) -> np.ndarray:
    X = as_feature_matrix(features, model.schema)
    total = np.zeros((X.shape[0], model.class_count))
    for tree in model.trees:
        total += predict_scores(tree, X)
    return total / len(model.trees)


def samme_alpha(error: float, class_count: int) -> float:
    """Stage weight ``ln((1-err)/err) + ln(c-1)``; a perfect stage gets a large finite cap."""
    if error <= 0.0:
        return math.log(1e12 * (class_count - 1))
    return math.log((1.0 - error) / error) + math.log(class_count - 1)


def samme_train(dataset: Dataset, iterations: int = 100, params: TreeParams = TreeParams(),
                seed: int = 0) -> SammeModel:
    """AdaBoost.SAMME on weight-resampled training sets.

    A stage whose weighted error is at least ``1 - 1/c`` is dropped and the
    weights return to uniform; the dropped attempt still uses up its
    iteration, so the loop always terminates after ``iterations`` fits.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    c = dataset.class_count
    if c < 2:
        raise ValueError("SAMME needs at least two classes")
    X, y, n = dataset.features, dataset.labels, dataset.n
    uniform = np.full(n, 1.0 / n)
    weights = uniform
    stages: list[tuple[TreeModel, float]] = []
    for t in range(iterations):
        idx = resample_indices(weights, rng_stream(seed, t))
        tree = grow_tree(X[idx], y[idx], c, dataset.schema, params)
        miss = classify(predict_scores(tree, X)) != y
        error = float(weights[miss].sum() / weights.sum())
        if error >= 1.0 - 1.0 / c:
            weights = uniform
            continue
        alpha = samme_alpha(error, c)
        stages.append((tree, alpha))
        if error == 0.0:
            break
        weights = weights * np.exp(alpha * miss)
        weights = weights / weights.sum()
    return SammeModel(stages, c, dataset.schema)


def samme_predict(model: SammeModel, features) -> np.ndarray:
    X = as_feature_matrix(features, model.schema)
    n = X.shape[0]
    votes = np.zeros((n, model.class_count))
    rows = np.arange(n)
    for tree, alpha in model.stages:
        votes[rows, classify(predict_scores(tree, X))] += alpha
    totals = votes.sum(axis=1, keepdims=True)
    empty = totals[:, 0] <= 0
    votes[empty] = 1.0
    totals[empty] = model.class_count
    return votes / totals


def cart_train(dataset: Dataset, params: TreeParams = TreeParams()) -> CartModel:
    return CartModel(fit_tree(dataset, params))


def cart_predict(model: CartModel, features) -> np.ndarray:
    return predict_scores(model.tree, features)
