"""CART classification trees grown on Gini impurity.

Leaves carry the class proportions of the training rows that reached them,
so :func:`predict_scores` returns soft scores, one distribution per row.
Categorical columns stay symbolic: a split sends a subset of categories left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .dataset import Column, Dataset

TREE_FORMAT = "kfhe-tree"
TREE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = 30
    min_split: int = 20
    min_leaf: int = 7
    min_impurity_decrease: float = 0.01

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative or None")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")
        if self.min_split < 2 * self.min_leaf:
            raise ValueError("min_split must be at least 2 * min_leaf")
        if self.min_impurity_decrease < 0:
            raise ValueError("min_impurity_decrease must be non-negative")

    def to_dict(self) -> dict:
        return {"max_depth": self.max_depth, "min_split": self.min_split,
                "min_leaf": self.min_leaf, "min_impurity_decrease": self.min_impurity_decrease}


def gini(class_counts) -> float:
    """Gini impurity ``1 - sum(p_j**2)`` of a count vector."""
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if counts.size == 0 or total <= 0:
        raise ValueError("gini needs at least one counted datapoint")
    p = counts / total
    return float(1.0 - np.dot(p, p))


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float | None  # numeric splits
    left_categories: tuple[int, ...] | None  # categorical splits
    decrease: float

    def goes_left(self, column: np.ndarray) -> np.ndarray:
        if self.left_categories is None:
            return column <= self.threshold
        return np.isin(column.astype(np.int64), self.left_categories)


def best_split(features: np.ndarray, labels: np.ndarray, class_count: int,
               schema, params: TreeParams = TreeParams(), total_rows: int | None = None) -> Split | None:
    """Best Gini split of one node, or ``None`` when no split qualifies.

    ``decrease`` is the drop in weighted impurity scaled by the node's share
    of ``total_rows`` (the size of the whole training set), so at the root it
    is ``gini(parent) - sum(n_child/n * gini(child))``.
    """
    m = labels.shape[0]
    if m < params.min_split:
        return None
    total_rows = m if total_rows is None else total_rows
    is_cat = np.array([c.is_categorical for c in schema], dtype=np.bool_)
    n_cats = np.array([len(c.categories) for c in schema], dtype=np.int64)
    return _best_split(np.ascontiguousarray(features, dtype=np.float64),
                       np.ascontiguousarray(labels, dtype=np.int64),
                       class_count, is_cat, n_cats, params, total_rows)


def _best_split(X, y, c, is_cat, n_cats, params, total_rows):
    m = y.shape[0]
    feat, thr, score, mask = K.split_search(X, y, c, is_cat, n_cats, params.min_leaf)
    if feat < 0:
        return None
    counts = np.bincount(y, minlength=c)
    parent = float(np.dot(counts, counts)) / m
    decrease = (score - parent) / total_rows
    if not decrease > 0 or decrease < params.min_impurity_decrease:
        return None
    if is_cat[feat]:
        cats = tuple(int(k) for k in np.flatnonzero(mask))
        return Split(int(feat), None, cats, float(decrease))
    return Split(int(feat), float(thr), None, float(decrease))


class TreeModel:
    """A fitted tree stored as flat node arrays (node 0 is the root)."""

    def __init__(self, kind, feature, threshold, left, right, cat_route, default_left,
                 value, n_node, class_count, schema):
        self.kind = np.asarray(kind, dtype=np.int64)
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.cat_route = np.asarray(cat_route, dtype=np.int8)
        self.default_left = np.asarray(default_left, dtype=np.uint8)
        self.value = np.asarray(value, dtype=np.float64)
        self.n_node = np.asarray(n_node, dtype=np.int64)
        self.class_count = int(class_count)
        self.schema = tuple(schema)
        for a in (self.kind, self.feature, self.threshold, self.left, self.right,
                  self.cat_route, self.default_left, self.value, self.n_node):
            a.flags.writeable = False

    @property
    def node_count(self) -> int:
        return self.kind.shape[0]

    @property
    def leaf_count(self) -> int:
        return int(np.sum(self.kind == K.LEAF))

    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=np.int64)
        for i in range(self.node_count):
            if self.kind[i] != K.LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        return K.apply_tree(X, self.kind, self.feature, self.threshold, self.left,
                            self.right, self.cat_route, self.default_left)

    def structurally_equal(self, other: "TreeModel") -> bool:
        pairs = [(self.kind, other.kind), (self.feature, other.feature),
                 (self.threshold, other.threshold), (self.left, other.left),
                 (self.right, other.right), (self.cat_route, other.cat_route),
                 (self.default_left, other.default_left), (self.value, other.value)]
        return all(a.shape == b.shape and np.array_equal(a, b) for a, b in pairs)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.node_count):
            node = {"id": i, "n": int(self.n_node[i]),
                    "scores": [float(v) for v in self.value[i]]}
            if self.kind[i] != K.LEAF:
                node["feature"] = int(self.feature[i])
                node["left"] = int(self.left[i])
                node["right"] = int(self.right[i])
                node["default"] = "left" if self.default_left[i] else "right"
                if self.kind[i] == K.NUMERIC:
                    node["threshold"] = float(self.threshold[i])
                else:
                    route = self.cat_route[i]
                    node["left_categories"] = [int(k) for k in np.flatnonzero(route == K.ROUTE_LEFT)]
                    node["right_categories"] = [int(k) for k in np.flatnonzero(route == K.ROUTE_RIGHT)]
            nodes.append(node)
        return {"format": TREE_FORMAT, "version": TREE_FORMAT_VERSION,
                "class_count": self.class_count, "nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict, schema) -> "TreeModel":
        if d.get("format") != TREE_FORMAT or d.get("version") != TREE_FORMAT_VERSION:
            raise ValueError("unsupported tree format")
        c = int(d["class_count"])
        nodes = sorted(d["nodes"], key=lambda nd: nd["id"])
        m = len(nodes)
        card = max([1] + [len(col.categories) for col in schema if col.is_categorical])
        kind = np.zeros(m, np.int64)
        feature = np.full(m, -1, np.int64)
        threshold = np.zeros(m)
        left = np.full(m, -1, np.int64)
        right = np.full(m, -1, np.int64)
        route = np.zeros((m, card), np.int8)
        default_left = np.zeros(m, np.uint8)
        value = np.zeros((m, c))
        n_node = np.zeros(m, np.int64)
        for i, nd in enumerate(nodes):
            if nd["id"] != i:
                raise ValueError("tree node ids must be 0..m-1")
            n_node[i] = nd["n"]
            value[i] = nd["scores"]
            if "feature" not in nd:
                continue
            feature[i] = nd["feature"]
            left[i], right[i] = nd["left"], nd["right"]
            default_left[i] = nd["default"] == "left"
            if "threshold" in nd:
                kind[i] = K.NUMERIC
                threshold[i] = nd["threshold"]
            else:
                kind[i] = K.CATEGORICAL
                route[i, nd["left_categories"]] = K.ROUTE_LEFT
                route[i, nd["right_categories"]] = K.ROUTE_RIGHT
        return cls(kind, feature, threshold, left, right, route, default_left, value,
                   n_node, c, schema)


def grow_tree(X: np.ndarray, y: np.ndarray, class_count: int, schema,
              params: TreeParams = TreeParams()) -> TreeModel:
    """Grow a tree on raw arrays. :func:`fit_tree` is the Dataset front end."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    n = y.shape[0]
    if n == 0:
        raise ValueError("cannot fit a tree on zero rows")
    c = class_count
    schema = tuple(schema)
    is_cat = np.array([col.is_categorical for col in schema], dtype=np.bool_)
    n_cats = np.array([len(col.categories) for col in schema], dtype=np.int64)
    card = max([1] + [int(k) for k, ic in zip(n_cats, is_cat) if ic])
    max_depth = math.inf if params.max_depth is None else params.max_depth

    kind, feature, threshold, left, right = [], [], [], [], []
    routes, default_left, value, n_node = [], [], [], []

    def new_node(rows_y):
        counts = np.bincount(rows_y, minlength=c)
        kind.append(K.LEAF)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        routes.append(None)
        default_left.append(0)
        value.append(counts / rows_y.shape[0])
        n_node.append(rows_y.shape[0])
        return len(kind) - 1, counts

    root, root_counts = new_node(y)
    stack = [(root, np.arange(n), 0, root_counts)]
    while stack:
        node, rows, depth, counts = stack.pop()
        m = rows.shape[0]
        if m < params.min_split or depth >= max_depth or np.count_nonzero(counts) <= 1:
            continue
        Xn = X[rows]
        yn = y[rows]
        split = _best_split(Xn, yn, c, is_cat, n_cats, params, n)
        if split is None:
            continue
        go_left = split.goes_left(Xn[:, split.feature])
        lrows, rrows = rows[go_left], rows[~go_left]
        li, lcounts = new_node(yn[go_left])
        ri, rcounts = new_node(yn[~go_left])
        kind[node] = K.CATEGORICAL if split.left_categories is not None else K.NUMERIC
        feature[node] = split.feature
        left[node], right[node] = li, ri
        default_left[node] = 1 if lrows.shape[0] >= rrows.shape[0] else 0
        if split.left_categories is None:
            threshold[node] = split.threshold
        else:
            route = np.zeros(card, np.int8)
            seen = np.unique(Xn[:, split.feature].astype(np.int64))
            route[seen] = K.ROUTE_RIGHT
            route[list(split.left_categories)] = K.ROUTE_LEFT
            routes[node] = route
        # right pushed first so the left subtree is numbered first
        stack.append((ri, rrows, depth + 1, rcounts))
        stack.append((li, lrows, depth + 1, lcounts))

    route_arr = np.zeros((len(kind), card), np.int8)
    for i, r in enumerate(routes):
        if r is not None:
            route_arr[i] = r
    return TreeModel(kind, feature, threshold, left, right, route_arr, default_left,
                     np.vstack(value), n_node, c, schema)


def fit_tree(dataset: Dataset, params: TreeParams = TreeParams()) -> TreeModel:
    """Fit a CART tree to every row of ``dataset`` (deterministic)."""
    return grow_tree(dataset.features, dataset.labels, dataset.class_count, dataset.schema, params)


def as_feature_matrix(features, schema) -> np.ndarray:
    """Validate prediction input against a training schema and return a float matrix."""
    schema = tuple(schema)
    if isinstance(features, Dataset):
        if tuple(features.schema) != schema:
            raise ValueError("feature schema does not match the training schema")
        return features.features
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(schema):
        raise ValueError(f"expected {len(schema)} feature columns, got shape {X.shape}")
    return X


def predict_scores(tree: TreeModel, features) -> np.ndarray:
    """Leaf class-proportion scores, shape ``(n, class_count)``."""
    X = as_feature_matrix(features, tree.schema)
    if X.shape[0] == 0:
        return np.zeros((0, tree.class_count))
    return tree.value[tree.apply(np.ascontiguousarray(X, dtype=np.float64))]
