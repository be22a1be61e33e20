"""Kalman filter based ensemble training and prediction.

Two scalar-variance Kalman filters cooperate during training:

* the model filter (kf-m) keeps the ensemble's class-score matrix for the
  training rows, ``y_hat``, and fuses in one new tree per iteration;
* the weight filter (kf-w) keeps the sampling weights used to resample the
  training set for the next tree.

Both filters use an identity time update with no process noise, so the
variance can only shrink and the gain ``K = P / (P + R)`` decays as the
ensemble becomes confident.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .cart import TreeModel, TreeParams, as_feature_matrix, grow_tree, predict_scores
from .dataset import Dataset, resample_indices, rng_stream

log = logging.getLogger(__name__)

TRACE_HEADER = ("t", "R_y", "P_y", "K_y", "train_error")


class Variant(str, Enum):
    """Weight measurement function applied to the misclassification indicator."""

    LINEAR = "linear"
    EXPONENTIAL = "exponential"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        aliases = {"l": cls.LINEAR, "linear": cls.LINEAR, "kfhe-l": cls.LINEAR,
                   "e": cls.EXPONENTIAL, "exponential": cls.EXPONENTIAL, "exp": cls.EXPONENTIAL,
                   "kfhe-e": cls.EXPONENTIAL}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown variant {value!r}") from None

    def f(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x if self is Variant.LINEAR else np.exp(x)


@dataclass(frozen=True)
class KfmState:
    estimate: np.ndarray
    variance: float

    def __post_init__(self):
        if not 0.0 <= self.variance <= 1.0:
            raise ValueError("kf-m variance must lie in [0, 1]")


@dataclass(frozen=True)
class KfwState:
    estimate: np.ndarray
    variance: float

    def __post_init__(self):
        if not 0.0 <= self.variance <= 1.0:
            raise ValueError("kf-w variance must lie in [0, 1]")


# ------------------------------------------------------------ filter pieces

def kfm_time_update(state: KfmState) -> KfmState:
    """Identity time update: the prior is the previous posterior."""
    return KfmState(state.estimate, state.variance)


def kfw_time_update(state: KfwState) -> KfwState:
    return KfwState(state.estimate, state.variance)


def kfm_measure(prev_estimate: np.ndarray, tree_scores: np.ndarray) -> np.ndarray:
    """Measurement for kf-m: the mean of the current ensemble and the new tree."""
    prev_estimate = np.asarray(prev_estimate, dtype=np.float64)
    tree_scores = np.asarray(tree_scores, dtype=np.float64)
    if prev_estimate.shape != tree_scores.shape:
        raise ValueError(f"shape mismatch: {prev_estimate.shape} vs {tree_scores.shape}")
    return 0.5 * (prev_estimate + tree_scores)


def classify(scores: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest class index."""
    return np.argmax(np.asarray(scores), axis=1)


def measurement_error(z: np.ndarray, labels: np.ndarray) -> float:
    z = np.asarray(z)
    labels = np.asarray(labels)
    if z.shape[0] != labels.shape[0]:
        raise ValueError("score rows and labels differ in length")
    if labels.size == 0:
        return 0.0
    return float(np.count_nonzero(classify(z) != labels)) / labels.size


def kalman_gain(p_prior: float, r: float) -> float:
    """``P / (P + R)``, with the convention K = 0 when both are zero."""
    p_prior = float(p_prior)
    r = float(r)
    if p_prior < 0 or r < 0:
        raise ValueError("variance and measurement error must be non-negative")
    denom = p_prior + r
    if denom == 0.0:
        return 0.0
    return p_prior / denom


def kalman_combine(prior: np.ndarray, z: np.ndarray, gain: float) -> np.ndarray:
    if not 0.0 <= gain <= 1.0:
        raise ValueError(f"Kalman gain {gain} outside [0, 1]")
    prior = np.asarray(prior, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if prior.shape != z.shape:
        raise ValueError(f"shape mismatch: {prior.shape} vs {z.shape}")
    return prior + gain * (z - prior)


def variance_update(p_prior: float, gain: float) -> float:
    if not 0.0 <= gain <= 1.0:
        raise ValueError(f"Kalman gain {gain} outside [0, 1]")
    if p_prior < 0:
        raise ValueError("variance must be non-negative")
    return (1.0 - gain) * p_prior


def kfw_measure(weights: np.ndarray, misclassified: np.ndarray, variant: Variant) -> np.ndarray:
    """Weight measurement ``w_i * f(miss_i)`` for the chosen variant."""
    weights = np.asarray(weights, dtype=np.float64)
    misclassified = np.asarray(misclassified)
    if weights.shape != misclassified.shape:
        raise ValueError("weights and indicator differ in length")
    return weights * Variant.parse(variant).f(misclassified.astype(np.float64))


# ------------------------------------------------------------------ training

@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 100
    tree_params: TreeParams = field(default_factory=TreeParams)
    gain_threshold: float = 1e-9
    max_resets: int = 10
    seed: int = 0
    hard_scores: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1 (the initial tree)")
        if self.gain_threshold < 0:
            raise ValueError("gain_threshold must be non-negative")
        if self.max_resets < 1:
            raise ValueError("max_resets must be at least 1")


@dataclass(frozen=True)
class TraceRow:
    t: int
    r_y: float
    p_y: float
    k_y: float
    train_error: float
    k_w: float
    p_w: float
    resets: int

    def csv_row(self):
        return [self.t, repr(self.r_y), repr(self.p_y), repr(self.k_y), repr(self.train_error)]


@dataclass(eq=False)
class KfheModel:
    """Trees ``h_0..h_T`` with their kf-m gains (``None`` for ``h_0``)."""

    components: list[tuple[TreeModel, float | None]]
    variant: Variant
    class_count: int
    schema: tuple
    class_names: tuple[str, ...] = ()
    label_name: str = "class"
    trace: list[TraceRow] = field(default_factory=list)
    final_estimate: np.ndarray | None = field(default=None, repr=False)
    tree_params: TreeParams = field(default_factory=TreeParams)
    hard_scores: bool = False
    # gain that ended training early (at most the threshold); None if all T iterations ran
    stop_gain: float | None = None

    def __post_init__(self):
        if not self.components:
            raise ValueError("a KFHE model needs at least the initial tree")
        for _, gain in self.components[1:]:
            if not 0.0 <= gain <= 1.0:
                raise ValueError("stored gains must lie in [0, 1]")

    @property
    def gains(self) -> list[float]:
        return [g for _, g in self.components[1:]]

    @property
    def final_gain(self) -> float | None:
        """The last gain the filter computed: the stopping gain, else the last accepted one."""
        if self.stop_gain is not None:
            return self.stop_gain
        return self.trace[-1].k_y if self.trace else None


def _tree_scores(tree: TreeModel, X: np.ndarray, hard: bool) -> np.ndarray:
    s = predict_scores(tree, X)
    if hard:
        out = np.zeros_like(s)
        out[np.arange(s.shape[0]), classify(s)] = 1.0
        return out
    return s


def kfhe_train(dataset: Dataset, config: TrainConfig = TrainConfig(),
               variant: Variant | str = Variant.EXPONENTIAL) -> KfheModel:
    """Train a KFHE ensemble of at most ``config.iterations`` trees, ``h_0`` included.

    Resampling for the initial tree uses stream ``(seed, 0, 0)``; the
    ``a``-th attempt at iteration ``t`` uses ``(seed, t, a)``.
    """
    variant = Variant.parse(variant)
    X, y = dataset.features, dataset.labels
    n, c = dataset.n, dataset.class_count
    params = config.tree_params
    hard = config.hard_scores
    reset_limit = 1.0 - 1.0 / c

    def fit_on(weights, rng):
        idx = resample_indices(weights, rng)
        return grow_tree(X[idx], y[idx], c, dataset.schema, params)

    uniform = np.full(n, 1.0 / n)
    weights = KfwState(uniform, 1.0)

    h0 = fit_on(weights.estimate, rng_stream(config.seed, 0, 0))
    model_state = KfmState(_tree_scores(h0, X, hard), 1.0)
    components: list[tuple[TreeModel, float | None]] = [(h0, None)]
    trace: list[TraceRow] = []

    t = 1
    attempt = 0
    stop_gain = None
    while t < config.iterations:
        # kf-m
        prior = kfm_time_update(model_state)
        h = fit_on(weights.estimate, rng_stream(config.seed, t, attempt))
        z = kfm_measure(prior.estimate, _tree_scores(h, X, hard))
        r = measurement_error(z, y)
        if r > reset_limit:
            if attempt < config.max_resets:
                weights = KfwState(uniform, 1.0)
                attempt += 1
                continue
            log.warning("iteration %d: measurement error %.4f still above %.4f after %d resets; "
                        "accepting it", t, r, reset_limit, attempt)
        k = kalman_gain(prior.variance, r)
        if k <= config.gain_threshold:
            stop_gain = k
            break
        model_state = KfmState(kalman_combine(prior.estimate, z, k),
                               variance_update(prior.variance, k))

        # kf-w, with the kf-m measurement error standing in for R^(w)
        w_prior = kfw_time_update(weights)
        miss = classify(z) != y
        zw = kfw_measure(w_prior.estimate, miss, variant)
        kw = kalman_gain(w_prior.variance, r)
        w_post = kalman_combine(w_prior.estimate, zw, kw)
        total = w_post.sum()
        w_post = w_post / total if total > 0 and math.isfinite(total) else uniform
        weights = KfwState(w_post, variance_update(w_prior.variance, kw))

        components.append((h, k))
        trace.append(TraceRow(t, r, model_state.variance, k,
                              measurement_error(model_state.estimate, y),
                              kw, weights.variance, attempt))
        attempt = 0
        t += 1
        if model_state.variance == 0.0 and t < config.iterations:
            # every later gain is P/(P+R) = 0, so the next iteration would stop anyway
            stop_gain = kalman_gain(0.0, 0.0)
            break

    return KfheModel(components, variant, c, dataset.schema, dataset.class_names,
                     dataset.label_name, trace, model_state.estimate, params, hard, stop_gain)


def kfhe_predict(model: KfheModel, features) -> np.ndarray:
    """Replay the kf-m recursion on new rows and return the score matrix."""
    if not model.components:
        raise ValueError("empty model")
    X = as_feature_matrix(features, model.schema)
    hard = model.hard_scores
    y_hat = _tree_scores(model.components[0][0], X, hard)
    for tree, gain in model.components[1:]:
        z = kfm_measure(y_hat, _tree_scores(tree, X, hard))
        y_hat = kalman_combine(y_hat, z, gain)
    return y_hat


def training_trace(model: KfheModel) -> list[TraceRow]:
    return list(model.trace)


def write_trace_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for row in rows:
            w.writerow(row.csv_row())
