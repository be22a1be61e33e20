import math

import numpy as np
import pytest

from kfhe import (BaggingModel, Dataset, SammeModel, TreeParams, bagging_predict, bagging_train,
                  cart_predict, cart_train, fit_tree, predict_scores, samme_predict, samme_train)
from kfhe.baselines import samme_alpha
from kfhe.core import classify
from kfhe.dataset import rng_stream

from conftest import make_dataset


def test_single_bag_is_one_bootstrap_tree(small):
    model = bagging_train(small, 1, seed=5)
    idx = rng_stream(5, 0).integers(0, small.n, size=small.n)
    expect = fit_tree(small.take(idx))
    assert model.trees[0].structurally_equal(expect)
    assert np.array_equal(bagging_predict(model, small), predict_scores(expect, small))


def test_pure_data_bags_predict_that_class(small):
    pure = small.with_labels(np.full(small.n, 2))
    model = bagging_train(pure, 5, seed=0)
    assert np.all(classify(bagging_predict(model, pure)) == 2)


def test_bagging_averages_scores(small):
    a = fit_tree(small.take(np.arange(30)))
    b = fit_tree(small.take(np.arange(30, 60)))
    same = BaggingModel([a, a, a], 3, small.schema)
    assert np.allclose(bagging_predict(same, small), predict_scores(a, small), atol=1e-15, rtol=0)
    mixed = BaggingModel([a, b], 3, small.schema)
    expect = (predict_scores(a, small) + predict_scores(b, small)) / 2
    assert np.allclose(bagging_predict(mixed, small), expect, atol=1e-15, rtol=0)


def test_two_one_hot_trees_split_the_vote():
    ds = Dataset(np.zeros((25, 1)), np.zeros(25, np.int64), 2, make_dataset(d=1).schema)
    zero = fit_tree(ds)
    one = fit_tree(ds.with_labels(np.ones(25, np.int64)))
    out = bagging_predict(BaggingModel([zero, one], 2, ds.schema), ds.features[:1])
    assert out.tolist() == [[0.5, 0.5]]


def test_bagging_rows_are_distributions(iris):
    out = bagging_predict(bagging_train(iris, 10, seed=1), iris)
    assert np.all(out >= 0) and np.allclose(out.sum(1), 1, atol=1e-9)


def test_samme_alpha_examples():
    assert samme_alpha(0.5, 2) == 0.0
    assert samme_alpha(0.25, 3) == pytest.approx(math.log(3) + math.log(2), abs=1e-15)
    assert samme_alpha(0.0, 3) == pytest.approx(math.log(2e12))


def test_samme_alpha_sign_matches_acceptance_region():
    for c in (2, 3, 5):
        limit = 1 - 1 / c
        for err in np.linspace(0.01, 0.99, 99):
            assert (samme_alpha(err, c) > 0) == (err < limit - 1e-12) or abs(err - limit) < 1e-9


def test_samme_single_stage_is_one_hot(small):
    tree = fit_tree(small)
    out = samme_predict(SammeModel([(tree, 1.0)], 3, small.schema), small)
    assert np.array_equal(out, np.eye(3)[classify(predict_scores(tree, small))])


def test_samme_tie_and_zero_alpha(small):
    zero = fit_tree(small.with_labels(np.zeros(small.n, np.int64)))
    two = fit_tree(small.with_labels(np.full(small.n, 2)))
    tied = samme_predict(SammeModel([(two, 0.7), (zero, 0.7)], 3, small.schema), small)
    assert np.allclose(tied[:, [0, 2]], 0.5) and np.all(classify(tied) == 0)
    flat = samme_predict(SammeModel([(two, 0.0)], 3, small.schema), small)
    assert np.allclose(flat, 1 / 3)
    assert np.allclose(samme_predict(SammeModel([], 3, small.schema), small), 1 / 3)


def test_samme_stages_have_finite_positive_weights(iris):
    model = samme_train(iris, 30, seed=2)
    assert 1 <= len(model.stages) <= 30
    assert all(math.isfinite(a) and a > 0 for _, a in model.stages)
    out = samme_predict(model, iris)
    assert np.allclose(out.sum(1), 1, atol=1e-9)
    assert np.mean(classify(out) != iris.labels) < 0.05


def test_samme_stops_after_perfect_stage():
    x = np.linspace(-1, 1, 40)
    ds = Dataset(x[:, None], (x > 0).astype(np.int64), 2, make_dataset(d=1).schema)
    model = samme_train(ds, 10, seed=0)
    # the first perfect stage carries the capped weight and ends training
    assert len(model.stages) < 10
    assert model.stages[-1][1] == pytest.approx(math.log(1e12))
    assert all(a < math.log(1e12) for _, a in model.stages[:-1])


def test_samme_is_deterministic(small):
    a = samme_predict(samme_train(small, 15, seed=4), small)
    b = samme_predict(samme_train(small, 15, seed=4), small)
    assert np.array_equal(a, b)


def test_cart_baseline(iris):
    model = cart_train(iris, TreeParams())
    assert np.array_equal(cart_predict(model, iris), predict_scores(fit_tree(iris), iris))


def test_schema_mismatch(iris):
    for model, fn in ((bagging_train(iris, 2), bagging_predict), (samme_train(iris, 2), samme_predict)):
        with pytest.raises(ValueError):
            fn(model, np.zeros((1, 2)))


def test_iteration_count_validation(small):
    with pytest.raises(ValueError):
        bagging_train(small, 0)
    with pytest.raises(ValueError):
        samme_train(small, 0)
