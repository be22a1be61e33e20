"""Kalman filter based heuristic ensembles of CART trees, with baselines and a benchmark harness."""

from .baselines import (BaggingModel, CartModel, SammeModel, bagging_predict, bagging_train,
                        cart_predict, cart_train, samme_predict, samme_train)
from .bench import DatasetSpec, ExperimentConfig, ExperimentResult, noise_sweep, run_experiment
from .cart import TreeModel, TreeParams, best_split, fit_tree, gini, predict_scores
from .core import (KfheModel, KfmState, KfwState, TrainConfig, Variant, classify, kalman_combine,
                   kalman_gain, kfhe_predict, kfhe_train, kfm_measure, kfm_time_update, kfw_measure,
                   measurement_error, training_trace, variance_update, write_trace_csv)
from .dataset import (Column, Dataset, DatasetError, inject_label_noise, load_bundled, load_csv,
                      stratified_kfold, weighted_resample)
from .metrics import RankTable, average_ranks, confusion, macro_f1, misclassification_rate
from .models import load_model, predict, save_model, train

__version__ = "0.1.0"
