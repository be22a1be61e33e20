"""One entry point per algorithm, plus the JSON model file.

Algorithm ids are ``kfhe-e``, ``kfhe-l``, ``adaboost``, ``bagging`` and
``cart``. Every model file shares one envelope::

    {"format": "kfhe-model", "version": 1, "algorithm": "...",
     "class_count": c, "classes": [...], "label_name": "...",
     "schema": [...], "tree_params": {...}, ...algorithm payload...}

Floats are written with ``repr`` precision, so a loaded model replays
predictions bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .baselines import (BaggingModel, CartModel, SammeModel, bagging_predict, bagging_train,
                        cart_predict, cart_train, samme_predict, samme_train)
from .cart import TreeModel, TreeParams
from .core import KfheModel, TrainConfig, Variant, kfhe_predict, kfhe_train
from .dataset import Column, Dataset

MODEL_FORMAT = "kfhe-model"
MODEL_FORMAT_VERSION = 1

ALGORITHMS = ("kfhe-e", "kfhe-l", "adaboost", "bagging", "cart")
DISPLAY_NAMES = {"kfhe-e": "KFHE-e", "kfhe-l": "KFHE-l", "adaboost": "AdaBoost",
                 "bagging": "Bagging", "cart": "CART"}


class ModelFileError(ValueError):
    pass


def check_algorithm(name: str) -> str:
    key = name.lower()
    if key not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
    return key


def train(algorithm: str, dataset: Dataset, iterations: int = 100,
          params: TreeParams = TreeParams(), seed: int = 0):
    algorithm = check_algorithm(algorithm)
    if algorithm.startswith("kfhe"):
        variant = Variant.EXPONENTIAL if algorithm == "kfhe-e" else Variant.LINEAR
        return kfhe_train(dataset, TrainConfig(iterations=iterations, tree_params=params, seed=seed),
                          variant)
    if algorithm == "adaboost":
        return samme_train(dataset, iterations, params, seed)
    if algorithm == "bagging":
        return bagging_train(dataset, iterations, params, seed)
    return cart_train(dataset, params)


def predict(model, features) -> np.ndarray:
    if isinstance(model, KfheModel):
        return kfhe_predict(model, features)
    if isinstance(model, SammeModel):
        return samme_predict(model, features)
    if isinstance(model, BaggingModel):
        return bagging_predict(model, features)
    if isinstance(model, CartModel):
        return cart_predict(model, features)
    raise TypeError(f"not a model: {type(model).__name__}")


def algorithm_of(model) -> str:
    if isinstance(model, KfheModel):
        return "kfhe-e" if model.variant is Variant.EXPONENTIAL else "kfhe-l"
    if isinstance(model, SammeModel):
        return "adaboost"
    if isinstance(model, BaggingModel):
        return "bagging"
    if isinstance(model, CartModel):
        return "cart"
    raise TypeError(f"not a model: {type(model).__name__}")


def component_count(model) -> int:
    if isinstance(model, KfheModel):
        return len(model.components)
    if isinstance(model, SammeModel):
        return len(model.stages)
    if isinstance(model, BaggingModel):
        return len(model.trees)
    return 1


# ----------------------------------------------------------------- model file

def model_to_dict(model, classes=None, label_name=None, tree_params: TreeParams | None = None) -> dict:
    algorithm = algorithm_of(model)
    c = model.class_count
    if isinstance(model, KfheModel):
        classes = classes or model.class_names
        label_name = label_name or model.label_name
        tree_params = tree_params or model.tree_params
    classes = list(classes or (str(i) for i in range(c)))
    out = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "algorithm": algorithm,
        "class_count": c,
        "classes": classes,
        "label_name": label_name or "class",
        "schema": [col.to_dict() for col in model.schema],
        "tree_params": (tree_params or TreeParams()).to_dict(),
    }
    if isinstance(model, KfheModel):
        out["variant"] = model.variant.value
        out["hard_scores"] = model.hard_scores
        out["gains"] = [float(g) for g in model.gains]
        out["trees"] = [t.to_dict() for t, _ in model.components]
    elif isinstance(model, SammeModel):
        out["alphas"] = [float(a) for _, a in model.stages]
        out["trees"] = [t.to_dict() for t, _ in model.stages]
    elif isinstance(model, BaggingModel):
        out["trees"] = [t.to_dict() for t in model.trees]
    else:
        out["trees"] = [model.tree.to_dict()]
    return out


def model_from_dict(d: dict):
    if d.get("format") != MODEL_FORMAT:
        raise ModelFileError("not a kfhe model file")
    if d.get("version") != MODEL_FORMAT_VERSION:
        raise ModelFileError(f"unsupported model file version {d.get('version')!r}")
    try:
        algorithm = check_algorithm(d["algorithm"])
        schema = tuple(Column.from_dict(c) for c in d["schema"])
        c = int(d["class_count"])
        params = TreeParams(**d["tree_params"])
        trees = [TreeModel.from_dict(t, schema) for t in d["trees"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model file: {exc}") from exc
    if any(t.class_count != c for t in trees):
        raise ModelFileError("tree class counts disagree with the model")

    if algorithm.startswith("kfhe"):
        gains = d["gains"]
        if len(gains) != len(trees) - 1:
            raise ModelFileError("kfhe model needs one gain per tree after the first")
        components = [(trees[0], None)] + list(zip(trees[1:], (float(g) for g in gains)))
        return KfheModel(components, Variant.parse(d["variant"]), c, schema,
                         tuple(d["classes"]), d["label_name"], tree_params=params,
                         hard_scores=bool(d.get("hard_scores", False)))
    if algorithm == "adaboost":
        alphas = d["alphas"]
        if len(alphas) != len(trees):
            raise ModelFileError("adaboost model needs one alpha per tree")
        return SammeModel(list(zip(trees, (float(a) for a in alphas))), c, schema)
    if algorithm == "bagging":
        return BaggingModel(trees, c, schema)
    if len(trees) != 1:
        raise ModelFileError("cart model holds exactly one tree")
    return CartModel(trees[0])


def save_model(model, path, classes=None, label_name=None, tree_params=None) -> None:
    doc = model_to_dict(model, classes, label_name, tree_params)
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n")


def load_model(path):
    """Load a model file; returns ``(model, header)`` where header holds the envelope fields."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not valid JSON ({exc})") from exc
    model = model_from_dict(doc)
    header = {k: doc[k] for k in ("algorithm", "class_count", "classes", "label_name")}
    header["schema"] = model.schema
    return model, header
