"""Datasets, fold plans, weighted resampling and label noise.

Random streams
--------------
Every seeded operation draws from numpy's ``PCG64`` generator seeded through
``SeedSequence(seed, spawn_key=key)``. The key tuple names the stream, e.g.
``(repeat, fold, iteration)``, so independent parts of an experiment never
share random numbers and results do not depend on execution order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

MISSING_TOKENS = frozenset({"", "?", "NA", "N/A", "nan", "NaN", "null"})

BUNDLED = (
    "iris",
    "glass",
    "sonar",
    "monks",
    "haberman",
    "hayes_roth",
    "newthyroid",
    "zoo",
    "bupa",
    "vertebral",
)


class DatasetError(ValueError):
    """Raised for malformed or unusable input data."""


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream named by ``key`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # "numeric" or "categorical"
    categories: tuple[str, ...] = ()

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.is_categorical:
            out["categories"] = list(self.categories)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Column":
        return cls(d["name"], d["kind"], tuple(d.get("categories", ())))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature table plus dense integer labels.

    ``features`` is an ``(n, d)`` float array. Categorical columns hold
    category codes (indices into ``schema[j].categories``); a code of ``-1``
    marks a symbol that was not seen when the schema was built.
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    schema: tuple[Column, ...]
    class_names: tuple[str, ...] = ()
    name: str = ""
    label_name: str = "class"

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DatasetError("features must be a 2-d array")
        if self.features.shape[0] != self.labels.shape[0]:
            raise DatasetError("features and labels differ in length")
        if self.features.shape[1] != len(self.schema):
            raise DatasetError("schema does not match the feature columns")
        if self.class_count < 2:
            raise DatasetError("class_count must be at least 2")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise DatasetError("labels must lie in [0, class_count)")
        if not self.class_names:
            object.__setattr__(self, "class_names", tuple(str(i) for i in range(self.class_count)))
        self.features.flags.writeable = False
        self.labels.flags.writeable = False

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def is_categorical(self) -> np.ndarray:
        return np.array([c.is_categorical for c in self.schema], dtype=np.bool_)

    @property
    def category_counts(self) -> np.ndarray:
        return np.array([len(c.categories) for c in self.schema], dtype=np.int64)

    def take(self, index: np.ndarray) -> "Dataset":
        return Dataset(
            np.ascontiguousarray(self.features[index]),
            self.labels[index].copy(),
            self.class_count,
            self.schema,
            self.class_names,
            self.name,
            self.label_name,
        )

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        return Dataset(self.features, np.asarray(labels, dtype=np.int64), self.class_count,
                       self.schema, self.class_names, self.name, self.label_name)


# --------------------------------------------------------------------------- CSV

def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _resolve_label_column(header: list[str], label_column) -> int:
    if label_column is None:
        return len(header) - 1
    if isinstance(label_column, int):
        idx = label_column if label_column >= 0 else len(header) + label_column
        if not 0 <= idx < len(header):
            raise DatasetError(f"label column index {label_column} out of range")
        return idx
    if label_column not in header:
        raise DatasetError(f"label column {label_column!r} not in header")
    return header.index(label_column)


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: file is empty, a header row is required") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}:{lineno}: expected {len(header)} cells, found {len(row)}")
            rows.append([c.strip() for c in row])
    return header, rows


def _check_missing(path, header, rows):
    for r, row in enumerate(rows):
        for j, cell in enumerate(row):
            if cell in MISSING_TOKENS:
                raise DatasetError(
                    f"{path}: missing value at data row {r + 1}, column {header[j]!r}")


def _encode_column(path, name, cells, kind, categories=None):
    if kind == "numeric":
        out = np.empty(len(cells), dtype=np.float64)
        for i, cell in enumerate(cells):
            try:
                out[i] = float(cell)
            except ValueError:
                raise DatasetError(
                    f"{path}: cannot parse {cell!r} as a number at data row {i + 1}, "
                    f"column {name!r}") from None
        if not np.all(np.isfinite(out)):
            raise DatasetError(f"{path}: non-finite value in column {name!r}")
        return out, Column(name, "numeric")
    if categories is None:
        categories = list(dict.fromkeys(cells))
    lookup = {c: i for i, c in enumerate(categories)}
    out = np.array([lookup.get(c, -1) for c in cells], dtype=np.float64)
    return out, Column(name, "categorical", tuple(categories))


def load_csv(
    path,
    label_column=None,
    schema: dict[str, str] | None = None,
    classes: Sequence[str] | None = None,
    name: str | None = None,
) -> Dataset:
    """Read a headed, comma separated file into a :class:`Dataset`.

    Labels are encoded ``0..c-1`` in order of first appearance unless
    ``classes`` declares the label set (and its order) up front. A column is
    numeric when every cell parses as a float; ``schema`` maps column names to
    ``"numeric"`` or ``"categorical"`` to override that guess.
    """
    path = Path(path)
    header, rows = _read_rows(path)
    label_idx = _resolve_label_column(header, label_column)
    _check_missing(path, header, rows)
    if not rows:
        raise DatasetError(f"{path}: no data rows")

    schema = dict(schema or {})
    unknown = set(schema) - set(header)
    if unknown:
        raise DatasetError(f"schema overrides name unknown columns: {sorted(unknown)}")

    cols, arrays = [], []
    for j, col_name in enumerate(header):
        if j == label_idx:
            continue
        cells = [row[j] for row in rows]
        kind = schema.get(col_name)
        if kind is None:
            kind = "numeric" if all(_is_number(c) for c in cells) else "categorical"
        if kind not in ("numeric", "categorical"):
            raise DatasetError(f"unknown column kind {kind!r} for {col_name!r}")
        arr, col = _encode_column(path, col_name, cells, kind)
        arrays.append(arr)
        cols.append(col)
    if not cols:
        raise DatasetError(f"{path}: no feature columns")

    raw_labels = [row[label_idx] for row in rows]
    if classes is None:
        classes = list(dict.fromkeys(raw_labels))
    else:
        classes = [str(c) for c in classes]
        stray = set(raw_labels) - set(classes)
        if stray:
            raise DatasetError(f"labels not among the declared classes: {sorted(stray)}")
    present = len(set(raw_labels))
    if present < 2:
        raise DatasetError(f"{path}: fewer than 2 distinct labels present ({present})")
    lookup = {c: i for i, c in enumerate(classes)}
    labels = np.array([lookup[v] for v in raw_labels], dtype=np.int64)

    return Dataset(
        np.ascontiguousarray(np.column_stack(arrays)),
        labels,
        len(classes),
        tuple(cols),
        tuple(classes),
        name or path.stem,
        header[label_idx],
    )


def load_features(path, schema: Sequence[Column], label_name: str | None = None) -> np.ndarray:
    """Read feature rows for prediction, encoding them with a training schema.

    The file may carry the label column (``label_name``), which is ignored.
    A header-only file yields a ``(0, d)`` array.
    """
    path = Path(path)
    header, rows = _read_rows(path)
    names = [c.name for c in schema]
    drop = label_name if label_name in header else None
    kept = [h for h in header if h != drop]
    if len(kept) != len(names):
        raise DatasetError(
            f"{path}: expected {len(names)} feature columns, found {len(kept)}")
    if kept != names:
        raise DatasetError(f"{path}: feature columns {kept} do not match the model {names}")
    _check_missing(path, header, rows)
    out = np.empty((len(rows), len(names)), dtype=np.float64)
    for j, col in enumerate(schema):
        src = header.index(col.name)
        cells = [row[src] for row in rows]
        if col.is_categorical:
            arr, _ = _encode_column(path, col.name, cells, "categorical", list(col.categories))
        else:
            arr, _ = _encode_column(path, col.name, cells, "numeric")
        out[:, j] = arr
    return out


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("kfhe") / "data" / f"{name}.csv"))


def available_bundled() -> list[str]:
    return [n for n in BUNDLED if bundled_path(n).is_file()]


def load_bundled(name: str) -> Dataset:
    """Load one of the datasets shipped with the package (label in last column)."""
    path = bundled_path(name)
    if not path.is_file():
        raise DatasetError(
            f"bundled dataset {name!r} is not present; run scripts/fetch_datasets.py")
    return load_csv(path, name=name)


# ------------------------------------------------------------------- fold plans

@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Fold ids for every repeat: ``assignments[r, i]`` is the fold of row ``i``."""

    repeat_count: int
    fold_count: int
    assignments: np.ndarray = field(repr=False)

    def test_index(self, repeat: int, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments[repeat] == fold)

    def train_index(self, repeat: int, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments[repeat] != fold)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["repeat", "fold", "row_index"])
            for r in range(self.repeat_count):
                for f in range(self.fold_count):
                    for i in self.test_index(r, f):
                        w.writerow([r, f, int(i)])


def stratified_kfold(dataset: Dataset, k: int, repeats: int = 1, seed: int = 0) -> FoldPlan:
    """Repeated stratified k-fold assignment.

    Within each class the rows are shuffled and dealt to folds round-robin;
    the dealing position carries over from one class to the next so fold
    totals stay balanced too.
    """
    n = dataset.n
    if k < 2:
        raise DatasetError("k must be at least 2")
    if k > n:
        raise DatasetError(f"cannot split {n} rows into {k} folds")
    if repeats < 1:
        raise DatasetError("repeats must be positive")
    labels = dataset.labels
    out = np.empty((repeats, n), dtype=np.int64)
    for r in range(repeats):
        rng = rng_stream(seed, r)
        start = 0
        for cls in range(dataset.class_count):
            members = np.flatnonzero(labels == cls)
            if members.size == 0:
                continue
            members = rng.permutation(members)
            out[r, members] = (start + np.arange(members.size)) % k
            start = (start + members.size) % k
    return FoldPlan(repeats, k, out)


# ------------------------------------------------------------------ resampling

def resample_indices(weights: np.ndarray, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw ``size`` row indices with replacement, P(i) = w_i / sum(w).

    Inverse-CDF sampling; a zero-weight row can never be drawn because its
    CDF step is empty.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise DatasetError("weights must be a non-empty vector")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DatasetError("weights must be finite and non-negative")
    cdf = np.cumsum(w)
    total = cdf[-1]
    if not total > 0:
        raise DatasetError("all weights are zero")
    size = w.size if size is None else size
    u = rng.random(size) * total
    idx = np.searchsorted(cdf, u, side="right")
    # u < total always, but guard the last bucket against cdf rounding
    np.minimum(idx, w.size - 1, out=idx)
    return idx


def weighted_resample(dataset: Dataset, weights, seed: int) -> Dataset:
    """Bootstrap sample of ``dataset.n`` rows drawn with probability ∝ ``weights``."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (dataset.n,):
        raise DatasetError("weights length must equal the number of rows")
    return dataset.take(resample_indices(w, rng_stream(seed)))


# ----------------------------------------------------------------- label noise

def noise_count(fraction: float, n: int) -> int:
    """round-half-up of ``fraction * n``."""
    return int(math.floor(fraction * n + 0.5))


def inject_label_noise(dataset: Dataset, fraction: float, seed: int) -> tuple[Dataset, np.ndarray]:
    """Flip ``round(fraction * n)`` labels, each to a uniformly chosen other class.

    Returns the noisy copy and the sorted indices that were changed.
    """
    if not 0.0 <= fraction <= 1.0:
        raise DatasetError("noise fraction must be in [0, 1]")
    c = dataset.class_count
    n = dataset.n
    m = noise_count(fraction, n)
    if m == 0:
        return dataset, np.empty(0, dtype=np.int64)
    rng = rng_stream(seed)
    chosen = np.sort(rng.choice(n, size=m, replace=False))
    labels = dataset.labels.copy()
    shift = rng.integers(1, c, size=m)
    labels[chosen] = (labels[chosen] + shift) % c
    return dataset.with_labels(labels), chosen
