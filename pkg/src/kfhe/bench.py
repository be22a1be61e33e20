"""Repeated cross-validation under injected label noise.

Every (dataset, algorithm, noise, repeat, fold) cell trains on noisy labels
and is scored against the original labels. Seeds for fold plans, noise and
models are derived from one master seed, so a run is reproducible file for
file. The only nondeterministic output is ``run_log.csv``, which records wall
clock training times.
"""

from __future__ import annotations

import csv
import json
import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cart import TreeParams
from .core import classify
from .dataset import (BUNDLED, Dataset, FoldPlan, bundled_path, inject_label_noise, load_bundled,
                      load_csv, stratified_kfold)
from .metrics import RankTable, average_ranks, confusion, macro_f1, misclassification_rate
from .models import ALGORITHMS, check_algorithm, component_count, predict, train

log = logging.getLogger(__name__)

DEFAULT_NOISE = (0.0, 0.05, 0.10, 0.15, 0.20)
RESULTS_HEADER = ("dataset", "algorithm", "noise", "repeat", "fold", "macro_f1", "error_rate")
SWEEP_HEADER = ("dataset", "algorithm", "noise", "mean_f1", "sd_f1")


@dataclass(frozen=True)
class DatasetSpec:
    """A dataset to benchmark: a bundled name, or a CSV path plus label column."""

    name: str
    path: str | None = None
    label_column: str | int | None = None

    @classmethod
    def parse(cls, text: str) -> "DatasetSpec":
        """``iris`` names a bundled dataset; ``path.csv`` or ``path.csv:label`` a file."""
        if text in BUNDLED:
            return cls(text)
        path, sep, label = text.rpartition(":")
        if sep and label and not Path(text).exists():
            return cls(Path(path).stem, path, label)
        return cls(Path(text).stem, text)

    def load(self) -> Dataset:
        if self.path is None:
            return load_bundled(self.name)
        return load_csv(self.path, self.label_column, name=self.name)

    def available(self) -> bool:
        return Path(self.path).is_file() if self.path else bundled_path(self.name).is_file()


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[DatasetSpec, ...]
    algorithms: tuple[str, ...] = ALGORITHMS
    iterations: int = 100
    tree_params: TreeParams = field(default_factory=TreeParams)
    noise_levels: tuple[float, ...] = DEFAULT_NOISE
    repeats: int = 20
    folds: int = 4
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if not self.datasets:
            raise ValueError("no datasets configured")
        if not self.algorithms:
            raise ValueError("no algorithms configured")
        object.__setattr__(self, "algorithms", tuple(check_algorithm(a) for a in self.algorithms))
        object.__setattr__(self, "noise_levels", tuple(float(p) for p in self.noise_levels))
        if any(not 0.0 <= p <= 1.0 for p in self.noise_levels):
            raise ValueError("noise levels must lie in [0, 1]")
        if self.repeats < 1 or self.folds < 2:
            raise ValueError("need repeats >= 1 and folds >= 2")
        if self.iterations < 1 or self.jobs < 1:
            raise ValueError("iterations and jobs must be positive")

    @classmethod
    def from_mapping(cls, cfg: dict) -> "ExperimentConfig":
        """Build a config from a JSON-style mapping (the config file key set)."""
        known = {"datasets", "algorithms", "iterations", "tree", "noise", "repeats", "folds",
                 "seed", "jobs", "out"}
        stray = set(cfg) - known
        if stray:
            raise ValueError(f"unknown config keys: {sorted(stray)}")
        kwargs = {}
        if "datasets" in cfg:
            kwargs["datasets"] = tuple(_dataset_entry(d) for d in cfg["datasets"])
        if "algorithms" in cfg:
            kwargs["algorithms"] = tuple(cfg["algorithms"])
        if "noise" in cfg:
            kwargs["noise_levels"] = tuple(cfg["noise"])
        if "tree" in cfg:
            kwargs["tree_params"] = TreeParams(**cfg["tree"])
        for key in ("iterations", "repeats", "folds", "seed", "jobs"):
            if key in cfg:
                kwargs[key] = int(cfg[key])
        kwargs.setdefault("datasets", tuple(DatasetSpec(n) for n in BUNDLED))
        return cls(**kwargs)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _dataset_entry(entry) -> DatasetSpec:
    if isinstance(entry, str):
        return DatasetSpec.parse(entry)
    return DatasetSpec(entry.get("name") or Path(entry["path"]).stem, entry.get("path"),
                       entry.get("label_column"))


def derive_seed(master: int, *key: int) -> int:
    """A 63-bit seed for the stream named by ``key``."""
    state = np.random.SeedSequence(master, spawn_key=key).generate_state(2, np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def _name_key(text: str) -> int:
    return zlib.crc32(text.encode())


def _noise_key(p: float) -> int:
    return int(round(p * 1_000_000))


@dataclass(frozen=True)
class CellResult:
    dataset: str
    algorithm: str
    noise: float
    repeat: int
    fold: int
    macro_f1: float = float("nan")
    error_rate: float = float("nan")
    train_seconds: float = 0.0
    components: int = 0
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def sort_key(self):
        return (self.dataset, self.algorithm, self.noise, self.repeat, self.fold)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[CellResult]
    failures: list[CellResult]
    skipped: list[str] = field(default_factory=list)

    def summary(self) -> list[tuple[str, str, float, float, float, int]]:
        """``(dataset, algorithm, noise, mean_f1, sd_f1, count)`` per group, sorted."""
        groups: dict[tuple, list[float]] = {}
        for r in self.records:
            groups.setdefault((r.dataset, r.algorithm, r.noise), []).append(r.macro_f1)
        out = []
        for key in sorted(groups):
            vals = np.array(groups[key])
            sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            out.append((*key, float(vals.mean()), sd, int(vals.size)))
        return out

    def mean_f1(self) -> dict[tuple[str, str, float], float]:
        return {(d, a, p): m for d, a, p, m, _, _ in self.summary()}

    def rank_tables(self) -> dict[float, RankTable]:
        """One table per noise level over datasets where every algorithm has results."""
        means = self.mean_f1()
        algos = self.config.algorithms
        tables = {}
        for p in self.config.noise_levels:
            names = sorted({d for d, _, q in means if q == p})
            complete = [d for d in names if all((d, a, p) in means for a in algos)]
            if complete:
                scores = [[means[(d, a, p)] for a in algos] for d in complete]
                tables[p] = average_ranks(scores, complete, algos)
        return tables

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "results.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULTS_HEADER)
            for r in self.records:
                w.writerow([r.dataset, r.algorithm, repr(r.noise), r.repeat, r.fold,
                            repr(r.macro_f1), repr(r.error_rate)])
        with open(out / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow((*SWEEP_HEADER, "records"))
            for d, a, p, m, sd, k in self.summary():
                w.writerow([d, a, repr(p), repr(m), repr(sd), k])
        tables = self.rank_tables()
        for p, table in tables.items():
            table.write_csv(out / f"ranks_{_noise_tag(p)}.csv")
        with open(out / "ranks.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["noise", *self.config.algorithms])
            for p, table in tables.items():
                w.writerow([repr(p), *(repr(table.mean_ranks[a]) for a in self.config.algorithms)])
        with open(out / "failures.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dataset", "algorithm", "noise", "repeat", "fold", "error"])
            for r in self.failures:
                w.writerow([r.dataset, r.algorithm, repr(r.noise), r.repeat, r.fold, r.error])
        with open(out / "run_log.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dataset", "algorithm", "noise", "repeat", "fold", "train_seconds",
                        "components"])
            for r in self.records:
                w.writerow([r.dataset, r.algorithm, repr(r.noise), r.repeat, r.fold,
                            f"{r.train_seconds:.6f}", r.components])
        return out

    def write_sweep(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_HEADER)
            for d, a, p, m, sd, _ in self.summary():
                w.writerow([d, a, repr(p), repr(m), repr(sd)])


def _noise_tag(p: float) -> str:
    """``0.05`` -> ``"05"``; fractional percents keep their decimals."""
    pct = p * 100
    return f"{round(pct):02d}" if abs(pct - round(pct)) < 1e-9 else f"{pct:g}"


@dataclass(frozen=True)
class _Unit:
    """All folds and algorithms for one (dataset, noise, repeat)."""

    dataset: Dataset
    plan: FoldPlan
    noise: float
    repeat: int
    algorithms: tuple[str, ...]
    iterations: int
    tree_params: TreeParams
    seed: int


def _run_unit(unit: _Unit) -> list[CellResult]:
    ds = unit.dataset
    dkey = _name_key(ds.name)
    pkey = _noise_key(unit.noise)
    noisy, _ = inject_label_noise(ds, unit.noise, derive_seed(unit.seed, dkey, 1, pkey, unit.repeat))
    out = []
    for fold in range(unit.plan.fold_count):
        train_idx = unit.plan.train_index(unit.repeat, fold)
        test_idx = unit.plan.test_index(unit.repeat, fold)
        train_set = noisy.take(train_idx)
        test_x = ds.features[test_idx]
        truth = ds.labels[test_idx]
        for algo in unit.algorithms:
            base = dict(dataset=ds.name, algorithm=algo, noise=unit.noise, repeat=unit.repeat,
                        fold=fold)
            seed = derive_seed(unit.seed, dkey, 2, pkey, unit.repeat, fold, _name_key(algo))
            try:
                start = time.perf_counter()
                model = train(algo, train_set, unit.iterations, unit.tree_params, seed)
                elapsed = time.perf_counter() - start
                pred = classify(predict(model, test_x))
                cm = confusion(truth, pred, ds.class_count)
                out.append(CellResult(**base, macro_f1=macro_f1(cm),
                                      error_rate=misclassification_rate(truth, pred),
                                      train_seconds=elapsed, components=component_count(model)))
            except Exception as exc:  # a failed cell is recorded, the run goes on
                log.warning("cell %s failed: %s", base, exc)
                out.append(CellResult(**base, error=f"{type(exc).__name__}: {exc}"))
    return out


def run_experiment(config: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run the whole grid; write the result files when ``out_dir`` is given.

    Datasets that are configured but missing on disk are skipped with a
    warning and listed in ``ExperimentResult.skipped``.
    """
    units, skipped = [], []
    for spec in config.datasets:
        if not spec.available():
            log.warning("dataset %s is not available; skipping", spec.name)
            skipped.append(spec.name)
            continue
        ds = spec.load()
        if ds.name != spec.name:
            ds = Dataset(ds.features, ds.labels, ds.class_count, ds.schema, ds.class_names,
                         spec.name, ds.label_name)
        plan = stratified_kfold(ds, config.folds, config.repeats,
                                derive_seed(config.seed, _name_key(ds.name), 0))
        for p in config.noise_levels:
            for r in range(config.repeats):
                units.append(_Unit(ds, plan, p, r, config.algorithms, config.iterations,
                                   config.tree_params, config.seed))

    if config.jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            batches = list(pool.map(_run_unit, units, chunksize=1))
    else:
        batches = [_run_unit(u) for u in units]

    cells = sorted((c for batch in batches for c in batch), key=lambda c: c.sort_key)
    result = ExperimentResult(config, [c for c in cells if not c.failed],
                              [c for c in cells if c.failed], skipped)
    if out_dir is not None:
        result.write(out_dir)
        (Path(out_dir) / "config.json").write_text(json.dumps(config_to_mapping(config), indent=2) + "\n")
    return result


def noise_sweep(config: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run the grid and also emit ``sweep.csv`` (long format, one row per group)."""
    result = run_experiment(config, out_dir)
    if out_dir is not None:
        result.write_sweep(Path(out_dir) / "sweep.csv")
    return result


def config_to_mapping(config: ExperimentConfig) -> dict:
    return {
        "datasets": [{"name": d.name, "path": d.path, "label_column": d.label_column}
                     for d in config.datasets],
        "algorithms": list(config.algorithms),
        "iterations": config.iterations,
        "tree": config.tree_params.to_dict(),
        "noise": list(config.noise_levels),
        "repeats": config.repeats,
        "folds": config.folds,
        "seed": config.seed,
        "jobs": config.jobs,
    }
