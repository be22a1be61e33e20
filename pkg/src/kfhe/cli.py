"""Command line front end: ``kfhe {train,predict,benchmark,noise-sweep,trace}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

from .bench import DatasetSpec, ExperimentConfig, noise_sweep, run_experiment
from .cart import TreeParams
from .core import KfheModel, classify, training_trace, write_trace_csv
from .dataset import BUNDLED, DatasetError, available_bundled, load_features
from .models import ALGORITHMS, ModelFileError, load_model, predict, save_model, train

log = logging.getLogger("kfhe")


def _noise_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad noise list {text!r}") from None


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _algorithm(text: str) -> str:
    key = text.lower()
    if key == "kfhe":
        return key
    if key not in ALGORITHMS:
        raise argparse.ArgumentTypeError(
            f"invalid algorithm {text!r} (choose from kfhe, {', '.join(ALGORITHMS)})")
    return key


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--iterations", "-T", type=int, help="ensemble size T (default 100)")


def _add_grid(p: argparse.ArgumentParser) -> None:
    _add_common(p)
    p.add_argument("--config", type=Path, help="JSON config file; command line flags win")
    p.add_argument("--datasets", type=_csv_list,
                   help="comma separated bundled names or CSV paths (path.csv:label)")
    p.add_argument("--algorithms", type=_csv_list, help=f"subset of {','.join(ALGORITHMS)}")
    p.add_argument("--noise", type=_noise_list, help="comma separated noise fractions")
    p.add_argument("--repeats", type=int, help="cross-validation repeats (default 20)")
    p.add_argument("--folds", type=int, help="folds per repeat (default 4)")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--out", type=Path, help="output directory (default ./kfhe-results)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kfhe", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model and write a model file")
    p.add_argument("data", help="training CSV or bundled dataset name")
    p.add_argument("--label-column", help="label column name (default: last column)")
    p.add_argument("--algorithm", type=_algorithm, default="kfhe",
                   help="kfhe (with --variant), kfhe-e, kfhe-l, adaboost, bagging or cart")
    p.add_argument("--variant", choices=("e", "l"), default="e",
                   help="weight update for kfhe: e = exponential, l = linear")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True, help="model file to write")
    p.add_argument("--trace", type=Path, help="trace CSV for kfhe (default: <out>.trace.csv)")

    p = sub.add_parser("predict", help="score rows with a saved model")
    p.add_argument("model", type=Path)
    p.add_argument("data", help="CSV with the model's feature columns (label column optional)")
    p.add_argument("--out", type=Path, help="predictions CSV (default: stdout)")

    p = sub.add_parser("benchmark", help="repeated cross-validation over the grid")
    _add_grid(p)

    p = sub.add_parser("noise-sweep", help="benchmark plus a long-format sweep.csv")
    _add_grid(p)

    p = sub.add_parser("trace", help="write the per-iteration filter trace of one kfhe run")
    p.add_argument("data", help="training CSV or bundled dataset name")
    p.add_argument("--label-column")
    p.add_argument("--variant", choices=("e", "l"), default="e")
    _add_common(p)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    return parser


def _load_training(data: str, label_column):
    if data in BUNDLED and not Path(data).exists():
        return DatasetSpec(data).load()
    return DatasetSpec(Path(data).stem, data, label_column).load()


def _kfhe_id(algorithm: str, variant: str) -> str:
    return f"kfhe-{variant}" if algorithm == "kfhe" else algorithm


def cmd_train(args) -> int:
    ds = _load_training(args.data, args.label_column)
    algo = _kfhe_id(args.algorithm, args.variant)
    params = TreeParams()
    start = time.perf_counter()
    model = train(algo, ds, args.iterations or 100, params, args.seed or 0)
    log.info("trained %s on %s in %.2fs", algo, ds.name, time.perf_counter() - start)
    save_model(model, args.out, ds.class_names, ds.label_name, params)
    if isinstance(model, KfheModel):
        trace_path = args.trace or args.out.with_name(args.out.name + ".trace.csv")
        write_trace_csv(training_trace(model), trace_path)
        print(f"wrote {args.out} and {trace_path}")
    else:
        print(f"wrote {args.out}")
    return 0


def cmd_predict(args) -> int:
    model, header = load_model(args.model)
    X = load_features(args.data, header["schema"], header["label_name"])
    scores = predict(model, X)
    labels = classify(scores) if len(scores) else []
    classes = header["classes"]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_index", *(f"score_{c}" for c in classes), "predicted"])
        for i, (row, k) in enumerate(zip(scores, labels)):
            w.writerow([i, *(repr(float(v)) for v in row), classes[k]])
    finally:
        if args.out:
            fh.close()
    return 0


def _grid_config(args) -> tuple[ExperimentConfig, Path]:
    cfg = json.loads(args.config.read_text()) if args.config else {}
    if args.datasets:
        cfg["datasets"] = list(args.datasets)
    config = ExperimentConfig.from_mapping(cfg)
    if not args.datasets and "datasets" not in cfg:
        config = config.with_overrides(
            datasets=tuple(DatasetSpec(n) for n in available_bundled()))
    config = config.with_overrides(algorithms=args.algorithms, noise_levels=args.noise,
                                   repeats=args.repeats, folds=args.folds, seed=args.seed,
                                   iterations=args.iterations, jobs=args.jobs)
    return config, args.out or Path(cfg.get("out", "kfhe-results"))


def _report(result, out: Path) -> None:
    print(f"{len(result.records)} records, {len(result.failures)} failed cells -> {out}")
    if result.skipped:
        print(f"skipped unavailable datasets: {', '.join(result.skipped)}")
    for p, table in result.rank_tables().items():
        ranks = "  ".join(f"{a}={r:.2f}" for a, r in table.mean_ranks.items())
        print(f"noise {p:.2f}: {ranks}")


def cmd_benchmark(args) -> int:
    config, out = _grid_config(args)
    _report(run_experiment(config, out), out)
    return 0


def cmd_noise_sweep(args) -> int:
    config, out = _grid_config(args)
    _report(noise_sweep(config, out), out)
    return 0


def cmd_trace(args) -> int:
    ds = _load_training(args.data, args.label_column)
    model = train(f"kfhe-{args.variant}", ds, args.iterations or 100, TreeParams(), args.seed or 0)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"trace_{ds.name}-{args.variant}.csv"
    write_trace_csv(training_trace(model), path)
    print(f"wrote {path} ({len(model.trace)} iterations)")
    return 0


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "benchmark": cmd_benchmark,
            "noise-sweep": cmd_noise_sweep, "trace": cmd_trace}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DatasetError, ModelFileError, ValueError, OSError) as exc:
        print(f"kfhe {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
