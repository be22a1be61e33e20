#!/usr/bin/env python3
"""Download benchmark datasets that are not shipped with the package.

Each file is rewritten as a headed CSV with the label in the last column,
which is what ``kfhe.load_csv`` and ``kfhe benchmark --datasets`` expect.
Rows with missing values are dropped (the loader rejects them) and the
number dropped is reported.

    python3 scripts/fetch_datasets.py                 # everything below
    python3 scripts/fetch_datasets.py newthyroid car_eval --dest data/

By default the files land in the package data directory, so the two
bundled names that cannot ship here (``newthyroid``, ``vertebral``) become
available to ``kfhe.load_bundled`` after a run.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import urllib.request
import zipfile
from dataclasses import dataclass
from pathlib import Path

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases/"
PACKAGE_DATA = Path(__file__).resolve().parents[1] / "src" / "kfhe" / "data"
MISSING = {"", "?", "NA"}


@dataclass(frozen=True)
class Source:
    url: str
    label: int  # column index of the class in the raw file
    names: tuple[str, ...] = ()  # feature names; generated when empty
    member: str | None = None  # file inside a zip archive
    whitespace: bool = False
    header: bool = False
    drop: tuple[int, ...] = ()  # raw columns to discard (ids, names)


SOURCES = {
    "newthyroid": Source(UCI + "thyroid-disease/new-thyroid.data", 0,
                         ("t3_resin", "thyroxin", "triiodothyronine", "tsh", "tsh_diff")),
    "vertebral": Source(UCI + "00212/vertebral_column_data.zip", -1,
                        ("pelvic_incidence", "pelvic_tilt", "lumbar_lordosis_angle",
                         "sacral_slope", "pelvic_radius", "spondylolisthesis_grade"),
                        member="column_3C.dat", whitespace=True),
    "car_eval": Source(UCI + "car/car.data", -1,
                       ("buying", "maint", "doors", "persons", "lug_boot", "safety")),
    "mushroom": Source(UCI + "mushroom/agaricus-lepiota.data", 0),
    "balance_scale": Source(UCI + "balance-scale/balance-scale.data", 0,
                            ("left_weight", "left_distance", "right_weight", "right_distance")),
    "cmc": Source(UCI + "cmc/cmc.data", -1),
    "ionosphere": Source(UCI + "ionosphere/ionosphere.data", -1),
    "spam": Source(UCI + "spambase/spambase.data", -1),
    "yeast": Source(UCI + "yeast/yeast.data", -1, whitespace=True, drop=(0,)),
    "cleveland": Source(UCI + "heart-disease/processed.cleveland.data", -1),
    "lymphography": Source(UCI + "lymphography/lymphography.data", 0),
    "movement_libras": Source(UCI + "libras/movement_libras.data", -1),
    "german": Source(UCI + "statlog/german/german.data", -1, whitespace=True),
    "ilpd": Source(UCI + "00225/Indian%20Liver%20Patient%20Dataset%20(ILPD).csv", -1),
    "SAheart": Source("https://web.stanford.edu/~hastie/ElemStatLearn/datasets/SAheart.data", -1,
                      header=True, drop=(0,)),
}

# No stable machine-readable source is known for these; place a label-last CSV by hand.
MANUAL = ("tvowel", "skulls", "diabetes", "physio", "knowledge", "breasttissue", "flags")


def fetch(url: str, timeout: float) -> bytes:
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read()


def parse(raw: bytes, src: Source) -> tuple[list[str], list[list[str]], int]:
    if src.member:
        with zipfile.ZipFile(io.BytesIO(raw)) as zf:
            raw = zf.read(src.member)
    text = raw.decode("utf-8", errors="replace")
    if src.whitespace:
        rows = [line.split() for line in text.splitlines() if line.strip()]
    else:
        rows = [[c.strip() for c in r] for r in csv.reader(io.StringIO(text)) if r]
    header = rows.pop(0) if src.header else None

    width = len(rows[0])
    label = src.label % width
    keep = [j for j in range(width) if j != label and j not in src.drop]
    if src.names:
        names = list(src.names)
    elif header:
        names = [header[j] for j in keep]
    else:
        names = [f"a{k + 1}" for k in range(len(keep))]
    if len(names) != len(keep):
        raise ValueError(f"expected {len(keep)} feature names, got {len(names)}")
    label_name = header[label] if header else "class"

    out, dropped = [], 0
    for r in rows:
        if len(r) != width or any(r[j] in MISSING for j in (*keep, label)):
            dropped += 1
            continue
        out.append([r[j] for j in keep] + [r[label]])
    return [*names, label_name], out, dropped


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("names", nargs="*", help=f"subset of: {', '.join(SOURCES)}")
    parser.add_argument("--dest", type=Path, default=PACKAGE_DATA)
    parser.add_argument("--timeout", type=float, default=60.0)
    parser.add_argument("--force", action="store_true", help="overwrite existing files")
    args = parser.parse_args(argv)

    names = args.names or list(SOURCES)
    unknown = [n for n in names if n not in SOURCES]
    if unknown:
        parser.error(f"no download source for {', '.join(unknown)} "
                     f"(manual: {', '.join(MANUAL)})")
    args.dest.mkdir(parents=True, exist_ok=True)
    failed = 0
    for name in names:
        target = args.dest / f"{name}.csv"
        if target.exists() and not args.force:
            print(f"{name}: exists, skipping")
            continue
        try:
            header, rows, dropped = parse(fetch(SOURCES[name].url, args.timeout), SOURCES[name])
        except Exception as exc:
            print(f"{name}: FAILED ({exc})", file=sys.stderr)
            failed += 1
            continue
        with open(target, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        note = f", dropped {dropped} rows with missing values" if dropped else ""
        print(f"{name}: {len(rows)} rows -> {target}{note}")
    if not args.names:
        print(f"not downloadable, add by hand: {', '.join(MANUAL)}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
