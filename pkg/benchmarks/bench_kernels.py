"""Time tree growing and KFHE training on the numba path against the numpy path.

The kernel path is fixed at import time, so each path runs in its own
subprocess (``KFHE_DISABLE_NUMBA=1`` selects numpy). Both paths must grow
identical trees; the script checks that by comparing the training-set
scores of a KFHE model.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--datasets iris,sonar]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import hashlib, json, sys, time
import numpy as np
from kfhe import TrainConfig, fit_tree, kfhe_train, load_bundled, predict_scores
from kfhe._accel import USE_NUMBA

names, repeat = sys.argv[1].split(","), int(sys.argv[2])
out = {"numba": USE_NUMBA, "rows": []}
for name in names:
    ds = load_bundled(name)
    fit_tree(ds)  # warm-up: compile or load the numba cache
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        predict_scores(fit_tree(ds), ds)
        best = min(best, time.perf_counter() - t0)
    t0 = time.perf_counter()
    model = kfhe_train(ds, TrainConfig(iterations=100, seed=0))
    kfhe_s = time.perf_counter() - t0
    digest = hashlib.sha256(model.final_estimate.tobytes()).hexdigest()[:16]
    out["rows"].append({"dataset": name, "tree_ms": best * 1e3, "kfhe_s": kfhe_s,
                        "trees": len(model.components), "digest": digest})
print(json.dumps(out))
"""


def run(disable: bool, names: str, repeat: int) -> dict:
    env = dict(os.environ)
    env["KFHE_DISABLE_NUMBA"] = "1" if disable else "0"
    proc = subprocess.run([sys.executable, "-c", WORKER, names, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--datasets", default="iris,sonar,glass,monks,zoo")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    fast = run(False, args.datasets, args.repeat)
    slow = run(True, args.datasets, args.repeat)
    if not fast["numba"]:
        print("warning: numba is not importable; both columns use numpy")
    print(f"{'dataset':<12}{'tree numba':>12}{'tree numpy':>12}{'speedup':>9}"
          f"{'kfhe numba':>12}{'kfhe numpy':>12}  same")
    mismatch = False
    for a, b in zip(fast["rows"], slow["rows"]):
        same = a["digest"] == b["digest"] and a["trees"] == b["trees"]
        mismatch |= not same
        print(f"{a['dataset']:<12}{a['tree_ms']:>10.2f}ms{b['tree_ms']:>10.2f}ms"
              f"{b['tree_ms'] / a['tree_ms']:>8.1f}x{a['kfhe_s']:>11.2f}s{b['kfhe_s']:>11.2f}s  "
              f"{'yes' if same else 'NO'}")
    return 1 if mismatch else 0


if __name__ == "__main__":
    sys.exit(main())
