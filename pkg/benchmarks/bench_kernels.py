"""Time tree growth and prediction with the compiled and numpy backends.

    python3 benchmarks/bench_kernels.py [--rows 20000] [--features 24] [--trees 5]

Both backends must produce identical models; the script checks this before
reporting timings.
"""

import argparse
import time

import numpy as np

from wbgbrt.gbrt import BACKENDS, BoostParams, fit


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--features", type=int, default=24)
    ap.add_argument("--trees", type=int, default=5)
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    X = rng.normal(size=(args.rows, args.features))
    y = X[:, 0] - 0.5 * X[:, 1] ** 2 + rng.normal(scale=0.1, size=args.rows)
    print(f"rows={args.rows} features={args.features} trees={args.trees} depth={args.depth}")
    print(f"{'method':<6} {'backend':<9} {'fit s':>9} {'predict s':>10}")
    for method in ("exact", "hist"):
        params = BoostParams(n_trees=args.trees, max_depth=args.depth, learning_rate=0.1, tree_method=method)
        preds = {}
        for name in sorted(BACKENDS):
            t_fit, model = _time(lambda: fit(X, y, params, backend=name), args.repeat)
            t_pred, preds[name] = _time(lambda: model.predict(X, name), args.repeat)
            print(f"{method:<6} {name:<9} {t_fit:9.3f} {t_pred:10.4f}")
        if len(preds) == 2 and not np.array_equal(preds["compiled"], preds["python"]):
            raise SystemExit(f"{method}: backends disagree")
    if "compiled" not in BACKENDS:
        print("compiled extension not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
