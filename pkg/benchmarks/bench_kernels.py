"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel is timed on identical inputs under both backends; the best of
``--repeat`` runs is reported.
"""

import argparse
import timeit

import numpy as np

from dgadetect import _pykernels
from dgadetect.baseline import ForestConfig, train_forest_arrays

try:
    from dgadetect import _ckernels
except ImportError:
    _ckernels = None


def lstm_inputs(rng, B=64, T=20, d=16, h=64):
    E = rng.uniform(-0.08, 0.08, (39, d))
    W = rng.uniform(-0.08, 0.08, (d, 4 * h))
    U = rng.uniform(-0.08, 0.08, (h, 4 * h))
    b = np.zeros(4 * h)
    ids = np.zeros((B, T), dtype=np.int64)
    for r in range(B):
        n = int(rng.integers(6, T + 1))
        ids[r, T - n:] = rng.integers(2, 39, n)
    return E, W, U, b, ids


def cases(rng):
    E, W, U, b, ids = lstm_inputs(rng)
    fwd = _pykernels.lstm_forward(E, W, U, b, ids, 0)
    dh = rng.normal(size=(ids.shape[0], U.shape[0]))

    n = 8000
    x = np.sort(np.round(rng.uniform(0, 4.5, n), 3))
    y = rng.integers(0, 2, n).astype(np.int64)

    X = np.column_stack([rng.uniform(0, 4.5, n), rng.integers(3, 25, n)]).astype(np.float64)
    labels = (X[:, 0] + rng.normal(0, 0.4, n) > 3).astype(np.int64)
    packed = train_forest_arrays(X, labels, ForestConfig(100, 8, 0)).packed()
    Q = X[:1000]

    return {
        "lstm_forward  (B=64, T=20, h=64)": lambda k: k.lstm_forward(E, W, U, b, ids, 0),
        "lstm_backward (B=64, T=20, h=64)": lambda k: k.lstm_backward(E, W, U, ids, 0, *fwd, dh),
        "split_scores  (n=8000)": lambda k: k.split_scores(x, y),
        "forest_votes  (100 trees, 1000 rows)": lambda k: k.forest_votes(*packed, Q),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':40s}" + "".join(f"{name:>12s}" for name, _ in backends) + "     speedup")
    for label, fn in cases(np.random.default_rng(0)).items():
        times = []
        for _, mod in backends:
            number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(mod), number=1), 1e-6)))
            best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
            times.append(best)
        row = f"{label:40s}" + "".join(f"{t * 1e3:10.3f}ms" for t in times)
        if len(times) == 2:
            row += f"  {times[0] / times[1]:8.1f}x"
        print(row)
    if _ckernels is None:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
