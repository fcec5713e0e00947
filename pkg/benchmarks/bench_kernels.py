#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Runs each hot kernel on a realistic workload (mixed-cardinality features,
partial sampling) and on a full end-to-end training round, printing a
speedup table. Both backends produce bit-identical outputs; only speed
differs.
"""

from __future__ import annotations

import time

import numpy as np

from fedboost import _kernels_py

try:
    from fedboost import _kernels
except ImportError:
    _kernels = None


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_hist_accumulate(backend, bins, rows, slots, g, h, offsets, n_slots, total):
    def run():
        stats = np.zeros((3, n_slots, total))
        backend.hist_accumulate(bins, rows, slots, g, h, offsets, stats)

    return timeit(run)


def bench_best_splits(backend, stats, offsets, bpf):
    return timeit(lambda: backend.best_splits(stats, offsets, bpf, 0.1, 0.0, 1.0))


def bench_predict(backend, bins, feature, threshold, left, right, weight):
    out = np.empty(bins.shape[0])
    return timeit(lambda: backend.predict_rows(bins, feature, threshold, left, right, weight, out))


def build_tree(rng, depth, n_features, max_bin):
    """Complete binary tree of the given depth with random splits."""
    n_internal = 2**depth - 1
    n_nodes = 2 ** (depth + 1) - 1
    feature = np.full(n_nodes, -1, dtype=np.int32)
    threshold = np.zeros(n_nodes, dtype=np.int32)
    left = np.full(n_nodes, -1, dtype=np.int32)
    right = np.full(n_nodes, -1, dtype=np.int32)
    for i in range(n_internal):
        feature[i] = rng.integers(0, n_features)
        threshold[i] = rng.integers(0, max_bin - 1)
        left[i] = 2 * i + 1
        right[i] = 2 * i + 2
    weight = rng.normal(size=n_nodes)
    return feature, threshold, left, right, weight


def main():
    rng = np.random.default_rng(0)
    n_rows, n_features, max_bin = 200_000, 12, 256
    bpf = np.array([max_bin if f % 3 == 0 else int(rng.integers(2, 48)) for f in range(n_features)],
                   dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(bpf[:-1])])
    total = int(bpf.sum())
    bins = np.ascontiguousarray(
        np.column_stack([rng.integers(0, b, n_rows) for b in bpf]), dtype=np.uint16
    )
    g = rng.normal(size=n_rows)
    h = np.abs(rng.normal(size=n_rows))
    rows = np.flatnonzero(rng.random(n_rows) < 0.3).astype(np.int64)
    n_slots = 32
    slots = rng.integers(0, n_slots, rows.shape[0]).astype(np.int32)

    stats = np.zeros((3, n_slots, total))
    _kernels_py.hist_accumulate(bins, rows, slots, g, h, offsets, stats)

    feature, threshold, left, right, weight = build_tree(rng, 8, n_features, max_bin)

    cases = [
        ("hist_accumulate",
         lambda b: bench_hist_accumulate(b, bins, rows, slots, g, h, offsets, n_slots, total)),
        ("best_splits", lambda b: bench_best_splits(b, stats, offsets, bpf)),
        ("predict_rows", lambda b: bench_predict(b, bins, feature, threshold, left, right, weight)),
    ]
    print(f"workload: {n_rows} rows x {n_features} features, {rows.size} sampled, "
          f"{n_slots} nodes, {total} histogram cells\n")
    print(f"{'kernel':<18} {'numpy':>10} {'cython':>10} {'speedup':>9}")
    for name, bench in cases:
        t_py = bench(_kernels_py)
        if _kernels is None:
            print(f"{name:<18} {t_py * 1e3:>8.1f}ms {'n/a':>10} {'n/a':>9}")
            continue
        t_cy = bench(_kernels)
        print(f"{name:<18} {t_py * 1e3:>8.1f}ms {t_cy * 1e3:>8.1f}ms {t_py / t_cy:>8.1f}x")

    # end-to-end: one 50-round federated run on synthetic tabular data
    import os
    import subprocess
    import sys

    script = (
        "import time, numpy as np\n"
        "from fedboost import kernels\n"
        "from fedboost.federation import ClientSplits, setup, make_clients, train_federated\n"
        "from fedboost.gbdt import HyperParams\n"
        "from fedboost.sampling import SamplingConfig\n"
        "rng = np.random.default_rng(5)\n"
        "n = 20000\n"
        "x = rng.normal(size=(n, 8))\n"
        "y = (x[:, 0] + 0.4 * rng.normal(size=n) > 0).astype(np.int64)\n"
        "bounds = np.linspace(0, n, 5).astype(int)\n"
        "splits = []\n"
        "for c in range(4):\n"
        "    xs, ys = x[bounds[c]:bounds[c+1]], y[bounds[c]:bounds[c+1]]\n"
        "    k = int(len(ys) * 0.8)\n"
        "    splits.append(ClientSplits(c, xs[:k], ys[:k], xs[k:], ys[k:]))\n"
        "params = HyperParams(eta=0.1, reg_lambda=0.1, max_depth=6, max_bin=256, rounds=50)\n"
        "t0 = time.time()\n"
        "bins, base = setup(splits, 256, 'binary', 2)\n"
        "clients = make_clients(splits, bins, 'binary', 2, SamplingConfig('mvs', 20, 0), 7)\n"
        "train_federated(clients, bins, base, 'binary', 2, params)\n"
        "print(f'{kernels.BACKEND}: {time.time() - t0:.2f}s')\n"
    )
    print("\nend-to-end 50-round federated run (20k rows, 8 features, MVS20):", flush=True)
    for force in ("0", "1"):
        env = dict(os.environ, FEDBOOST_PURE_PYTHON=force)
        subprocess.run([sys.executable, "-c", script], env=env, check=True)


if __name__ == "__main__":
    main()
