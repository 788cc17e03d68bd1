#!/usr/bin/env python3
"""Time the numba kernel builds against their pure-numpy twins.

Covers the two hot loops: the fused LSTM sequence scan (training cost)
and the per-window ARIMA fit+forecast pipeline (baseline cost).  Run:

    python3 benchmarks/bench_backends.py [--repeats 5]

The active backend for package users is controlled by FUZZFORMER_NUMBA;
this script always times both builds when numba is importable.
"""

import argparse
import time

import numpy as np

from fuzzformer.kernels import arima as ak
from fuzzformer.kernels import lstm as lk


def timeit(fn, repeats):
    fn()  # warm-up (numba compilation, caches)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_lstm(repeats, n=60, batch=64, d_in=16, d_h=16):
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.normal(size=(n, batch, d_in)))
    wx = rng.normal(size=(d_in, 4 * d_h)) * 0.3
    wh = rng.normal(size=(d_h, 4 * d_h)) * 0.3
    b = rng.normal(size=4 * d_h) * 0.1
    caches = lk.lstm_forward_numpy(x, wx, wh, b)
    dh = rng.normal(size=caches[0].shape)

    rows = []
    builds = [("numpy", lk.lstm_forward_numpy, lk.lstm_backward_numpy)]
    if lk.lstm_forward_numba is not None:
        builds.append(("numba", lk.lstm_forward_numba, lk.lstm_backward_numba))
    for name, fwd, bwd in builds:
        t_f = timeit(lambda: fwd(x, wx, wh, b), repeats)
        t_b = timeit(lambda: bwd(x, wx, wh, dh, *caches), repeats)
        rows.append((f"lstm scan fwd ({n}x{batch}x{d_in}->{d_h})", name, t_f))
        rows.append(("lstm scan bwd (same shape)", name, t_b))
    return rows


def bench_arima(repeats, n_windows=200, window=60, p=4, d=1, q=1, horizon=30):
    rng = np.random.default_rng(1)
    series = rng.normal(size=n_windows + window).cumsum()
    windows = np.stack([series[i : i + window] for i in range(n_windows)])

    def run(fit, resid, predict):
        for w in range(n_windows):
            x = windows[w, 1:] - windows[w, :-1]
            mu = x.mean()
            phi, theta, ok = fit(x - mu, p, q)
            if not ok:
                continue
            eps = resid(x - mu, phi, theta)
            predict(x - mu, eps, phi, theta, horizon)

    rows = []
    builds = [("numpy", ak.hr_fit_numpy, ak.arma_residuals_numpy, ak.arma_predict_numpy)]
    if ak.hr_fit_numba is not None:
        builds.append(("numba", ak.hr_fit_numba, ak.arma_residuals_numba, ak.arma_predict_numba))
    for name, fit, resid, predict in builds:
        t = timeit(lambda: run(fit, resid, predict), repeats)
        rows.append((f"arima fit+forecast ({n_windows} windows, p={p})", name, t))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    rows = (
        bench_lstm(args.repeats, d_in=16, d_h=16)
        + bench_lstm(args.repeats, d_in=4, d_h=128)
        + bench_arima(args.repeats, p=4)
        + bench_arima(args.repeats, n_windows=50, window=150, p=30)
    )
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel'.ljust(width)}  backend  best time")
    print(f"{'-' * width}  -------  ---------")
    by_kernel = {}
    for kernel, backend, t in rows:
        print(f"{kernel.ljust(width)}  {backend:7s}  {t * 1e3:9.3f} ms")
        by_kernel.setdefault(kernel, {})[backend] = t
    print()
    for kernel, times in by_kernel.items():
        if "numba" in times and "numpy" in times:
            print(f"{kernel}: numba speedup x{times['numpy'] / times['numba']:.1f}")


if __name__ == "__main__":
    main()
