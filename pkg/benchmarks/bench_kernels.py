"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are called in-process through the ``use_numba`` switch; the
first numba call (compilation or cache load) is excluded from the timings.
"""
import argparse
import time
from pathlib import Path

import numpy as np

from altsc import kernels
from altsc._accel import HAVE_NUMBA
from altsc.dataset import load_ts
from altsc.lawcore import WindowConfig, downsample, extract_windows

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def windows_of(ds, cfg, n):
    Z = [downsample(extract_windows(ds.values[i][0], cfg), cfg) for i in range(n)]
    return np.ascontiguousarray(np.vstack(Z))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    gp = load_ts(DATA / "GunPoint_TRAIN.ts")
    bm = load_ts(DATA / "BasicMotions_TRAIN.ts")
    cases = [
        ("shapelets GunPoint (25,4,1) x10 inst", lambda nb: kernels.batch_shapelets(Z1, 4, use_numba=nb)),
        ("shapelets BasicMotions (53,27,1) x8 inst", lambda nb: kernels.batch_shapelets(Z2, 27, use_numba=nb)),
        ("row quantiles 135 x 1260, p=0.05", lambda nb: kernels.row_quantiles(O, 0.05, use_numba=nb)),
    ]
    Z1 = windows_of(gp, WindowConfig(25, 4, 1), 10)
    Z2 = windows_of(bm, WindowConfig(53, 27, 1), 8)
    O = np.abs(np.random.default_rng(0).normal(size=(135, 1260)))
    print(f"{'kernel':42s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speed-up':>9s}")
    for name, fn in cases:
        fn(True)  # compile / load cache
        t_nb = best_of(lambda: fn(True), args.repeat)
        t_np = best_of(lambda: fn(False), args.repeat)
        print(f"{name:42s} {t_nb * 1e3:11.2f} {t_np * 1e3:11.2f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
