#!/usr/bin/env python3
"""Compare the numba and numpy kernel backends on training-shaped batches.

Times one forward+backward pass (the training hot path) and a chain of
single-interaction probe steps (the influence-extraction hot path).

Usage:
    python benchmarks/bench_kernels.py [--exercises 123] [--hidden 64]
                                       [--batch 32] [--steps 200] [--repeat 20]
"""

import argparse
import time

import numpy as np

from dktgraph.dkt.kernels import numpy_backend

try:
    from dktgraph.dkt.kernels import numba_backend
except ImportError:
    numba_backend = None


def make_problem(rng, E, H, B, T):
    k = 1.0 / np.sqrt(H)
    params = [
        rng.uniform(-k, k, (2 * E, 4 * H)),
        rng.uniform(-k, k, (H, 4 * H)),
        rng.uniform(-k, k, (4 * H,)),
        rng.uniform(-k, k, (E, H)),
        rng.uniform(-k, k, (E,)),
    ]
    data = (
        rng.integers(0, 2 * E, (T, B)),
        rng.integers(0, E, (T, B)),
        rng.integers(0, 2, (T, B)).astype(np.float64),
        np.ones((T, B)),
    )
    return params, data


def bench(fn, repeat, warmup=2):
    for _ in range(warmup):
        fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--exercises", type=int, default=123)
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--batch", type=int, default=32)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    params, data = make_problem(rng, args.exercises, args.hidden, args.batch, args.steps)
    probe_seq = np.zeros(200, dtype=np.int64)

    backends = [("numpy", numpy_backend)]
    if numba_backend is not None:
        backends.append(("numba", numba_backend))
    else:
        print("numba unavailable; benchmarking numpy only")

    results = {}
    for name, K in backends:
        def train_pass():
            out = K.lstm_forward_train(*data, *params)
            K.lstm_backward_train(*data, out[1], *out[2:], *params)

        def probe_pass():
            h = np.zeros(args.hidden)
            c = np.zeros(args.hidden)
            for k in probe_seq:
                h, c = K.lstm_step(k, h, c, *params[:3])
                K.output_probs(h, params[3], params[4])

        results[name] = (bench(train_pass, args.repeat), bench(probe_pass, args.repeat))
        t, p = results[name]
        steps_per_s = args.steps * args.batch / t
        print(f"{name:6s} train fwd+bwd: {t * 1e3:8.2f} ms  "
              f"({steps_per_s / 1e3:7.0f}k student-steps/s)   "
              f"probe x200: {p * 1e3:7.2f} ms")

    if len(results) == 2:
        t_np, p_np = results["numpy"]
        t_nb, p_nb = results["numba"]
        print(f"speedup          train: {t_np / t_nb:5.1f}x                 "
              f"         probe: {p_np / p_nb:5.1f}x")


if __name__ == "__main__":
    main()
