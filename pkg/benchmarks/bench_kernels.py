#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the NumPy fallback.

Shapes mirror the pipeline's hot paths: pre-training batches (128 x 512),
fine-tuning batches (8 x 512), and the gradient-check regime (2 x 32).
Run: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np
from threadpoolctl import threadpool_limits

from rfmsm.engine import kernels

CASES = [
    # name, batch, length, cin, cout, kernel, stride, dilation, padding
    ("pretrain stem", 128, 512, 2, 32, 7, 1, 1, 3),
    ("pretrain stage", 128, 256, 32, 32, 3, 1, 1, 1),
    ("pretrain deep", 128, 64, 128, 128, 3, 1, 1, 1),
    ("finetune stage", 8, 256, 32, 32, 3, 1, 1, 1),
    ("finetune deep", 8, 64, 128, 128, 3, 1, 1, 1),
    ("dilated block", 32, 512, 32, 32, 2, 1, 64, 0),
    ("gradcheck tiny", 2, 32, 4, 8, 3, 2, 1, 1),
]


def run_case(backend, batch, length, cin, cout, kernel, stride, dilation, padding, repeats):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((batch, length + 2 * (padding + dilation), cin)).astype(np.float32)
    x = x[:, : length, :].copy()
    w = rng.standard_normal((cout, cin, kernel)).astype(np.float32)
    y = kernels.conv1d_forward(x, w, stride, dilation, padding, backend=backend)
    gy = rng.standard_normal(y.shape).astype(np.float32)

    def fwd():
        kernels.conv1d_forward(x, w, stride, dilation, padding, backend=backend)

    def bwd():
        kernels.conv1d_backward(x, w, gy, stride, dilation, padding, backend=backend)

    out = []
    for fn in (fwd, bwd):
        fn()
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        out.append(float(np.median(times)) * 1e3)
    return out  # [forward ms, backward ms]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=15)
    args = parser.parse_args()

    backends = ["numpy"] + (["native"] if kernels.have_native() else [])
    print(f"active default backend: {kernels.backend_name()}")
    header = f"{'case':>16} | " + " | ".join(
        f"{name} fwd/bwd (ms)" for name in backends
    )
    print(header)
    print("-" * len(header))
    with threadpool_limits(limits=1):
        for case in CASES:
            name, *shape = case
            cols = []
            for bk_name in backends:
                fwd_ms, bwd_ms = run_case(
                    kernels.get_backend(bk_name), *shape, repeats=args.repeats
                )
                cols.append(f"{fwd_ms:9.3f} / {bwd_ms:8.3f}")
            print(f"{name:>16} | " + " | ".join(cols))


if __name__ == "__main__":
    main()
