"""Compare the numba-compiled kernels against the pure-numpy fallback.

Run from the repo root:

    python3 benchmarks/bench_kernels.py

The active path follows MAAS_NO_NUMBA; the numpy column always uses the
plain implementations, so with numba enabled (the default) the table shows
the speedup of the compiled path on the controller's hot loop shapes.
"""

import time

import numpy as np

from maas import kernels

D, H, N_OPS = 256, 64, 9  # layer-4 feature width at d=64
REPEATS = 20_000


def bench(label, fn, args):
    fn(*args)  # warmup / trigger compilation
    t0 = time.perf_counter()
    for _ in range(REPEATS):
        fn(*args)
    return label, (time.perf_counter() - t0) / REPEATS * 1e6


def main():
    rng = np.random.default_rng(0)
    W1 = rng.uniform(-0.1, 0.1, (H, D))
    b1 = rng.uniform(-0.1, 0.1, H)
    W2 = rng.uniform(-0.1, 0.1, (N_OPS, H))
    b2 = rng.uniform(-0.1, 0.1, N_OPS)
    x = rng.normal(size=D)
    h, logits = kernels.numpy_impls["ffn_forward"](W1, b1, W2, b2, x)
    scores = kernels.numpy_impls["softmax"](logits)
    selected = np.array([4, 1, 7], dtype=np.int64)
    g_logits = kernels.numpy_impls["pl_grad_logits"](scores, selected)

    cases = [
        ("ffn_forward", "ffn_forward", (W1, b1, W2, b2, x)),
        ("softmax", "softmax", (logits,)),
        ("pl_grad_logits", "pl_grad_logits", (scores, selected)),
        ("ffn_backward", "ffn_backward", (W2, x, h, g_logits)),
    ]

    path = "numba" if kernels.USE_NUMBA else "numpy (MAAS_NO_NUMBA)"
    print(f"active path: {path}; {REPEATS} calls per case,"
          f" shapes d*4={D} h={H} n_ops={N_OPS}\n")
    print(f"{'kernel':<16} {'active (us)':>12} {'numpy (us)':>12} {'ratio':>7}")
    for name, key, args in cases:
        _, active = bench(name, getattr(kernels, key), args)
        _, plain = bench(name, kernels.numpy_impls[key], args)
        print(f"{name:<16} {active:>12.2f} {plain:>12.2f} {plain / active:>7.2f}x")


if __name__ == "__main__":
    main()
