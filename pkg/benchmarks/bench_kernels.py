"""Benchmark the gated-attention block kernels: compiled core vs numpy fallback.

Usage:
    python3 benchmarks/bench_kernels.py [--sizes 8,32,128] [--dim 70]
                                        [--repeats 400]
"""

import argparse
import time

import numpy as np

from pligraph.kernels import _pure

BACKENDS = [("pure", _pure)]
try:
    from pligraph.kernels import _core
    BACKENDS.append(("compiled", _core))
except ImportError:
    pass


def _inputs(n, dim, seed=0):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(n, dim))
    adj = np.eye(n)
    for i in range(n - 1):
        adj[i, i + 1] = adj[i + 1, i] = 1.0
    extra = rng.integers(0, n, size=(max(n, 2), 2))
    for i, j in extra:
        if i != j:
            adj[i, j] = adj[j, i] = rng.uniform(0.1, 1.0)
    mask = np.ascontiguousarray(adj > 0, dtype=np.uint8)
    w_t = rng.normal(size=(dim, dim)) * 0.3
    w_a = rng.normal(size=(dim, dim)) * 0.3
    u = rng.normal(size=(2 * dim, 1)) * 0.3
    g = rng.normal(size=(n, dim))
    return h, adj, mask, w_t, w_a, u, 0.1, g


def _time(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def bench(n, dim, repeats):
    h, adj, mask, w_t, w_a, u, b, g = _inputs(n, dim)
    rows = []
    for name, impl in BACKENDS:
        def fwd():
            impl.block_forward(h, adj, mask, w_t, w_a, u, b)

        def fwd_bwd():
            _, ctx = impl.block_forward(h, adj, mask, w_t, w_a, u, b)
            impl.block_backward(ctx, g)

        rows.append((name, _time(fwd, repeats), _time(fwd_bwd, repeats)))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="8,32,128",
                        help="comma-separated node counts")
    parser.add_argument("--dim", type=int, default=70)
    parser.add_argument("--repeats", type=int, default=400)
    args = parser.parse_args()

    if len(BACKENDS) == 1:
        print("compiled kernels not built; benchmarking the fallback only")
    print(f"gated-attention block kernels, dim={args.dim}, "
          f"best of 5 x {args.repeats} calls")
    print(f"{'N':>6} {'backend':>9} {'forward':>12} {'fwd+bwd':>12} {'speedup':>9}")
    for n in (int(s) for s in args.sizes.split(",")):
        rows = bench(n, args.dim, args.repeats)
        base_fwd, base_both = rows[0][1], rows[0][2]
        for name, t_fwd, t_both in rows:
            speedup = "" if name == "pure" else f"{base_both / t_both:8.1f}x"
            print(f"{n:>6} {name:>9} {t_fwd * 1e6:>10.1f}us "
                  f"{t_both * 1e6:>10.1f}us {speedup:>9}")


if __name__ == "__main__":
    main()
