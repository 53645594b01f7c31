"""Benchmark: compiled Cython kernels vs the pure-Python fallback.

Times the two double-mode hot paths (batched forward decisions and one
full-batch loss+gradient step) on the same inputs and prints the speedup.
The two backends are bit-identical; this script is only about wall-clock.

    python benchmarks/bench_backends.py [--repeats 5]
"""

import argparse
import random
import time

import numpy as np

from softmaxlab import backend
from softmaxlab.model import random_spec


def timed(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(name, kernels, ps, widx, labels, repeats):
    args = (ps.pos, ps.h, ps.K, ps.Q, list(ps.Ws), list(ps.bs))
    fwd = timed(lambda: kernels.batch_forward(*args, widx, ps.stable), repeats)
    grad = timed(lambda: kernels.loss_and_grads(*args, widx, labels, ps.stable), repeats)
    print(f"  {name:<10} forward {fwd * 1e3:8.2f} ms   loss+grads {grad * 1e3:8.2f} ms")
    return fwd, grad


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--n", type=int, default=10)
    parser.add_argument("--d", type=int, default=8)
    parser.add_argument("--words", type=int, default=4096)
    args = parser.parse_args()

    compiled = backend.compiled_kernels()
    pure = backend.pure_kernels()
    if compiled is None:
        print("compiled kernels not built; nothing to compare")
        return

    sigma = tuple(range(4))
    spec = random_spec(args.n, args.d, sigma, mlp_hidden=(16,), seed=0)
    ps = backend.pack_spec(spec)
    rng = random.Random(0)
    words = [
        tuple(rng.choice(sigma) for _ in range(args.n)) for _ in range(args.words)
    ]
    widx = ps.words_to_indices(words)
    labels = np.array([rng.randint(0, 1) for _ in words], dtype=np.float64)

    print(
        f"batch of {args.words} words, n={args.n}, d={args.d}, "
        f"16 hidden neurons, best of {args.repeats}"
    )
    c_fwd, c_grad = bench("compiled", compiled, ps, widx, labels, args.repeats)
    p_fwd, p_grad = bench("pure", pure, ps, widx, labels, args.repeats)
    print(f"  speedup    forward {p_fwd / c_fwd:8.1f}x   loss+grads {p_grad / c_grad:8.1f}x")

    same_f = (
        compiled.batch_logits(ps.pos, ps.h, ps.K, ps.Q, list(ps.Ws), list(ps.bs), widx, ps.stable)
        == pure.batch_logits(ps.pos, ps.h, ps.K, ps.Q, list(ps.Ws), list(ps.bs), widx, ps.stable)
    ).all()
    print(f"  bit-identical logits: {bool(same_f)}")


if __name__ == "__main__":
    main()
