"""Hand-built transformers that solve the structured input families.

These are width-Theta(n) constructions, perfectly legal at any fixed n:

* ``build_comp_special_solver``: on special composition words
  (a_1, b_2..b_n) it outputs [b_{a_1} = 1]. Attention is uniform; token 1
  raises a tall bump on the coordinate named by a_1 while every other token
  writes +-1 (carrying its bit) on its own coordinate; one thresholded ReLU
  per coordinate then reads the bit under the bump.
* ``build_sum2_indicator_solver``: on encoded zero-sum words it outputs
  OR_i(alpha_i AND beta_i). Coordinate i counts how many of the two
  positions i, k+i carry their flag symbol; a ReLU threshold at 1.5/n
  fires only when both do.

Used as the agreeing fixtures in the shattering equivalence checks, and as
ready-made spec files for the CLI (``python -m softmaxlab.solvers ...``).
"""

from __future__ import annotations

import json
import sys

from .model import TransformerSpec, make_spec, spec_to_json
from .numerics import PrecisionConfig
from .tasks import comp_alphabet, sum2_alphabet


def build_comp_special_solver(
    n: int, bump: float = 10.0, cfg: PrecisionConfig | None = None
) -> TransformerSpec:
    if n < 2:
        raise ValueError("need n >= 2")
    cfg = cfg or PrecisionConfig.double()
    sigma = comp_alphabet(n)
    d = n
    zeros = [0.0] * d
    pos = []
    for j in range(1, n + 1):
        row = []
        for sym in sigma:
            vec = list(zeros)
            if j == 1:
                vec[sym - 1] = bump
            else:
                vec[j - 1] = 1.0 if sym == 1 else -1.0
            row.append(vec)
        pos.append(row)
    hidden = []
    for j in range(2, n + 1):
        w = list(zeros)
        w[j - 1] = 1.0
        hidden.append(w)
    theta = bump / n
    mlp = [
        (hidden, [-theta] * (n - 1)),
        ([[1.0] * (n - 1)], [-1.0 / (2 * n)]),
    ]
    zmat = [list(zeros) for _ in range(d)]
    return make_spec(n, sigma, d, pos, zeros, zmat, zmat, mlp, cfg)


def build_sum2_indicator_solver(
    k: int, cfg: PrecisionConfig | None = None
) -> TransformerSpec:
    if k < 1:
        raise ValueError("need k >= 1")
    cfg = cfg or PrecisionConfig.double()
    n = 2 * k
    sigma = sum2_alphabet(n)
    d = k
    zeros = [0.0] * d
    pos = []
    for j in range(1, n + 1):
        row = []
        for sym in sigma:
            vec = list(zeros)
            if j <= k and sym == 2 * j:
                vec[j - 1] = 1.0
            elif j > k and sym == -2 * (j - k):
                vec[j - k - 1] = 1.0
            row.append(vec)
        pos.append(row)
    hidden = []
    for i in range(k):
        w = list(zeros)
        w[i] = 1.0
        hidden.append(w)
    mlp = [
        (hidden, [-1.5 / n] * k),
        ([[1.0] * k], [-0.25 / n]),
    ]
    zmat = [list(zeros) for _ in range(d)]
    return make_spec(n, sigma, d, pos, zeros, zmat, zmat, mlp, cfg)


def build_constant_spec(
    n: int, sigma, value: int = 1, cfg: PrecisionConfig | None = None
) -> TransformerSpec:
    """Constant-decision transformer: forward() is `value` for every word."""
    cfg = cfg or PrecisionConfig.double()
    sigma = tuple(sigma)
    pos = [[[0.0] for _ in sigma] for _ in range(n)]
    out = 1.0 if value else -1.0
    mlp = [([[0.0]], [out])]
    return make_spec(n, sigma, 1, pos, [0.0], [[0.0]], [[0.0]], mlp, cfg)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    usage = "usage: python -m softmaxlab.solvers {comp N | sum2 K | const N} > spec.json"
    if len(argv) != 2 or argv[0] not in ("comp", "sum2", "const"):
        print(usage, file=sys.stderr)
        return 2
    size = int(argv[1])
    if argv[0] == "comp":
        spec = build_comp_special_solver(size)
    elif argv[0] == "sum2":
        spec = build_sum2_indicator_solver(size)
    else:
        spec = build_constant_spec(size, (0, 1))
    json.dump(spec_to_json(spec), sys.stdout, indent=1)
    print()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
