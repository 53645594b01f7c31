"""Softmax decomposition, the induced hypothesis class, and VC machinery.

On a special-input family the softmax numerator/denominator split cleanly at
a prefix boundary:

    hhat = (xbar + ybar) / (p + q)

with (xbar, p) the exponential-weighted sums over the prefix positions and
(ybar, q) over the suffix. Fixing (ybar, q) as parameters and feeding
(xbar, p) as the input turns the transformer's decision into a hypothesis
class over R^{d+1}; realizing every labeling of a point set inside that class
is what the shattering tables verify.

The operation counter measures how many basic arithmetic operations and
comparisons one hypothesis evaluation costs *given* (xbar, p, ybar, q) --
the exponentials happen upstream, in the construction of points and
parameters, and are deliberately outside the count. A configurable
polynomial in (parameter count, operation count) then gives the VC upper
bound; the default constants follow Goldberg & Jerrum (1995), Thm 2.3:
VCdim <= 4 * W * (t + 2).
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .model import (
    InputError,
    MLPSpec,
    SpecError,
    TransformerSpec,
    attention_scores,
    embed,
    mlp_eval,
)
from .numerics import NumericError, exp, is_nan
from .tasks import comp_alphabet, sum2_alphabet, sum2_encode


@dataclass(frozen=True)
class Decomposition:
    xbar: tuple
    p: object
    ybar: tuple
    q: object
    prefix_len: int


@dataclass(frozen=True)
class HypothesisPoint:
    xbar: tuple
    p: object


def decompose(spec: TransformerSpec, word: Sequence, prefix_len: int) -> Decomposition:
    """Split the softmax numerator/denominator at ``prefix_len``.

    Uses raw (unshifted) exponentials regardless of the stable-softmax
    setting: the four components are defined with e**s_i directly, and a
    shared shift would only rescale all of them. Prefix quantities depend
    on the prefix symbols only, suffix quantities on the suffix only.
    """
    if not 1 <= prefix_len < spec.n:
        raise InputError(f"prefix_len must be in 1..{spec.n - 1}, got {prefix_len}")
    fs = embed(spec, word)
    scores = attention_scores(spec, fs)
    cfg = spec.cfg
    with cfg.active():
        es = [exp(s, cfg) for s in scores]

        def part(lo, hi):
            vec = []
            for c in range(spec.d):
                acc = cfg.zero()
                for i in range(lo, hi):
                    acc = acc + es[i] * fs[i][c]
                vec.append(acc)
            tot = cfg.zero()
            for i in range(lo, hi):
                tot = tot + es[i]
            return tuple(vec), tot

        xbar, p = part(0, prefix_len)
        ybar, q = part(prefix_len, spec.n)
    return Decomposition(xbar=xbar, p=p, ybar=ybar, q=q, prefix_len=prefix_len)


def point_of(dec: Decomposition) -> HypothesisPoint:
    return HypothesisPoint(xbar=dec.xbar, p=dec.p)


def params_of(dec: Decomposition) -> tuple:
    return (dec.ybar, dec.q)


def hyp_eval(spec: TransformerSpec, pt: HypothesisPoint, params: tuple) -> int:
    """1 iff N(h + (xbar + ybar)/(p + q)) > 0: the same strict decision rule
    as forward(), with the suffix contribution supplied as parameters."""
    ybar, q = params
    cfg = spec.cfg
    with cfg.active():
        den = pt.p + q
        if not den > 0:
            raise NumericError(f"p + q must be positive, got {den!r}")
        z = [
            spec.h[c] + (pt.xbar[c] + ybar[c]) / den
            for c in range(spec.d)
        ]
        v = mlp_eval(spec.mlp, z, cfg)
    if is_nan(v):
        raise NumericError("hypothesis value is NaN; refusing to coerce to a bit")
    return 1 if v > 0 else 0


# -- point sets and parameter maps for the two special families -------------


def _check_alphabet(spec: TransformerSpec, expected, family: str):
    if tuple(spec.sigma) != tuple(expected):
        raise SpecError(f"spec alphabet does not match the {family} family")


def comp_point_set(spec: TransformerSpec) -> list:
    """n-1 points, point i from the prefix token a_1 = i+1 (prefix length 1).

    The suffix symbols of the probe word are irrelevant: prefix quantities
    are functions of the prefix alone.
    """
    n = spec.n
    _check_alphabet(spec, comp_alphabet(n), "composition")
    points = []
    for a1 in range(2, n + 1):
        word = (a1,) + (1,) * (n - 1)
        points.append(point_of(decompose(spec, word, 1)))
    return points


def comp_params_for(spec: TransformerSpec, delta: Sequence) -> tuple:
    """Suffix parameters realizing labeling delta: b_{i+1} = 1 if delta_i
    else 2, then (ybar, q) of the suffix b_2..b_n."""
    n = spec.n
    _check_alphabet(spec, comp_alphabet(n), "composition")
    delta = tuple(delta)
    if len(delta) != n - 1:
        raise InputError(f"delta must have length {n - 1}")
    b = tuple(1 if bit else 2 for bit in delta)
    word = (2,) + b  # prefix symbol irrelevant for the suffix quantities
    return params_of(decompose(spec, word, 1))


def sum2_point_set(spec: TransformerSpec) -> list:
    """k points from the unit vectors alpha = e_1..e_k (prefix length k)."""
    n = spec.n
    if n % 2:
        raise SpecError("zero-sum family needs even n")
    k = n // 2
    _check_alphabet(spec, sum2_alphabet(n), "zero-sum")
    zeros = (0,) * k
    points = []
    for i in range(k):
        alpha = tuple(1 if j == i else 0 for j in range(k))
        word = sum2_encode(k, alpha, zeros)
        points.append(point_of(decompose(spec, word, k)))
    return points


def sum2_params_for(spec: TransformerSpec, beta: Sequence) -> tuple:
    n = spec.n
    if n % 2:
        raise SpecError("zero-sum family needs even n")
    k = n // 2
    _check_alphabet(spec, sum2_alphabet(n), "zero-sum")
    beta = tuple(beta)
    if len(beta) != k:
        raise InputError(f"beta must have length {k}")
    word = sum2_encode(k, (0,) * k, beta)
    return params_of(decompose(spec, word, k))


# -- shatter tables ----------------------------------------------------------


@dataclass(frozen=True)
class ShatterTable:
    points: tuple
    labelings: tuple  # intended rows (delta / beta bit vectors)
    realized: tuple  # realized[r][i] = hypothesis value of labeling r on point i
    exact: tuple  # exact[r] = (realized row == intended labeling)

    @property
    def realized_count(self) -> int:
        """Labelings realized exactly by their own parameter choice."""
        return sum(self.exact)

    @property
    def shattered(self) -> bool:
        """Every intended labeling realized by its constructed parameters."""
        return all(self.exact)

    @property
    def distinct_rows(self) -> int:
        return len(set(self.realized))


def shatter_table(
    spec: TransformerSpec,
    points: Sequence,
    labelings: Iterable,
    param_gen: Callable,
) -> ShatterTable:
    """Evaluate hyp_eval over labelings x points with params from param_gen.

    A labeling counts as realized when its own generated parameters
    reproduce it bit-for-bit (the constructive sense used by the point-set
    maps above, where params(delta) is built to output exactly delta).
    """
    labelings = tuple(tuple(l) for l in labelings)
    realized = []
    exact = []
    for lab in labelings:
        params = param_gen(lab)
        row = tuple(hyp_eval(spec, pt, params) for pt in points)
        realized.append(row)
        exact.append(row == lab)
    return ShatterTable(
        points=tuple(points),
        labelings=labelings,
        realized=tuple(realized),
        exact=tuple(exact),
    )


def all_labelings(count: int) -> Iterable:
    return itertools.product((0, 1), repeat=count)


def comp_shatter_table(spec: TransformerSpec, labelings=None) -> ShatterTable:
    points = comp_point_set(spec)
    if labelings is None:
        labelings = all_labelings(len(points))
    return shatter_table(spec, points, labelings, lambda d: comp_params_for(spec, d))


def sum2_shatter_table(spec: TransformerSpec, labelings=None) -> ShatterTable:
    points = sum2_point_set(spec)
    if labelings is None:
        labelings = all_labelings(len(points))
    return shatter_table(spec, points, labelings, lambda b: sum2_params_for(spec, b))


def table_summary(table: ShatterTable) -> dict:
    return {
        "points": len(table.points),
        "labelings": len(table.labelings),
        "realized_count": table.realized_count,
        "shattered": table.shattered,
    }


def table_to_csv(table: ShatterTable, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["labeling", "realized", "match"])
    for lab, row, ok in zip(table.labelings, table.realized, table.exact):
        writer.writerow(
            ["".join(map(str, lab)), "".join(map(str, row)), int(ok)]
        )


# -- empirical shattered-subset search ---------------------------------------


def max_shattered_from_rows(rows: Sequence[Sequence], n_points: int) -> int:
    """Largest subset of the point columns on which the given realized rows
    hit all 2^|subset| labelings. Exhaustive with hereditary pruning; meant
    for n_points <= 20."""
    if n_points > 20:
        raise InputError("subset scan capped at 20 points")
    if not rows:
        raise InputError("empty hypothesis pool")
    masks = set()
    for row in rows:
        m = 0
        for i, bit in enumerate(row):
            if bit:
                m |= 1 << i
        masks.add(m)
    best = 0
    level = [0]  # bitmasks of shattered subsets, grown one point at a time
    size = 0
    while level:
        size += 1
        need = 1 << size
        nxt = []
        for s in level:
            start = s.bit_length()  # only extend upward: each subset once
            for i in range(start, n_points):
                cand = s | (1 << i)
                if len({m & cand for m in masks}) == need:
                    nxt.append(cand)
        if nxt:
            best = size
        level = nxt
    return best


def max_shattered_subset(
    spec: TransformerSpec, points: Sequence, candidate_params: Sequence
) -> int:
    """Empirical VC lower estimate over a finite parameter pool."""
    if not candidate_params:
        raise InputError("empty hypothesis pool")
    rows = [
        tuple(hyp_eval(spec, pt, params) for pt in points)
        for params in candidate_params
    ]
    return max_shattered_from_rows(rows, len(points))


# -- operation counting and the VC upper bound -------------------------------

DIV_SINGLE = "single"
DIV_PER_COORDINATE = "per-coordinate"


@dataclass(frozen=True)
class OpCount:
    W: int  # real parameters of the hypothesis class: (ybar, q), d+1 of them
    t: int  # arithmetic operations + comparisons per hypothesis evaluation
    adds: int
    muls: int
    divs: int
    cmps: int


def count_ops(d: int, mlp: MLPSpec, div_rule: str = DIV_PER_COORDINATE) -> OpCount:
    """Cost of one hypothesis evaluation given (xbar, p, ybar, q).

    d+1 additions for xbar+ybar and p+q, the division(s) by p+q (one per
    coordinate under the default rule, a single broadcast division under
    ``DIV_SINGLE``), d additions for h + hhat, then the MLP's multiplies,
    adds (bias included), one comparison per ReLU, and the final sign test.
    """
    if d < 1:
        raise SpecError("d must be >= 1")
    if mlp.in_dim != d:
        raise SpecError("MLP input dimension must equal d")
    if div_rule == DIV_SINGLE:
        divs = 1
    elif div_rule == DIV_PER_COORDINATE:
        divs = d
    else:
        raise ValueError(f"unknown division rule {div_rule!r}")
    adds = (d + 1) + d
    muls = 0
    cmps = 1  # final sign comparison
    for w, _b in mlp.layers:
        out_dim, in_dim = len(w), len(w[0])
        muls += out_dim * in_dim
        adds += out_dim * in_dim  # in-1 dot adds + 1 bias add per neuron
    cmps += mlp.hidden_neurons
    t = adds + muls + divs + cmps
    return OpCount(W=d + 1, t=t, adds=adds, muls=muls, divs=divs, cmps=cmps)


@dataclass(frozen=True)
class GJFormula:
    """Polynomial VC bound in (W, t): bound = scale * W * (t + t_offset).

    Defaults are the Goldberg-Jerrum constants for programs built from
    {+, -, *, /} and conditional jumps: VCdim <= 4 W (t + 2).
    """

    scale: int = 4
    t_offset: int = 2


def vc_upper_bound(oc: OpCount, formula: GJFormula | None = None) -> int:
    formula = formula or GJFormula()
    return formula.scale * oc.W * (oc.t + formula.t_offset)
