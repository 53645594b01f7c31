"""Hand-built constant-width palindrome recognizer and its precision limits.

The construction keeps attention uniform (K = 0, so every token gets weight
1/n) and pushes a geometric coefficient pattern into the positional encoding:
coordinate 0 of position j carries +base^-(j-1) * x_j on the left half and
-base^-(n-j) * x_j on the mirrored right half. The pooled value is then
s/n where

    s = sum_i base^-(i-1) * (x_i - x_{n+1-i}),   i = 1..k,  k = n/2,

which vanishes exactly on palindromes. A two-ReLU head computes
tau' - |s/n| with tau' = base^-(k-1)/(2n); the sign of that is the answer.
Correctness needs |s| for non-palindromes to stay above n*tau', which the
geometric-tail bound (1 - 1/(base-1)) * base^-(k-1) guarantees for
base >= 3.

The decision hinges on resolving base^-(k-1)/(2n) against rounding residue,
so hardware doubles must fail once k grows; ``precision_failure_search``
hunts for concrete witness words where a low-precision run disagrees with a
high-precision one.
"""

from __future__ import annotations

import csv
import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import TransformerSpec, forward, make_spec, pooled
from .numerics import PrecisionConfig, decimal_str
from .tasks import pal_eval


class ConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class PalindromeSpec:
    n: int
    pairs: int  # mirrored pairs (n // 2)
    base: int
    tau_prime: object  # scalar in the active mode
    spec: TransformerSpec
    cfg: PrecisionConfig


def build_palindrome_transformer(
    n: int,
    base: int = 10,
    cfg: PrecisionConfig | None = None,
    allow_odd: bool = False,
) -> PalindromeSpec:
    """Build the recognizer for length-n binary words.

    Odd n is rejected unless ``allow_odd`` is set, in which case the middle
    position gets coefficient 0 (it cannot break a palindrome).
    """
    cfg = cfg or PrecisionConfig.double()
    if n < 2:
        raise ConstructionError("n must be >= 2")
    if n % 2 and not allow_odd:
        raise ConstructionError("odd n rejected; pass allow_odd=True for the extension")
    if base < 3:
        raise ConstructionError(
            "base must be >= 3 for tau' to separate zero from the minimum margin"
        )
    k = n // 2
    with cfg.active():
        b = cfg.num(base)
        zero = cfg.zero()
        coeffs = []
        for j in range(1, n + 1):  # 1-based positions
            if j <= k:
                coeffs.append(b ** -(j - 1))
            elif j > n - k:
                coeffs.append(-(b ** -(n - j)))
            else:
                coeffs.append(zero)  # odd-n middle position
        # p(j, sigma) = (coeff_j * sigma, 0) for sigma in {0, 1}
        pos = [[(zero, zero), (c, zero)] for c in coeffs]
        tau = b ** -(k - 1) / (2 * n)
        mlp = [
            ([(1, 0), (-1, 0)], (0, 0)),
            ([(-1, -1)], (tau,)),
        ]
        spec = make_spec(
            n=n,
            sigma=(0, 1),
            d=2,
            pos_encoding=pos,
            h=(0, 0),
            K=[(0, 0), (0, 0)],
            Q=[(0, 0), (0, 0)],
            mlp=mlp,
            cfg=cfg,
        )
    return PalindromeSpec(n=n, pairs=k, base=base, tau_prime=tau, spec=spec, cfg=cfg)


def min_nonzero_margin(n: int, base: int, cfg: PrecisionConfig | None = None):
    """Analytic lower bound (1 - 1/(base-1)) * base^-(k-1) on |s| over
    non-palindromes: the leading broken pair contributes base^-(i-1) and the
    geometric tail of later pairs cannot cancel more than 1/(base-1) of it.
    """
    cfg = cfg or PrecisionConfig.double()
    if n < 2 or n % 2:
        raise ConstructionError("margin bound is stated for even n >= 2")
    if base <= 2:
        raise ConstructionError("margin bound degenerates for base <= 2")
    k = n // 2
    with cfg.active():
        b = cfg.num(base)
        return (1 - 1 / (b - 1)) * b ** -(k - 1)


def weighted_diff_sum(pspec: PalindromeSpec, word: Sequence):
    """The geometric difference sum s, recovered as n * pooled()[0]."""
    hhat = pooled(pspec.spec, word)
    with pspec.cfg.active():
        return hhat[0] * pspec.n


def verify_words(pspec: PalindromeSpec, words: Iterable[Sequence]) -> dict:
    """Compare forward() against the palindrome oracle on given words."""
    checked = 0
    mismatches = []
    for w in words:
        got = forward(pspec.spec, w)
        want = pal_eval(w)
        checked += 1
        if got != want:
            mismatches.append((tuple(w), got, want))
    return {"checked": checked, "correct": checked - len(mismatches), "mismatches": mismatches}


def verify_exhaustive(pspec: PalindromeSpec) -> dict:
    return verify_words(pspec, itertools.product((0, 1), repeat=pspec.n))


def verify_sampled(pspec: PalindromeSpec, count: int, seed: int = 0) -> dict:
    rng = random.Random(seed)
    words = (tuple(rng.randint(0, 1) for _ in range(pspec.n)) for _ in range(count))
    return verify_words(pspec, words)


@dataclass(frozen=True)
class Witness:
    n: int
    word: tuple
    mantissa_bits_low: int
    mantissa_bits_high: int
    s_low: str
    s_high: str
    verdict_low: int
    verdict_high: int


def search_candidates(n: int, seed: int = 0, n_random: int = 16) -> list:
    """Directed candidates: palindromes with their innermost (minimum-margin)
    and outermost pairs flipped, plus seeded random words."""
    k = n // 2
    rng = random.Random(seed)
    half_patterns = [(0,) * k, (1,) * k, tuple(i % 2 for i in range(k))]
    half_patterns += [tuple(rng.randint(0, 1) for _ in range(k)) for _ in range(8)]
    words = []
    for half in half_patterns:
        pal = half + half[::-1]
        inner = list(pal)
        inner[k] ^= 1  # break only the innermost mirrored pair
        outer = list(pal)
        outer[-1] ^= 1
        words += [pal, tuple(inner), tuple(outer)]
    words += [tuple(rng.randint(0, 1) for _ in range(n)) for _ in range(n_random)]
    seen, out = set(), []
    for w in words:
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def precision_failure_search(
    n_range: Iterable[int],
    cfg_low: PrecisionConfig,
    cfg_high: PrecisionConfig,
    base: int = 10,
    seed: int = 0,
) -> list:
    """For each even n, look for words where the low- and high-precision
    builds of the same recognizer disagree. An empty result is a valid
    outcome (the low precision sufficed on every candidate)."""
    witnesses = []
    for n in n_range:
        if n % 2:
            continue
        low = build_palindrome_transformer(n, base=base, cfg=cfg_low)
        high = build_palindrome_transformer(n, base=base, cfg=cfg_high)
        for word in search_candidates(n, seed=seed):
            v_low = forward(low.spec, word)
            v_high = forward(high.spec, word)
            if v_low != v_high:
                witnesses.append(
                    Witness(
                        n=n,
                        word=word,
                        mantissa_bits_low=cfg_low.effective_bits,
                        mantissa_bits_high=cfg_high.effective_bits,
                        s_low=decimal_str(weighted_diff_sum(low, word)),
                        s_high=decimal_str(weighted_diff_sum(high, word)),
                        verdict_low=v_low,
                        verdict_high=v_high,
                    )
                )
    return witnesses


WITNESS_FIELDS = [
    "n",
    "mantissa_bits_low",
    "witness_word",
    "s_low",
    "s_high",
    "verdict_low",
    "verdict_high",
]


def witnesses_to_csv(witnesses: Sequence[Witness], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(WITNESS_FIELDS)
    for w in witnesses:
        writer.writerow(
            [
                w.n,
                w.mantissa_bits_low,
                "".join(str(b) for b in w.word),
                w.s_low,
                w.s_high,
                w.verdict_low,
                w.verdict_high,
            ]
        )
