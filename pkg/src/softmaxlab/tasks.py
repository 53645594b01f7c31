"""Ground-truth task oracles and the structured input families they induce.

Three boolean functions on length-n words:

* composition: over alphabet {1..n}, read the word as phi(i) = a_i and
  output 1 iff phi(phi(1)) = 1;
* two-element zero sum: over {-m..m}, output 1 iff some a_i + a_j = 0
  (i = j allowed, so a 0 entry is always a hit -- the encoded instances
  below never produce a 0, so both readings agree there);
* palindrome: over {0,1}, output 1 iff the word reads the same reversed.

Plus the two structured encoders used by the shattering machinery: special
composition words (a_1, b_2..b_n) whose value reduces to a single lookup
b_{a_1} = 1, and zero-sum words encoding a pair of bit vectors (alpha, beta)
whose value is the intersection test OR_i(alpha_i AND beta_i).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence


class TaskError(ValueError):
    """Word violates the task's alphabet or length contract."""


def comp_alphabet(n: int) -> tuple:
    return tuple(range(1, n + 1))


def sum2_alphabet(m: int) -> tuple:
    return tuple(range(-m, m + 1))


PAL_ALPHABET = (0, 1)


def comp_eval(word: Sequence) -> int:
    """1 iff a_{a_1} = 1, i.e. phi(phi(1)) = 1 for phi(i) = a_i."""
    n = len(word)
    for s in word:
        if not 1 <= s <= n:
            raise TaskError(f"composition symbol {s} outside 1..{n}")
    return 1 if word[word[0] - 1] == 1 else 0


def sum2_eval(word: Sequence, m: int) -> int:
    """1 iff some two entries (same index allowed) sum to zero."""
    for s in word:
        if not -m <= s <= m:
            raise TaskError(f"zero-sum symbol {s} outside -{m}..{m}")
    values = set(word)
    return 1 if any(-v in values for v in values) else 0


def pal_eval(word: Sequence) -> int:
    """1 iff the binary word is a palindrome."""
    for s in word:
        if s not in (0, 1):
            raise TaskError(f"palindrome symbol {s} not binary")
    word = tuple(word)
    return 1 if word == word[::-1] else 0


def comp_special_word(n: int, a1: int, b: Sequence) -> tuple:
    """Special composition input (a_1, b_2, ..., b_n) with a_1 in 2..n and
    b_i in {1, 2}; its value is exactly [b_{a_1} = 1]."""
    if not 2 <= a1 <= n:
        raise TaskError(f"a1 must be in 2..{n}, got {a1}")
    b = tuple(b)
    if len(b) != n - 1:
        raise TaskError(f"b must have length {n - 1}, got {len(b)}")
    if any(x not in (1, 2) for x in b):
        raise TaskError("b entries must be 1 or 2")
    return (a1,) + b


def iter_comp_special(n: int) -> Iterator[tuple]:
    """All special composition words, a1-major then b lexicographic."""
    for a1 in range(2, n + 1):
        for b in itertools.product((1, 2), repeat=n - 1):
            yield comp_special_word(n, a1, b)


def sum2_encode(k: int, alpha: Sequence, beta: Sequence) -> tuple:
    """Encode bit vectors (alpha, beta) of length k into a zero-sum word of
    length n = 2k over {-n..n}: a_i = 2i if alpha_i else 1, b_i = -2i if
    beta_i else 1. The word has a zero-sum pair iff alpha_i = beta_i = 1
    somewhere."""
    alpha, beta = tuple(alpha), tuple(beta)
    if len(alpha) != k or len(beta) != k:
        raise TaskError(f"alpha/beta must have length {k}")
    if any(x not in (0, 1) for x in alpha + beta):
        raise TaskError("alpha/beta entries must be bits")
    a = tuple(2 * (i + 1) if alpha[i] else 1 for i in range(k))
    b = tuple(-2 * (i + 1) if beta[i] else 1 for i in range(k))
    return a + b


def iter_sum2_encoded(k: int) -> Iterator[tuple]:
    """All (alpha, beta, word) triples for bit vectors of length k."""
    for alpha in itertools.product((0, 1), repeat=k):
        for beta in itertools.product((0, 1), repeat=k):
            yield alpha, beta, sum2_encode(k, alpha, beta)


@dataclass(frozen=True)
class TaskInstance:
    task: str  # "comp" | "sum2" | "pal"
    n: int
    word: tuple
    m: int | None = None  # magnitude bound, sum2 only

    def __post_init__(self):
        if self.task not in ("comp", "sum2", "pal"):
            raise TaskError(f"unknown task {self.task!r}")
        if len(self.word) != self.n:
            raise TaskError("word length disagrees with n")
        if self.task == "sum2" and self.m is None:
            raise TaskError("sum2 instance needs a magnitude bound m")

    def evaluate(self) -> int:
        if self.task == "comp":
            return comp_eval(self.word)
        if self.task == "sum2":
            return sum2_eval(self.word, self.m)
        return pal_eval(self.word)

    def to_json(self) -> dict:
        doc = {"task": self.task, "n": self.n, "word": list(self.word)}
        if self.m is not None:
            doc["m"] = self.m
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "TaskInstance":
        return cls(
            task=doc["task"], n=doc["n"], word=tuple(doc["word"]), m=doc.get("m")
        )
