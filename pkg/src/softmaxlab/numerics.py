"""Precision-configurable real arithmetic.

Every quantity in this package is computed under a :class:`PrecisionConfig`:
either hardware IEEE-754 doubles, or MPFR binary big-floats with a chosen
mantissa width in bits. Both modes round to nearest, ties to even, and both
perform each elementary operation with correct rounding at the active
precision (MPFR guarantees this; doubles get it from the hardware). Big-float
exp is correctly rounded by MPFR, i.e. within 0.5 ulp.

Values are plain ``float`` in double mode and ``gmpy2.mpfr`` in big-float
mode; normal Python operators work on both. Big-float operations pick up
their precision from the thread-local gmpy2 context, so any code touching
big-floats must run inside ``with cfg.active():`` (the public functions here
and in the other modules do this themselves).
"""

from __future__ import annotations

import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from typing import Sequence

import gmpy2

DOUBLE = "double"
BIGFLOAT = "bigfloat"

_DOUBLE_MANTISSA_BITS = 53


class NumericError(ArithmeticError):
    """A numeric flag (NaN / degenerate value) reached a point where it must
    not be silently absorbed, e.g. a NaN in a sign decision."""


_GMP_CONTEXTS: dict[int, "gmpy2.context"] = {}


def _gmp_context(bits: int):
    ctx = _GMP_CONTEXTS.get(bits)
    if ctx is None:
        ctx = gmpy2.context(
            precision=bits,
            round=gmpy2.RoundToNearest,
            emin=gmpy2.get_emin_min(),
            emax=gmpy2.get_emax_max(),
            subnormalize=False,
        )
        _GMP_CONTEXTS[bits] = ctx
    return ctx


@dataclass(frozen=True)
class PrecisionConfig:
    """Arithmetic mode: hardware doubles or P-bit binary big-floats.

    ``stable_softmax`` controls whether softmax subtracts the max score
    before exponentiating. If left unset it defaults to on in double mode
    (the classic overflow guard) and off in big-float mode, so overflow
    behaviour is only reproduced when explicitly studied.
    """

    mode: str = DOUBLE
    mantissa_bits: int = _DOUBLE_MANTISSA_BITS
    stable_softmax: bool = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.mode not in (DOUBLE, BIGFLOAT):
            raise ValueError(f"unknown precision mode {self.mode!r}")
        if self.mode == BIGFLOAT and self.mantissa_bits < 2:
            raise ValueError("big-float mode needs mantissa_bits >= 2")
        if self.stable_softmax is None:
            object.__setattr__(self, "stable_softmax", self.mode == DOUBLE)

    @classmethod
    def double(cls, stable_softmax: bool | None = None) -> "PrecisionConfig":
        return cls(mode=DOUBLE, stable_softmax=stable_softmax)

    @classmethod
    def bigfloat(cls, bits: int, stable_softmax: bool | None = None) -> "PrecisionConfig":
        return cls(mode=BIGFLOAT, mantissa_bits=bits, stable_softmax=stable_softmax)

    @property
    def effective_bits(self) -> int:
        return _DOUBLE_MANTISSA_BITS if self.mode == DOUBLE else self.mantissa_bits

    @contextmanager
    def active(self):
        """Make this precision the thread-local arithmetic context."""
        if self.mode == DOUBLE:
            yield
            return
        old = gmpy2.get_context()
        gmpy2.set_context(_gmp_context(self.mantissa_bits))
        try:
            yield
        finally:
            gmpy2.set_context(old)

    def num(self, value):
        """Coerce an int/float/decimal-string/scalar to this mode, rounding
        to the active precision."""
        if self.mode == DOUBLE:
            return float(value)
        with self.active():
            return gmpy2.mpfr(value)

    def zero(self):
        return self.num(0)

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "mantissa_bits": self.effective_bits,
            "stable_softmax": self.stable_softmax,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PrecisionConfig":
        return cls(
            mode=doc["mode"],
            mantissa_bits=doc.get("mantissa_bits", _DOUBLE_MANTISSA_BITS),
            stable_softmax=doc.get("stable_softmax"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "PrecisionConfig":
        return cls.from_json(json.loads(text))


def is_nan(x) -> bool:
    if isinstance(x, float):
        return math.isnan(x)
    return gmpy2.is_nan(x)


def is_finite(x) -> bool:
    if isinstance(x, (int, float)):
        return math.isfinite(x)
    return gmpy2.is_finite(x)


def exp(x, cfg: PrecisionConfig):
    """e**x at the active precision.

    Double-mode overflow returns +inf (the IEEE flag value) rather than
    raising or clamping, so downstream code sees the overflow explicitly.
    """
    if cfg.mode == DOUBLE:
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"exp expects a finite argument, got {x!r}")
        try:
            return math.exp(x)
        except OverflowError:
            return math.inf
    with cfg.active():
        x = gmpy2.mpfr(x)
        if not gmpy2.is_finite(x):
            raise ValueError(f"exp expects a finite argument, got {x!r}")
        return gmpy2.exp(x)


def softmax_weights(scores: Sequence, cfg: PrecisionConfig) -> list:
    """Softmax weights e**s_i / sum_j e**s_j, order preserved.

    The denominator is a left-to-right sequential sum. With
    ``cfg.stable_softmax`` the max score is subtracted first, which leaves
    the exact values unchanged up to rounding but avoids overflow. Overflow
    in unstable double mode propagates as inf/NaN, never renormalized away.
    """
    if len(scores) == 0:
        raise ValueError("softmax_weights: empty score list")
    with cfg.active():
        vals = [cfg.num(s) for s in scores]
        for v in vals:
            if not is_finite(v):
                raise ValueError(f"softmax_weights: non-finite score {v!r}")
        if cfg.stable_softmax:
            m = vals[0]
            for v in vals[1:]:
                if v > m:
                    m = v
            vals = [v - m for v in vals]
        exps = [exp(v, cfg) for v in vals]
        den = exps[0]
        for e in exps[1:]:
            den = den + e
        return [e / den for e in exps]


def ulp(x, cfg: PrecisionConfig):
    """Unit in the last place of x at the active precision (x != 0)."""
    if is_nan(x) or not is_finite(x):
        raise ValueError(f"ulp of non-finite value {x!r}")
    if x == 0:
        raise ValueError("ulp of zero is not defined here")
    if cfg.mode == DOUBLE:
        return math.ulp(float(x))
    with cfg.active():
        # x = m * 2**e with 0.5 <= |m| < 1, so ulp = 2**(e - precision)
        e = gmpy2.get_exp(gmpy2.mpfr(x))
        return gmpy2.exp2(e - cfg.mantissa_bits)


def ulp_diff(a, b, cfg: PrecisionConfig) -> float:
    """|a - b| measured in ulps of the larger magnitude."""
    if a == b:
        return 0.0
    ref = a if abs(a) >= abs(b) else b
    if ref == 0:
        ref = a if a != 0 else b
    with cfg.active():
        return float(abs(a - b) / ulp(ref, cfg))


def decimal_str(x) -> str:
    """Exact decimal representation of a binary float (round-trips losslessly
    when parsed back at the precision that produced it)."""
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"cannot serialize non-finite value {x!r}")
        return str(Decimal(x))
    if not gmpy2.is_finite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    if x == 0:
        return "0"
    m, e = x.as_mantissa_exp()
    m, e = int(m), int(e)
    if e >= 0:
        return str(m << e)
    # m * 2**e == (m * 5**-e) * 10**e, exactly
    scaled = m * 5 ** (-e)
    with localcontext() as lc:
        lc.prec = len(str(abs(scaled))) + 4
        return str(Decimal(scaled).scaleb(e))
