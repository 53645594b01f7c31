"""The 1-layer single-token-output transformer.

One softmax-attention pooling of positionally encoded input tokens into a
designated output token, a ReLU MLP head, and a strict sign decision:

    f_i   = pos_encoding(i, x_i)
    s_i   = <K f_i, Q h>
    hhat  = sum_i softmax(s)_i * f_i
    T(x)  = 1  iff  N(h + hhat) > 0

The positional encoding is an explicit (position, symbol) -> R^d table, not a
formula: everything the proofs quantify over lives in that table. All
intermediates are exposed (``embed``, ``attention_scores``, ``pooled``,
``forward_trace``) because downstream modules dissect them.

Words are plain sequences of symbols; validation happens at the model
boundary. Every arithmetic step runs under the spec's PrecisionConfig, and
the operation order (sequential left-to-right sums, bias added after the dot
product) is pinned so the compiled double-mode kernels can reproduce results
bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Sequence

from .numerics import PrecisionConfig, NumericError, decimal_str, is_nan, softmax_weights


class SpecError(ValueError):
    """Malformed or internally inconsistent transformer spec."""


class InputError(ValueError):
    """Word rejected: wrong length or symbol outside the alphabet."""


Word = tuple  # length-n tuple of alphabet symbols (ints)


@dataclass(frozen=True)
class MLPSpec:
    """ReLU network: alternating affine maps and componentwise ReLU, ending
    in a single affine output with no activation. Biases allowed everywhere.
    """

    layers: tuple  # ((weight_rows, bias), ...) with weight_rows a tuple of row tuples

    def __post_init__(self):
        if not self.layers:
            raise SpecError("MLP needs at least one layer")
        in_dim = self.in_dim
        for li, (w, b) in enumerate(self.layers):
            if not w or any(len(row) != len(w[0]) for row in w):
                raise SpecError(f"layer {li}: ragged weight matrix")
            if len(w[0]) != in_dim:
                raise SpecError(f"layer {li}: expects {in_dim} inputs, matrix has {len(w[0])}")
            if len(b) != len(w):
                raise SpecError(f"layer {li}: {len(w)} rows but {len(b)} biases")
            in_dim = len(w)
        if in_dim != 1:
            raise SpecError("final MLP layer must output a single scalar")

    @property
    def in_dim(self) -> int:
        return len(self.layers[0][0][0])

    @property
    def hidden_neurons(self) -> int:
        """ReLU neuron count: all layer outputs except the final scalar."""
        return sum(len(w) for w, _ in self.layers[:-1])

    @property
    def layer_dims(self) -> tuple:
        return (self.in_dim,) + tuple(len(w) for w, _ in self.layers)


@dataclass(frozen=True)
class TransformerSpec:
    n: int
    sigma: tuple  # alphabet symbols, order fixes the serialization layout
    d: int
    pos_encoding: tuple  # [position 0..n-1][symbol index][coordinate]
    h: tuple
    K: tuple
    Q: tuple
    mlp: MLPSpec
    cfg: PrecisionConfig
    _sym_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise SpecError("n must be >= 1")
        if len(set(self.sigma)) != len(self.sigma):
            raise SpecError("alphabet has duplicate symbols")
        if len(self.pos_encoding) != self.n:
            raise SpecError("pos_encoding must cover every position 1..n")
        for row in self.pos_encoding:
            if len(row) != len(self.sigma) or any(len(v) != self.d for v in row):
                raise SpecError("pos_encoding must map every (position, symbol) to a d-vector")
        if len(self.h) != self.d:
            raise SpecError("h must have dimension d")
        for name, m in (("K", self.K), ("Q", self.Q)):
            if len(m) != self.d or any(len(row) != self.d for row in m):
                raise SpecError(f"{name} must be d x d")
        if self.mlp.in_dim != self.d:
            raise SpecError("MLP input dimension must equal d")
        object.__setattr__(self, "_sym_index", {s: i for i, s in enumerate(self.sigma)})

    def sym_index(self, symbol) -> int:
        try:
            return self._sym_index[symbol]
        except KeyError:
            raise InputError(f"symbol {symbol!r} not in alphabet") from None

    def validate_word(self, word: Sequence) -> Word:
        word = tuple(word)
        if len(word) != self.n:
            raise InputError(f"word length {len(word)}, spec expects {self.n}")
        for s in word:
            self.sym_index(s)
        return word


def make_mlp(layers, cfg: PrecisionConfig) -> MLPSpec:
    """Build an MLPSpec from nested [(weight_rows, bias), ...] of raw numbers."""
    norm = tuple(
        (
            tuple(tuple(cfg.num(x) for x in row) for row in w),
            tuple(cfg.num(x) for x in b),
        )
        for w, b in layers
    )
    return MLPSpec(layers=norm)


def make_spec(n, sigma, d, pos_encoding, h, K, Q, mlp, cfg: PrecisionConfig) -> TransformerSpec:
    """Build a TransformerSpec, coercing every number into the active mode.

    ``pos_encoding`` is indexed [position][symbol index][coordinate] with the
    symbol order given by ``sigma``; ``mlp`` may be an MLPSpec or raw layers.
    """
    if not isinstance(mlp, MLPSpec):
        mlp = make_mlp(mlp, cfg)
    return TransformerSpec(
        n=n,
        sigma=tuple(sigma),
        d=d,
        pos_encoding=tuple(
            tuple(tuple(cfg.num(x) for x in vec) for vec in row) for row in pos_encoding
        ),
        h=tuple(cfg.num(x) for x in h),
        K=tuple(tuple(cfg.num(x) for x in row) for row in K),
        Q=tuple(tuple(cfg.num(x) for x in row) for row in Q),
        mlp=mlp,
        cfg=cfg,
    )


# -- evaluation -----------------------------------------------------------


def _matvec(m, v, cfg):
    out = []
    for row in m:
        acc = cfg.zero()
        for a, b in zip(row, v):
            acc = acc + a * b
        out.append(acc)
    return out


def _dot(u, v, cfg):
    acc = cfg.zero()
    for a, b in zip(u, v):
        acc = acc + a * b
    return acc


def embed(spec: TransformerSpec, word: Sequence) -> list:
    """Value vectors [f_1 .. f_n], f_i = pos_encoding(i, word_i)."""
    word = spec.validate_word(word)
    return [spec.pos_encoding[i][spec.sym_index(s)] for i, s in enumerate(word)]


def attention_scores(spec: TransformerSpec, fs: Sequence) -> list:
    """Scores s_i = <K f_i, Q h>, evaluated under the spec's precision."""
    with spec.cfg.active():
        u = _matvec(spec.Q, spec.h, spec.cfg)
        return [_dot(_matvec(spec.K, f, spec.cfg), u, spec.cfg) for f in fs]


def pool_scores(spec: TransformerSpec, fs: Sequence, scores: Sequence) -> list:
    """Softmax-weighted convex combination of the f_i for given scores."""
    with spec.cfg.active():
        w = softmax_weights(scores, spec.cfg)
        out = []
        for c in range(spec.d):
            acc = spec.cfg.zero()
            for wi, f in zip(w, fs):
                acc = acc + wi * f[c]
            out.append(acc)
        return out


def pooled(spec: TransformerSpec, word: Sequence) -> list:
    fs = embed(spec, word)
    return pool_scores(spec, fs, attention_scores(spec, fs))


def mlp_eval(mlp: MLPSpec, z: Sequence, cfg: PrecisionConfig):
    """Run the ReLU network; returns the single output scalar."""
    if len(z) != mlp.in_dim:
        raise SpecError(f"MLP expects {mlp.in_dim} inputs, got {len(z)}")
    with cfg.active():
        act = list(z)
        last = len(mlp.layers) - 1
        for li, (w, b) in enumerate(mlp.layers):
            out = []
            for row, bias in zip(w, b):
                acc = cfg.zero()
                for a, x in zip(row, act):
                    acc = acc + a * x
                acc = acc + bias
                # ReLU written so NaN propagates instead of being zeroed
                if li != last and acc <= 0:
                    acc = cfg.zero()
                out.append(acc)
            act = out
        return act[0]


def decision_value(spec: TransformerSpec, word: Sequence):
    """N(h + hhat): the pre-sign MLP output."""
    hhat = pooled(spec, word)
    with spec.cfg.active():
        z = [a + b for a, b in zip(spec.h, hhat)]
        return mlp_eval(spec.mlp, z, spec.cfg)


def forward(spec: TransformerSpec, word: Sequence) -> int:
    """1 iff N(h + hhat) > 0 (strict; exact zero gives 0). NaN is an error."""
    v = decision_value(spec, word)
    if is_nan(v):
        raise NumericError("decision value is NaN; refusing to coerce to a bit")
    return 1 if v > 0 else 0


def forward_trace(spec: TransformerSpec, word: Sequence) -> dict:
    """forward() plus every intermediate, serialized as decimal strings."""
    fs = embed(spec, word)
    scores = attention_scores(spec, fs)
    with spec.cfg.active():
        weights = softmax_weights(scores, spec.cfg)
    hhat = pool_scores(spec, fs, scores)
    with spec.cfg.active():
        z = [a + b for a, b in zip(spec.h, hhat)]
        value = mlp_eval(spec.mlp, z, spec.cfg)
    if is_nan(value):
        raise NumericError("decision value is NaN; refusing to coerce to a bit")
    return {
        "word": list(word),
        "embeddings": [[decimal_str(x) for x in f] for f in fs],
        "scores": [decimal_str(s) for s in scores],
        "weights": [decimal_str(w) for w in weights],
        "pooled": [decimal_str(x) for x in hhat],
        "mlp_input": [decimal_str(x) for x in z],
        "mlp_output": decimal_str(value),
        "decision": 1 if value > 0 else 0,
    }


# -- random specs ----------------------------------------------------------


def random_spec(
    n: int,
    d: int,
    sigma: Sequence,
    mlp_hidden: Sequence = (4,),
    seed: int = 0,
    cfg: PrecisionConfig | None = None,
) -> TransformerSpec:
    """Seeded random spec for consistency sweeps.

    K and Q entries are drawn from [-1/d, 1/d] (keeps raw attention
    exponentials finite in double mode even for the unshifted decomposition
    sums); encodings and h from [-1, 1]; MLP weights from
    [-1/sqrt(fan_in), 1/sqrt(fan_in)].
    """
    cfg = cfg or PrecisionConfig.double()
    rng = random.Random(seed)
    u = rng.uniform
    pos = [[[u(-1, 1) for _ in range(d)] for _ in sigma] for _ in range(n)]
    h = [u(-1, 1) for _ in range(d)]
    K = [[u(-1 / d, 1 / d) for _ in range(d)] for _ in range(d)]
    Q = [[u(-1 / d, 1 / d) for _ in range(d)] for _ in range(d)]
    dims = [d, *mlp_hidden, 1]
    layers = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        s = fan_in**-0.5
        layers.append(
            (
                [[u(-s, s) for _ in range(fan_in)] for _ in range(fan_out)],
                [u(-s, s) for _ in range(fan_out)],
            )
        )
    return make_spec(n, sigma, d, pos, h, K, Q, layers, cfg)


# -- serialization ----------------------------------------------------------


def spec_to_json(spec: TransformerSpec) -> dict:
    """JSON document with every number as an exact decimal string, so
    big-float specs replay losslessly at the precision that made them."""
    return {
        "n": spec.n,
        "sigma": list(spec.sigma),
        "d": spec.d,
        "pos_encoding": [
            [[decimal_str(x) for x in vec] for vec in row] for row in spec.pos_encoding
        ],
        "h": [decimal_str(x) for x in spec.h],
        "K": [[decimal_str(x) for x in row] for row in spec.K],
        "Q": [[decimal_str(x) for x in row] for row in spec.Q],
        "mlp": {
            "layers": [
                {
                    "w": [[decimal_str(x) for x in row] for row in w],
                    "b": [decimal_str(x) for x in b],
                }
                for w, b in spec.mlp.layers
            ]
        },
    }


def spec_from_json(doc: dict, cfg: PrecisionConfig) -> TransformerSpec:
    try:
        layers = [(layer["w"], layer["b"]) for layer in doc["mlp"]["layers"]]
        return make_spec(
            n=doc["n"],
            sigma=[int(s) for s in doc["sigma"]],
            d=doc["d"],
            pos_encoding=doc["pos_encoding"],
            h=doc["h"],
            K=doc["K"],
            Q=doc["Q"],
            mlp=layers,
            cfg=cfg,
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise SpecError(f"malformed spec document: {exc}") from exc


def spec_digest(spec: TransformerSpec) -> str:
    """Content hash of the serialized spec (manifest fingerprinting)."""
    blob = json.dumps(spec_to_json(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
