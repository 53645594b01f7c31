"""Empirical probes: tiny gradient-based training on the structured input
families, dimension sweeps, and shattering audits of trained models.

Training is deliberately plain: seeded uniform init, full-batch gradient
descent with analytic gradients on a logistic loss over the pre-sign MLP
output (the decision rule is a strict sign test, so the logit is the natural
differentiable surrogate), best-accuracy checkpoint returned. Everything is
deterministic given the config, and always runs in hardware-double mode.
"""

from __future__ import annotations

import csv
import itertools
import math
import random
from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .model import TransformerSpec, forward
from .numerics import PrecisionConfig
from .shattering import (
    comp_params_for,
    comp_point_set,
    count_ops,
    hyp_eval,
    sum2_params_for,
    sum2_point_set,
    vc_upper_bound,
)
from .tasks import comp_eval, comp_alphabet, sum2_alphabet, sum2_encode, iter_comp_special


class TrainDivergence(RuntimeError):
    """Loss went NaN; reported instead of being swallowed."""


@dataclass(frozen=True)
class TrainConfig:
    task: str  # "comp" | "sum2"
    n: int
    d: int
    mlp_hidden: tuple = (4,)
    lr: float = 0.5
    steps: int = 200
    seed: int = 0
    sample_size: int = 4096  # family sample when exhaustive enumeration is too big

    def __post_init__(self):
        if self.task not in ("comp", "sum2"):
            raise ValueError(f"unknown trainable task {self.task!r}")
        if self.task == "sum2" and self.n % 2:
            raise ValueError("sum2 needs even n")
        object.__setattr__(self, "mlp_hidden", tuple(self.mlp_hidden))


def family_dataset(task: str, n: int, seed: int = 0, sample_size: int = 4096):
    """The structured words and their labels: exhaustive for n <= 10, a
    seeded sample beyond. Returns (sigma, words, labels)."""
    rng = random.Random(seed)
    if task == "comp":
        sigma = comp_alphabet(n)
        if n <= 10:
            words = list(iter_comp_special(n))
        else:
            words = [
                (rng.randint(2, n),) + tuple(rng.randint(1, 2) for _ in range(n - 1))
                for _ in range(sample_size)
            ]
        labels = np.array([comp_eval(w) for w in words], dtype=np.float64)
        return sigma, words, labels
    if task == "sum2":
        k = n // 2
        sigma = sum2_alphabet(n)
        if n <= 10:
            pairs = list(itertools.product(itertools.product((0, 1), repeat=k), repeat=2))
        else:
            pairs = [
                (
                    tuple(rng.randint(0, 1) for _ in range(k)),
                    tuple(rng.randint(0, 1) for _ in range(k)),
                )
                for _ in range(sample_size)
            ]
        words = [sum2_encode(k, a, b) for a, b in pairs]
        labels = np.array(
            [1.0 if any(x and y for x, y in zip(a, b)) else 0.0 for a, b in pairs]
        )
        return sigma, words, labels
    raise ValueError(f"unknown task {task!r}")


def _init_params(cfg: TrainConfig, sigma):
    rng = np.random.default_rng(cfg.seed)
    s = 1.0 / math.sqrt(cfg.d)
    u = lambda *shape: rng.uniform(-s, s, shape)
    pos = u(cfg.n, len(sigma), cfg.d)
    h = u(cfg.d)
    K = u(cfg.d, cfg.d)
    Q = u(cfg.d, cfg.d)
    dims = [cfg.d, *cfg.mlp_hidden, 1]
    Ws = [u(o, i) for i, o in zip(dims, dims[1:])]
    bs = [u(o) for o in dims[1:]]
    return pos, h, K, Q, Ws, bs


@dataclass(frozen=True)
class TrainResult:
    spec: TransformerSpec
    accuracy: float
    best_step: int  # 0 = the untrained initialization
    initial_accuracy: float
    final_loss: float


def train(cfg: TrainConfig) -> TrainResult:
    """Full-batch gradient descent; returns the best-accuracy checkpoint."""
    sigma, words, labels = family_dataset(cfg.task, cfg.n, cfg.seed, cfg.sample_size)
    pos, h, K, Q, Ws, bs = _init_params(cfg, sigma)
    index = {s: i for i, s in enumerate(sigma)}
    widx = np.array([[index[s] for s in w] for w in words], dtype=np.int32)

    def accuracy():
        try:
            bits = backend.batch_forward(pos, h, K, Q, Ws, bs, widx, True)
        except ValueError as exc:  # NaN decisions: the run has diverged
            raise TrainDivergence(str(exc)) from exc
        return float((bits == labels).mean())

    def snapshot():
        return (pos.copy(), h.copy(), K.copy(), Q.copy(),
                [w.copy() for w in Ws], [b.copy() for b in bs])

    best_acc = initial_acc = accuracy()
    best_step = 0
    best = snapshot()
    loss = math.nan
    for step in range(1, cfg.steps + 1):
        loss, gpos, gh, gK, gQ, gWs, gbs = backend.loss_and_grads(
            pos, h, K, Q, Ws, bs, widx, labels, True
        )
        if math.isnan(loss):
            raise TrainDivergence(f"loss NaN at step {step}")
        pos -= cfg.lr * gpos
        h -= cfg.lr * gh
        K -= cfg.lr * gK
        Q -= cfg.lr * gQ
        for w, g in zip(Ws, gWs):
            w -= cfg.lr * g
        for b, g in zip(bs, gbs):
            b -= cfg.lr * g
        acc = accuracy()
        if acc > best_acc:
            best_acc, best_step, best = acc, step, snapshot()
    spec = backend.unpack_spec(cfg.n, sigma, *best)
    return TrainResult(
        spec=spec,
        accuracy=best_acc,
        best_step=best_step,
        initial_accuracy=initial_acc,
        final_loss=loss,
    )


# -- dimension sweeps ---------------------------------------------------------

SWEEP_FIELDS = [
    "n",
    "d",
    "mlp_neurons",
    "train_accuracy",
    "W",
    "t",
    "vc_bound",
    "points_count",
    "error",
]


@dataclass(frozen=True)
class SweepRow:
    n: int
    d: int
    mlp_neurons: int
    train_accuracy: float | None
    W: int
    t: int
    vc_bound: int
    points_count: int
    error: str = ""


@dataclass(frozen=True)
class SweepResult:
    task: str
    n: int
    rows: tuple


def dimension_sweep(task, n, d_list, mlp_list, cfg: TrainConfig | None = None) -> SweepResult:
    """Train every (d, mlp_hidden) combination; per-row failures are recorded
    in the row and the sweep continues."""
    base = cfg or TrainConfig(task=task, n=n, d=1)
    points = (n - 1) if task == "comp" else n // 2
    rows = []
    for d in d_list:
        for hidden in mlp_list:
            tc = replace(base, task=task, n=n, d=d, mlp_hidden=tuple(hidden))
            dims = [d, *tc.mlp_hidden, 1]
            neurons = sum(dims[1:-1])
            try:
                res = train(tc)
                oc = count_ops(d, res.spec.mlp)
                rows.append(
                    SweepRow(
                        n=n, d=d, mlp_neurons=neurons,
                        train_accuracy=res.accuracy,
                        W=oc.W, t=oc.t, vc_bound=vc_upper_bound(oc),
                        points_count=points,
                    )
                )
            except (TrainDivergence, ValueError) as exc:
                from .model import make_mlp  # local: only for op counts

                layers = [
                    (np.zeros((o, i)).tolist(), np.zeros(o).tolist())
                    for i, o in zip(dims, dims[1:])
                ]
                oc = count_ops(d, make_mlp(layers, PrecisionConfig.double()))
                rows.append(
                    SweepRow(
                        n=n, d=d, mlp_neurons=neurons, train_accuracy=None,
                        W=oc.W, t=oc.t, vc_bound=vc_upper_bound(oc),
                        points_count=points, error=str(exc),
                    )
                )
    return SweepResult(task=task, n=n, rows=tuple(rows))


def sweep_to_csv(result: SweepResult, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SWEEP_FIELDS)
    for r in result.rows:
        writer.writerow(
            [
                r.n, r.d, r.mlp_neurons,
                "" if r.train_accuracy is None else repr(r.train_accuracy),
                r.W, r.t, r.vc_bound, r.points_count, r.error,
            ]
        )


# -- shattering audit ---------------------------------------------------------


@dataclass(frozen=True)
class AuditReport:
    task: str
    n: int
    points: int
    labelings_checked: int
    sampled: bool
    realized: int  # labelings reproduced exactly by their own parameters
    realized_via_forward: int  # same count, recomputed on full words
    hyp_forward_mismatches: int
    W: int
    t: int
    vc_bound: int

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _audit_labelings(count: int, limit_n: int, n: int, sample: int, seed: int):
    if n <= limit_n:
        return list(itertools.product((0, 1), repeat=count)), False
    rng = random.Random(seed)
    labs = [tuple(rng.randint(0, 1) for _ in range(count)) for _ in range(sample)]
    return labs, True


def shatter_audit(
    spec: TransformerSpec,
    task: str,
    sample: int = 10_000,
    seed: int = 0,
    exhaustive_limit: int = 12,
) -> AuditReport:
    """How many labelings the spec realizes through the hypothesis class,
    with every realized row re-verified against forward() on full words."""
    n = spec.n
    if task == "comp":
        points = comp_point_set(spec)
        params_for = lambda lab: comp_params_for(spec, lab)
        word_for = lambda lab, i: (i + 2,) + tuple(1 if x else 2 for x in lab)
    elif task == "sum2":
        k = n // 2
        points = sum2_point_set(spec)
        params_for = lambda lab: sum2_params_for(spec, lab)
        word_for = lambda lab, i: sum2_encode(
            k, tuple(1 if j == i else 0 for j in range(k)), lab
        )
    else:
        raise ValueError(f"unknown task {task!r}")
    labelings, sampled = _audit_labelings(len(points), exhaustive_limit, n, sample, seed)

    packed = None
    if spec.cfg.mode == "double":
        packed = backend.pack_spec(spec)

    realized = realized_fwd = mismatches = 0
    for lab in labelings:
        params = params_for(lab)
        row = tuple(hyp_eval(spec, pt, params) for pt in points)
        words = [word_for(lab, i) for i in range(len(points))]
        if packed is not None:
            frow = tuple(int(b) for b in packed.forward_bits(words))
        else:
            frow = tuple(forward(spec, w) for w in words)
        if row != frow:
            mismatches += 1
        realized += row == lab
        realized_fwd += frow == lab
    oc = count_ops(spec.d, spec.mlp)
    return AuditReport(
        task=task,
        n=n,
        points=len(points),
        labelings_checked=len(labelings),
        sampled=sampled,
        realized=realized,
        realized_via_forward=realized_fwd,
        hyp_forward_mismatches=mismatches,
        W=oc.W,
        t=oc.t,
        vc_bound=vc_upper_bound(oc),
    )


# -- gradient checking --------------------------------------------------------


def gradient_check(
    n=5,
    d=3,
    mlp_hidden=(4,),
    seed=0,
    words_count=16,
    params_per_group=4,
    eps=1e-6,
    min_grad=1e-3,
):
    """Analytic gradients vs central finite differences on a seeded random
    spec and batch; returns the per-parameter relative errors.

    Random coordinates are drawn where |grad| >= min_grad (with a fixed
    1e-6 step, coordinates far below that are dominated by the double-
    precision noise floor of the loss itself rather than by gradient
    error); each parameter group additionally contributes its largest-
    gradient coordinate so every group is covered.
    """
    from .model import random_spec

    sigma = tuple(range(3))
    spec = random_spec(n, d, sigma, mlp_hidden=mlp_hidden, seed=seed)
    ps = backend.pack_spec(spec)
    rng = random.Random(seed)
    words = [tuple(rng.choice(sigma) for _ in range(n)) for _ in range(words_count)]
    widx = ps.words_to_indices(words)
    labels = np.array([rng.randint(0, 1) for _ in words], dtype=np.float64)
    arrays = [ps.pos, ps.h, ps.K, ps.Q, *ps.Ws, *ps.bs]

    def loss_only():
        return backend.loss_and_grads(
            ps.pos, ps.h, ps.K, ps.Q, list(ps.Ws), list(ps.bs), widx, labels, True
        )[0]

    _, gpos, gh, gK, gQ, gWs, gbs = backend.loss_and_grads(
        ps.pos, ps.h, ps.K, ps.Q, list(ps.Ws), list(ps.bs), widx, labels, True
    )
    grads = [gpos, gh, gK, gQ, *gWs, *gbs]
    chosen = []
    leftovers = []
    for arr, g in zip(arrays, grads):
        flat = arr.ravel()
        gflat = np.asarray(g).ravel()
        # every group gets its largest-gradient coordinate, so no parameter
        # group goes unchecked even when its gradients sit under the floor
        top = int(np.argmax(np.abs(gflat)))
        picks = {top} if abs(gflat[top]) > 0 else set()
        eligible = [
            i for i in range(flat.size)
            if abs(gflat[i]) >= min_grad and i not in picks
        ]
        room = max(0, params_per_group - len(picks))
        picks.update(rng.sample(eligible, min(room, len(eligible))))
        chosen += [(flat, gflat, i) for i in sorted(picks)]
        leftovers += [
            (abs(gflat[i]), flat, gflat, i) for i in eligible if i not in picks
        ]
    leftovers.sort(key=lambda t: -t[0])
    while len(chosen) < 20 and leftovers:
        _, flat, gflat, i = leftovers.pop(0)
        chosen.append((flat, gflat, i))
    rel_errors = []
    for flat, gflat, idx in chosen:
        orig = flat[idx]
        flat[idx] = orig + eps
        up = loss_only()
        flat[idx] = orig - eps
        down = loss_only()
        flat[idx] = orig
        fd = (up - down) / (2 * eps)
        rel_errors.append(
            abs(fd - gflat[idx]) / max(abs(fd), abs(gflat[idx]), 1e-8)
        )
    return rel_errors
