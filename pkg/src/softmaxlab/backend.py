"""Kernel backend selection and spec <-> array packing.

The double-mode batch kernels (forward decisions, training gradients) exist
twice: compiled Cython in ``_cykernels`` and a pure-Python mirror in
``_pykernels``. The compiled one is picked at import when available;
``SOFTMAXLAB_PURE=1`` forces the fallback. Both produce bit-identical
results, so backend choice never changes any output.

Kernels only ever see hardware doubles; big-float evaluation always goes
through the scalar path in :mod:`softmaxlab.model`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .model import TransformerSpec, make_spec
from .numerics import DOUBLE, PrecisionConfig

if os.environ.get("SOFTMAXLAB_PURE", "") not in ("", "0"):
    from . import _pykernels as kernels
else:
    try:
        from . import _cykernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _pykernels as kernels  # type: ignore[no-redef]

COMPILED = kernels.COMPILED
batch_logits = kernels.batch_logits
batch_forward = kernels.batch_forward
loss_and_grads = kernels.loss_and_grads


def pure_kernels():
    from . import _pykernels

    return _pykernels


def compiled_kernels():
    """The compiled module, or None if the extension is not built."""
    try:
        from . import _cykernels

        return _cykernels
    except ImportError:
        return None


@dataclass(frozen=True)
class PackedSpec:
    """Array view of a double-mode TransformerSpec for the kernels."""

    n: int
    d: int
    sigma: tuple
    pos: np.ndarray  # [n, |sigma|, d]
    h: np.ndarray
    K: np.ndarray
    Q: np.ndarray
    Ws: tuple
    bs: tuple
    stable: bool

    def words_to_indices(self, words) -> np.ndarray:
        index = {s: i for i, s in enumerate(self.sigma)}
        return np.array(
            [[index[s] for s in w] for w in words], dtype=np.int32
        ).reshape(len(words), self.n)

    def logits(self, words) -> np.ndarray:
        return batch_logits(
            self.pos, self.h, self.K, self.Q, list(self.Ws), list(self.bs),
            self.words_to_indices(words), self.stable,
        )

    def forward_bits(self, words) -> np.ndarray:
        return batch_forward(
            self.pos, self.h, self.K, self.Q, list(self.Ws), list(self.bs),
            self.words_to_indices(words), self.stable,
        )


def pack_spec(spec: TransformerSpec) -> PackedSpec:
    if spec.cfg.mode != DOUBLE:
        raise ValueError("kernels only run in hardware-double mode")
    return PackedSpec(
        n=spec.n,
        d=spec.d,
        sigma=spec.sigma,
        pos=np.array(spec.pos_encoding, dtype=np.float64),
        h=np.array(spec.h, dtype=np.float64),
        K=np.array(spec.K, dtype=np.float64),
        Q=np.array(spec.Q, dtype=np.float64),
        Ws=tuple(np.array(w, dtype=np.float64) for w, _ in spec.mlp.layers),
        bs=tuple(np.array(b, dtype=np.float64) for _, b in spec.mlp.layers),
        stable=spec.cfg.stable_softmax,
    )


def unpack_spec(
    n, sigma, pos, h, K, Q, Ws, bs, cfg: PrecisionConfig | None = None
) -> TransformerSpec:
    """Arrays back to a TransformerSpec (e.g. after training)."""
    cfg = cfg or PrecisionConfig.double()
    layers = [
        (np.asarray(w).tolist(), np.asarray(b).tolist()) for w, b in zip(Ws, bs)
    ]
    return make_spec(
        n=n,
        sigma=sigma,
        d=np.asarray(h).shape[0],
        pos_encoding=np.asarray(pos).tolist(),
        h=np.asarray(h).tolist(),
        K=np.asarray(K).tolist(),
        Q=np.asarray(Q).tolist(),
        mlp=layers,
        cfg=cfg,
    )
