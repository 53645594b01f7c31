"""Pure-Python fallback kernels for double-mode batch evaluation/training.

Same operation sequence as the compiled kernels in ``_cykernels.pyx`` --
sequential left-to-right sums, bias added after the dot product, first-max
stable softmax -- so the two backends produce bit-identical IEEE-754
results. Any change here must be mirrored there.
"""

from __future__ import annotations

import math

import numpy as np

COMPILED = False


def _exp(x):
    # C exp() semantics: overflow yields inf, never an exception
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _forward_word(pos, h, K, Q, layers, word, stable, d, n):
    fs = [pos[i][word[i]] for i in range(n)]
    u = [0.0] * d
    for r in range(d):
        acc = 0.0
        qr = Q[r]
        for j in range(d):
            acc = acc + qr[j] * h[j]
        u[r] = acc
    kf = [[0.0] * d for _ in range(n)]
    scores = [0.0] * n
    for i in range(n):
        f = fs[i]
        kfi = kf[i]
        for r in range(d):
            acc = 0.0
            kr = K[r]
            for j in range(d):
                acc = acc + kr[j] * f[j]
            kfi[r] = acc
        acc = 0.0
        for r in range(d):
            acc = acc + kfi[r] * u[r]
        scores[i] = acc
    if stable:
        m = scores[0]
        for i in range(1, n):
            if scores[i] > m:
                m = scores[i]
        ts = [s - m for s in scores]
    else:
        ts = scores
    es = [0.0] * n
    for i in range(n):
        es[i] = _exp(ts[i])
    den = es[0]
    for i in range(1, n):
        den = den + es[i]
    w = [e / den for e in es]
    hhat = [0.0] * d
    for c in range(d):
        acc = 0.0
        for i in range(n):
            acc = acc + w[i] * fs[i][c]
        hhat[c] = acc
    z = [h[c] + hhat[c] for c in range(d)]
    # MLP forward, keeping pre-activations for the backward pass
    acts = [z]
    pres = []
    a = z
    last = len(layers) - 1
    for li, (wmat, bias) in enumerate(layers):
        pre = [0.0] * len(wmat)
        for o in range(len(wmat)):
            row = wmat[o]
            acc = 0.0
            for kk in range(len(row)):
                acc = acc + row[kk] * a[kk]
            pre[o] = acc + bias[o]
        pres.append(pre)
        if li != last:
            # ReLU written so NaN propagates instead of being zeroed
            a = [0.0 if x <= 0 else x for x in pre]
            acts.append(a)
    logit = pres[-1][0]
    return fs, u, kf, w, hhat, z, acts, pres, logit


def _unpack(pos, h, K, Q, Ws, bs, words):
    return (
        pos.tolist(),
        h.tolist(),
        K.tolist(),
        Q.tolist(),
        [(wm.tolist(), bv.tolist()) for wm, bv in zip(Ws, bs)],
        words.tolist(),
    )


def batch_logits(pos, h, K, Q, Ws, bs, words, stable=True):
    """N(h + hhat) for every word; words hold symbol indices."""
    n, _s, d = pos.shape
    lpos, lh, lK, lQ, layers, lwords = _unpack(pos, h, K, Q, Ws, bs, words)
    out = np.empty(len(lwords), dtype=np.float64)
    for b, word in enumerate(lwords):
        out[b] = _forward_word(lpos, lh, lK, lQ, layers, word, stable, d, n)[-1]
    return out


def batch_forward(pos, h, K, Q, Ws, bs, words, stable=True):
    """Strict sign decisions; a NaN logit is an error, never a bit."""
    logits = batch_logits(pos, h, K, Q, Ws, bs, words, stable)
    if np.isnan(logits).any():
        raise ValueError("NaN decision value in batch")
    return (logits > 0).astype(np.uint8)


def loss_and_grads(pos, h, K, Q, Ws, bs, words, labels, stable=True):
    """Mean logistic loss on the pre-sign output, plus analytic gradients
    for every parameter group."""
    n, S, d = pos.shape
    lpos, lh, lK, lQ, layers, lwords = _unpack(pos, h, K, Q, Ws, bs, words)
    llabels = labels.tolist()
    B = len(lwords)
    gpos = [[[0.0] * d for _ in range(S)] for _ in range(n)]
    gh = [0.0] * d
    gK = [[0.0] * d for _ in range(d)]
    gQ = [[0.0] * d for _ in range(d)]
    gWs = [[[0.0] * len(row) for row in wmat] for wmat, _ in layers]
    gbs = [[0.0] * len(bias) for _, bias in layers]
    loss = 0.0
    last = len(layers) - 1
    for bi, word in enumerate(lwords):
        fs, u, kf, w, hhat, z, acts, pres, logit = _forward_word(
            lpos, lh, lK, lQ, layers, word, stable, d, n
        )
        sgn = 2.0 * llabels[bi] - 1.0
        m = sgn * logit
        # softplus(-m), stably
        if m > 0:
            loss += math.log1p(_exp(-m)) / B
        else:
            loss += (-m + math.log1p(_exp(m))) / B
        dy = (-sgn / (1.0 + _exp(m))) / B
        # MLP backward
        delta = [dy]
        for li in range(last, -1, -1):
            wmat, _bias = layers[li]
            a_in = acts[li]
            gW = gWs[li]
            gb = gbs[li]
            din = [0.0] * len(a_in)
            for o in range(len(wmat)):
                do = delta[o]
                gb[o] += do
                row = wmat[o]
                gwrow = gW[o]
                for kk in range(len(row)):
                    gwrow[kk] += do * a_in[kk]
                    din[kk] += row[kk] * do
            if li > 0:
                pre_prev = pres[li - 1]
                delta = [
                    din[kk] if pre_prev[kk] > 0 else 0.0
                    for kk in range(len(din))
                ]
            else:
                dz = din
        # z = h + hhat
        dhhat = dz
        for c in range(d):
            gh[c] += dz[c]
        # hhat = sum_i w_i f_i
        dw = [0.0] * n
        for i in range(n):
            acc = 0.0
            fi = fs[i]
            for c in range(d):
                acc += dhhat[c] * fi[c]
            dw[i] = acc
        ssum = 0.0
        for i in range(n):
            ssum += dw[i] * w[i]
        ds = [w[i] * (dw[i] - ssum) for i in range(n)]
        # scores s_i = <K f_i, u>, u = Q h
        ktu = [0.0] * d
        for c in range(d):
            acc = 0.0
            for r in range(d):
                acc += lK[r][c] * u[r]
            ktu[c] = acc
        du = [0.0] * d
        for i in range(n):
            dsi = ds[i]
            fi = fs[i]
            kfi = kf[i]
            wi_sym = word[i]
            gfrow = gpos[i][wi_sym]
            for c in range(d):
                gfrow[c] += w[i] * dhhat[c] + dsi * ktu[c]
            for r in range(d):
                du[r] += dsi * kfi[r]
                gKr = gK[r]
                ur = u[r]
                for c in range(d):
                    gKr[c] += dsi * ur * fi[c]
        for r in range(d):
            dur = du[r]
            gQr = gQ[r]
            for j in range(d):
                gQr[j] += dur * lh[j]
                gh[j] += lQ[r][j] * dur
    return (
        loss,
        np.array(gpos, dtype=np.float64),
        np.array(gh, dtype=np.float64),
        np.array(gK, dtype=np.float64),
        np.array(gQ, dtype=np.float64),
        [np.array(g, dtype=np.float64) for g in gWs],
        [np.array(g, dtype=np.float64) for g in gbs],
    )
