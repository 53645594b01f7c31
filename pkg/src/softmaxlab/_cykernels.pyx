# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled double-mode kernels.

Operation-for-operation mirror of ``_pykernels.py`` (sequential sums, bias
after dot product, first-max stable softmax, NaN-propagating ReLU), compiled
with FP contraction off, so results are bit-identical to the fallback.
"""

from libc.math cimport exp as c_exp, log1p as c_log1p

import numpy as np

COMPILED = True


cdef inline double _relu(double x) noexcept nogil:
    # written so NaN propagates instead of being zeroed
    if x <= 0:
        return 0.0
    return x


def _prep(pos, h, K, Q, Ws, bs, words):
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    h = np.ascontiguousarray(h, dtype=np.float64)
    K = np.ascontiguousarray(K, dtype=np.float64)
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    Ws = [np.ascontiguousarray(w, dtype=np.float64) for w in Ws]
    bs = [np.ascontiguousarray(b, dtype=np.float64) for b in bs]
    words = np.ascontiguousarray(words, dtype=np.int32)
    return pos, h, K, Q, Ws, bs, words


cdef double _word_logit(
    double[:, :, ::1] pos, double[::1] h, double[:, :, ::1] kf_scratch,
    double[::1] u, double[:, ::1] K, double[:, ::1] Q,
    list Ws, list bs,
    int[:, ::1] words, Py_ssize_t bi, bint stable,
    double[::1] scores, double[::1] es, double[::1] w,
    double[:, ::1] acts, double[:, ::1] pres,
) except *:
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t d = pos.shape[2]
    cdef Py_ssize_t i, r, j, c, o, kk, li
    cdef double acc, m, den
    cdef double[:, ::1] kf = kf_scratch[0]
    cdef double[:, ::1] wmat
    cdef double[::1] bias

    for i in range(n):
        for r in range(d):
            acc = 0.0
            for j in range(d):
                acc = acc + K[r, j] * pos[i, words[bi, i], j]
            kf[i, r] = acc
        acc = 0.0
        for r in range(d):
            acc = acc + kf[i, r] * u[r]
        scores[i] = acc
    if stable:
        m = scores[0]
        for i in range(1, n):
            if scores[i] > m:
                m = scores[i]
        for i in range(n):
            es[i] = c_exp(scores[i] - m)
    else:
        for i in range(n):
            es[i] = c_exp(scores[i])
    den = es[0]
    for i in range(1, n):
        den = den + es[i]
    for i in range(n):
        w[i] = es[i] / den
    for c in range(d):
        acc = 0.0
        for i in range(n):
            acc = acc + w[i] * pos[i, words[bi, i], c]
        acts[0, c] = h[c] + acc

    cdef Py_ssize_t last = len(Ws) - 1
    cdef Py_ssize_t out_dim, in_dim
    for li in range(last + 1):
        wmat = Ws[li]
        bias = bs[li]
        out_dim = wmat.shape[0]
        in_dim = wmat.shape[1]
        for o in range(out_dim):
            acc = 0.0
            for kk in range(in_dim):
                acc = acc + wmat[o, kk] * acts[li, kk]
            pres[li, o] = acc + bias[o]
        if li != last:
            for o in range(out_dim):
                acts[li + 1, o] = _relu(pres[li, o])
    return pres[last, 0]


def _scratch(pos, Ws):
    n, _s, d = pos.shape
    widths = [d] + [w.shape[0] for w in Ws]
    mw = max(widths)
    return (
        np.empty((1, n, d), dtype=np.float64),
        np.empty(d, dtype=np.float64),
        np.empty(n, dtype=np.float64),
        np.empty(n, dtype=np.float64),
        np.empty(n, dtype=np.float64),
        np.empty((len(Ws) + 1, mw), dtype=np.float64),
        np.empty((len(Ws), mw), dtype=np.float64),
    )


def _qh(double[:, ::1] Q, double[::1] h, double[::1] u):
    cdef Py_ssize_t d = Q.shape[0]
    cdef Py_ssize_t r, j
    cdef double acc
    for r in range(d):
        acc = 0.0
        for j in range(d):
            acc = acc + Q[r, j] * h[j]
        u[r] = acc


def batch_logits(pos, h, K, Q, Ws, bs, words, stable=True):
    """N(h + hhat) for every word; words hold symbol indices."""
    pos, h, K, Q, Ws, bs, words = _prep(pos, h, K, Q, Ws, bs, words)
    kf, u, scores, es, w, acts, pres = _scratch(pos, Ws)
    _qh(Q, h, u)
    cdef Py_ssize_t B = words.shape[0]
    cdef Py_ssize_t bi
    out = np.empty(B, dtype=np.float64)
    cdef double[::1] out_v = out
    for bi in range(B):
        out_v[bi] = _word_logit(
            pos, h, kf, u, K, Q, Ws, bs, words, bi, stable, scores, es, w, acts, pres
        )
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
    pos, h, K, Q, Ws, bs, words = _prep(pos, h, K, Q, Ws, bs, words)
    labels = np.ascontiguousarray(labels, dtype=np.float64)
    kf_s, u_a, scores_a, es_a, w_a, acts_a, pres_a = _scratch(pos, Ws)

    cdef double[:, :, ::1] pos_v = pos
    cdef double[::1] h_v = h
    cdef double[:, ::1] K_v = K
    cdef double[:, ::1] Q_v = Q
    cdef int[:, ::1] words_v = words
    cdef double[::1] labels_v = labels
    cdef double[:, :, ::1] kf_scratch = kf_s
    cdef double[:, ::1] kf = kf_s[0]
    cdef double[::1] u = u_a
    cdef double[::1] scores = scores_a
    cdef double[::1] es = es_a
    cdef double[::1] w = w_a
    cdef double[:, ::1] acts = acts_a
    cdef double[:, ::1] pres = pres_a

    cdef Py_ssize_t n = pos_v.shape[0]
    cdef Py_ssize_t S = pos_v.shape[1]
    cdef Py_ssize_t d = pos_v.shape[2]
    cdef Py_ssize_t B = words_v.shape[0]
    cdef Py_ssize_t last = len(Ws) - 1
    cdef bint stable_c = stable

    gpos = np.zeros((n, S, d), dtype=np.float64)
    gh = np.zeros(d, dtype=np.float64)
    gK = np.zeros((d, d), dtype=np.float64)
    gQ = np.zeros((d, d), dtype=np.float64)
    gWs = [np.zeros_like(wm) for wm in Ws]
    gbs = [np.zeros_like(bv) for bv in bs]
    cdef double[:, :, ::1] gpos_v = gpos
    cdef double[::1] gh_v = gh
    cdef double[:, ::1] gK_v = gK
    cdef double[:, ::1] gQ_v = gQ

    mw = acts_a.shape[1]
    delta_a = np.empty(mw, dtype=np.float64)
    din_a = np.empty(mw, dtype=np.float64)
    dw_a = np.empty(n, dtype=np.float64)
    ds_a = np.empty(n, dtype=np.float64)
    ktu_a = np.empty(d, dtype=np.float64)
    du_a = np.empty(d, dtype=np.float64)
    dz_a = np.empty(d, dtype=np.float64)
    cdef double[::1] delta = delta_a
    cdef double[::1] din = din_a
    cdef double[::1] dw = dw_a
    cdef double[::1] ds = ds_a
    cdef double[::1] ktu = ktu_a
    cdef double[::1] du = du_a
    cdef double[::1] dz = dz_a

    cdef double loss = 0.0
    cdef double logit, sgn, m, dy, acc, do, dsi, ssum, ur, dur
    cdef Py_ssize_t bi, i, r, j, c, o, kk, li, sym
    cdef Py_ssize_t out_dim, in_dim
    cdef double[:, ::1] wmat, gW
    cdef double[::1] gb

    _qh(Q_v, h_v, u)
    for bi in range(B):
        logit = _word_logit(
            pos_v, h_v, kf_scratch, u, K_v, Q_v, Ws, bs, words_v, bi, stable_c,
            scores, es, w, acts, pres,
        )
        sgn = 2.0 * labels_v[bi] - 1.0
        m = sgn * logit
        if m > 0:
            loss = loss + c_log1p(c_exp(-m)) / B
        else:
            loss = loss + (-m + c_log1p(c_exp(m))) / B
        dy = (-sgn / (1.0 + c_exp(m))) / B

        # MLP backward
        delta[0] = dy
        for li in range(last, -1, -1):
            wmat = Ws[li]
            gW = gWs[li]
            gb = gbs[li]
            out_dim = wmat.shape[0]
            in_dim = wmat.shape[1]
            for kk in range(in_dim):
                din[kk] = 0.0
            for o in range(out_dim):
                do = delta[o]
                gb[o] += do
                for kk in range(in_dim):
                    gW[o, kk] += do * acts[li, kk]
                    din[kk] += wmat[o, kk] * do
            if li > 0:
                for kk in range(in_dim):
                    if pres[li - 1, kk] > 0:
                        delta[kk] = din[kk]
                    else:
                        delta[kk] = 0.0
            else:
                for kk in range(in_dim):
                    dz[kk] = din[kk]

        # z = h + hhat
        for c in range(d):
            gh_v[c] += dz[c]
        # hhat = sum_i w_i f_i
        for i in range(n):
            sym = words_v[bi, i]
            acc = 0.0
            for c in range(d):
                acc += dz[c] * pos_v[i, sym, c]
            dw[i] = acc
        ssum = 0.0
        for i in range(n):
            ssum += dw[i] * w[i]
        for i in range(n):
            ds[i] = w[i] * (dw[i] - ssum)
        # scores s_i = <K f_i, u>, u = Q h
        for c in range(d):
            acc = 0.0
            for r in range(d):
                acc += K_v[r, c] * u[r]
            ktu[c] = acc
        for r in range(d):
            du[r] = 0.0
        for i in range(n):
            dsi = ds[i]
            sym = words_v[bi, i]
            for c in range(d):
                gpos_v[i, sym, c] += w[i] * dz[c] + dsi * ktu[c]
            for r in range(d):
                du[r] += dsi * kf[i, r]
                ur = u[r]
                for c in range(d):
                    gK_v[r, c] += dsi * ur * pos_v[i, sym, c]
        for r in range(d):
            dur = du[r]
            for j in range(d):
                gQ_v[r, j] += dur * h_v[j]
                gh_v[j] += Q_v[r, j] * dur
    return loss, gpos, gh, gK, gQ, gWs, gbs
