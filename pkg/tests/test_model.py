import json
import math

import pytest
from hypothesis import given, strategies as st

from softmaxlab.model import (
    InputError,
    SpecError,
    attention_scores,
    decision_value,
    embed,
    forward,
    forward_trace,
    make_mlp,
    make_spec,
    mlp_eval,
    pool_scores,
    pooled,
    random_spec,
    spec_digest,
    spec_from_json,
    spec_to_json,
)
from softmaxlab.numerics import NumericError, PrecisionConfig, ulp_diff

D = PrecisionConfig.double()


def tiny_spec(n=2, d=2, pos=None, h=(0, 0), K=None, Q=None, mlp=None, cfg=D, sigma=(0, 1)):
    pos = pos if pos is not None else [[[1, 0], [0, 1]] for _ in range(n)]
    K = K if K is not None else [[0] * d for _ in range(d)]
    Q = Q if Q is not None else [[0] * d for _ in range(d)]
    mlp = mlp if mlp is not None else [([[1] * d], [0])]
    return make_spec(n, sigma, d, pos, h, K, Q, mlp, cfg)


class TestSpecValidation:
    def test_mlp_dims_must_compose(self):
        with pytest.raises(SpecError):
            make_mlp([([[1, 0]], [0]), ([[1, 0, 0]], [0])], D)

    def test_mlp_must_end_scalar(self):
        with pytest.raises(SpecError):
            make_mlp([([[1], [2]], [0, 0])], D)

    def test_pos_encoding_must_cover_table(self):
        with pytest.raises(SpecError):
            tiny_spec(pos=[[[1, 0], [0, 1]]])  # n=2 but one position row

    def test_alphabet_duplicates_rejected(self):
        with pytest.raises(SpecError):
            tiny_spec(sigma=(0, 0))

    def test_word_validation(self):
        spec = tiny_spec()
        with pytest.raises(InputError):
            embed(spec, (0, 1, 0))
        with pytest.raises(InputError):
            embed(spec, (0, 7))


class TestEmbed:
    def test_constant_encoding_gives_n_copies(self):
        spec = tiny_spec(n=3, pos=[[[2, 5], [2, 5]]] * 3)
        fs = embed(spec, (0, 1, 0))
        assert fs == [(2.0, 5.0)] * 3

    def test_single_token(self):
        spec = tiny_spec(n=1, pos=[[[3, 4], [5, 6]]], mlp=[([[1, 1]], [0])])
        assert embed(spec, (1,)) == [(5.0, 6.0)]

    def test_two_token_lookup_returns_exact_rows(self):
        pos = [[[1, 2], [3, 4]], [[5, 6], [7, 8]]]
        spec = tiny_spec(pos=pos)
        assert embed(spec, (1, 0)) == [(3.0, 4.0), (5.0, 6.0)]


class TestAttentionScores:
    def test_zero_key_matrix(self):
        spec = tiny_spec(h=(1, 1), Q=[[1, 0], [0, 1]])
        assert attention_scores(spec, embed(spec, (0, 1))) == [0.0, 0.0]

    def test_zero_query_direction(self):
        spec = tiny_spec(h=(0, 0), K=[[1, 2], [3, 4]], Q=[[1, 0], [0, 1]])
        assert attention_scores(spec, embed(spec, (0, 1))) == [0.0, 0.0]

    def test_hand_arithmetic_1d(self):
        # d=1: K=[2], Q=[1], h=[3], f=[5] -> <K f, Q h> = 10 * 3 = 30
        spec = make_spec(1, (0,), 1, [[[5]]], [3], [[2]], [[1]], [([[1]], [0])], D)
        assert attention_scores(spec, embed(spec, (0,))) == [30.0]


class TestPooled:
    def test_equal_scores_give_mean(self):
        spec = tiny_spec(pos=[[[1, 0], [1, 0]], [[0, 1], [0, 1]]])
        assert pooled(spec, (0, 1)) == [0.5, 0.5]

    def test_single_token_identity(self):
        spec = tiny_spec(n=1, pos=[[[3, 4], [5, 6]]], mlp=[([[1, 1]], [0])])
        assert pooled(spec, (0,)) == [3.0, 4.0]

    def test_hand_softmax_two_tokens(self):
        # scores (ln 2, 0) on f1=(1,0), f2=(0,1) pool to (2/3, 1/3)
        spec = tiny_spec(pos=[[[1, 0], [1, 0]], [[0, 1], [0, 1]]])
        fs = embed(spec, (0, 1))
        got = pool_scores(spec, fs, [math.log(2), 0.0])
        assert ulp_diff(got[0], 2 / 3, D) <= 2
        assert ulp_diff(got[1], 1 / 3, D) <= 2


class TestMlpEval:
    def test_identity_single_layer(self):
        mlp = make_mlp([([[1]], [0])], D)
        assert mlp_eval(mlp, [7.25], D) == 7.25

    def test_relu_clips_negative(self):
        mlp = make_mlp([([[1]], [0]), ([[1]], [0])], D)
        assert mlp_eval(mlp, [-1.0], D) == 0.0

    def test_zero_test_network_hand_value(self):
        # tau' - relu(s) - relu(-s) at s=0.05, tau'=0.01 -> -0.04
        mlp = make_mlp([([[1], [-1]], [0, 0]), ([[-1, -1]], [0.01])], D)
        assert mlp_eval(mlp, [0.05], D) == -0.04

    def test_dimension_mismatch(self):
        mlp = make_mlp([([[1, 0]], [0])], D)
        with pytest.raises(SpecError):
            mlp_eval(mlp, [1.0], D)


class TestForward:
    def test_constant_positive_mlp(self):
        spec = tiny_spec(mlp=[([[0, 0]], [1])])
        assert all(forward(spec, w) == 1 for w in [(0, 0), (0, 1), (1, 1)])

    def test_constant_zero_mlp_strict_inequality(self):
        spec = tiny_spec(mlp=[([[0, 0]], [0])])
        assert all(forward(spec, w) == 0 for w in [(0, 0), (1, 0)])

    def test_palindrome_construction_word(self):
        from softmaxlab.construction import build_palindrome_transformer

        pspec = build_palindrome_transformer(4)
        assert forward(pspec.spec, (0, 1, 1, 0)) == 1
        assert forward(pspec.spec, (1, 1, 0, 0)) == 0

    def test_nan_decision_is_hard_error(self):
        cfg = PrecisionConfig.double(stable_softmax=False)
        # score 1000 -> exp overflow -> inf/inf weights -> NaN pooled value
        spec = make_spec(
            2, (0,), 1, [[[1]], [[1]]], [1], [[1000]], [[1]], [([[1]], [0])], cfg
        )
        with pytest.raises(NumericError):
            forward(spec, (0, 0))

    def test_trace_contains_all_intermediates(self):
        spec = tiny_spec()
        tr = forward_trace(spec, (0, 1))
        assert set(tr) >= {
            "embeddings", "scores", "weights", "pooled", "mlp_input",
            "mlp_output", "decision",
        }
        assert tr["decision"] == forward(spec, (0, 1))


class TestModelInvariants:
    @given(seed=st.integers(0, 30))
    def test_permutation_equivariance(self, seed):
        import random as _r

        rng = _r.Random(seed)
        n, d = rng.randint(2, 7), rng.randint(1, 4)
        sigma = (0, 1, 2)
        spec = random_spec(n, d, sigma, seed=seed)
        word = tuple(rng.choice(sigma) for _ in range(n))
        perm = list(range(n))
        rng.shuffle(perm)
        pos2 = [None] * n
        word2 = [None] * n
        for i in range(n):
            pos2[perm[i]] = [list(v) for v in spec.pos_encoding[i]]
            word2[perm[i]] = word[i]
        spec2 = make_spec(
            n, sigma, d, pos2, spec.h, spec.K, spec.Q, spec.mlp, spec.cfg
        )
        assert forward(spec, word) == forward(spec2, tuple(word2))

    @given(seed=st.integers(0, 30), shift_exp=st.integers(-4, 4))
    def test_score_shift_leaves_pooled_within_8_ulp(self, seed, shift_exp):
        import random as _r

        rng = _r.Random(seed)
        n, d = rng.randint(2, 6), rng.randint(1, 4)
        spec = random_spec(n, d, (0, 1), seed=seed)
        word = tuple(rng.choice((0, 1)) for _ in range(n))
        fs = embed(spec, word)
        scores = attention_scores(spec, fs)
        c = 2.0**shift_exp
        base = pool_scores(spec, fs, scores)
        shifted = pool_scores(spec, fs, [s + c for s in scores])
        for coord in range(spec.d):
            a, b = base[coord], shifted[coord]
            # cancellation can make ulp(result) meaningless, so measure at
            # the scale of the vectors being pooled
            scale = max(abs(a), abs(b), max(abs(f[coord]) for f in fs))
            assert abs(a - b) <= 8 * math.ulp(scale)

    @given(seed=st.integers(0, 20))
    def test_precision_refinement_on_clear_margins(self, seed):
        p = 24
        lo_cfg = PrecisionConfig.bigfloat(2 * p)
        hi_cfg = PrecisionConfig.bigfloat(4 * p)
        import random as _r

        rng = _r.Random(seed)
        n, d = rng.randint(2, 6), rng.randint(1, 3)
        word = tuple(rng.choice((0, 1)) for _ in range(n))
        lo = random_spec(n, d, (0, 1), seed=seed, cfg=lo_cfg)
        hi = random_spec(n, d, (0, 1), seed=seed, cfg=hi_cfg)
        margin = abs(float(decision_value(hi, word)))
        if margin > 2.0 ** (8 - 2 * p):
            assert forward(lo, word) == forward(hi, word)


class TestSerialization:
    def test_double_round_trip_is_exact(self):
        spec = random_spec(4, 3, (0, 1, 2), seed=9)
        doc = spec_to_json(spec)
        spec2 = spec_from_json(json.loads(json.dumps(doc)), D)
        assert spec2 == spec

    def test_bigfloat_round_trip_is_lossless(self):
        cfg = PrecisionConfig.bigfloat(150)
        spec = random_spec(3, 2, (0, 1), seed=4, cfg=cfg)
        # push values off the double grid
        with cfg.active():
            h = tuple(x / 3 for x in spec.h)
        spec = make_spec(
            spec.n, spec.sigma, spec.d, spec.pos_encoding, h, spec.K, spec.Q,
            spec.mlp, cfg,
        )
        spec2 = spec_from_json(spec_to_json(spec), cfg)
        assert spec2.h == spec.h and spec2.pos_encoding == spec.pos_encoding

    def test_malformed_document_raises_spec_error(self):
        with pytest.raises(SpecError):
            spec_from_json({"n": 2}, D)

    def test_digest_is_content_addressed(self):
        a = random_spec(3, 2, (0, 1), seed=1)
        b = random_spec(3, 2, (0, 1), seed=1)
        c = random_spec(3, 2, (0, 1), seed=2)
        assert spec_digest(a) == spec_digest(b) != spec_digest(c)
