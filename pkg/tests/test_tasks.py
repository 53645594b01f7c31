import itertools

import pytest
from hypothesis import given, strategies as st

from softmaxlab.tasks import (
    TaskError,
    TaskInstance,
    comp_eval,
    comp_special_word,
    iter_comp_special,
    iter_sum2_encoded,
    pal_eval,
    sum2_encode,
    sum2_eval,
)


def comp_brute(word):
    """Independent oracle: build phi explicitly and compose it."""
    phi = {i + 1: a for i, a in enumerate(word)}
    return 1 if phi[phi[1]] == 1 else 0


def sum2_brute(word):
    """Independent oracle: quadratic scan over all (i, j) pairs."""
    return 1 if any(a + b == 0 for a in word for b in word) else 0


class TestCompEval:
    def test_fixed_point(self):
        assert comp_eval((1, 3, 2)) == 1

    def test_two_cycle(self):
        word = (2, 1, 3)
        assert comp_eval(word) == comp_brute(word) == 1

    def test_non_fixed(self):
        word = (3, 1, 2, 4)
        assert comp_eval(word) == comp_brute(word) == 0

    def test_out_of_range_symbol(self):
        with pytest.raises(TaskError):
            comp_eval((4, 1, 2))

    def test_exhaustive_against_brute_force(self):
        for n in (1, 2, 3, 4):
            for word in itertools.product(range(1, n + 1), repeat=n):
                assert comp_eval(word) == comp_brute(word)


class TestSum2Eval:
    def test_obvious_pair(self):
        assert sum2_eval((1, -1), m=1) == 1

    def test_no_pair(self):
        word = (1, 2, 3)
        assert sum2_eval(word, m=3) == sum2_brute(word) == 0

    def test_zero_hits_itself(self):
        # literal i = j reading: 0 + 0 = 0
        word = (0, 5)
        assert sum2_eval(word, m=5) == sum2_brute(word) == 1

    def test_out_of_range(self):
        with pytest.raises(TaskError):
            sum2_eval((3,), m=2)

    @given(st.lists(st.integers(-6, 6), min_size=1, max_size=8))
    def test_matches_quadratic_brute_force(self, word):
        assert sum2_eval(word, m=6) == sum2_brute(word)


class TestPalEval:
    def test_examples(self):
        assert pal_eval((0, 1, 0)) == 1
        assert pal_eval((0, 1)) == 0
        assert pal_eval((1, 0, 0, 1)) == 1

    def test_non_binary_rejected(self):
        with pytest.raises(TaskError):
            pal_eval((0, 2, 0))

    @given(st.lists(st.integers(0, 1), max_size=12))
    def test_reverse_invariant(self, word):
        assert pal_eval(word) == pal_eval(tuple(word)[::-1])


class TestCompSpecialWords:
    def test_lookup_hit(self):
        word = comp_special_word(3, 3, (2, 1))
        assert word == (3, 2, 1)
        assert comp_eval(word) == 1  # b_3 = 1

    def test_lookup_miss(self):
        word = comp_special_word(3, 2, (2, 1))
        assert word == (2, 2, 1)
        assert comp_eval(word) == 0  # b_2 = 2

    def test_all_ones_row(self):
        for n in (2, 4, 6):
            for a1 in range(2, n + 1):
                assert comp_eval(comp_special_word(n, a1, (1,) * (n - 1))) == 1

    def test_a1_of_one_rejected(self):
        with pytest.raises(TaskError):
            comp_special_word(4, 1, (1, 1, 1))

    def test_reduction_identity_exhaustive(self):
        # comp(a1, b2..bn) = [b_{a1} = 1], exhaustively for n <= 8
        for n in range(2, 9):
            for a1 in range(2, n + 1):
                for b in itertools.product((1, 2), repeat=n - 1):
                    word = comp_special_word(n, a1, b)
                    assert comp_eval(word) == (1 if b[a1 - 2] == 1 else 0)

    def test_iterator_covers_family(self):
        words = list(iter_comp_special(4))
        assert len(words) == 3 * 2**3 == len(set(words))


class TestSum2Encoding:
    def test_hit_example(self):
        word = sum2_encode(2, (1, 0), (1, 1))
        assert word == (2, 1, -2, -4)
        assert sum2_eval(word, m=4) == 1  # 2 + (-2) = 0

    def test_all_zero_alpha(self):
        for beta in itertools.product((0, 1), repeat=2):
            word = sum2_encode(2, (0, 0), beta)
            assert word[:2] == (1, 1)
            assert sum2_eval(word, m=4) == sum2_brute(word) == 0

    def test_disjoint_supports(self):
        word = sum2_encode(3, (0, 0, 0), (0, 0, 0))
        assert word == (1, 1, 1, 1, 1, 1)
        assert sum2_eval(word, m=6) == 0

    def test_length_mismatch(self):
        with pytest.raises(TaskError):
            sum2_encode(3, (1, 0), (0, 0, 1))

    def test_values_stay_in_band(self):
        for k in (1, 3, 5):
            n = 2 * k
            for alpha, beta, word in iter_sum2_encoded(k):
                assert all(-n <= s <= n for s in word)

    def test_disjointness_equivalence_exhaustive(self):
        for k in range(1, 7):
            for alpha, beta, word in iter_sum2_encoded(k):
                want = 1 if any(a and b for a, b in zip(alpha, beta)) else 0
                assert sum2_eval(word, m=2 * k) == want


class TestTaskInstance:
    def test_round_trip(self):
        inst = TaskInstance(task="sum2", n=4, word=(1, 2, -1, 4), m=4)
        assert TaskInstance.from_json(inst.to_json()) == inst
        assert inst.evaluate() == 1

    def test_sum2_requires_bound(self):
        with pytest.raises(TaskError):
            TaskInstance(task="sum2", n=2, word=(1, 1))

    def test_word_length_checked(self):
        with pytest.raises(TaskError):
            TaskInstance(task="pal", n=3, word=(0, 1))
