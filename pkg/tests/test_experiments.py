import io

import pytest

from softmaxlab.experiments import (
    SWEEP_FIELDS,
    TrainConfig,
    TrainDivergence,
    dimension_sweep,
    family_dataset,
    gradient_check,
    shatter_audit,
    sweep_to_csv,
    train,
)
from softmaxlab.model import forward, random_spec
from softmaxlab.solvers import build_comp_special_solver, build_constant_spec
from softmaxlab.tasks import comp_alphabet, comp_eval


class TestFamilyDataset:
    def test_comp_exhaustive_size(self):
        sigma, words, labels = family_dataset("comp", 5)
        assert sigma == comp_alphabet(5)
        assert len(words) == 4 * 2**4
        assert labels.tolist() == [float(comp_eval(w)) for w in words]

    def test_sum2_exhaustive_size(self):
        _, words, labels = family_dataset("sum2", 6)
        assert len(words) == 4**3
        assert set(labels.tolist()) == {0.0, 1.0}

    def test_sampled_beyond_ten(self):
        _, words, _ = family_dataset("comp", 12, seed=1, sample_size=64)
        assert len(words) == 64
        assert all(len(w) == 12 and 2 <= w[0] <= 12 for w in words)


class TestTrain:
    def test_zero_steps_returns_seeded_init_accuracy(self):
        cfg = TrainConfig(task="comp", n=4, d=2, steps=0, seed=11)
        a = train(cfg)
        b = train(cfg)
        assert a.accuracy == b.accuracy == a.initial_accuracy
        assert a.best_step == 0
        assert a.spec == b.spec

    def test_determinism_bit_for_bit(self):
        cfg = TrainConfig(task="comp", n=4, d=3, mlp_hidden=(4,), steps=25, seed=3)
        a = train(cfg)
        b = train(cfg)
        assert a.accuracy == b.accuracy and a.best_step == b.best_step
        assert a.spec == b.spec

    def test_best_checkpoint_never_below_init(self):
        for seed in (0, 1, 2):
            res = train(TrainConfig(task="comp", n=4, d=3, steps=30, seed=seed, lr=0.3))
            assert res.accuracy >= res.initial_accuracy

    def test_returned_spec_reproduces_accuracy(self):
        cfg = TrainConfig(task="comp", n=4, d=3, steps=20, seed=5)
        res = train(cfg)
        _, words, labels = family_dataset("comp", 4, seed=5)
        acc = sum(
            forward(res.spec, w) == int(l) for w, l in zip(words, labels)
        ) / len(words)
        assert acc == res.accuracy

    def test_divergence_is_reported(self):
        cfg = TrainConfig(task="comp", n=4, d=2, steps=40, seed=0, lr=1e12)
        with pytest.raises(TrainDivergence):
            train(cfg)

    def test_sum2_trains(self):
        res = train(TrainConfig(task="sum2", n=4, d=3, steps=25, seed=2))
        assert 0.0 <= res.accuracy <= 1.0


class TestGradientCheck:
    def test_analytic_matches_finite_differences(self):
        worst = 0.0
        for seed in range(5):
            rels = gradient_check(seed=seed)
            assert len(rels) >= 20
            worst = max(worst, max(rels))
        assert worst <= 1e-5

    def test_every_parameter_group_contributes(self):
        # the top-|grad| coordinate of each group is always included:
        # pos, h, K, Q, two weight matrices, two bias vectors
        rels = gradient_check(seed=1, params_per_group=1)
        assert len(rels) >= 8


class TestDimensionSweep:
    def test_grid_rows_and_monotone_bound(self):
        base = TrainConfig(task="comp", n=4, d=1, steps=8, seed=1)
        res = dimension_sweep("comp", 4, [1, 2, 4], [(2,)], base)
        assert len(res.rows) == 3
        bounds = [r.vc_bound for r in res.rows]
        assert bounds == sorted(bounds)
        assert all(r.error == "" for r in res.rows)
        assert all(r.points_count == 3 for r in res.rows)

    def test_constant_baseline_accuracy_is_class_frequency(self):
        # a constant-decision model scores exactly the class frequency, and
        # the better of the two constants is the majority baseline
        _, words, labels = family_dataset("comp", 5)
        accs = []
        for value in (0, 1):
            spec = build_constant_spec(5, comp_alphabet(5), value=value)
            hits = sum(forward(spec, w) == int(l) for w, l in zip(words, labels))
            accs.append(hits / len(words))
        freq_one = float(labels.mean())
        assert accs[1] == freq_one and accs[0] == 1 - freq_one
        assert max(accs) == max(freq_one, 1 - freq_one)

    def test_csv_deterministic_rerun(self):
        base = TrainConfig(task="comp", n=4, d=1, steps=6, seed=9)
        out = []
        for _ in range(2):
            res = dimension_sweep("comp", 4, [1, 2], [(2,)], base)
            buf = io.StringIO()
            sweep_to_csv(res, buf)
            out.append(buf.getvalue())
        assert out[0] == out[1]
        header = out[0].splitlines()[0]
        assert header == ",".join(SWEEP_FIELDS)

    def test_row_failure_recorded_not_raised(self):
        base = TrainConfig(task="comp", n=4, d=1, steps=30, seed=0, lr=1e12)
        res = dimension_sweep("comp", 4, [2], [(2,)], base)
        row = res.rows[0]
        assert row.train_accuracy is None
        assert row.error != ""
        assert row.vc_bound > 0  # bound still computed from the shape


class TestTrainedModelEquivalence:
    def test_perfect_training_yields_fully_shattered_table(self):
        # a model that actually solves the lookup family must realize every
        # labeling through the hypothesis class
        res = train(
            TrainConfig(task="comp", n=3, d=6, mlp_hidden=(8,), steps=100,
                        lr=1.0, seed=0)
        )
        assert res.accuracy == 1.0
        rep = shatter_audit(res.spec, "comp")
        assert rep.realized == rep.labelings_checked == 4
        assert rep.hyp_forward_mismatches == 0
        from softmaxlab.shattering import comp_shatter_table

        assert comp_shatter_table(res.spec).shattered


class TestShatterAudit:
    def test_constant_spec_realizes_exactly_one(self):
        spec = build_constant_spec(5, comp_alphabet(5))
        rep = shatter_audit(spec, "comp")
        assert rep.realized == 1
        assert rep.hyp_forward_mismatches == 0
        assert rep.realized == rep.realized_via_forward

    def test_solver_realizes_all(self):
        rep = shatter_audit(build_comp_special_solver(5), "comp")
        assert rep.realized == rep.labelings_checked == 2**4
        assert not rep.sampled

    def test_realized_bounded_by_labelings(self):
        spec = random_spec(5, 3, comp_alphabet(5), seed=3)
        rep = shatter_audit(spec, "comp")
        assert 0 <= rep.realized <= rep.labelings_checked
        assert rep.hyp_forward_mismatches == 0

    def test_sampled_mode_beyond_limit(self):
        spec = random_spec(13, 2, comp_alphabet(13), seed=1)
        rep = shatter_audit(spec, "comp", sample=40)
        assert rep.sampled and rep.labelings_checked == 40

    def test_sum2_audit(self):
        from softmaxlab.solvers import build_sum2_indicator_solver

        rep = shatter_audit(build_sum2_indicator_solver(3), "sum2")
        assert rep.realized == rep.labelings_checked == 8
        assert rep.hyp_forward_mismatches == 0
