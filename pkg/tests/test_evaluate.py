import itertools
import math

import numpy as np
import pytest

from betapref.errors import DomainError, PreconditionError, StructuralError
from betapref.evaluate import (
    BANDIT_ACCURACIES,
    DEFAULT_MIX_RATIOS,
    ParetoPoint,
    accuracy,
    bandit_alignment,
    calibration_curve,
    context_accuracy,
    correlation_report,
    hypervolume,
    isotonic_fit,
    make_bandit_arms,
    pareto_sweep,
    pava,
    pearson,
    r2_iso,
    r2_ols,
    static_accuracy,
)
from betapref.model import ModelParams
from betapref.synth import build_context, gen_objective, sample_triples


def grid_hypervolume(points, size=2000):
    """Fraction of a size x size grid of cell centres dominated by any point."""
    centres = (np.arange(size) + 0.5) / size
    pts = np.asarray(points, dtype=float)
    # For each x column, the covered height is the best y among points to its right.
    heights = np.array([pts[pts[:, 0] >= x, 1].max(initial=0.0) for x in centres])
    return float(np.sum(centres[None, :] < heights[:, None])) / size**2


def isotonic_by_enumeration(ys):
    """Brute force: best nondecreasing piecewise-constant fit over all contiguous blockings."""
    ys = np.asarray(ys, dtype=float)
    n = len(ys)
    best, best_fit = math.inf, None
    for cuts in itertools.product([0, 1], repeat=n - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n]
        fit = np.concatenate([np.full(b - a, ys[a:b].mean()) for a, b in zip(bounds, bounds[1:])])
        if np.all(np.diff(fit) >= -1e-12):
            ssr = float(np.sum((ys - fit) ** 2))
            if ssr < best - 1e-12:
                best, best_fit = ssr, fit
    return best_fit


class TestAccuracy:
    def setup_method(self):
        self.obj = gen_objective(8, 0)
        self.ctx = build_context(self.obj, self.obj, 4, 1.0, seed=0)
        self.eval_set = sample_triples(self.obj, 2.0, 5000, 1)

    def test_zero_model_scores_zero(self):
        assert accuracy(ModelParams.zeros(8), self.ctx, self.eval_set) == 0.0

    def test_oracle_head_matches_bayes_accuracy(self):
        oracle = ModelParams(np.zeros((8, 8)), 2.0 * self.obj.weights, np.zeros(3))
        agree = np.mean([self.obj.weights @ t.direction > 0 for t in self.eval_set])
        acc = accuracy(oracle, self.ctx, self.eval_set)
        assert abs(acc - agree) <= 0.02
        # Generator law: E[sigmoid(2 |w . dphi|)] = 0.828 for unit w.
        assert abs(acc - 0.828) <= 0.02

    def test_callable_context_source(self):
        oracle = ModelParams(np.zeros((8, 8)), self.obj.weights, np.zeros(3))
        a = accuracy(oracle, lambda i: self.ctx, self.eval_set[:100])
        b = accuracy(oracle, self.ctx, self.eval_set[:100])
        assert a == b

    def test_orientation_ignored(self):
        oracle = ModelParams(np.zeros((8, 8)), self.obj.weights, np.zeros(3))
        flipped = [t.swapped() for t in self.eval_set[:200]]
        assert accuracy(oracle, self.ctx, flipped) == accuracy(oracle, self.ctx, self.eval_set[:200])

    def test_errors(self):
        with pytest.raises(PreconditionError):
            accuracy(ModelParams.zeros(8), self.ctx, [])
        with pytest.raises(StructuralError):
            accuracy(ModelParams.zeros(5), self.ctx, self.eval_set[:3])

    def test_reversed_symmetry_of_linear_model(self):
        p = ModelParams(np.eye(8), np.zeros(8), np.zeros(3))
        rev = self.obj.reversed()
        std = context_accuracy(p, self.obj, self.obj, 8, count=20_000, seed=3)
        flip = context_accuracy(p, rev, rev, 8, count=20_000, seed=4)
        assert abs(std - flip) <= 0.015
        # Mismatched context steers the model the wrong way.
        assert context_accuracy(p, rev, self.obj, 8, count=5000, seed=5) < 0.5

    def test_static_accuracy_is_context_free(self):
        p = ModelParams(np.zeros((8, 8)), self.obj.weights, np.zeros(3))
        std = static_accuracy(p, self.obj, 20_000, seed=1)
        rev = static_accuracy(p, self.obj.reversed(), 20_000, seed=1)
        assert std == pytest.approx(1.0 - rev, abs=1e-12)


class TestCalibration:
    def test_untrained_constant(self):
        rows = calibration_curve(ModelParams.zeros(6), gen_objective(6, 0), [1, 2, 4, 8, 16], [0, 1])
        assert [r[0] for r in rows] == [1, 2, 4, 8, 16]
        for _, m, s in rows:
            assert m == pytest.approx(2 * math.log(2) + 1, rel=1e-15)
            assert s == 0.0

    def test_single_entry(self):
        rows = calibration_curve(ModelParams.zeros(6), gen_objective(6, 0), [1], [0])
        assert len(rows) == 1

    def test_log_n_head_increases(self):
        p = ModelParams(np.zeros((6, 6)), np.zeros(6), np.array([0.0, 1.0, 0.0]))
        means = [m for _, m, _ in calibration_curve(p, gen_objective(6, 0), [1, 2, 4, 8], [0])]
        assert all(a < b for a, b in zip(means, means[1:]))

    def test_deterministic_and_validated(self):
        p = ModelParams(np.zeros((6, 6)), np.zeros(6), np.array([1.0, 0.0, 0.0]))
        args = (p, gen_objective(6, 0), [1, 4], [0, 1, 2])
        assert calibration_curve(*args) == calibration_curve(*args)
        with pytest.raises(PreconditionError):
            calibration_curve(p, gen_objective(6, 0), [], [0])


class TestPareto:
    def test_default_grid(self):
        assert DEFAULT_MIX_RATIOS == (0.0, 0.25, 0.5, 0.75, 1.0)
        a, b = gen_objective(6, 0), gen_objective(6, 1)
        pts = pareto_sweep(ModelParams(np.eye(6), np.zeros(6), np.zeros(3)), a, b, 8, count=300)
        assert [p.mix_ratio for p in pts] == list(DEFAULT_MIX_RATIOS)
        assert all(p.n_demos == 8 for p in pts)

    def test_extremes_for_context_follower(self):
        # A model that follows its context: respond peaks at ratio 1, refuse at 0.
        a, b = gen_objective(6, 0), gen_objective(6, 1)
        pts = pareto_sweep(ModelParams(np.eye(6), np.zeros(6), np.zeros(3)), a, b, 16, seeds=(0, 1), count=2000)
        respond = [p.respond_acc for p in pts]
        refuse = [p.refuse_acc for p in pts]
        assert np.argmax(respond) == 4 and np.argmax(refuse) == 0
        assert all(y >= x - 0.03 for x, y in zip(respond, respond[1:]))
        assert all(y <= x + 0.03 for x, y in zip(refuse, refuse[1:]))

    def test_invalid_ratio(self):
        a, b = gen_objective(6, 0), gen_objective(6, 1)
        with pytest.raises(PreconditionError):
            pareto_sweep(ModelParams.zeros(6), a, b, 4, mix_ratios=[1.5])

    def test_point_validation(self):
        with pytest.raises(PreconditionError):
            ParetoPoint(1.1, 0.5, 0.5, 1)


class TestHypervolume:
    SET = [(0.8, 0.2), (0.5, 0.5), (0.2, 0.8)]

    def test_unit_square(self):
        assert hypervolume([(1.0, 1.0)]) == 1.0

    def test_worked_example(self):
        assert grid_hypervolume(self.SET) == pytest.approx(0.37, abs=1e-3)
        assert hypervolume(self.SET) == pytest.approx(0.37, abs=1e-12)

    def test_dominated_point_changes_nothing(self):
        assert hypervolume(self.SET + [(0.4, 0.4)]) == hypervolume(self.SET)
        assert hypervolume(self.SET + self.SET) == hypervolume(self.SET)

    def test_accepts_pareto_points(self):
        pts = [ParetoPoint(x, y, 0.5, 1) for x, y in self.SET]
        assert hypervolume(pts) == hypervolume(self.SET)

    def test_below_reference(self):
        with pytest.raises(DomainError):
            hypervolume([(0.5, 0.5)], ref=(0.6, 0.0))

    def test_random_sets_against_grid(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            pts = rng.uniform(0, 1, (int(rng.integers(1, 12)), 2))
            assert abs(hypervolume(pts) - grid_hypervolume(pts)) <= 2e-3

    def test_monotone(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            pts = [tuple(p) for p in rng.uniform(0, 1, (5, 2))]
            extra = tuple(rng.uniform(0, 1, 2))
            assert hypervolume(pts + [extra]) >= hypervolume(pts) - 1e-15


class TestStatistics:
    def test_pava_worked_example(self):
        xs, ys = [1, 2, 3, 4], [1, 3, 2, 4]
        fit = isotonic_by_enumeration(ys)
        assert np.allclose(fit, [1, 2.5, 2.5, 4])
        assert np.array_equal(isotonic_fit(xs, ys), np.array([1, 2.5, 2.5, 4]))
        assert r2_iso(xs, ys) == 0.9

    def test_pava_matches_enumeration(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            ys = rng.normal(size=int(rng.integers(2, 10)))
            assert np.allclose(pava(ys), isotonic_by_enumeration(ys), atol=1e-12)

    def test_tied_xs_are_pooled(self):
        fit = isotonic_fit([1, 1, 2, 3], [3.0, 1.0, 1.5, 4.0])
        assert fit[0] == fit[1]
        # Group means (2.0 with weight 2, then 1.5) violate order and pool to
        # the plain mean of the three underlying points.
        assert np.allclose(fit, [5.5 / 3, 5.5 / 3, 5.5 / 3, 4.0])

    def test_perfect_linear(self):
        xs = np.arange(10.0)
        ys = 2 * xs + 1
        assert pearson(xs, ys) == 1.0
        assert r2_ols(xs, ys) == 1.0
        assert r2_iso(xs, ys) == 1.0

    def test_degenerate(self):
        with pytest.raises(DomainError):
            pearson([1, 2, 3], [5, 5, 5])
        with pytest.raises(DomainError):
            r2_iso([1, 2, 3], [5, 5, 5])
        with pytest.raises(DomainError):
            r2_ols([2, 2, 2], [1, 2, 3])
        with pytest.raises(PreconditionError):
            pearson([1, 2], [1, 2])

    def test_pearson_affine_invariance(self):
        rng = np.random.default_rng(3)
        xs, ys = rng.normal(size=50), rng.normal(size=50)
        r = pearson(xs, ys)
        assert abs(pearson(3 * xs + 7, ys) - r) <= 1e-12
        assert abs(pearson(xs, 0.01 * ys - 4) - r) <= 1e-12
        assert -1.0 <= r <= 1.0

    def test_ols_against_pearson_squared(self):
        rng = np.random.default_rng(4)
        xs = rng.normal(size=40)
        ys = xs + rng.normal(size=40)
        assert r2_ols(xs, ys) == pytest.approx(pearson(xs, ys) ** 2, rel=1e-12)

    def test_iso_at_least_ols(self):
        rng = np.random.default_rng(5)
        checked = 0
        for _ in range(200):
            xs = rng.uniform(0, 1, 30)
            ys = xs + rng.normal(0, 0.3, 30)
            if np.polyfit(xs, ys, 1)[0] >= 0:
                checked += 1
                assert r2_iso(xs, ys) >= r2_ols(xs, ys) - 1e-12
        assert checked >= 190

    def test_report(self):
        rep = correlation_report([1, 2, 3, 4], [1, 3, 2, 4])
        assert rep.r2_iso == 0.9 and rep.as_dict()["r2_iso"] == 0.9


class TestBandit:
    def test_oracle_reward(self):
        arms = make_bandit_arms(gen_objective(6, 0))
        res = bandit_alignment(None, None, arms, steps=50, seed=0, reward_fn=lambda f, g: g.astype(float))
        assert res.report.pearson_r == pytest.approx(1.0, abs=1e-12)
        assert res.best_arm_prob > res.initial_best_arm_prob == 0.25

    def test_zero_reward_stays_uniform(self):
        arms = make_bandit_arms(gen_objective(6, 0))
        ctx = build_context(gen_objective(6, 0), gen_objective(6, 0), 4, 1.0, seed=0)
        res = bandit_alignment(ModelParams.zeros(6), ctx, arms, steps=100, seed=1)
        assert np.max(np.abs(res.probs - 0.25)) <= 1e-6
        assert res.report is None

    def test_oracle_direction_reward_learns(self):
        obj = gen_objective(6, 0)
        arms = make_bandit_arms(obj)
        ctx = build_context(obj, obj, 8, 1.0, seed=0)
        p = ModelParams(np.zeros((6, 6)), obj.weights, np.zeros(3))
        res = bandit_alignment(p, ctx, arms, steps=200, seed=2)
        assert res.report.pearson_r > 0.5
        assert res.best_arm_prob > 0.5

    def test_arms(self):
        arms = make_bandit_arms(gen_objective(6, 0))
        assert [a.accuracy for a in arms] == list(BANDIT_ACCURACIES)
        feats, correct = arms[3].sample(np.random.default_rng(0), 20_000)
        assert abs(correct.mean() - 0.8) < 0.01
        assert feats.shape == (20_000, 6)

    def test_needs_distinct_arms(self):
        obj = gen_objective(6, 0)
        with pytest.raises(PreconditionError):
            bandit_alignment(None, None, make_bandit_arms(obj, [0.5, 0.5]), reward_fn=lambda f, g: g)
