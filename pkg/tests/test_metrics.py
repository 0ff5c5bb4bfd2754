"""Accuracy@k, diversity ceilings, and the ANOVA implementation."""

import numpy as np
import pytest
from scipy import stats

from divrec.metrics import (
    accuracy_at_k,
    anova_oneway,
    delta_from_max,
    greedy_max_coverage_curve,
    max_scores,
)
from divrec.user_model import UserModelParams, expected_steps, lambda_for_weibull_mean, solve_lambda

from conftest import build_catalog


class TestAccuracyAtK:
    def test_definitional_case(self):
        hr, p, r = accuracy_at_k(["a", "b", "c"], {"b"}, 3)
        assert (hr, p, r) == (1.0, pytest.approx(1 / 3), 1.0)

    def test_no_overlap(self):
        assert accuracy_at_k([1, 2, 3], {9}, 3) == (0.0, 0.0, 0.0)

    def test_all_test_items_found(self):
        hr, p, r = accuracy_at_k(list(range(10)), {2, 7}, 10)
        assert (hr, p, r) == (1.0, pytest.approx(0.2), 1.0)

    def test_short_list_uses_actual_length(self):
        hr, p, r = accuracy_at_k([1, 2], {1}, 10)
        assert p == pytest.approx(0.5)

    def test_hits_consistency(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            universe = np.arange(50)
            lst = rng.choice(universe, size=10, replace=False).tolist()
            test = set(rng.choice(universe, size=int(rng.integers(1, 8)), replace=False).tolist())
            hr, p, r = accuracy_at_k(lst, test, 10)
            hits_from_p = p * 10
            hits_from_r = r * len(test)
            assert hits_from_p == pytest.approx(hits_from_r, abs=1e-9)
            assert hr == (1.0 if hits_from_p > 0 else 0.0)

    def test_empty_test_rejected(self):
        with pytest.raises(ValueError):
            accuracy_at_k([1], set(), 5)


class TestGreedyCoverageCurve:
    def test_forced_single_category(self):
        cat = build_catalog([(0, i, 3.0) for i in range(3)], [[0], [0], [0]], 1)
        curve = greedy_max_coverage_curve(cat)
        assert curve.tolist() == [1.0]

    def test_greedy_extends_until_plateau(self):
        cat = build_catalog([(0, i, 3.0) for i in range(4)], [[0, 1], [2], [0], [3]], 4)
        curve = greedy_max_coverage_curve(cat)
        assert curve.tolist() == [0.5, 0.75, 1.0]


class TestMaxScores:
    def test_distance_ceiling_equals_series(self):
        cat = build_catalog([(0, i, 3.0) for i in range(5)], [[0], [1], [0], [1], [0]], 2)
        for gamma, target in [(1.0, 5.0), (2.0, 5.0), (2.0, 10.0)]:
            lam, achieved = solve_lambda(target, gamma, tol=1e-10)
            params = UserModelParams(lam=lam, gamma=gamma)
            d_bar, _ = max_scores(cat, params)
            assert d_bar == pytest.approx(expected_steps(params), abs=1e-6)

    def test_single_category_coverage_saturates(self):
        cat = build_catalog([(0, i, 3.0) for i in range(5)], [[0]] * 5, 1)
        lam, _ = solve_lambda(5.0, 2.0, tol=1e-9)
        _, c_bar = max_scores(cat, UserModelParams(lam=lam, gamma=2.0))
        # One pick covers everything; the only shortfall is the chance of
        # quitting before consuming anything (1 - q).
        assert c_bar == pytest.approx(UserModelParams(lam=lam, gamma=2.0).q, abs=1e-9)

    def test_coverage_ceiling_below_one(self):
        cat = build_catalog([(0, i, 3.0) for i in range(4)], [[0], [1], [2], [3]], 4)
        lam, _ = solve_lambda(2.0, 2.0, tol=1e-9)
        d_bar, c_bar = max_scores(cat, UserModelParams(lam=lam, gamma=2.0))
        assert 0.0 < c_bar < 1.0

    def test_weibull_mean_calibration_reference_point(self):
        # Continuous-mean calibration leaves the series about half a step
        # short of the target; the ceiling identity still holds exactly.
        cat = build_catalog([(0, 0, 3.0)], [[0]], 1)
        lam = lambda_for_weibull_mean(5.0, 2.0)
        params = UserModelParams(lam=lam, gamma=2.0)
        d_bar, _ = max_scores(cat, params)
        assert d_bar == pytest.approx(expected_steps(params), abs=1e-6)
        assert d_bar == pytest.approx(4.5, abs=0.01)


class TestAnova:
    def test_identical_groups_with_variance(self):
        res = anova_oneway([(1, 2, 3), (1, 2, 3)])
        assert res.f == 0.0
        assert res.p == pytest.approx(1.0)

    def test_perfect_separation(self):
        res = anova_oneway([(0, 0, 0, 0), (1, 1, 1, 1)])
        assert res.f == float("inf")
        assert res.p == 0.0

    def test_textbook_fixture(self):
        # Hand ANOVA table: group means 5, 9, 10; grand mean 8;
        # SSB = 6*(9+1+4) = 84, df1 = 2; SSW = 16+24+28 = 68, df2 = 15;
        # F = 42 / (68/15) = 9.2647.
        res = anova_oneway([(6, 8, 4, 5, 3, 4), (8, 12, 9, 11, 6, 8), (13, 9, 11, 8, 7, 12)])
        assert res.f == pytest.approx(9.264705882, abs=1e-8)
        assert res.p == pytest.approx(0.0024, abs=2e-4)

    def test_matches_scipy_on_random_groups(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            groups = [rng.normal(rng.uniform(-1, 1), 1.0, size=int(rng.integers(3, 12)))
                      for _ in range(int(rng.integers(2, 5)))]
            res = anova_oneway(groups)
            ref = stats.f_oneway(*groups)
            assert res.f == pytest.approx(ref.statistic, rel=1e-10)
            assert res.p == pytest.approx(ref.pvalue, abs=1e-10)

    def test_flagged_identical_constant_groups(self):
        res = anova_oneway([(5, 5, 5), (5, 5, 5)])
        assert np.isnan(res.f)
        assert res.note == "identical groups"

    def test_shift_invariance_and_scale_invariance(self):
        rng = np.random.default_rng(9)
        groups = [rng.normal(0, 1, 10), rng.normal(0.5, 1, 10), rng.normal(1, 1, 10)]
        base = anova_oneway(groups)
        shifted = anova_oneway([g + 7.5 for g in groups])
        scaled = anova_oneway([g * 3.25 for g in groups])
        assert base.f == pytest.approx(shifted.f, rel=1e-9)
        assert base.f == pytest.approx(scaled.f, rel=1e-9)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            anova_oneway([(1, 2)])
        with pytest.raises(ValueError):
            anova_oneway([(1, 2), (1,)])


class TestDelta:
    def test_zero_when_optimal(self):
        assert delta_from_max(5.0, 5.0) == 0.0

    def test_half_when_half(self):
        assert delta_from_max(10.0, 5.0) == pytest.approx(0.5)
