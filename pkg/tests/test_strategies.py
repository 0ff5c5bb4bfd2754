"""Selection strategies against brute-force and naive-reimplementation oracles."""

import itertools

import numpy as np
import pytest

from divrec.diversity import InteractionSet
from divrec.relevance import minmax_normalize
from divrec.strategies import (
    clayton_copula,
    dpp_greedy_select,
    dum_objective,
    dum_select,
    explore_select,
    make_strategy,
    marginal_diversity_scores,
    mmr_select,
    topk_relevance,
    STRATEGY_NAMES,
)

from conftest import MatrixDistance, build_catalog


def random_pool(rng, n, *, id_offset=0):
    candidates = np.arange(id_offset, id_offset + n, dtype=np.int64)
    scores = rng.uniform(1, 5, n)
    m = rng.uniform(0, 1, (id_offset + n, id_offset + n))
    m = (m + m.T) / 2
    np.fill_diagonal(m, 0.0)
    return candidates, scores, MatrixDistance(m)


def jaccard_pool(rng, n, *, dim=8):
    """Pool whose distances come from actual item vectors.

    The similarity kernel 1 - d of a weighted Jaccard distance is
    positive semidefinite (it is a min-max kernel), which the
    log-determinant machinery requires; an arbitrary symmetric matrix is
    not a valid distance here.
    """
    from divrec.distance import jaccard_distance

    vecs = rng.uniform(0, 2, (n, dim)) * (rng.random((n, dim)) < 0.6)
    empty = vecs.sum(axis=1) == 0
    vecs[empty, 0] = 1.0
    m = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            m[i, j] = m[j, i] = jaccard_distance(vecs[i], vecs[j])
    return np.arange(n, dtype=np.int64), rng.uniform(1, 5, n), MatrixDistance(m)


class TestTopkRelevance:
    def test_sort(self):
        out = topk_relevance(np.asarray([0, 1, 2]), np.asarray([5.0, 3.0, 4.0]), 2)
        assert out.tolist() == [0, 2]

    def test_tie_breaks_by_lower_id(self):
        out = topk_relevance(np.asarray([4, 2]), np.asarray([4.0, 4.0]), 1)
        assert out.tolist() == [2]

    def test_k_larger_than_pool(self):
        out = topk_relevance(np.asarray([0, 1]), np.asarray([1.0, 2.0]), 10)
        assert out.tolist() == [1, 0]


def mmr_naive(candidates, scores, dist, beta, k):
    """Straightforward greedy re-implementation used as the oracle."""
    by_id = sorted(zip(candidates.tolist(), scores.tolist()))
    remaining = [c for c, _ in by_id]
    score_of = dict(by_id)
    chosen = []
    while remaining and len(chosen) < k:
        best, best_val = None, None
        for c in remaining:
            if not chosen:
                val = score_of[c]
            else:
                val = beta * score_of[c] - (1 - beta) * max(
                    1 - dist.distance(c, s) for s in chosen
                )
            if best is None or val > best_val:
                best, best_val = c, val
        chosen.append(best)
        remaining.remove(best)
    return chosen


class TestMmr:
    def test_beta_one_equals_topk(self):
        rng = np.random.default_rng(10)
        for _ in range(300):
            n = int(rng.integers(2, 25))
            candidates, scores, dist = random_pool(rng, n)
            k = int(rng.integers(1, n + 1))
            assert np.array_equal(
                mmr_select(candidates, scores, dist, 1.0, k),
                topk_relevance(candidates, scores, k),
            )

    def test_beta_zero_prefers_distinct_item(self):
        # Items 0 and 1 are identical (distance 0); 2 is far from both.
        m = np.asarray([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
        out = mmr_select(np.asarray([0, 1, 2]), np.asarray([5.0, 4.9, 1.0]), MatrixDistance(m), 0.0, 2)
        assert out.tolist() == [0, 2]

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = int(rng.integers(2, 12))
            candidates, scores, dist = random_pool(rng, n, id_offset=int(rng.integers(0, 4)))
            k = int(rng.integers(1, n + 1))
            beta = float(rng.uniform(0, 1))
            got = mmr_select(candidates, scores, dist, beta, k)
            assert got.tolist() == mmr_naive(candidates, scores, dist, beta, k)

    def test_bad_beta(self):
        with pytest.raises(ValueError):
            mmr_select(np.asarray([0]), np.asarray([1.0]), MatrixDistance(np.zeros((1, 1))), 1.5, 1)


class TestDum:
    def test_disjoint_single_categories_equal_relevance(self):
        cat = build_catalog([(0, i, 3.0) for i in range(4)], [[0], [1], [2], [3]], 4)
        out = dum_select(np.arange(4), np.full(4, 2.0), cat, 4)
        assert out.tolist() == [0, 1, 2, 3]  # tie rule: ascending id
        covered = set()
        for i in out:
            covered.update(cat.item_categories[i].tolist())
        assert len(covered) == 4

    def test_wide_item_dominates(self):
        cat = build_catalog([(0, 0, 3.0), (0, 1, 3.0)], [[0], [1, 2, 3]], 4)
        out = dum_select(np.arange(2), np.asarray([2.0, 2.0]), cat, 2)
        assert out.tolist() == [1, 0]

    def test_exhausted_coverage_degenerates_to_relevance(self):
        cat = build_catalog([(0, i, 3.0) for i in range(4)], [[0]] * 4, 1)
        scores = np.asarray([1.0, 4.0, 2.0, 3.0])
        out = dum_select(np.arange(4), scores, cat, 4)
        assert out.tolist() == [1, 3, 2, 0]

    def test_greedy_close_to_permutation_optimum(self):
        # Short slates over mostly-single-category items: the regime where the
        # greedy surrogate is reliable. Mismatches are counted, not hidden.
        rng = np.random.default_rng(12)
        matches = 0
        total = 80
        for _ in range(total):
            n = int(rng.integers(4, 8))
            k = int(rng.integers(2, min(n, 3) + 1))
            n_cats = int(rng.integers(6, 15))
            cats = [
                sorted(rng.choice(n_cats, size=2 if rng.random() < 0.3 else 1,
                                  replace=False).tolist())
                for _ in range(n)
            ]
            cat = build_catalog([(0, i, 3.0) for i in range(n)], cats, n_cats)
            scores = rng.uniform(1, 5, n)
            score_of = {i: float(scores[i]) for i in range(n)}
            got = dum_select(np.arange(n), scores, cat, k)
            got_val = dum_objective(got, score_of, cat)
            best_val = max(
                dum_objective(np.asarray(perm), score_of, cat)
                for perm in itertools.permutations(range(n), k)
            )
            assert got_val <= best_val + 1e-9
            matches += got_val >= best_val - 1e-9
        assert matches / total >= 0.95


def dpp_kernel(dist, candidates, ridge=1e-6):
    k = 1.0 - dist.distance_block(candidates, candidates)
    np.fill_diagonal(k, 1.0 + ridge)
    return k


class TestDpp:
    def test_increments_match_naive_determinants(self):
        rng = np.random.default_rng(13)
        for _ in range(40):
            n = int(rng.integers(3, 13))
            candidates, scores, dist = jaccard_pool(rng, n)
            k = int(rng.integers(2, n + 1))
            order = dpp_greedy_select(candidates, scores, dist, k)
            kernel = dpp_kernel(dist, candidates)
            pos_of = {int(c): p for p, c in enumerate(candidates)}
            chosen: list[int] = []
            for step, item in enumerate(order.tolist()):
                if step == 0:
                    chosen.append(pos_of[item])
                    continue
                gains = {}
                for c in candidates.tolist():
                    if pos_of[c] in chosen:
                        continue
                    sub_new = kernel[np.ix_(chosen + [pos_of[c]], chosen + [pos_of[c]])]
                    sub_old = kernel[np.ix_(chosen, chosen)]
                    gains[c] = np.linalg.slogdet(sub_new)[1] - np.linalg.slogdet(sub_old)[1]
                best_gain = max(gains.values())
                best_item = min(c for c, g in gains.items() if g >= best_gain - 1e-8)
                assert gains[item] == pytest.approx(best_gain, abs=1e-8)
                assert item == best_item
                chosen.append(pos_of[item])

    def test_pair_matches_bruteforce_two_subsets(self):
        rng = np.random.default_rng(14)
        for _ in range(50):
            candidates, scores, dist = jaccard_pool(rng, 3)
            out = dpp_greedy_select(candidates, scores, dist, 2)
            kernel = dpp_kernel(dist, candidates)
            first = int(np.argmax(scores))
            # Greedy fixes the most relevant item, then takes the best partner.
            best_partner = max(
                (np.linalg.det(kernel[np.ix_([first, j], [first, j])]), -j)
                for j in range(3) if j != first
            )
            assert out[0] == candidates[first]
            assert out[1] == candidates[-best_partner[1]]

    def test_identical_items_never_both_selected(self):
        from divrec.distance import jaccard_distance

        vecs = np.asarray([[1, 1, 0, 0], [1, 1, 0, 0], [1, 0, 1, 0], [0, 0, 1, 1]], dtype=float)
        m = np.zeros((4, 4))
        for i in range(4):
            for j in range(i + 1, 4):
                m[i, j] = m[j, i] = jaccard_distance(vecs[i], vecs[j])
        assert m[0, 1] == 0.0  # items 0 and 1 are duplicates
        out = dpp_greedy_select(np.arange(4), np.asarray([5.0, 4.9, 1.0, 1.0]), MatrixDistance(m), 3)
        assert not {0, 1} <= set(out.tolist())

    def test_identity_similarity_falls_to_id_order(self):
        m = np.ones((5, 5))
        np.fill_diagonal(m, 0.0)
        out = dpp_greedy_select(np.arange(5), np.asarray([1.0, 1.0, 5.0, 1.0, 1.0]), MatrixDistance(m), 4)
        assert out.tolist() == [2, 0, 1, 3]  # relevance first, then ascending ids


class TestClaytonCopula:
    def test_boundary_one_one(self):
        for alpha in (0.0001, 0.5, 1, 2, 4):
            assert clayton_copula(1.0, 1.0, alpha) == pytest.approx(1.0, abs=1e-9)

    def test_annihilation_near_zero(self):
        for alpha in (0.5, 1, 2):
            assert clayton_copula(0.0, 0.7, alpha) < 1e-4
            assert clayton_copula(0.7, 0.0, alpha) < 1e-4

    def test_point_value(self):
        assert clayton_copula(0.25, 0.25, 1.0) == pytest.approx(1 / 7, abs=1e-12)

    def test_hand_pair_ordering(self):
        z1 = clayton_copula(1.0, 0.2, 0.5)
        z2 = clayton_copula(0.9, 0.9, 0.5)
        assert z1 == pytest.approx(0.2, abs=1e-9)
        assert z2 == pytest.approx(0.8142830252842713, abs=1e-9)
        assert z2 > z1

    def test_coordinatewise_monotone_on_grid(self):
        grid = np.linspace(0.0, 1.0, 50)
        for alpha in (0.0001, 0.5, 1, 2, 4):
            z = clayton_copula(grid[:, None], grid[None, :], alpha)
            assert np.all(np.diff(z, axis=0) >= -1e-12)
            assert np.all(np.diff(z, axis=1) >= -1e-12)
            assert z.min() >= 0.0 and z.max() <= 1.0 + 1e-12

    def test_alpha_must_be_positive(self):
        with pytest.raises(ValueError):
            clayton_copula(0.5, 0.5, 0.0)


def explore_naive(candidates, scores, picked, kind, alpha, k, dist=None, catalog=None):
    """Scalar re-implementation of the copula selection, used as the oracle."""
    from divrec.diversity import marginal_diversity

    by_id = np.argsort(candidates)
    candidates = candidates[by_id]
    scores = scores[by_id]
    gains = []
    anchor = None
    if kind == "D" and len(picked) == 0:
        anchor = int(candidates[int(np.argmax(scores))])
    for c in candidates.tolist():
        if kind == "D":
            gains.append(marginal_diversity(c, picked, "D", dist, anchor=anchor))
        else:
            gains.append(
                marginal_diversity(c, picked, "C", categories=catalog.item_categories[c])
            )
    r_hat = minmax_normalize(scores)
    t_hat = minmax_normalize(np.asarray(gains))
    z = np.asarray([clayton_copula(float(r), float(t), alpha) for r, t in zip(r_hat, t_hat)])
    order = np.argsort(-z, kind="stable")
    return candidates[order[:k]].tolist()


class TestExploreSelect:
    def test_matches_naive_distance_kind(self):
        rng = np.random.default_rng(15)
        for _ in range(50):
            n = int(rng.integers(3, 15))
            candidates, scores, dist = random_pool(rng, n)
            picked = InteractionSet(1)
            n_picked = int(rng.integers(0, 3))
            extra_ids = np.arange(n, n + n_picked)
            m = rng.uniform(0, 1, (n + n_picked, n + n_picked))
            m = (m + m.T) / 2
            np.fill_diagonal(m, 0.0)
            dist = MatrixDistance(m)
            for e in extra_ids:
                picked.add(int(e), dist)
            k = int(rng.integers(1, n + 1))
            alpha = float(rng.choice([0.2, 0.5, 1.0, 2.0]))
            got = explore_select(candidates, scores, picked, "D", alpha, k, dist=dist)
            assert got.tolist() == explore_naive(candidates, scores, picked, "D", alpha, k, dist=dist)

    def test_matches_naive_coverage_kind(self, clustered_catalog):
        rng = np.random.default_rng(16)
        dist = MatrixDistance(np.zeros((clustered_catalog.n_items, clustered_catalog.n_items)))
        for _ in range(30):
            n = int(rng.integers(3, 20))
            candidates = rng.choice(clustered_catalog.n_items, size=n, replace=False).astype(np.int64)
            scores = rng.uniform(1, 5, n)
            picked = InteractionSet(clustered_catalog.n_categories)
            for e in rng.choice(
                [i for i in range(clustered_catalog.n_items) if i not in candidates],
                size=int(rng.integers(0, 3)), replace=False,
            ):
                picked.add(int(e), dist, categories=clustered_catalog.item_categories[int(e)])
            k = int(rng.integers(1, n + 1))
            got = explore_select(
                candidates, scores, picked, "C", 0.5, k, catalog=clustered_catalog
            )
            assert got.tolist() == explore_naive(
                candidates, scores, picked, "C", 0.5, k, catalog=clustered_catalog
            )

    def test_all_covered_falls_back_to_relevance_ranking(self):
        cat = build_catalog([(0, i, 3.0) for i in range(6)], [[0], [1], [0], [1], [0], [1]], 2)
        dist = MatrixDistance(np.zeros((6, 6)))
        picked = InteractionSet(2)
        picked.add(0, dist, categories=cat.item_categories[0])
        picked.add(1, dist, categories=cat.item_categories[1])
        candidates = np.asarray([2, 3, 4, 5])
        scores = np.asarray([2.0, 5.0, 3.0, 4.0])
        got = explore_select(candidates, scores, picked, "C", 0.5, 4, catalog=cat)
        assert got.tolist() == topk_relevance(candidates, scores, 4).tolist()

    def test_positive_affine_transform_keeps_selection(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            n = int(rng.integers(4, 15))
            candidates, scores, dist = random_pool(rng, n)
            picked = InteractionSet(1)
            k = int(rng.integers(1, n + 1))
            base = explore_select(candidates, scores, picked, "D", 0.5, k, dist=dist)
            a, b = float(rng.uniform(0.1, 3)), float(rng.uniform(-2, 2))
            again = explore_select(candidates, a * scores + b, picked, "D", 0.5, k, dist=dist)
            assert np.array_equal(base, again)

    def test_empty_pool_rejected(self):
        with pytest.raises(ValueError):
            explore_select(np.zeros(0, dtype=np.int64), np.zeros(0), InteractionSet(1), "D", 0.5, 3,
                           dist=MatrixDistance(np.zeros((1, 1))))

    def test_bootstrap_anchor_is_most_relevant(self):
        # Anchor = argmax score; its own gain is 0, so with use_relevance off
        # the far item wins and the anchor ranks by distance.
        m = np.asarray([[0.0, 0.1, 0.9], [0.1, 0.0, 0.5], [0.9, 0.5, 0.0]])
        candidates = np.asarray([0, 1, 2])
        scores = np.asarray([5.0, 1.0, 1.0])
        picked = InteractionSet(1)
        got = explore_select(candidates, scores, picked, "D", 0.5, 3,
                             dist=MatrixDistance(m), use_relevance=False)
        assert got.tolist() == [2, 1, 0]


class TestStrategyObjects:
    @pytest.mark.parametrize("name", STRATEGY_NAMES)
    def test_contract(self, name, clustered_catalog):
        from divrec.distance import DistanceModel

        dist = DistanceModel(clustered_catalog, "categories")
        strategy = make_strategy(name, None, catalog=clustered_catalog, dist=dist, k=7)
        rng = np.random.default_rng(18)
        picked = InteractionSet(clustered_catalog.n_categories)
        candidates = np.sort(
            rng.choice(clustered_catalog.n_items, size=20, replace=False).astype(np.int64)
        )
        scores = rng.uniform(1, 5, 20)
        out = strategy.next_list(0, candidates, scores, picked)
        assert len(out) == 7
        assert len(set(out.tolist())) == 7
        assert set(out.tolist()) <= set(candidates.tolist())
        # Short pool: returns everything.
        out2 = strategy.next_list(0, candidates[:3], scores[:3], picked)
        assert len(out2) == 3

    def test_unknown_name(self, clustered_catalog):
        from divrec.distance import DistanceModel

        dist = DistanceModel(clustered_catalog, "categories")
        with pytest.raises(ValueError, match="unknown strategy"):
            make_strategy("mystery", None, catalog=clustered_catalog, dist=dist, k=5)
