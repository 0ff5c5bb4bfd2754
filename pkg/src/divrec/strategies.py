"""Recommendation strategies: relevance, MMR, DUM, greedy DPP, and the copula combiner.

Every strategy returns an ordered list of min(k, |pool|) distinct
candidate items. Ties break by ascending internal item id everywhere, so
runs are reproducible across platforms.

The copula strategies score each candidate by its relevance and its
marginal diversity against the user's interaction set, min-max normalize
both over the candidate pool, and fuse them with the Clayton copula

    Z = (r^-alpha + t^-alpha - 1)^(-1/alpha),

which rewards items that are good on both axes and collapses toward zero
as soon as either input does.
"""

from __future__ import annotations

import numpy as np

from divrec.catalog import Catalog
from divrec.distance import DistanceModel
from divrec.diversity import InteractionSet
from divrec.relevance import minmax_normalize

COPULA_EPS = 1e-9
DUM_GAIN_FLOOR = 1e-12
DPP_RIDGE = 1e-6
_PSD_EPS = 1e-12


def _by_id(candidates: np.ndarray, *aligned: np.ndarray):
    """Sort the pool ascending by item id so first-argmax picks the lowest id on ties."""
    candidates = np.asarray(candidates, dtype=np.int64)
    order = np.argsort(candidates, kind="stable")
    return (candidates[order], *(np.asarray(a)[order] for a in aligned))


def _top_k(candidates: np.ndarray, keys: np.ndarray, k: int) -> np.ndarray:
    """Top k by descending key; stable sort over an id-ascending pool breaks ties by id."""
    order = np.argsort(-keys, kind="stable")
    return candidates[order[: min(k, len(candidates))]]


def topk_relevance(candidates: np.ndarray, scores: np.ndarray, k: int) -> np.ndarray:
    candidates, scores = _by_id(candidates, scores)
    return _top_k(candidates, scores, k)


def mmr_select(
    candidates: np.ndarray, scores: np.ndarray, dist: DistanceModel, beta: float, k: int
) -> np.ndarray:
    """Greedy maximal marginal relevance with similarity 1 - d(i, j).

    Each pick maximizes beta * R(i) - (1 - beta) * max_{j in L} sim(i, j);
    the first pick is the most relevant candidate.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must be in [0, 1]")
    candidates, scores = _by_id(candidates, scores)
    n = len(candidates)
    k = min(k, n)
    if k == 0:
        return candidates[:0]
    chosen = np.empty(k, dtype=np.int64)
    taken = np.zeros(n, dtype=bool)
    pos = int(np.argmax(scores))
    chosen[0] = candidates[pos]
    taken[pos] = True
    max_sim = np.full(n, -np.inf)
    for step in range(1, k):
        sim_col = 1.0 - dist.distances_to(int(candidates[pos]), candidates)
        max_sim = np.maximum(max_sim, sim_col)
        mmr = beta * scores - (1.0 - beta) * max_sim
        mmr[taken] = -np.inf
        pos = int(np.argmax(mmr))
        chosen[step] = candidates[pos]
        taken[pos] = True
    return chosen


def dum_select(candidates: np.ndarray, scores: np.ndarray, catalog: Catalog, k: int) -> np.ndarray:
    """Greedy diversity-weighted utility: pick argmax (new categories) * relevance.

    Items adding no new category fall back to a tiny gain floor so they
    still rank by relevance once coverage is exhausted.
    """
    candidates, scores = _by_id(candidates, scores)
    n = len(candidates)
    k = min(k, n)
    if k == 0:
        return candidates[:0]
    incidence = catalog.category_matrix()[candidates]
    uncovered = np.ones(incidence.shape[1], dtype=np.float64)
    chosen = np.empty(k, dtype=np.int64)
    taken = np.zeros(n, dtype=bool)
    for step in range(k):
        gains = incidence @ uncovered
        weighted = np.where(gains > 0.0, gains, DUM_GAIN_FLOOR) * scores
        weighted[taken] = -np.inf
        pos = int(np.argmax(weighted))
        chosen[step] = candidates[pos]
        taken[pos] = True
        uncovered = np.where(incidence[pos] > 0.0, 0.0, uncovered)
    return chosen


def dum_objective(order: np.ndarray, scores_by_item: dict[int, float], catalog: Catalog) -> float:
    """Value of an ordered list under the coverage-gain-times-relevance objective."""
    covered: set[int] = set()
    total = 0.0
    for item in order:
        cats = set(int(c) for c in catalog.item_categories[int(item)])
        gain = len(cats - covered)
        total += gain * scores_by_item[int(item)]
        covered |= cats
    return total


def dpp_greedy_select(
    candidates: np.ndarray,
    scores: np.ndarray,
    dist: DistanceModel,
    k: int,
    *,
    ridge: float = DPP_RIDGE,
    counters: dict | None = None,
) -> np.ndarray:
    """Greedy log-det maximization over the similarity kernel 1 - d(i, j).

    Maintains the Cholesky residual per candidate, so each pick adds the
    one with the largest conditional variance (equal to the determinant
    ratio). All first picks tie at the ridged diagonal, so relevance
    breaks that degeneracy. Candidates whose conditional variance falls
    to zero (exact duplicates of the selection) are skipped and counted;
    if nothing selectable remains, the list is completed by relevance so
    the length contract holds.
    """
    candidates, scores = _by_id(candidates, scores)
    n = len(candidates)
    k = min(k, n)
    if k == 0:
        return candidates[:0]
    chosen = np.empty(k, dtype=np.int64)
    taken = np.zeros(n, dtype=bool)
    di2 = np.full(n, 1.0 + ridge)
    cis = np.zeros((k, n))
    pos = int(np.argmax(scores))
    chosen[0] = candidates[pos]
    taken[pos] = True
    for step in range(1, k):
        m = step - 1
        col = 1.0 - dist.distances_to(int(candidates[pos]), candidates)
        col[pos] = 1.0 + ridge
        d_opt = np.sqrt(di2[pos])
        eis = (col - cis[:m].T @ cis[:m, pos]) / d_opt
        cis[m] = eis
        di2 = di2 - eis * eis
        di2[taken] = -np.inf
        pos = int(np.argmax(di2))
        if di2[pos] <= _PSD_EPS:
            degenerate = ~taken & np.isfinite(di2)
            n_skipped = int(degenerate.sum())
            if counters is not None and n_skipped:
                counters["dpp_skipped_candidates"] = (
                    counters.get("dpp_skipped_candidates", 0) + n_skipped
                )
            fill = np.where(taken, -np.inf, scores)
            for extra in range(step, k):
                pos = int(np.argmax(fill))
                chosen[extra] = candidates[pos]
                taken[pos] = True
                fill[pos] = -np.inf
            return chosen
        chosen[step] = candidates[pos]
        taken[pos] = True
    return chosen


def clayton_copula(r_hat, t_hat, alpha: float):
    """Clayton copula on [0, 1]^2, inputs clamped to [1e-9, 1].

    The formula is singular at zero (negative powers); clamping realizes
    the limit Z -> 0 continuously, preserving the both-or-nothing
    semantics without non-finite arithmetic.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    u = np.clip(np.asarray(r_hat, dtype=np.float64), COPULA_EPS, 1.0)
    v = np.clip(np.asarray(t_hat, dtype=np.float64), COPULA_EPS, 1.0)
    z = (u**-alpha + v**-alpha - 1.0) ** (-1.0 / alpha)
    if np.isscalar(r_hat) and np.isscalar(t_hat):
        return float(z)
    return z


def marginal_diversity_scores(
    candidates: np.ndarray,
    scores: np.ndarray,
    picked: InteractionSet,
    kind: str,
    *,
    dist: DistanceModel | None = None,
    catalog: Catalog | None = None,
) -> np.ndarray:
    """Vector of per-candidate diversity gains against the interaction set.

    Distance kind on an empty set anchors on the most relevant candidate
    and scores each item by its distance to that anchor. Coverage kind on
    an empty set is the item's own coverage share, the same formula as
    the incremental gain with nothing covered yet.
    """
    kind = kind.upper()
    if kind == "D":
        if dist is None:
            raise ValueError("distance marginal scores need a distance model")
        if len(picked) == 0:
            anchor = int(candidates[int(np.argmax(scores))])
            return dist.distances_to(anchor, candidates)
        members = np.asarray(picked.items, dtype=np.int64)
        sums = dist.distance_block(members, candidates).sum(axis=0)
        t = len(picked)
        return (picked.pair_sum + 2.0 * sums) / t - picked.div_d()
    if kind == "C":
        if catalog is None:
            raise ValueError("coverage marginal scores need the catalog")
        if catalog.n_categories < 1:
            raise ValueError("coverage marginal scores need a catalog with categories")
        uncovered = np.ones(catalog.n_categories, dtype=np.float64)
        if picked.covered:
            uncovered[sorted(picked.covered)] = 0.0
        return (catalog.category_matrix()[candidates] @ uncovered) / catalog.n_categories
    raise ValueError(f"kind must be 'D' or 'C', got {kind!r}")


def explore_select(
    candidates: np.ndarray,
    scores: np.ndarray,
    picked: InteractionSet,
    kind: str,
    alpha: float,
    k: int,
    *,
    dist: DistanceModel | None = None,
    catalog: Catalog | None = None,
    use_relevance: bool = True,
) -> np.ndarray:
    """Top-k candidates by copula-combined normalized relevance and diversity gain.

    With ``use_relevance`` off the copula is bypassed and items rank by
    raw diversity gain alone (the ablation variant).
    """
    if len(candidates) == 0:
        raise ValueError("candidate pool is empty")
    candidates, scores = _by_id(candidates, scores)
    gains = marginal_diversity_scores(candidates, scores, picked, kind, dist=dist, catalog=catalog)
    if not use_relevance:
        return _top_k(candidates, gains, k)
    z = clayton_copula(minmax_normalize(scores), minmax_normalize(gains), alpha)
    return _top_k(candidates, z, k)


# -- strategy objects ------------------------------------------------------


class Strategy:
    """Selection policy bound to the shared models; stateless across calls."""

    name = "strategy"

    def __init__(self, *, catalog: Catalog, dist: DistanceModel, k: int):
        self.catalog = catalog
        self.dist = dist
        self.k = k
        self.counters: dict[str, int] = {}

    def next_list(
        self, user: int, candidates: np.ndarray, scores: np.ndarray, picked: InteractionSet
    ) -> np.ndarray:
        raise NotImplementedError


class RelevanceStrategy(Strategy):
    name = "relevance"

    def next_list(self, user, candidates, scores, picked):
        return topk_relevance(candidates, scores, self.k)


class MmrStrategy(Strategy):
    name = "mmr"

    def __init__(self, beta: float = 0.5, **kwargs):
        super().__init__(**kwargs)
        self.beta = beta

    def next_list(self, user, candidates, scores, picked):
        return mmr_select(candidates, scores, self.dist, self.beta, self.k)


class DumStrategy(Strategy):
    name = "dum"

    def next_list(self, user, candidates, scores, picked):
        return dum_select(candidates, scores, self.catalog, self.k)


class DppStrategy(Strategy):
    name = "dpp"

    def __init__(self, ridge: float = DPP_RIDGE, **kwargs):
        super().__init__(**kwargs)
        self.ridge = ridge

    def next_list(self, user, candidates, scores, picked):
        return dpp_greedy_select(
            candidates, scores, self.dist, self.k, ridge=self.ridge, counters=self.counters
        )


class ExploreStrategy(Strategy):
    """Copula fusion of relevance and marginal diversity (distance or coverage)."""

    def __init__(self, kind: str, alpha: float = 0.5, use_relevance: bool = True, **kwargs):
        super().__init__(**kwargs)
        kind = kind.upper()
        if kind not in ("D", "C"):
            raise ValueError("kind must be 'D' or 'C'")
        if kind == "C" and self.catalog.n_categories < 1:
            raise ValueError("explore_c requires a catalog with categories")
        self.kind = kind
        self.alpha = alpha
        self.use_relevance = use_relevance
        self.name = f"explore_{kind.lower()}"

    def next_list(self, user, candidates, scores, picked):
        return explore_select(
            candidates,
            scores,
            picked,
            self.kind,
            self.alpha,
            self.k,
            dist=self.dist,
            catalog=self.catalog,
            use_relevance=self.use_relevance,
        )


STRATEGY_NAMES = ("relevance", "mmr", "dum", "dpp", "explore_d", "explore_c")


def make_strategy(
    name: str, params: dict | None, *, catalog: Catalog, dist: DistanceModel, k: int
) -> Strategy:
    """Instantiate a strategy by its config name."""
    params = dict(params or {})
    common = dict(catalog=catalog, dist=dist, k=k)
    if name == "relevance":
        return RelevanceStrategy(**common)
    if name == "mmr":
        return MmrStrategy(beta=params.pop("beta", 0.5), **common)
    if name == "dum":
        return DumStrategy(**common)
    if name == "dpp":
        return DppStrategy(ridge=params.pop("ridge", DPP_RIDGE), **common)
    if name in ("explore_d", "explore_c"):
        return ExploreStrategy(
            kind=name[-1],
            alpha=params.pop("alpha", 0.5),
            use_relevance=params.pop("use_relevance", True),
            **common,
        )
    raise ValueError(f"unknown strategy {name!r}; known: {', '.join(STRATEGY_NAMES)}")
