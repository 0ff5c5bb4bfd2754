"""Item-item weighted Jaccard distance with basis selection and a hot-pair cache.

The distance between two item vectors z_i, z_j is

    d(i, j) = 1 - sum_w min(z_iw, z_jw) / sum_w max(z_iw, z_jw)

where the vectors live either over users (rater incidence, binary by
default) or over categories. The basis can be chosen automatically as
the one with the lower sampled mean pairwise distance, which keeps large
distance values from washing out the distance-based diversity signal.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import sparse

from divrec.catalog import Catalog

log = logging.getLogger(__name__)

USERS = "users"
CATEGORIES = "categories"


class UndefinedDistanceError(ValueError):
    """Both vectors are all-zero; the Jaccard ratio is 0/0."""


def jaccard_distance(z_i: np.ndarray, z_j: np.ndarray) -> float:
    """Weighted Jaccard distance between two dense non-negative vectors.

    Reference implementation: the model's cached and vectorized paths
    must agree with this function exactly.
    """
    z_i = np.asarray(z_i, dtype=np.float64)
    z_j = np.asarray(z_j, dtype=np.float64)
    if z_i.shape != z_j.shape:
        raise ValueError(f"vector dimensions differ: {z_i.shape} vs {z_j.shape}")
    denom = np.maximum(z_i, z_j).sum()
    if denom == 0.0:
        raise UndefinedDistanceError("both vectors are all-zero")
    return float(1.0 - np.minimum(z_i, z_j).sum() / denom)


class DistanceModel:
    """Distances between catalog items under a fixed basis, with an optional cache.

    The cache holds precomputed pairs among the most-rated items; it is
    populated once before simulation starts and never changes a returned
    value (transparency is asserted by the tests). ``zero_pair_count``
    records how often the all-zero fallback distance of 1.0 was served.
    """

    def __init__(self, catalog: Catalog, basis: str, *, rating_weighted: bool = False):
        if basis not in (USERS, CATEGORIES):
            raise ValueError(f"basis must be '{USERS}' or '{CATEGORIES}', got {basis!r}")
        self.catalog = catalog
        self.basis = basis
        self.rating_weighted = rating_weighted
        self.cache: dict[tuple[int, int], float] = {}
        self.cache_hits = 0
        self.cache_misses = 0
        self.zero_pair_count = 0
        self.mean_distance: float = float("nan")

        n = catalog.n_items
        if basis == CATEGORIES:
            self._dense = catalog.category_matrix()
            self._csr = None
            self._row_sums = self._dense.sum(axis=1)
            self._binary = True
        else:
            rows, cols, vals = [], [], []
            for u, per_user in enumerate(catalog.ratings):
                for i, r in per_user.items():
                    rows.append(i)
                    cols.append(u)
                    vals.append(r if rating_weighted else 1.0)
            self._csr = sparse.csr_matrix(
                (vals, (rows, cols)), shape=(n, catalog.n_users), dtype=np.float64
            )
            self._dense = None
            self._row_sums = np.asarray(self._csr.sum(axis=1)).ravel()
            self._binary = not rating_weighted

    @property
    def n_items(self) -> int:
        return self.catalog.n_items

    def vector(self, item: int) -> np.ndarray:
        if self._dense is not None:
            return self._dense[item].copy()
        return np.asarray(self._csr[item].todense()).ravel()

    # -- intersection/union sums ------------------------------------------

    def _sums_to(self, i: int, items: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self._dense is not None:
            zi = self._dense[i]
            block = self._dense[items]
            inter = np.minimum(zi, block).sum(axis=1)
        elif self._binary:
            inter = np.asarray((self._csr[items] @ self._csr[i].T).todense()).ravel()
        else:
            zi = np.asarray(self._csr[i].todense()).ravel()
            block = np.asarray(self._csr[items].todense())
            inter = np.minimum(zi, block).sum(axis=1)
        union = self._row_sums[items] + self._row_sums[i] - inter
        return inter, union

    def _sums_elementwise(self, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self._dense is not None:
            inter = np.minimum(self._dense[a], self._dense[b]).sum(axis=1)
        elif self._binary:
            inter = np.asarray(self._csr[a].multiply(self._csr[b]).sum(axis=1)).ravel()
        else:
            inter = np.empty(len(a), dtype=np.float64)
            chunk = 1024
            for lo in range(0, len(a), chunk):
                hi = lo + chunk
                da = np.asarray(self._csr[a[lo:hi]].todense())
                db = np.asarray(self._csr[b[lo:hi]].todense())
                inter[lo:hi] = np.minimum(da, db).sum(axis=1)
        union = self._row_sums[a] + self._row_sums[b] - inter
        return inter, union

    def _finish(self, inter: np.ndarray, union: np.ndarray) -> np.ndarray:
        inter = np.atleast_1d(np.asarray(inter, dtype=np.float64))
        union = np.atleast_1d(np.asarray(union, dtype=np.float64))
        zero = union == 0.0
        n_zero = int(zero.sum())
        if n_zero:
            self.zero_pair_count += n_zero
            union = np.where(zero, 1.0, union)
            inter = np.where(zero, 0.0, inter)  # forces d = 1 for undefined pairs
        return 1.0 - inter / union

    # -- public distance paths ---------------------------------------------

    def distance(self, i: int, j: int) -> float:
        """Cache-aware scalar distance; all-zero pairs fall back to 1.0 with a warning count."""
        key = (i, j) if i <= j else (j, i)
        hit = self.cache.get(key)
        if hit is not None:
            self.cache_hits += 1
            return hit
        self.cache_misses += 1
        items = np.asarray([j], dtype=np.int64)
        return float(self._finish(*self._sums_to(i, items))[0])

    def distances_to(self, i: int, items: np.ndarray) -> np.ndarray:
        """Vector of d(i, j) for every j in ``items``."""
        items = np.asarray(items, dtype=np.int64)
        return self._finish(*self._sums_to(i, items))

    def distance_block(self, items_a: np.ndarray, items_b: np.ndarray) -> np.ndarray:
        """Matrix of d(a, b) for a in ``items_a``, b in ``items_b``."""
        items_a = np.asarray(items_a, dtype=np.int64)
        items_b = np.asarray(items_b, dtype=np.int64)
        if self._dense is not None:
            a = self._dense[items_a]
            b = self._dense[items_b]
            inter = np.minimum(a[:, None, :], b[None, :, :]).sum(axis=2)
            union = np.maximum(a[:, None, :], b[None, :, :]).sum(axis=2)
            return self._finish(inter, union)
        if self._binary:
            inter = np.asarray((self._csr[items_a] @ self._csr[items_b].T).todense())
            union = self._row_sums[items_a][:, None] + self._row_sums[items_b][None, :] - inter
            return self._finish(inter, union)
        # Weighted user vectors: row-at-a-time over the smaller side.
        if len(items_a) <= len(items_b):
            return np.vstack([self.distances_to(int(i), items_b) for i in items_a])
        return np.vstack([self.distances_to(int(j), items_a) for j in items_b]).T

    def precompute_cache(self, hot_items: int) -> "DistanceModel":
        """Cache all pairs among the ``hot_items`` most-rated items; returns self."""
        if hot_items > self.n_items:
            raise ValueError(f"hot_items {hot_items} exceeds item count {self.n_items}")
        self.cache.clear()
        if hot_items <= 1:
            return self
        counts = self.catalog.rating_counts()
        ids = np.arange(self.n_items)
        hot = np.sort(np.lexsort((ids, -counts))[:hot_items])
        block = self.distance_block(hot, hot)
        for a_pos in range(len(hot)):
            for b_pos in range(a_pos + 1, len(hot)):
                self.cache[(int(hot[a_pos]), int(hot[b_pos]))] = float(block[a_pos, b_pos])
        return self

    def estimate_mean_distance(self, sample_pairs: int, seed: int) -> float:
        """Sampled mean pairwise distance; all-zero pairs are excluded (and logged)."""
        mean, n_zero = _sampled_mean(self, sample_pairs, seed)
        if n_zero:
            log.warning(
                "%d of %d sampled pairs had all-zero vectors under basis %s and were excluded",
                n_zero, sample_pairs, self.basis,
            )
        self.mean_distance = mean
        return mean


def _sampled_mean(model: DistanceModel, sample_pairs: int, seed: int) -> tuple[float, int]:
    n = model.n_items
    if n < 2 or sample_pairs < 1:
        return float("nan"), 0
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1_000_003]))
    a = rng.integers(0, n, size=sample_pairs)
    b = rng.integers(0, n - 1, size=sample_pairs)
    b = np.where(b >= a, b + 1, b)  # distinct pair, uniform over ordered pairs
    inter, union = model._sums_elementwise(a, b)
    defined = union > 0
    n_zero = int((~defined).sum())
    if not defined.any():
        return float("nan"), n_zero
    dists = 1.0 - inter[defined] / union[defined]
    return float(dists.mean()), n_zero


def choose_basis(catalog: Catalog, sample_pairs: int = 10_000, seed: int = 0) -> str:
    """Pick the basis (users vs categories) with the lower sampled mean distance.

    Ties go to categories; a catalog without categories always selects
    users.
    """
    if sample_pairs < 1:
        raise ValueError("sample_pairs must be >= 1")
    if catalog.n_categories == 0:
        return USERS
    mean_users, _ = _sampled_mean(DistanceModel(catalog, USERS), sample_pairs, seed)
    mean_cats, _ = _sampled_mean(DistanceModel(catalog, CATEGORIES), sample_pairs, seed)
    if np.isnan(mean_cats):
        return USERS
    if np.isnan(mean_users):
        return CATEGORIES
    return USERS if mean_users < mean_cats else CATEGORIES


def build_distance_model(
    catalog: Catalog,
    basis: str = "auto",
    *,
    hot_items: int = 0,
    sample_pairs: int = 10_000,
    seed: int = 0,
    rating_weighted: bool = False,
) -> DistanceModel:
    """Construct a DistanceModel, resolving ``basis='auto'`` by sampled means."""
    if basis == "auto":
        basis = choose_basis(catalog, sample_pairs=sample_pairs, seed=seed)
    model = DistanceModel(catalog, basis, rating_weighted=rating_weighted)
    model.estimate_mean_distance(sample_pairs, seed)
    if hot_items:
        model.precompute_cache(hot_items)
    return model
