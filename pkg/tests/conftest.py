"""Shared fixtures: hand-built catalogs and a matrix-backed distance stub."""

import numpy as np
import pytest

from divrec.catalog import Catalog


class MatrixDistance:
    """Distance oracle backed by an explicit matrix; used to test diversity math."""

    def __init__(self, matrix):
        self.m = np.asarray(matrix, dtype=np.float64)

    def distance(self, i, j):
        return float(self.m[i, j])

    def distances_to(self, i, items):
        return self.m[i, np.asarray(items, dtype=np.int64)]

    def distance_block(self, items_a, items_b):
        return self.m[np.ix_(np.asarray(items_a, dtype=np.int64), np.asarray(items_b, dtype=np.int64))]


def build_catalog(ratings_triples, item_cats, n_categories, scale=(1.0, 5.0)):
    """Assemble a Catalog from (user, item, rating) index triples and per-item category lists."""
    n_users = 1 + max(t[0] for t in ratings_triples)
    n_items = max(1 + max(t[1] for t in ratings_triples), len(item_cats))
    ratings = [dict() for _ in range(n_users)]
    for u, i, r in ratings_triples:
        ratings[u][i] = float(r)
    cats = [np.asarray(sorted(item_cats[i]), dtype=np.int64) if i < len(item_cats) else np.asarray([], dtype=np.int64)
            for i in range(n_items)]
    return Catalog(
        user_ids=[f"u{n}" for n in range(n_users)],
        item_ids=[f"i{n}" for n in range(n_items)],
        category_ids=[f"c{n}" for n in range(n_categories)],
        ratings=ratings,
        item_categories=cats,
        rating_scale=scale,
    )


@pytest.fixture
def matrix_distance():
    return MatrixDistance


@pytest.fixture
def small_catalog():
    """4 users x 5 items x 3 categories with a few ratings."""
    triples = [
        (0, 0, 4.0), (0, 1, 2.0), (0, 3, 5.0),
        (1, 0, 5.0), (1, 2, 3.0),
        (2, 1, 1.0), (2, 2, 4.0), (2, 4, 2.0),
        (3, 3, 3.0), (3, 4, 4.0),
    ]
    cats = [[0], [0, 1], [1], [2], [1, 2]]
    return build_catalog(triples, cats, n_categories=3)


def random_clustered_catalog(
    rng,
    n_users=40,
    n_items=60,
    n_categories=8,
    ratings_per_user=12,
    cats_per_item=(1, 2),
):
    """Random catalog where each item carries a few categories and users rate random items."""
    item_cats = [
        sorted(rng.choice(n_categories, size=rng.integers(cats_per_item[0], cats_per_item[1] + 1),
                          replace=False).tolist())
        for _ in range(n_items)
    ]
    triples = []
    for u in range(n_users):
        items = rng.choice(n_items, size=min(ratings_per_user, n_items), replace=False)
        for i in items:
            triples.append((u, int(i), float(rng.integers(1, 6))))
    return build_catalog(triples, item_cats, n_categories)


@pytest.fixture
def clustered_catalog():
    rng = np.random.default_rng(7)
    return random_clustered_catalog(rng)
