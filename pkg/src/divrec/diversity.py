"""Diversity of an interaction set: category coverage and pairwise distance.

Coverage diversity is the fraction of all categories touched by the set.
Distance diversity is the full double sum of pairwise distances (each
unordered pair counted twice, zero diagonal) normalized by |X| - 1, and
defined as 0 for sets of fewer than two items. On a clique of t items at
uniform distance d this normalization gives exactly t * d, so the value
grows linearly with the set size.

The running ``pair_sum`` and ``covered`` fields are maintained
incrementally on insertion; tests check them against from-scratch
recomputation.
"""

from __future__ import annotations

import numpy as np


class InteractionSet:
    """Ordered set of consumed items with incrementally maintained diversity state."""

    def __init__(self, n_categories: int):
        self.items: list[int] = []
        self.covered: set[int] = set()
        self.pair_sum: float = 0.0
        self.n_categories = n_categories
        self._member: set[int] = set()

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, item: int) -> bool:
        return item in self._member

    def add(self, item: int, dist, categories: np.ndarray | None = None) -> None:
        """Append ``item``, updating the running pair sum and covered categories.

        ``dist`` provides distances to the existing members; ``categories``
        is the item's category-id array (omit for catalogs without
        categories).
        """
        if item in self._member:
            raise ValueError(f"item {item} already in the interaction set")
        if self.items:
            old = np.asarray(self.items, dtype=np.int64)
            self.pair_sum += 2.0 * float(dist.distances_to(item, old).sum())
        if categories is not None:
            self.covered.update(int(c) for c in categories)
        self.items.append(item)
        self._member.add(item)

    def div_d(self) -> float:
        return distance_diversity_from_sum(self.pair_sum, len(self.items))

    def div_c(self) -> float:
        if self.n_categories == 0:
            return 0.0
        return len(self.covered) / self.n_categories


def distance_diversity_from_sum(pair_sum: float, size: int) -> float:
    if size < 2:
        return 0.0
    return pair_sum / (size - 1)


def coverage_diversity(picked: InteractionSet, n_categories: int) -> float:
    """Fraction of the catalog's categories covered by the set; 0 for an empty set."""
    if n_categories < 1:
        raise ValueError("n_categories must be >= 1 for coverage diversity")
    if not picked.items:
        return 0.0
    return len(picked.covered) / n_categories


def distance_diversity(picked: InteractionSet, dist) -> float:
    """Pairwise-distance diversity recomputed from scratch (oracle for the running sum)."""
    items = picked.items
    if len(items) < 2:
        return 0.0
    total = 0.0
    for a_pos in range(len(items)):
        for b_pos in range(len(items)):
            if a_pos != b_pos:
                total += dist.distance(items[a_pos], items[b_pos])
    return total / (len(items) - 1)


def marginal_diversity(
    item: int,
    picked: InteractionSet,
    kind: str,
    dist=None,
    *,
    categories: np.ndarray | None = None,
    anchor: int | None = None,
) -> float:
    """Diversity gain of adding ``item`` to the set, computed incrementally.

    Distance kind: exact change of the normalized double sum, using the
    running pair_sum; for an empty set the gain is the distance to the
    caller-supplied ``anchor`` item. Coverage kind: newly covered
    categories / |C|; for an empty set this is the item's own coverage
    count / |C|, which keeps the score on the same scale as later steps.
    """
    if item in picked:
        raise ValueError(f"item {item} already in the interaction set")
    kind = kind.upper()
    if kind == "D":
        if dist is None:
            raise ValueError("distance marginal diversity requires a distance model")
        t = len(picked)
        if t == 0:
            if anchor is None:
                raise ValueError("empty interaction set needs a bootstrap anchor item")
            return float(dist.distance(item, anchor))
        sum_to_set = float(dist.distances_to(item, np.asarray(picked.items, dtype=np.int64)).sum())
        new_div = (picked.pair_sum + 2.0 * sum_to_set) / t
        return new_div - picked.div_d()
    if kind == "C":
        if categories is None:
            raise ValueError("coverage marginal diversity requires the item's categories")
        if picked.n_categories < 1:
            raise ValueError("coverage marginal diversity requires a catalog with categories")
        new = sum(1 for c in categories if int(c) not in picked.covered)
        return new / picked.n_categories
    raise ValueError(f"kind must be 'D' or 'C', got {kind!r}")
