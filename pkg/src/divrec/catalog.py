"""Catalog: users, items, categories, ratings; ingestion and train/test split.

Internal ids are dense integers assigned in first-seen order; the external
(string) ids are kept in bidirectional maps. A Catalog is immutable after
load and safe to share read-only across simulation workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class IngestionError(ValueError):
    """Raised for malformed dataset rows or inconsistent schema/data."""


@dataclass
class IngestionSchema:
    """Column layout of a delimited ratings file plus an optional item/category file.

    ``delimiter=None`` splits on any whitespace (covers space- and
    tab-separated files); multi-character delimiters such as ``"::"``
    are supported. The categories column of the items file holds a list
    separated by ``category_delimiter``.
    """

    rating_scale: tuple[float, float] = (1.0, 5.0)
    delimiter: str | None = None
    user_col: int = 0
    item_col: int = 1
    rating_col: int = 2
    items_file: str | None = None
    items_delimiter: str | None = None
    item_id_col: int = 0
    categories_col: int = 1
    category_delimiter: str = "|"
    min_interactions: int = 5
    allow_uncategorized: bool = False

    def validate(self) -> list[str]:
        problems = []
        lo, hi = self.rating_scale
        if not lo < hi:
            problems.append(f"rating_scale: lower bound {lo} must be < upper bound {hi}")
        if self.delimiter == "":
            problems.append("delimiter: empty string is not a valid delimiter (use null for whitespace)")
        if self.category_delimiter == "":
            problems.append("category_delimiter: must be a non-empty string")
        if self.min_interactions < 0:
            problems.append("min_interactions: must be >= 0")
        for name in ("user_col", "item_col", "rating_col", "item_id_col", "categories_col"):
            if getattr(self, name) < 0:
                problems.append(f"{name}: must be >= 0")
        return problems


@dataclass
class Catalog:
    """Users, items, categories, and the sparse ratings map.

    ``ratings[u]`` maps internal item id -> rating for internal user id
    ``u``. ``item_categories[i]`` is a sorted array of internal category
    ids attached to item ``i``.
    """

    user_ids: list[str]
    item_ids: list[str]
    category_ids: list[str]
    ratings: list[dict[int, float]]
    item_categories: list[np.ndarray]
    rating_scale: tuple[float, float]

    user_index: dict[str, int] = field(init=False, repr=False)
    item_index: dict[str, int] = field(init=False, repr=False)
    category_index: dict[str, int] = field(init=False, repr=False)
    _item_raters: list[np.ndarray] | None = field(default=None, init=False, repr=False)
    _category_matrix: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.user_index = {u: idx for idx, u in enumerate(self.user_ids)}
        self.item_index = {i: idx for idx, i in enumerate(self.item_ids)}
        self.category_index = {c: idx for idx, c in enumerate(self.category_ids)}
        if len(self.ratings) != len(self.user_ids):
            raise ValueError("ratings must have one entry per user")
        if len(self.item_categories) != len(self.item_ids):
            raise ValueError("item_categories must have one entry per item")
        n_items = len(self.item_ids)
        n_cats = len(self.category_ids)
        for u, per_user in enumerate(self.ratings):
            for i in per_user:
                if not 0 <= i < n_items:
                    raise ValueError(f"user {self.user_ids[u]!r} rates unknown item index {i}")
        for i, cats in enumerate(self.item_categories):
            if len(cats) and (cats.min() < 0 or cats.max() >= n_cats):
                raise ValueError(f"item {self.item_ids[i]!r} references an unknown category index")

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_categories(self) -> int:
        return len(self.category_ids)

    @property
    def n_ratings(self) -> int:
        return sum(len(r) for r in self.ratings)

    def item_raters(self, item: int) -> np.ndarray:
        """Sorted internal user ids that rated ``item``."""
        if self._item_raters is None:
            raters: list[list[int]] = [[] for _ in range(self.n_items)]
            for u, per_user in enumerate(self.ratings):
                for i in per_user:
                    raters[i].append(u)
            self._item_raters = [np.asarray(r, dtype=np.int64) for r in raters]
        return self._item_raters[item]

    def rating_counts(self) -> np.ndarray:
        """Number of ratings per item (popularity)."""
        counts = np.zeros(self.n_items, dtype=np.int64)
        for per_user in self.ratings:
            for i in per_user:
                counts[i] += 1
        return counts

    def category_matrix(self) -> np.ndarray:
        """Dense binary item-by-category incidence matrix."""
        if self._category_matrix is None:
            mat = np.zeros((self.n_items, max(self.n_categories, 1)), dtype=np.float64)
            for i, cats in enumerate(self.item_categories):
                mat[i, cats] = 1.0
            self._category_matrix = mat
        return self._category_matrix

    # -- canonical dump ----------------------------------------------------

    def to_canonical_dict(self) -> dict:
        return {
            "rating_scale": list(self.rating_scale),
            "users": list(self.user_ids),
            "items": list(self.item_ids),
            "categories": list(self.category_ids),
            "item_categories": [[int(c) for c in cats] for cats in self.item_categories],
            "ratings": [
                [u, i, self.ratings[u][i]]
                for u in range(self.n_users)
                for i in sorted(self.ratings[u])
            ],
        }

    def dump_canonical(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_canonical_dict(), indent=0, sort_keys=True))

    @classmethod
    def from_canonical_dict(cls, data: dict) -> "Catalog":
        ratings: list[dict[int, float]] = [dict() for _ in data["users"]]
        for u, i, r in data["ratings"]:
            ratings[u][i] = float(r)
        return cls(
            user_ids=list(data["users"]),
            item_ids=list(data["items"]),
            category_ids=list(data["categories"]),
            ratings=ratings,
            item_categories=[np.asarray(c, dtype=np.int64) for c in data["item_categories"]],
            rating_scale=tuple(data["rating_scale"]),
        )

    @classmethod
    def load_canonical(cls, path: str | Path) -> "Catalog":
        return cls.from_canonical_dict(json.loads(Path(path).read_text()))


@dataclass
class RatingsView:
    """A per-user subset of a Catalog's ratings (train or test side of a split)."""

    catalog: Catalog
    ratings: dict[int, dict[int, float]]

    @property
    def n_ratings(self) -> int:
        return sum(len(r) for r in self.ratings.values())

    def users(self) -> list[int]:
        return sorted(self.ratings)

    def items_of(self, user: int) -> dict[int, float]:
        return self.ratings.get(user, {})


@dataclass
class SplitPair:
    """Per-user stratified train/test partition of a catalog's ratings."""

    train: RatingsView
    test: RatingsView
    seed: int
    dropped_users: list[int] = field(default_factory=list)


def _split_fields(line: str, delimiter: str | None) -> list[str]:
    return line.split() if delimiter is None else line.split(delimiter)


def load_dataset(path: str | Path, schema: IngestionSchema) -> Catalog:
    """Parse a delimited ratings file (plus optional item/category file) into a Catalog.

    Duplicate (user, item) pairs keep the last occurrence. Users with
    fewer than ``schema.min_interactions`` ratings are dropped, and items
    left without any rating are dropped with them.
    """
    problems = schema.validate()
    if problems:
        raise IngestionError("invalid ingestion schema: " + "; ".join(problems))

    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"ratings file not found: {path}")
    lo, hi = schema.rating_scale

    pair_rating: dict[tuple[str, str], float] = {}
    user_order: list[str] = []
    item_order: list[str] = []
    seen_users: set[str] = set()
    seen_items: set[str] = set()
    needed = max(schema.user_col, schema.item_col, schema.rating_col) + 1
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = _split_fields(line, schema.delimiter)
            if len(fields) < needed:
                raise IngestionError(
                    f"{path.name}:{lineno}: expected at least {needed} fields, got {len(fields)}"
                )
            user = fields[schema.user_col].strip()
            item = fields[schema.item_col].strip()
            raw_rating = fields[schema.rating_col].strip()
            if not user or not item:
                raise IngestionError(f"{path.name}:{lineno}: empty user or item id")
            try:
                rating = float(raw_rating)
            except ValueError:
                raise IngestionError(f"{path.name}:{lineno}: rating {raw_rating!r} is not a number") from None
            if not np.isfinite(rating) or not lo <= rating <= hi:
                raise IngestionError(
                    f"{path.name}:{lineno}: rating {rating} outside declared scale [{lo}, {hi}]"
                )
            if user not in seen_users:
                seen_users.add(user)
                user_order.append(user)
            if item not in seen_items:
                seen_items.add(item)
                item_order.append(item)
            pair_rating[(user, item)] = rating  # last occurrence wins

    if not pair_rating:
        raise IngestionError(f"{path.name}: no ratings found")

    # Drop under-active users, then items left with no raters.
    per_user_count: dict[str, int] = {}
    for (user, _item) in pair_rating:
        per_user_count[user] = per_user_count.get(user, 0) + 1
    kept_users = [u for u in user_order if per_user_count[u] >= schema.min_interactions]
    kept_user_set = set(kept_users)
    kept_item_set = {item for (user, item) in pair_rating if user in kept_user_set}
    kept_items = [i for i in item_order if i in kept_item_set]
    if not kept_users:
        raise IngestionError(
            f"{path.name}: no user has >= {schema.min_interactions} interactions; catalog is empty"
        )

    item_cats_ext = _load_item_categories(path, schema, kept_item_set)

    category_order: list[str] = []
    seen_cats: set[str] = set()
    for item in kept_items:
        for cat in item_cats_ext.get(item, []):
            if cat not in seen_cats:
                seen_cats.add(cat)
                category_order.append(cat)

    user_idx = {u: k for k, u in enumerate(kept_users)}
    item_idx = {i: k for k, i in enumerate(kept_items)}
    cat_idx = {c: k for k, c in enumerate(category_order)}

    ratings: list[dict[int, float]] = [dict() for _ in kept_users]
    for (user, item), rating in pair_rating.items():
        if user in kept_user_set:
            ratings[user_idx[user]][item_idx[item]] = rating

    item_categories = [
        np.asarray(sorted(cat_idx[c] for c in item_cats_ext.get(item, [])), dtype=np.int64)
        for item in kept_items
    ]

    return Catalog(
        user_ids=kept_users,
        item_ids=kept_items,
        category_ids=category_order,
        ratings=ratings,
        item_categories=item_categories,
        rating_scale=(float(lo), float(hi)),
    )


def _load_item_categories(
    ratings_path: Path, schema: IngestionSchema, kept_items: set[str]
) -> dict[str, list[str]]:
    if schema.items_file is None:
        return {}
    items_path = Path(schema.items_file)
    if not items_path.is_absolute():
        items_path = ratings_path.parent / items_path
    if not items_path.is_file():
        raise IngestionError(f"items file not found: {items_path}")

    needed = max(schema.item_id_col, schema.categories_col) + 1
    out: dict[str, list[str]] = {}
    with items_path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = _split_fields(line, schema.items_delimiter)
            if len(fields) < needed:
                raise IngestionError(
                    f"{items_path.name}:{lineno}: expected at least {needed} fields, got {len(fields)}"
                )
            item = fields[schema.item_id_col].strip()
            if item not in kept_items:
                continue
            cats = [c.strip() for c in fields[schema.categories_col].split(schema.category_delimiter)]
            cats = [c for c in cats if c]
            out[item] = cats

    if not schema.allow_uncategorized:
        missing = [i for i in kept_items if not out.get(i)]
        if missing:
            raise IngestionError(
                f"{items_path.name}: {len(missing)} rated item(s) have no categories "
                f"(first: {sorted(missing)[:5]}); set allow_uncategorized to accept them"
            )
    return out


def split_interactions(catalog: Catalog, ratio: float, seed: int) -> SplitPair:
    """Per-user stratified split: floor(ratio * count) ratings to train, rest to test.

    Adjusted so every retained user keeps at least one rating on each
    side. Users with fewer than 2 ratings cannot be split and are
    recorded in ``dropped_users``. Deterministic for a fixed seed.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    train: dict[int, dict[int, float]] = {}
    test: dict[int, dict[int, float]] = {}
    dropped: list[int] = []
    for u in range(catalog.n_users):
        per_user = catalog.ratings[u]
        count = len(per_user)
        if count < 2:
            dropped.append(u)
            continue
        items = np.fromiter(sorted(per_user), dtype=np.int64, count=count)
        rng = np.random.default_rng(np.random.SeedSequence([seed, u]))
        rng.shuffle(items)
        n_train = int(np.floor(ratio * count))
        n_train = min(max(n_train, 1), count - 1)  # both sides non-empty
        train[u] = {int(i): per_user[int(i)] for i in items[:n_train]}
        test[u] = {int(i): per_user[int(i)] for i in items[n_train:]}
    return SplitPair(
        train=RatingsView(catalog, train),
        test=RatingsView(catalog, test),
        seed=seed,
        dropped_users=dropped,
    )


def item_vector(
    catalog: Catalog, item: int, basis: str, *, rating_weighted: bool = False
) -> np.ndarray:
    """Dense non-negative item vector over users or over categories.

    Users basis: binary rater-incidence by default; with
    ``rating_weighted`` the entries carry the rating values instead.
    """
    if not 0 <= item < catalog.n_items:
        raise KeyError(f"unknown item index {item}")
    basis = basis.lower()
    if basis == "users":
        vec = np.zeros(catalog.n_users, dtype=np.float64)
        for u in catalog.item_raters(item):
            vec[u] = catalog.ratings[u][item] if rating_weighted else 1.0
        return vec
    if basis == "categories":
        vec = np.zeros(catalog.n_categories, dtype=np.float64)
        vec[catalog.item_categories[item]] = 1.0
        return vec
    raise ValueError(f"basis must be 'users' or 'categories', got {basis!r}")
