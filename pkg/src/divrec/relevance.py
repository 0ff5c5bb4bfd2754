"""Relevance scoring: biased matrix factorization plus normalization helpers.

Any object with ``score(user, item)`` and ``score_many(user, items)`` on
the catalog's rating scale works as a relevance model; the built-in
implementations are a biased-MF model trained by SGD and a frozen score
table loaded from a delimited file.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from divrec.catalog import Catalog, RatingsView

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """Training error became non-finite; retry with a lower learning rate."""


def interest_prob(r: float, scale: tuple[float, float]) -> float:
    """Map a relevance score on [r_lo, r_hi] linearly into [0, 1], clamping first."""
    lo, hi = scale
    if hi == lo:
        raise ValueError("degenerate rating scale: r_hi == r_lo")
    return (min(max(r, lo), hi) - lo) / (hi - lo)


def interest_prob_many(r: np.ndarray, scale: tuple[float, float]) -> np.ndarray:
    lo, hi = scale
    if hi == lo:
        raise ValueError("degenerate rating scale: r_hi == r_lo")
    return (np.clip(np.asarray(r, dtype=np.float64), lo, hi) - lo) / (hi - lo)


def minmax_normalize(values) -> np.ndarray:
    """Affine map of a nonempty list onto [0, 1].

    A constant input maps to all ones rather than zeros: downstream the
    scores multiply through a copula where a zero annihilates the
    combined score, and an uninformative feature should leave the other
    one in charge.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("minmax_normalize needs a nonempty input")
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.ones_like(values)
    return (values - lo) / (hi - lo)


@dataclass
class MfModel:
    """Biased matrix factorization: clamp(mean + b_u + b_i + p_u . q_i)."""

    user_factors: np.ndarray
    item_factors: np.ndarray
    user_bias: np.ndarray
    item_bias: np.ndarray
    global_mean: float
    scale: tuple[float, float]

    def score(self, user: int, item: int) -> float:
        raw = (
            self.global_mean
            + self.user_bias[user]
            + self.item_bias[item]
            + self.user_factors[user] @ self.item_factors[item]
        )
        lo, hi = self.scale
        return float(min(max(raw, lo), hi))

    def score_many(self, user: int, items: np.ndarray) -> np.ndarray:
        raw = (
            self.global_mean
            + self.user_bias[user]
            + self.item_bias[items]
            + self.item_factors[items] @ self.user_factors[user]
        )
        lo, hi = self.scale
        return np.clip(raw, lo, hi)


def train_mf(
    train: RatingsView,
    factors: int = 8,
    epochs: int = 30,
    lr: float = 0.02,
    reg: float = 0.02,
    seed: int = 0,
) -> MfModel:
    """SGD on squared error with L2 regularization; deterministic for a fixed seed.

    Runs single-threaded on purpose: parallelism belongs at the
    experiment-trial level, where it cannot perturb the factors.
    """
    if factors < 1:
        raise ValueError("factors must be >= 1")
    if lr <= 0:
        raise ValueError("lr must be > 0")
    if reg < 0:
        raise ValueError("reg must be >= 0")
    triples = [
        (u, i, r)
        for u in train.users()
        for i, r in sorted(train.items_of(u).items())
    ]
    if not triples:
        raise ValueError("training view holds no ratings")

    catalog = train.catalog
    rng = np.random.default_rng(np.random.SeedSequence([seed, 77]))
    p = rng.normal(0.0, 0.1, size=(catalog.n_users, factors))
    q = rng.normal(0.0, 0.1, size=(catalog.n_items, factors))
    bu = np.zeros(catalog.n_users)
    bi = np.zeros(catalog.n_items)
    mu = float(np.mean([r for _, _, r in triples]))

    users = np.asarray([t[0] for t in triples], dtype=np.int64)
    items = np.asarray([t[1] for t in triples], dtype=np.int64)
    ratings = np.asarray([t[2] for t in triples], dtype=np.float64)
    n = len(triples)

    # Divergence shows up as overflow in the updates; it is detected at the
    # epoch boundary, so the intermediate warnings are silenced.
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(epochs):
            order = rng.permutation(n)
            sse = 0.0
            for pos in order:
                u = users[pos]
                i = items[pos]
                pu = p[u]
                qi = q[i]
                err = ratings[pos] - (mu + bu[u] + bi[i] + pu @ qi)
                sse += err * err
                bu[u] += lr * (err - reg * bu[u])
                bi[i] += lr * (err - reg * bi[i])
                p[u] = pu + lr * (err * qi - reg * pu)
                q[i] = qi + lr * (err * pu - reg * qi)
            rmse = float(np.sqrt(sse / n))
            if not np.isfinite(rmse):
                raise TrainingDivergedError(
                    f"training RMSE became non-finite at epoch {epoch + 1}; try a lower lr than {lr}"
                )
            log.debug("mf epoch %d/%d train rmse %.4f", epoch + 1, epochs, rmse)

    return MfModel(
        user_factors=p,
        item_factors=q,
        user_bias=bu,
        item_bias=bi,
        global_mean=mu,
        scale=catalog.rating_scale,
    )


@dataclass
class FrozenRelevanceModel:
    """Relevance scores frozen in a dense user-by-item table.

    Pairs absent from the source table score the table's mean, so every
    (user, item) query stays finite and on-scale.
    """

    table: np.ndarray
    scale: tuple[float, float]

    def score(self, user: int, item: int) -> float:
        return float(self.table[user, item])

    def score_many(self, user: int, items: np.ndarray) -> np.ndarray:
        return self.table[user, items]


def load_score_table(
    path: str | Path, catalog: Catalog, delimiter: str | None = None
) -> FrozenRelevanceModel:
    """Read ``user item score`` rows (external ids) into a FrozenRelevanceModel."""
    path = Path(path)
    entries: list[tuple[int, int, float]] = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split() if delimiter is None else line.split(delimiter)
            if len(fields) < 3:
                raise ValueError(f"{path.name}:{lineno}: expected user, item, score")
            user, item, score = fields[0], fields[1], fields[2]
            if user not in catalog.user_index or item not in catalog.item_index:
                continue
            entries.append((catalog.user_index[user], catalog.item_index[item], float(score)))
    if not entries:
        raise ValueError(f"{path.name}: no usable score rows for this catalog")
    mean = float(np.mean([s for _, _, s in entries]))
    table = np.full((catalog.n_users, catalog.n_items), mean, dtype=np.float64)
    for u, i, s in entries:
        table[u, i] = s
    return FrozenRelevanceModel(table=table, scale=catalog.rating_scale)
