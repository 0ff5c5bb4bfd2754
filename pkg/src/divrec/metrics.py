"""Accuracy metrics, diversity score ceilings, and one-way ANOVA.

The ceilings weight the best achievable diversity at each session length
by the quit-time distribution of the patience model, giving the
denominators for the "distance from optimal" report columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from divrec.catalog import Catalog
from divrec.user_model import UserModelParams, _survival


@dataclass
class MetricBundle:
    """One report row: accuracy, diversity means, and distances from the ceilings."""

    hr_at_k: float
    precision_at_k: float
    recall_at_k: float
    div_d: float
    div_c: float
    steps_mean: float
    delta_d: float
    delta_c: float
    delta_steps: float


def accuracy_at_k(first_list, test_items: set[int], k: int) -> tuple[float, float, float]:
    """(hit ratio, precision, recall) of the first recommended list against the test items.

    Uses the actual list length when it is shorter than k. Callers must
    exclude users with an empty test set before aggregating.
    """
    if len(test_items) == 0:
        raise ValueError("test set is empty; exclude this user from accuracy aggregation")
    top = list(first_list)[: min(k, len(first_list))]
    if not top:
        return 0.0, 0.0, 0.0
    hits = sum(1 for item in top if item in test_items)
    hr = 1.0 if hits > 0 else 0.0
    return hr, hits / len(top), hits / len(test_items)


def delta_from_max(maximum: float, achieved: float) -> float:
    """Relative shortfall (max - achieved) / max; 0 means the ceiling was reached."""
    if maximum == 0:
        return float("nan")
    return (maximum - achieved) / maximum


def greedy_max_coverage_curve(catalog: Catalog) -> np.ndarray:
    """Greedy best coverage fraction after 1, 2, ... picks.

    Exact maximum coverage is NP-hard; the greedy prefix is the standard
    (1 - 1/e) surrogate, so the reported ceiling is a lower bound on the
    true one. The curve stops once no item adds a new category.
    """
    if catalog.n_categories < 1:
        return np.zeros(0)
    incidence = catalog.category_matrix().astype(bool)
    uncovered = np.ones(catalog.n_categories, dtype=bool)
    fractions: list[float] = []
    covered = 0
    ids = np.arange(catalog.n_items)
    available = np.ones(catalog.n_items, dtype=bool)
    while True:
        gains = (incidence & uncovered).sum(axis=1)
        gains[~available] = -1
        best = int(np.lexsort((ids, -gains))[0])
        if gains[best] <= 0:
            break
        covered += int(gains[best])
        fractions.append(covered / catalog.n_categories)
        uncovered &= ~incidence[best]
        available[best] = False
        if covered == catalog.n_categories:
            break
    return np.asarray(fractions)


def max_scores(
    catalog: Catalog, params: UserModelParams, horizon_tol: float = 1e-12
) -> tuple[float, float]:
    """Quit-time-weighted ceilings for distance and coverage diversity.

    At session length t the best distance diversity is t (pairwise
    distances are at most 1 and the normalization is linear in t), so the
    distance ceiling collapses to the expected-steps series. The coverage
    ceiling weights the greedy max-coverage curve by the probability of
    quitting after exactly t consumptions.
    """
    if horizon_tol <= 0:
        raise ValueError("horizon_tol must be > 0")
    curve = greedy_max_coverage_curve(catalog)
    plateau = float(curve[-1]) if curve.size else 0.0

    d_bar = 0.0
    c_bar = 0.0
    s_t = _survival(1.0, params)
    t = 1
    while True:
        s_next = _survival(float(t + 1), params)
        w = s_t - s_next
        d_bar += t * w
        m_c = float(curve[t - 1]) if t - 1 < curve.size else plateau
        c_bar += m_c * w
        s_t = s_next
        t += 1
        if t - 1 >= curve.size and s_t * (t + 1) < horizon_tol:
            # Remaining mass: coverage ceiling is flat at the plateau; the
            # distance ceiling tail matches the expected-steps series tail.
            c_bar += plateau * s_t
            d_bar += t * s_t + _tail_survival_sum(float(t), params, horizon_tol)
            break
        if t > 10_000_000:
            raise RuntimeError("ceiling series did not converge")
    return d_bar, c_bar


def _tail_survival_sum(t0: float, params: UserModelParams, tol: float) -> float:
    """sum_{t > t0} q^(t^gamma), summed directly until provably below tol."""
    total = 0.0
    t = t0 + 1.0
    while True:
        s = _survival(t, params)
        total += s
        if s < tol:
            g = params.gamma
            lam = params.lam
            bound = (lam / g) * math.gamma(1.0 / g) * float(special.gammaincc(1.0 / g, (t / lam) ** g))
            if bound < tol:
                return total
        t += 1.0
        if t - t0 > 10_000_000:
            raise RuntimeError("tail sum did not converge")


class AnovaResult(NamedTuple):
    f: float
    p: float
    note: str = ""


def anova_oneway(groups) -> AnovaResult:
    """One-way fixed-effects ANOVA: F statistic and its upper tail probability.

    Degenerate inputs are flagged rather than silently propagated: zero
    within-group variance with unequal means gives p = 0, and fully
    identical groups are reported as such with NaN statistics.
    """
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(arrays) < 2:
        raise ValueError("need at least 2 groups")
    if any(len(a) < 2 for a in arrays):
        raise ValueError("every group needs at least 2 samples")
    n_total = sum(len(a) for a in arrays)
    grand = float(np.concatenate(arrays).mean())
    ss_between = sum(len(a) * (a.mean() - grand) ** 2 for a in arrays)
    ss_within = sum(float(((a - a.mean()) ** 2).sum()) for a in arrays)
    df1 = len(arrays) - 1
    df2 = n_total - len(arrays)
    if ss_within == 0.0:
        if ss_between == 0.0:
            return AnovaResult(float("nan"), float("nan"), "identical groups")
        return AnovaResult(float("inf"), 0.0)
    f = (ss_between / df1) / (ss_within / df2)
    # Upper tail of the F distribution via the regularized incomplete beta.
    p = float(special.betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)))
    return AnovaResult(float(f), p)
