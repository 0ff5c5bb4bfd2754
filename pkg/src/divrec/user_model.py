"""The stochastic user: discrete-Weibull weariness, list scanning, and consumption.

Per step the user scans the recommended list in order. Before examining
each position they may quit out of weariness with probability

    p_t = 1 - q^((t+1)^gamma - t^gamma),   q = exp(-lambda^-gamma),

the hazard of the discrete Weibull distribution at step t (0-based).
Examined items interest the user with probability b_i (relevance mapped
to [0, 1]); the scan stops at the first interesting item, and a scan
that finds nothing interesting ends the session. When something was
interesting, one item is consumed from the list with probability
proportional to relevance.

The closed-form helpers below describe the same process: the chance a
whole list is scanned away without consumption, and the expected number
of consumed items when every item is maximally interesting (in which
case each step spends exactly one weariness coin, and with lower
interest the series is an upper bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

WEARINESS = "weariness"
NO_INTEREST = "no_interest"
POOL_EXHAUSTED = "pool_exhausted"

_MAX_SERIES_TERMS = 10_000_000


@dataclass
class UserModelParams:
    """Weibull scale/shape, list length, and the rating scale used for interest."""

    lam: float
    gamma: float
    k: int = 10
    scale: tuple[float, float] = (1.0, 5.0)
    q: float = field(init=False)
    _hazard: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be > 0")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        lo, hi = self.scale
        if not lo < hi:
            raise ValueError("rating scale must have lo < hi")
        self.q = math.exp(-self.lam**-self.gamma)
        self._hazard = {}


@dataclass
class StepOutcome:
    """Result of one list examination: a consumed item or a quit with its reason."""

    item: int | None
    quit_reason: str | None
    examinations: int

    @property
    def consumed(self) -> bool:
        return self.item is not None


def weariness_prob(t: int, params: UserModelParams) -> float:
    """Quit-from-boredom probability before each examination at step ``t`` (0-based).

    Constant in t for gamma = 1, strictly increasing for gamma > 1. Values
    are memoized on the params object (simulations hit the same few steps
    millions of times).
    """
    cached = params._hazard.get(t)
    if cached is not None:
        return cached
    if t < 0:
        raise ValueError("step index must be >= 0")
    delta = (t + 1) ** params.gamma - t**params.gamma
    value = -math.expm1(delta * math.log(params.q))
    params._hazard[t] = value
    return value


def round_quit_prob(b_list, p: float) -> float:
    """Probability that scanning a list ends in a weariness quit.

    Position j is reached only if the j-1 earlier positions neither
    tripped the weariness coin nor offered an interesting item:

        sum_j p (1-p)^(j-1) prod_{i<j} (1 - b_i)

    The complementary no-interest outcome (scan completes, nothing
    interesting) is a separate quit channel not covered by this closed
    form.
    """
    b = np.asarray(b_list, dtype=np.float64)
    if b.size == 0:
        raise ValueError("b_list must be nonempty")
    survive = (1.0 - p) * (1.0 - b)
    reach = np.concatenate(([1.0], np.cumprod(survive[:-1])))
    return float(p * reach.sum())


def _survival(t: float, params: UserModelParams) -> float:
    # q^(t^gamma) computed in log space
    return math.exp((t**params.gamma) * math.log(params.q))


def _survival_integral_tail(t0: float, params: UserModelParams) -> float:
    """Upper bound on sum_{t > t0} q^(t^gamma) via the survival integral."""
    g = params.gamma
    lam = params.lam
    u = (t0 / lam) ** g
    return (lam / g) * math.gamma(1.0 / g) * float(special.gammaincc(1.0 / g, u))


def expected_steps(params: UserModelParams, tail_tol: float = 1e-10) -> float:
    """Expected number of consumed items when every item interests the user.

    Sums t * (q^(t^gamma) - q^((t+1)^gamma)) until the remaining tail is
    provably below ``tail_tol``. Telescoping makes this equal to the
    plain survival sum, which ``expected_steps_survival`` computes
    independently as a cross-check.
    """
    if tail_tol <= 0:
        raise ValueError("tail_tol must be > 0")
    total = 0.0
    s_t = _survival(1.0, params)
    for t in range(1, _MAX_SERIES_TERMS + 1):
        s_next = _survival(float(t + 1), params)
        total += t * (s_t - s_next)
        # Tail of the weighted series: (t+1) S(t+1) + sum_{j >= t+2} S(j).
        if (t + 1) * s_next < tail_tol:
            if (t + 1) * s_next + _survival_integral_tail(float(t + 1), params) < tail_tol:
                return total
        s_t = s_next
    raise RuntimeError(f"series did not converge within {_MAX_SERIES_TERMS} terms")


def expected_steps_survival(params: UserModelParams, tail_tol: float = 1e-10) -> float:
    """Survival-sum form of ``expected_steps``: sum_{t >= 1} q^(t^gamma)."""
    if tail_tol <= 0:
        raise ValueError("tail_tol must be > 0")
    total = 0.0
    for t in range(1, _MAX_SERIES_TERMS + 1):
        s_t = _survival(float(t), params)
        total += s_t
        if s_t < tail_tol and _survival_integral_tail(float(t), params) < tail_tol:
            return total
    raise RuntimeError(f"series did not converge within {_MAX_SERIES_TERMS} terms")


def weibull_mean(lam: float, gamma: float) -> float:
    """Mean of the continuous Weibull distribution, lam * Gamma(1 + 1/gamma).

    Diagnostic only: the discrete expected-steps series sits within one
    unit of this value, so it anchors sanity checks without being an
    assertion target.
    """
    return lam * math.gamma(1.0 + 1.0 / gamma)


def lambda_for_weibull_mean(target: float, gamma: float) -> float:
    """Scale parameter whose continuous Weibull mean equals ``target``."""
    if target <= 0:
        raise ValueError("target must be > 0")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    return target / math.gamma(1.0 + 1.0 / gamma)


def solve_lambda(
    target_steps: float, gamma: float, tol: float = 1e-9, tail_tol: float = 1e-12
) -> tuple[float, float]:
    """Bisection on lambda so the expected-steps series hits ``target_steps``.

    The series is monotone increasing in lambda. Returns (lambda,
    achieved expected steps).
    """
    if target_steps < 0.5:
        raise ValueError("target_steps must be >= 0.5")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if tol <= 0:
        raise ValueError("tol must be > 0")

    def series(lam: float) -> float:
        return expected_steps(UserModelParams(lam=lam, gamma=gamma), tail_tol=tail_tol)

    lo = hi = 1.0
    value = series(1.0)
    if value < target_steps:
        for _ in range(200):
            hi *= 2.0
            if series(hi) >= target_steps:
                break
        else:
            raise RuntimeError("failed to bracket lambda after 200 doublings")
    else:
        for _ in range(200):
            lo /= 2.0
            if series(lo) <= target_steps:
                break
        else:
            raise RuntimeError("failed to bracket lambda after 200 halvings")

    for _ in range(500):
        mid = 0.5 * (lo + hi)
        value = series(mid)
        if abs(value - target_steps) < tol:
            return mid, value
        if value < target_steps:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    return mid, series(mid)


def step_behavior(
    items,
    b_list: np.ndarray,
    relevances: np.ndarray,
    t: int,
    params: UserModelParams,
    rng: np.random.Generator,
    *,
    sequential: bool = False,
    counters: dict | None = None,
) -> StepOutcome:
    """Scan one recommended list and either consume an item or quit.

    Scan phase: before each position a weariness coin (probability
    ``weariness_prob(t)``) may end the session; otherwise the item
    interests the user with probability b_i and the scan stops at the
    first interesting one. A completed scan with no interest quits too.
    Consumption phase: one item is drawn from the whole list with
    probability proportional to relevance (the ``sequential`` variant
    instead walks the list consuming with those probabilities until a
    trial succeeds).
    """
    n = len(items)
    if n == 0:
        raise ValueError("cannot examine an empty list")
    p = weariness_prob(t, params)
    random = rng.random

    interested = False
    examinations = 0
    for j in range(n):
        if random() < p:
            return StepOutcome(item=None, quit_reason=WEARINESS, examinations=j)
        examinations = j + 1
        if random() < b_list[j]:
            interested = True
            break
    if not interested:
        return StepOutcome(item=None, quit_reason=NO_INTEREST, examinations=n)

    total = 0.0
    last_positive = -1
    for j in range(n):
        w = relevances[j]
        if w > 0.0:
            total += w
            last_positive = j
    if last_positive < 0:
        if counters is not None:
            counters["uniform_consumption_fallback"] = counters.get("uniform_consumption_fallback", 0) + 1
        pick = min(int(random() * n), n - 1)
        return StepOutcome(item=items[pick], quit_reason=None, examinations=examinations)

    if sequential:
        for _ in range(10_000):
            for j in range(n):
                w = relevances[j]
                if w > 0.0 and random() < w / total:
                    return StepOutcome(item=items[j], quit_reason=None, examinations=examinations)
        if counters is not None:
            counters["sequential_consumption_fallback"] = counters.get("sequential_consumption_fallback", 0) + 1

    draw = random() * total
    acc = 0.0
    pick = last_positive
    for j in range(n):
        w = relevances[j]
        if w > 0.0:
            acc += w
            if draw < acc:
                pick = j
                break
    return StepOutcome(item=items[pick], quit_reason=None, examinations=examinations)
