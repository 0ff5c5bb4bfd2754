"""Exploration loop and experiment orchestration.

One simulation repeatedly asks a strategy for a list over the not-yet-
consumed items, runs the stochastic user on it, and accumulates the
consumed set until the user quits (or the catalog runs out). Experiments
run each strategy for several independent trials over a user sample and
aggregate diversity, session length, first-list accuracy, distances from
the score ceilings, and significance tests.

Every (user, trial) pair owns an independent random stream derived from
the experiment seed, so results do not depend on scheduling order and
parallel runs reproduce serial ones bit for bit.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from divrec.catalog import Catalog, RatingsView
from divrec.distance import DistanceModel
from divrec.diversity import InteractionSet
from divrec.metrics import AnovaResult, accuracy_at_k, anova_oneway, delta_from_max, max_scores
from divrec.relevance import interest_prob_many
from divrec.strategies import Strategy, make_strategy
from divrec.user_model import POOL_EXHAUSTED, UserModelParams, expected_steps, step_behavior


@dataclass
class ExplorationTrace:
    """Outcome of one simulated session."""

    user: int
    picked: InteractionSet
    kappa: int  # rounds executed, including the final quit round if any
    quit_reason: str
    first_list: np.ndarray
    per_step_lists: list[np.ndarray] | None
    counters: dict[str, int]

    @property
    def steps(self) -> int:
        """Number of consumed items; the session-length statistic in reports."""
        return len(self.picked)


def simulate_user(
    user: int,
    strategy: Strategy,
    relevance,
    dist: DistanceModel,
    catalog: Catalog,
    params: UserModelParams,
    rng: np.random.Generator,
    *,
    prune_candidates: int | None = None,
    record_lists: bool = False,
    sequential: bool = False,
) -> ExplorationTrace:
    """Run one user session until quit or pool exhaustion.

    Candidates are always the items not yet consumed; when the pool
    shrinks below the list length the remaining candidates are offered
    as a shorter list. ``prune_candidates`` keeps only the most relevant
    N candidates before the strategy sees them (disable for oracle
    comparisons).
    """
    n_items = catalog.n_items
    has_categories = catalog.n_categories > 0
    mask = np.ones(n_items, dtype=bool)
    picked = InteractionSet(catalog.n_categories)
    counters: dict[str, int] = {}
    lists: list[np.ndarray] | None = [] if record_lists else None
    first_list: np.ndarray | None = None
    rounds = 0
    reason = POOL_EXHAUSTED

    while True:
        candidates = np.flatnonzero(mask)
        if candidates.size == 0:
            break
        scores = relevance.score_many(user, candidates)
        if prune_candidates is not None and candidates.size > prune_candidates:
            keep = np.sort(np.argsort(-scores, kind="stable")[:prune_candidates])
            candidates = candidates[keep]
            scores = scores[keep]
        current = strategy.next_list(user, candidates, scores, picked)
        if first_list is None:
            first_list = current.copy()
        if lists is not None:
            lists.append(current.copy())
        rel = scores[np.searchsorted(candidates, current)]
        b = interest_prob_many(rel, params.scale)
        outcome = step_behavior(
            current, b, rel, rounds, params, rng, sequential=sequential, counters=counters
        )
        rounds += 1
        if outcome.consumed:
            item = int(outcome.item)
            picked.add(item, dist, categories=catalog.item_categories[item] if has_categories else None)
            mask[item] = False
        else:
            reason = outcome.quit_reason
            break

    return ExplorationTrace(
        user=user,
        picked=picked,
        kappa=rounds,
        quit_reason=reason,
        first_list=first_list if first_list is not None else np.zeros(0, dtype=np.int64),
        per_step_lists=lists,
        counters=counters,
    )


# -- experiments ------------------------------------------------------------


@dataclass
class StrategyResult:
    """Aggregates for one strategy at one expected-steps setting."""

    strategy: str
    esteps_target: float
    achieved_esteps: float
    div_d_mean: float
    div_d_std: float
    div_c_mean: float
    div_c_std: float
    steps_mean: float
    steps_std: float
    delta_d: float
    delta_c: float
    delta_steps: float
    hr_at_k: float
    precision_at_k: float
    recall_at_k: float
    div_d_trials: list[float]
    div_c_trials: list[float]
    steps_trials: list[float]

    def row(self) -> dict:
        return {
            "strategy": self.strategy,
            "expected_steps": self.esteps_target,
            "div_d": self.div_d_mean,
            "div_d_std": self.div_d_std,
            "div_c": self.div_c_mean,
            "div_c_std": self.div_c_std,
            "steps": self.steps_mean,
            "steps_std": self.steps_std,
            "delta_d": self.delta_d,
            "delta_c": self.delta_c,
            "delta_steps": self.delta_steps,
            "hr_at_k": self.hr_at_k,
            "precision_at_k": self.precision_at_k,
            "recall_at_k": self.recall_at_k,
        }


@dataclass
class ExperimentReport:
    results: list[StrategyResult]
    anova: list[dict]
    ceilings: dict[float, dict]
    errors: list[dict] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=dict)
    zero_distance_pairs: int = 0

    def to_dict(self) -> dict:
        return {
            "results": [
                {**r.row(),
                 "achieved_expected_steps": r.achieved_esteps,
                 "div_d_trials": r.div_d_trials,
                 "div_c_trials": r.div_c_trials,
                 "steps_trials": r.steps_trials}
                for r in self.results
            ],
            "anova": self.anova,
            "ceilings": {str(k): v for k, v in self.ceilings.items()},
            "errors": self.errors,
            "counters": self.counters,
            "zero_distance_pairs": self.zero_distance_pairs,
        }


@dataclass
class _UnitSpec:
    esteps_idx: int
    strategy_idx: int
    trial: int


_WORKER_CTX: dict | None = None


def _init_worker(ctx: dict) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _run_unit_with_ctx(spec: _UnitSpec) -> tuple:
    return _run_unit(_WORKER_CTX, spec)


def _run_unit(ctx: dict, spec: _UnitSpec) -> tuple:
    """Simulate all users for one (esteps, strategy, trial) work unit."""
    esteps_target, params = ctx["params_list"][spec.esteps_idx]
    name, s_params = ctx["strategy_specs"][spec.strategy_idx]
    strategy = make_strategy(
        name, s_params, catalog=ctx["catalog"], dist=ctx["dist"], k=params.k
    )
    zero_pairs_before = ctx["dist"].zero_pair_count
    per_user = []
    counters: dict[str, int] = {}
    for user in ctx["users"]:
        rng = np.random.default_rng(np.random.SeedSequence([ctx["seed"], user, spec.trial]))
        trace = simulate_user(
            user,
            strategy,
            ctx["relevance"],
            ctx["dist"],
            ctx["catalog"],
            params,
            rng,
            prune_candidates=ctx["prune_candidates"],
            sequential=ctx["sequential"],
        )
        accuracy = None
        if spec.trial == 0:
            test_items = ctx["test_items"].get(user)
            if test_items:
                accuracy = accuracy_at_k(trace.first_list.tolist(), test_items, params.k)
        per_user.append((user, trace.picked.div_d(), trace.picked.div_c(), trace.steps, accuracy))
        for key, val in trace.counters.items():
            counters[key] = counters.get(key, 0) + val
    for key, val in strategy.counters.items():
        counters[key] = counters.get(key, 0) + val
    zero_pairs = ctx["dist"].zero_pair_count - zero_pairs_before
    if zero_pairs:
        counters["zero_distance_pairs"] = counters.get("zero_distance_pairs", 0) + zero_pairs
    return per_user, counters


def run_experiment(
    *,
    catalog: Catalog,
    dist: DistanceModel,
    relevance,
    test_view: RatingsView | None,
    strategy_specs: list[tuple[str, dict]],
    params_list: list[tuple[float, UserModelParams]],
    trials: int,
    seed: int,
    users: list[int] | None = None,
    prune_candidates: int | None = 500,
    sequential: bool = False,
    workers: int = 1,
) -> ExperimentReport:
    """Run every strategy for ``trials`` independent trials at each patience setting.

    ``params_list`` pairs each expected-steps target with its calibrated
    user-model parameters. Failed work units are recorded in the report
    and excluded from aggregation, never silently dropped. Results are
    merged by (setting, strategy, trial) key, so worker scheduling cannot
    change the report.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not strategy_specs:
        raise ValueError("no strategies configured")
    test_items: dict[int, set[int]] = {}
    if test_view is not None:
        test_items = {u: set(view.keys()) for u, view in test_view.ratings.items() if view}
    if users is None:
        users = sorted(test_items) if test_items else list(range(catalog.n_users))
    if not users:
        raise ValueError("no eligible users to simulate")

    ctx = {
        "catalog": catalog,
        "dist": dist,
        "relevance": relevance,
        "strategy_specs": strategy_specs,
        "params_list": params_list,
        "users": users,
        "seed": seed,
        "prune_candidates": prune_candidates,
        "sequential": sequential,
        "test_items": test_items,
    }
    units = [
        _UnitSpec(e, s, t)
        for e in range(len(params_list))
        for s in range(len(strategy_specs))
        for t in range(trials)
    ]

    outcomes: dict[tuple[int, int, int], tuple] = {}
    errors: list[dict] = []

    def record_error(spec: _UnitSpec, exc: Exception) -> None:
        errors.append(
            {
                "expected_steps": params_list[spec.esteps_idx][0],
                "strategy": strategy_specs[spec.strategy_idx][0],
                "trial": spec.trial,
                "error": f"{type(exc).__name__}: {exc}",
            }
        )

    if workers > 1:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(ctx,)
        ) as pool:
            futures = {
                pool.submit(_run_unit_with_ctx, spec): spec for spec in units
            }
            for future, spec in futures.items():
                try:
                    outcomes[(spec.esteps_idx, spec.strategy_idx, spec.trial)] = future.result()
                except Exception as exc:  # noqa: BLE001 - recorded, never silent
                    record_error(spec, exc)
    else:
        for spec in units:
            try:
                outcomes[(spec.esteps_idx, spec.strategy_idx, spec.trial)] = _run_unit(ctx, spec)
            except Exception as exc:  # noqa: BLE001 - recorded, never silent
                record_error(spec, exc)

    ceilings: dict[float, dict] = {}
    for esteps_target, params in params_list:
        d_bar, c_bar = max_scores(catalog, params)
        ceilings[esteps_target] = {
            "d_bar": d_bar,
            "c_bar": c_bar,
            "achieved_expected_steps": expected_steps(params),
            "lambda": params.lam,
            "gamma": params.gamma,
            "coverage_ceiling_is_greedy_lower_bound": True,
        }

    results: list[StrategyResult] = []
    anova_rows: list[dict] = []
    total_counters: dict[str, int] = {}
    for e_idx, (esteps_target, params) in enumerate(params_list):
        groups: dict[str, dict[str, list[float]]] = {}
        for s_idx, (name, _params) in enumerate(strategy_specs):
            label = _strategy_label(strategy_specs, s_idx)
            div_d_trials, div_c_trials, steps_trials = [], [], []
            acc_rows: list[tuple[float, float, float]] = []
            for trial in range(trials):
                unit = outcomes.get((e_idx, s_idx, trial))
                if unit is None:
                    continue
                per_user, counters = unit
                for key, val in counters.items():
                    total_counters[key] = total_counters.get(key, 0) + val
                div_d_trials.append(float(np.mean([r[1] for r in per_user])))
                div_c_trials.append(float(np.mean([r[2] for r in per_user])))
                steps_trials.append(float(np.mean([r[3] for r in per_user])))
                if trial == 0:
                    acc_rows = [r[4] for r in per_user if r[4] is not None]
            if not div_d_trials:
                continue
            ceiling = ceilings[esteps_target]
            achieved = ceiling["achieved_expected_steps"]
            hr, prec, rec = (
                tuple(float(np.mean([a[j] for a in acc_rows])) for j in range(3))
                if acc_rows
                else (float("nan"),) * 3
            )
            results.append(
                StrategyResult(
                    strategy=label,
                    esteps_target=esteps_target,
                    achieved_esteps=achieved,
                    div_d_mean=float(np.mean(div_d_trials)),
                    div_d_std=float(np.std(div_d_trials)),
                    div_c_mean=float(np.mean(div_c_trials)),
                    div_c_std=float(np.std(div_c_trials)),
                    steps_mean=float(np.mean(steps_trials)),
                    steps_std=float(np.std(steps_trials)),
                    delta_d=delta_from_max(ceiling["d_bar"], float(np.mean(div_d_trials))),
                    delta_c=delta_from_max(ceiling["c_bar"], float(np.mean(div_c_trials))),
                    delta_steps=delta_from_max(achieved, float(np.mean(steps_trials))),
                    hr_at_k=hr,
                    precision_at_k=prec,
                    recall_at_k=rec,
                    div_d_trials=div_d_trials,
                    div_c_trials=div_c_trials,
                    steps_trials=steps_trials,
                )
            )
            groups[label] = {
                "div_d": div_d_trials,
                "div_c": div_c_trials,
                "steps": steps_trials,
            }
        if len(groups) >= 2 and trials >= 2:
            for metric in ("div_d", "div_c", "steps"):
                samples = [groups[label][metric] for label in groups]
                res: AnovaResult = anova_oneway(samples)
                anova_rows.append(
                    {
                        "expected_steps": esteps_target,
                        "metric": metric,
                        "f": res.f,
                        "p": res.p,
                        "note": res.note,
                    }
                )

    return ExperimentReport(
        results=results,
        anova=anova_rows,
        ceilings=ceilings,
        errors=errors,
        counters=total_counters,
        zero_distance_pairs=total_counters.get("zero_distance_pairs", 0),
    )


def _strategy_label(specs: list[tuple[str, dict]], idx: int) -> str:
    """Unique row label; duplicate names get a positional suffix."""
    name = specs[idx][0]
    if sum(1 for n, _ in specs if n == name) == 1:
        return name
    ordinal = sum(1 for n, _ in specs[: idx + 1] if n == name)
    return f"{name}#{ordinal}"
