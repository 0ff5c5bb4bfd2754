"""divrec: simulation and strategy library for diversity-aware recommendation.

A stochastic user interacts with a recommender, examining one list per
step and quitting according to a discrete-Weibull patience model.
Strategies (pure relevance, MMR, DUM, greedy DPP, and a Clayton-copula
relevance/diversity combiner) compete to maximize the diversity of the
user's final interaction set.
"""

from divrec.catalog import Catalog, IngestionSchema, SplitPair, load_dataset, split_interactions
from divrec.distance import DistanceModel, build_distance_model, choose_basis, jaccard_distance
from divrec.diversity import InteractionSet, coverage_diversity, distance_diversity, marginal_diversity
from divrec.relevance import FrozenRelevanceModel, MfModel, interest_prob, minmax_normalize, train_mf
from divrec.user_model import (
    StepOutcome,
    UserModelParams,
    expected_steps,
    lambda_for_weibull_mean,
    round_quit_prob,
    solve_lambda,
    step_behavior,
    weariness_prob,
)
from divrec.simulator import ExplorationTrace, simulate_user, run_experiment
from divrec.strategies import clayton_copula, make_strategy

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "DistanceModel",
    "ExplorationTrace",
    "FrozenRelevanceModel",
    "IngestionSchema",
    "InteractionSet",
    "MfModel",
    "SplitPair",
    "StepOutcome",
    "UserModelParams",
    "build_distance_model",
    "choose_basis",
    "clayton_copula",
    "coverage_diversity",
    "distance_diversity",
    "expected_steps",
    "interest_prob",
    "jaccard_distance",
    "lambda_for_weibull_mean",
    "load_dataset",
    "make_strategy",
    "marginal_diversity",
    "minmax_normalize",
    "round_quit_prob",
    "run_experiment",
    "simulate_user",
    "solve_lambda",
    "split_interactions",
    "step_behavior",
    "train_mf",
    "weariness_prob",
]
