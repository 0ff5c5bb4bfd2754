"""Run configuration: a single YAML file drives the whole experiment.

All randomness derives from one top-level seed. Derived streams use
fixed domain tags: split = (seed, 101), matrix factorization =
(seed, 202), distance sampling = (seed, 303), and each simulation
stream = (seed, user, trial). A rerun with the same file is therefore
bit-for-bit reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from divrec.catalog import IngestionSchema
from divrec.strategies import STRATEGY_NAMES

SPLIT_SEED_TAG = 101
MF_SEED_TAG = 202
DISTANCE_SEED_TAG = 303


class ConfigError(ValueError):
    """Invalid run configuration; carries the full list of problems."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(problems))


@dataclass
class RunConfig:
    seed: int
    ratings_file: Path
    schema: IngestionSchema
    split_ratio: float = 0.8
    relevance_source: str = "mf"  # "mf" or "table"
    score_table_file: Path | None = None
    mf_factors: int = 8
    mf_epochs: int = 30
    mf_lr: float = 0.02
    mf_reg: float = 0.02
    distance_basis: str = "auto"
    distance_hot_items: int = 0
    distance_sample_pairs: int = 10_000
    distance_rating_weighted: bool = False
    gamma: float = 2.0
    expected_steps: list[float] = field(default_factory=lambda: [5.0, 10.0, 20.0])
    k: int = 10
    calibration: str = "series"  # "series" or "weibull_mean"
    sequential_consumption: bool = False
    strategies: list[tuple[str, dict]] = field(default_factory=list)
    trials: int = 20
    max_users: int | None = None
    prune_candidates: int | None = 500
    output_dir: Path = Path("out")
    workers: int = 1


def load_run_config(path: str | Path) -> RunConfig:
    """Parse and validate a YAML run config; raises ConfigError listing every problem."""
    path = Path(path)
    problems: list[str] = []
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError([f"config is not valid YAML: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a mapping"])

    base = path.resolve().parent

    def section(name: str) -> dict:
        value = raw.get(name, {})
        if value is None:
            return {}
        if not isinstance(value, dict):
            problems.append(f"{name}: must be a mapping")
            return {}
        return value

    if "seed" not in raw:
        problems.append("seed: required (runs must not fall back to wall-clock seeding)")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        problems.append("seed: must be an integer")
        seed = 0

    dataset = section("dataset")
    ratings_file = dataset.get("ratings_file")
    if not ratings_file:
        problems.append("dataset.ratings_file: required")
        ratings_path = base
    else:
        ratings_path = Path(ratings_file)
        if not ratings_path.is_absolute():
            ratings_path = base / ratings_path
        if not ratings_path.is_file():
            problems.append(f"dataset.ratings_file: file not found: {ratings_path}")

    scale = dataset.get("rating_scale", [1, 5])
    if not (isinstance(scale, (list, tuple)) and len(scale) == 2):
        problems.append("dataset.rating_scale: must be [lo, hi]")
        scale = [1, 5]
    schema = IngestionSchema(
        rating_scale=(float(scale[0]), float(scale[1])),
        delimiter=dataset.get("delimiter"),
        user_col=int(dataset.get("user_col", 0)),
        item_col=int(dataset.get("item_col", 1)),
        rating_col=int(dataset.get("rating_col", 2)),
        items_file=_resolve_optional(dataset.get("items_file"), base),
        items_delimiter=dataset.get("items_delimiter"),
        item_id_col=int(dataset.get("item_id_col", 0)),
        categories_col=int(dataset.get("categories_col", 1)),
        category_delimiter=dataset.get("category_delimiter", "|"),
        min_interactions=int(dataset.get("min_interactions", 5)),
        allow_uncategorized=bool(dataset.get("allow_uncategorized", False)),
    )
    for issue in schema.validate():
        problems.append(f"dataset.{issue}")

    split = section("split")
    split_ratio = float(split.get("ratio", 0.8))
    if not 0.0 < split_ratio < 1.0:
        problems.append(f"split.ratio: must be in (0, 1), got {split_ratio}")

    relevance = section("relevance")
    relevance_source = relevance.get("source", "mf")
    if relevance_source not in ("mf", "table"):
        problems.append(f"relevance.source: must be 'mf' or 'table', got {relevance_source!r}")
    score_table_file = _resolve_optional(relevance.get("table_file"), base)
    if relevance_source == "table":
        if not score_table_file:
            problems.append("relevance.table_file: required when relevance.source is 'table'")
        elif not Path(score_table_file).is_file():
            problems.append(f"relevance.table_file: file not found: {score_table_file}")

    mf = section("mf")
    mf_factors = int(mf.get("factors", 8))
    mf_epochs = int(mf.get("epochs", 30))
    mf_lr = float(mf.get("lr", 0.02))
    mf_reg = float(mf.get("reg", 0.02))
    if mf_factors < 1:
        problems.append("mf.factors: must be >= 1")
    if mf_epochs < 1:
        problems.append("mf.epochs: must be >= 1")
    if mf_lr <= 0:
        problems.append("mf.lr: must be > 0")
    if mf_reg < 0:
        problems.append("mf.reg: must be >= 0")

    distance = section("distance")
    distance_basis = distance.get("basis", "auto")
    if distance_basis not in ("auto", "users", "categories"):
        problems.append(f"distance.basis: must be auto|users|categories, got {distance_basis!r}")
    distance_hot_items = int(distance.get("hot_items", 0))
    distance_sample_pairs = int(distance.get("sample_pairs", 10_000))
    if distance_hot_items < 0:
        problems.append("distance.hot_items: must be >= 0")
    if distance_sample_pairs < 1:
        problems.append("distance.sample_pairs: must be >= 1")

    user_model = section("user_model")
    gamma = float(user_model.get("gamma", 2.0))
    if gamma <= 0:
        problems.append("user_model.gamma: must be > 0")
    esteps = user_model.get("expected_steps", [5, 10, 20])
    if not isinstance(esteps, (list, tuple)) or not esteps:
        problems.append("user_model.expected_steps: must be a nonempty list")
        esteps = [5]
    esteps = [float(e) for e in esteps]
    if any(e < 0.5 for e in esteps):
        problems.append("user_model.expected_steps: every target must be >= 0.5")
    k = int(user_model.get("k", 10))
    if k < 1:
        problems.append("user_model.k: must be >= 1")
    calibration = user_model.get("calibration", "series")
    if calibration not in ("series", "weibull_mean"):
        problems.append(
            f"user_model.calibration: must be 'series' or 'weibull_mean', got {calibration!r}"
        )

    strategies_raw = raw.get("strategies", [])
    strategies: list[tuple[str, dict]] = []
    if not isinstance(strategies_raw, list) or not strategies_raw:
        problems.append("strategies: must be a nonempty list")
    else:
        for pos, entry in enumerate(strategies_raw):
            if isinstance(entry, str):
                entry = {"name": entry}
            if not isinstance(entry, dict) or "name" not in entry:
                problems.append(f"strategies[{pos}]: each entry needs a name")
                continue
            name = entry["name"]
            if name not in STRATEGY_NAMES:
                problems.append(
                    f"strategies[{pos}].name: unknown strategy {name!r}; known: {', '.join(STRATEGY_NAMES)}"
                )
                continue
            params = entry.get("params", {}) or {}
            if not isinstance(params, dict):
                problems.append(f"strategies[{pos}].params: must be a mapping")
                continue
            strategies.append((name, params))

    experiment = section("experiment")
    trials = int(experiment.get("trials", 20))
    if trials < 1:
        problems.append("experiment.trials: must be >= 1")
    max_users = experiment.get("max_users")
    if max_users is not None:
        max_users = int(max_users)
        if max_users < 1:
            problems.append("experiment.max_users: must be >= 1 or null")
    prune = experiment.get("prune_candidates", 500)
    if prune is not None:
        prune = int(prune)
        if prune < 1:
            problems.append("experiment.prune_candidates: must be >= 1 or null")

    workers = int(raw.get("workers", 1))
    if workers < 1:
        problems.append("workers: must be >= 1")

    output_dir = Path(raw.get("output_dir", "out"))
    if not output_dir.is_absolute():
        output_dir = base / output_dir

    if problems:
        raise ConfigError(problems)

    return RunConfig(
        seed=seed,
        ratings_file=ratings_path,
        schema=schema,
        split_ratio=split_ratio,
        relevance_source=relevance_source,
        score_table_file=Path(score_table_file) if score_table_file else None,
        mf_factors=mf_factors,
        mf_epochs=mf_epochs,
        mf_lr=mf_lr,
        mf_reg=mf_reg,
        distance_basis=distance_basis,
        distance_hot_items=distance_hot_items,
        distance_sample_pairs=distance_sample_pairs,
        distance_rating_weighted=bool(distance.get("rating_weighted", False)),
        gamma=gamma,
        expected_steps=esteps,
        k=k,
        calibration=calibration,
        sequential_consumption=bool(user_model.get("sequential_consumption", False)),
        strategies=strategies,
        trials=trials,
        max_users=max_users,
        prune_candidates=prune,
        output_dir=output_dir,
        workers=workers,
    )


def _resolve_optional(value, base: Path) -> str | None:
    if not value:
        return None
    p = Path(value)
    if not p.is_absolute():
        p = base / p
    return str(p)
