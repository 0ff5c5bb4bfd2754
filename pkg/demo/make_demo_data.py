"""Regenerate the bundled demo dataset (deterministic; run from the repo root).

Thirty users rate a 80-item catalog of 8 content clusters; each user
favors one cluster, so a factor model has structure to learn and the
diversity strategies have something to trade off.
"""

from pathlib import Path

import numpy as np

OUT = Path(__file__).parent / "data"
N_USERS = 30
N_ITEMS = 80
N_CATEGORIES = 8
RATINGS_PER_USER = 16


def main() -> None:
    rng = np.random.default_rng(20240817)
    OUT.mkdir(parents=True, exist_ok=True)

    item_cluster = rng.integers(0, N_CATEGORIES, N_ITEMS)
    extra = rng.random(N_ITEMS) < 0.25  # a quarter of the items carry a second genre
    second = (item_cluster + 1 + rng.integers(0, N_CATEGORIES - 1, N_ITEMS)) % N_CATEGORIES

    items_lines = []
    for i in range(N_ITEMS):
        cats = {int(item_cluster[i])}
        if extra[i]:
            cats.add(int(second[i]))
        items_lines.append(f"item{i:03d}\t" + "|".join(f"genre{c}" for c in sorted(cats)))
    (OUT / "items.tsv").write_text("\n".join(items_lines) + "\n")

    lines = []
    for u in range(N_USERS):
        favorite = u % N_CATEGORIES
        in_cluster = np.flatnonzero(item_cluster == favorite)
        others = np.flatnonzero(item_cluster != favorite)
        n_in = min(len(in_cluster), RATINGS_PER_USER * 2 // 3)
        picks = list(rng.choice(in_cluster, size=n_in, replace=False))
        picks += list(rng.choice(others, size=RATINGS_PER_USER - n_in, replace=False))
        for i in picks:
            base = 4.3 if item_cluster[i] == favorite else 2.3
            rating = int(np.clip(round(base + rng.normal(0, 0.7)), 1, 5))
            lines.append(f"user{u:02d}\titem{int(i):03d}\t{rating}")
    (OUT / "ratings.tsv").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines)} ratings for {N_USERS} users over {N_ITEMS} items")


if __name__ == "__main__":
    main()
