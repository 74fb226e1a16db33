"""Re-rank the nutritionally appropriate candidate pool by learned preferences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import Catalog
from .errors import EmptyPool
from .nutrition import CandidatePool

DEFAULT_TOP_N = 10


@dataclass(frozen=True)
class Recommendation:
    id: str
    name: str
    image_url: str
    calories: float
    protein: float
    fat: float
    preference: float
    suitability: float

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "image_url": self.image_url,
            "calories": self.calories,
            "protein": self.protein,
            "fat": self.fat,
            "preference": self.preference,
            "suitability": self.suitability,
        }


def _build(catalog: Catalog, item_id: str, preference: float, suitability: float) -> Recommendation:
    item = catalog.items[catalog.index_of[item_id]]
    return Recommendation(
        id=item.id,
        name=item.name,
        image_url=item.image_url,
        calories=item.nutrition.calories,
        protein=item.nutrition.protein,
        fat=item.nutrition.fat,
        preference=preference,
        suitability=suitability,
    )


def recommend(
    preferences: np.ndarray,
    pool: CandidatePool,
    catalog: Catalog,
    N: int = DEFAULT_TOP_N,
) -> list[Recommendation]:
    """Top-N pool members by descending preference; ties by ascending
    suitability then item id."""
    if len(pool) == 0:
        raise EmptyPool("candidate pool is empty")
    entries = [
        (item_id, float(preferences[catalog.index_of[item_id]]), score)
        for item_id, score in zip(pool.item_ids, pool.scores)
    ]
    entries.sort(key=lambda e: (-e[1], e[2], e[0]))
    return [_build(catalog, iid, pref, suit) for iid, pref, suit in entries[:N]]


def baseline_recommend(
    pool: CandidatePool,
    catalog: Catalog,
    N: int = DEFAULT_TOP_N,
    seed: int = 0,
    exclude: set[str] | None = None,
) -> list[Recommendation]:
    """Seeded uniform sample without replacement from the pool (survey-only
    baseline).  `exclude` supports disjoint A/B recommendation lists."""
    if len(pool) == 0:
        raise EmptyPool("candidate pool is empty")
    candidates = [
        (iid, score)
        for iid, score in zip(pool.item_ids, pool.scores)
        if not exclude or iid not in exclude
    ]
    if not candidates:
        raise EmptyPool("no pool members left after exclusion")
    rng = np.random.default_rng(seed)
    size = min(N, len(candidates))
    picks = rng.choice(len(candidates), size=size, replace=False)
    return [_build(catalog, candidates[i][0], 0.0, candidates[i][1]) for i in picks]
