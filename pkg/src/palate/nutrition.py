"""Nutrient suitability ranking and candidate-pool selection.

Each item gets six ranks (ascending and descending per nutrient); the
suitability score sums the ranks activated by the user's directives, so a
lower score means a better fit.  The top-M lowest scores form the candidate
pool of nutritionally appropriate meals.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .catalog import Catalog, DietType

NUTRIENTS = ("calories", "protein", "fat")

DEFAULT_POOL_SIZE = 500


class NutrientDirective(str, Enum):
    REDUCE = "reduce"
    MAINTAIN = "maintain"
    INCREASE = "increase"

    @classmethod
    def parse(cls, value) -> "NutrientDirective":
        if isinstance(value, NutrientDirective):
            return value
        key = str(value).strip().lower()
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown nutrient directive {value!r}")


@dataclass(frozen=True)
class GoalProfile:
    diet: DietType
    calories: NutrientDirective
    protein: NutrientDirective
    fat: NutrientDirective

    @classmethod
    def from_dict(cls, payload: dict) -> "GoalProfile":
        return cls(
            diet=DietType.parse(payload["diet"]),
            calories=NutrientDirective.parse(payload["calories"]),
            protein=NutrientDirective.parse(payload["protein"]),
            fat=NutrientDirective.parse(payload["fat"]),
        )

    def to_dict(self) -> dict:
        return {
            "diet": self.diet.value,
            "calories": self.calories.value,
            "protein": self.protein.value,
            "fat": self.fat.value,
        }

    def directive(self, nutrient: str) -> NutrientDirective:
        return getattr(self, nutrient)


def rank_by_nutrient(catalog: Catalog, nutrient: str, order: str = "ascending") -> np.ndarray:
    """1-based ranks per item; ties broken by stable ascending item id."""
    if nutrient not in NUTRIENTS:
        raise ValueError(f"unknown nutrient {nutrient!r}")
    if order not in ("ascending", "descending"):
        raise ValueError(f"order must be ascending or descending, got {order!r}")
    reverse = order == "descending"
    keyed = sorted(
        range(len(catalog)),
        key=lambda i: (
            -getattr(catalog.items[i].nutrition, nutrient)
            if reverse
            else getattr(catalog.items[i].nutrition, nutrient),
            catalog.items[i].id,
        ),
    )
    ranks = np.empty(len(catalog), dtype=np.int64)
    for rank, idx in enumerate(keyed, start=1):
        ranks[idx] = rank
    return ranks


@dataclass
class SuitabilityTable:
    """Six rank columns keyed by (nutrient, direction); direction 'a' or 'd'."""

    ranks: dict[tuple[str, str], np.ndarray]
    size: int

    @classmethod
    def build(cls, catalog: Catalog) -> "SuitabilityTable":
        ranks = {}
        for nutrient in NUTRIENTS:
            ranks[(nutrient, "a")] = rank_by_nutrient(catalog, nutrient, "ascending")
            ranks[(nutrient, "d")] = rank_by_nutrient(catalog, nutrient, "descending")
        return cls(ranks=ranks, size=len(catalog))


def suitability_score(table: SuitabilityTable, profile: GoalProfile) -> np.ndarray:
    """Rank-sum score per item; all-maintain yields the all-zero vector."""
    scores = np.zeros(table.size, dtype=np.float64)
    for nutrient in NUTRIENTS:
        directive = profile.directive(nutrient)
        if directive is NutrientDirective.REDUCE:
            scores += table.ranks[(nutrient, "a")]
        elif directive is NutrientDirective.INCREASE:
            scores += table.ranks[(nutrient, "d")]
    return scores


@dataclass
class CandidatePool:
    item_ids: list[str]
    scores: list[float]  # ascending; aligned with item_ids

    def __len__(self):
        return len(self.item_ids)


def select_candidate_pool(
    scores: np.ndarray,
    item_ids: list[str],
    M: int = DEFAULT_POOL_SIZE,
    seed: int = 0,
) -> CandidatePool:
    if M < 1:
        raise ValueError("M must be >= 1")
    n = len(item_ids)
    size = min(M, n)
    scores = np.asarray(scores, dtype=np.float64)
    if n and np.all(scores == scores[0]):
        # equal rankings (all-maintain): seeded uniform sample
        rng = np.random.default_rng(seed)
        chosen = sorted(rng.choice(n, size=size, replace=False).tolist(), key=lambda i: item_ids[i])
        return CandidatePool(
            item_ids=[item_ids[i] for i in chosen],
            scores=[float(scores[i]) for i in chosen],
        )
    order = sorted(range(n), key=lambda i: (scores[i], item_ids[i]))[:size]
    return CandidatePool(
        item_ids=[item_ids[i] for i in order],
        scores=[float(scores[i]) for i in order],
    )
