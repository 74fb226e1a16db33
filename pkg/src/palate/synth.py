"""Synthetic catalogs and embeddings for tests, benchmarks, and simulations.

Vectors are drawn from a mixture of clusters on the unit sphere so the
similarity graph has real neighborhood structure.
"""

from __future__ import annotations

import json

import numpy as np

from .catalog import (
    Catalog,
    DietType,
    EmbeddingSet,
    Item,
    NutritionFacts,
    write_embeddings,
)

_ALL_DIETS = frozenset(DietType)

_SAFE_INGREDIENTS = (
    "rice", "tomato", "onion", "basil", "olive oil", "chickpeas", "lentils",
    "carrot", "potato", "garlic", "spinach", "pepper", "mushroom", "tofu",
)
_EXCLUDED_SAMPLES = ("pork", "shellfish", "blood sausage", "grain alcohol")


def make_vectors(
    n: int,
    dim: int = 16,
    clusters: int = 8,
    spread: float = 0.25,
    seed: int = 0,
    cap_radius: float | None = None,
) -> np.ndarray:
    """Cluster mixture on the unit sphere.

    With ``cap_radius`` set, cluster centres are confined to a spherical cap of
    roughly that radius around a random axis and ``spread`` is interpreted per
    unit of sqrt(dim), giving tight duplicate-style clusters inside a narrow
    cone. Without it, centres are uniform over the whole sphere.
    """
    rng = np.random.default_rng(seed)
    if cap_radius is None:
        centers = rng.normal(size=(clusters, dim))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
        assignment = rng.integers(0, clusters, size=n)
        points = centers[assignment] + spread * rng.normal(size=(n, dim))
    else:
        axis = rng.normal(size=dim)
        axis /= np.linalg.norm(axis)
        centers = axis[None, :] + cap_radius * rng.normal(size=(clusters, dim)) / np.sqrt(dim)
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
        assignment = rng.integers(0, clusters, size=n)
        points = centers[assignment] + spread * rng.normal(size=(n, dim)) / np.sqrt(dim)
    points /= np.linalg.norm(points, axis=1, keepdims=True)
    return points.astype(np.float32)


def make_catalog(
    n: int,
    seed: int = 0,
    excluded_fraction: float = 0.0,
    diet: DietType = DietType.NO_RESTRICTIONS,
) -> Catalog:
    """Synthetic catalog; `excluded_fraction` of items carry a kosher/halal
    excluded ingredient (useful for dietary-safety tests)."""
    rng = np.random.default_rng(seed)
    items = []
    for i in range(n):
        ingredients = list(rng.choice(_SAFE_INGREDIENTS, size=3, replace=False))
        if rng.random() < excluded_fraction:
            ingredients.append(str(rng.choice(_EXCLUDED_SAMPLES)))
        items.append(
            Item(
                id=f"item-{i:05d}",
                name=f"Dish {i}",
                image_url=f"https://img.example/{i:05d}.jpg",
                ingredients=tuple(ingredients),
                nutrition=NutritionFacts(
                    calories=float(rng.uniform(100, 900)),
                    protein=float(rng.uniform(2, 60)),
                    fat=float(rng.uniform(1, 50)),
                ),
                diet_tags=_ALL_DIETS,
            )
        )
    return Catalog(items=items, diet=diet)


def make_assets(
    n: int,
    dim: int = 16,
    clusters: int = 8,
    spread: float = 0.25,
    seed: int = 0,
    excluded_fraction: float = 0.0,
    cap_radius: float | None = None,
) -> tuple[Catalog, EmbeddingSet]:
    catalog = make_catalog(n, seed=seed, excluded_fraction=excluded_fraction)
    vectors = make_vectors(
        n, dim=dim, clusters=clusters, spread=spread, seed=seed + 1, cap_radius=cap_radius
    )
    embeddings = EmbeddingSet(item_ids=catalog.ids(), dim=dim, vectors=vectors)
    return catalog, embeddings


def write_catalog_jsonl(path, catalog: Catalog) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in catalog.items:
            fh.write(
                json.dumps(
                    {
                        "id": item.id,
                        "name": item.name,
                        "image_url": item.image_url,
                        "ingredients": list(item.ingredients),
                        "calories": item.nutrition.calories,
                        "protein": item.nutrition.protein,
                        "fat": item.nutrition.fat,
                        "diet_tags": sorted(t.value for t in item.diet_tags),
                    }
                )
                + "\n"
            )


def write_assets(catalog_path, embeddings_path, catalog: Catalog, embeddings: EmbeddingSet) -> None:
    write_catalog_jsonl(catalog_path, catalog)
    write_embeddings(embeddings_path, embeddings.item_ids, embeddings.vectors)
