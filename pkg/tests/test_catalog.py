import json
import math

import numpy as np
import pytest

from palate.catalog import (
    Catalog,
    DietType,
    EmbeddingSet,
    Item,
    KernelConfig,
    KernelParams,
    NutritionFacts,
    build_neighbor_index,
    estimate_kernel,
    ingredient_excluded,
    item_valid_for_diet,
    load_catalog,
    load_embeddings,
    pairwise_weight,
    write_embeddings,
)
from palate.errors import (
    BadMagic,
    DegenerateEmbeddings,
    EmptyAfterFilter,
    MissingEmbedding,
    ParseError,
    TooFewItems,
)


def record(i, **over):
    rec = {
        "id": f"item-{i:03d}",
        "name": f"Dish {i}",
        "image_url": f"https://img.example/{i}.jpg",
        "ingredients": ["rice", "tomato"],
        "calories": 400.0,
        "protein": 20.0,
        "fat": 10.0,
        "diet_tags": ["vegetarian", "vegan"],
    }
    rec.update(over)
    return rec


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


# --- diet parsing and ingredient exclusion ---

def test_diet_parse_normalizes():
    assert DietType.parse("Kosher") is DietType.KOSHER
    assert DietType.parse("no restrictions") is DietType.NO_RESTRICTIONS
    assert DietType.parse(DietType.HALAL) is DietType.HALAL


def test_diet_parse_rejects_unknown():
    with pytest.raises(ValueError):
        DietType.parse("pescatarian")


def test_exclusion_matches_whole_tokens_only():
    assert ingredient_excluded(["pork shoulder"], DietType.KOSHER)
    assert ingredient_excluded(["smoked PORK"], DietType.KOSHER)
    assert not ingredient_excluded(["porkchop seasoning"], DietType.KOSHER)
    assert not ingredient_excluded(["sporkful mix"], DietType.KOSHER)


def test_exclusion_multiword_needs_consecutive_tokens():
    assert ingredient_excluded(["blood sausage"], DietType.HALAL)
    assert ingredient_excluded(["spicy blood sausage links"], DietType.HALAL)
    # "blood" alone is also on the halal list
    assert ingredient_excluded(["blood orange"], DietType.HALAL)
    # but not on the kosher list
    assert not ingredient_excluded(["blood sausage"], DietType.KOSHER)


def test_exclusion_lists_differ_by_diet():
    assert ingredient_excluded(["shellfish"], DietType.KOSHER)
    assert not ingredient_excluded(["shellfish"], DietType.HALAL)
    assert ingredient_excluded(["grain alcohol"], DietType.HALAL)
    assert not ingredient_excluded(["grain alcohol"], DietType.KOSHER)


def test_tag_based_diets_use_tags_not_ingredients():
    item = Item(
        id="a", name="A", image_url="u", ingredients=("tofu",),
        nutrition=NutritionFacts(1, 1, 1), diet_tags=frozenset({DietType.VEGETARIAN}),
    )
    assert item_valid_for_diet(item, DietType.VEGETARIAN)
    assert not item_valid_for_diet(item, DietType.VEGAN)
    assert item_valid_for_diet(item, DietType.NO_RESTRICTIONS)


# --- catalog loading ---

def test_load_catalog_roundtrip(tmp_path):
    path = tmp_path / "cat.jsonl"
    write_jsonl(path, [record(i) for i in range(3)])
    catalog = load_catalog(path, "no_restrictions")
    assert len(catalog) == 3
    assert catalog.rejected == 0
    assert catalog.ids() == ["item-000", "item-001", "item-002"]
    assert catalog.index_of["item-001"] == 1


def test_load_catalog_skips_blank_lines(tmp_path):
    path = tmp_path / "cat.jsonl"
    with open(path, "w") as fh:
        fh.write(json.dumps(record(0)) + "\n\n" + json.dumps(record(1)) + "\n")
    assert len(load_catalog(path, DietType.NO_RESTRICTIONS)) == 2


def test_load_catalog_missing_required_field_is_parse_error(tmp_path):
    path = tmp_path / "cat.jsonl"
    rec = record(0)
    del rec["name"]
    write_jsonl(path, [record(1), rec])
    with pytest.raises(ParseError) as exc:
        load_catalog(path, DietType.NO_RESTRICTIONS)
    assert exc.value.line == 2


def test_load_catalog_invalid_json_is_parse_error(tmp_path):
    path = tmp_path / "cat.jsonl"
    path.write_text('{"id": "a"\n')
    with pytest.raises(ParseError):
        load_catalog(path, DietType.NO_RESTRICTIONS)


def test_load_catalog_duplicate_id_is_parse_error(tmp_path):
    path = tmp_path / "cat.jsonl"
    write_jsonl(path, [record(0), record(0)])
    with pytest.raises(ParseError):
        load_catalog(path, DietType.NO_RESTRICTIONS)


def test_load_catalog_rejects_bad_nutrition_and_missing_image(tmp_path):
    path = tmp_path / "cat.jsonl"
    write_jsonl(path, [
        record(0),
        record(1, calories=-5.0),          # negative
        record(2, protein="not-a-number"),
        record(3, fat=float("nan")),
        record(4, image_url=""),
        {k: v for k, v in record(5).items() if k != "calories"},
    ])
    catalog = load_catalog(path, DietType.NO_RESTRICTIONS)
    assert len(catalog) == 1
    assert catalog.rejected == 5


def test_load_catalog_filters_by_diet(tmp_path):
    path = tmp_path / "cat.jsonl"
    write_jsonl(path, [
        record(0),
        record(1, ingredients=["pork", "rice"]),
        record(2, ingredients=["grain alcohol"]),
    ])
    kosher = load_catalog(path, DietType.KOSHER)
    assert kosher.ids() == ["item-000", "item-002"]
    halal = load_catalog(path, DietType.HALAL)
    assert halal.ids() == ["item-000"]


def test_load_catalog_empty_after_filter(tmp_path):
    path = tmp_path / "cat.jsonl"
    write_jsonl(path, [record(0, ingredients=["pork"])])
    with pytest.raises(EmptyAfterFilter):
        load_catalog(path, DietType.KOSHER)


# --- embeddings ---

def make_catalog_items(n):
    return Catalog(
        items=[
            Item(
                id=f"item-{i:03d}", name=f"D{i}", image_url="u",
                ingredients=("rice",), nutrition=NutritionFacts(1, 1, 1),
            )
            for i in range(n)
        ],
        diet=DietType.NO_RESTRICTIONS,
    )


def test_embeddings_roundtrip_unit_rows(tmp_path):
    path = tmp_path / "emb.bin"
    rng = np.random.default_rng(3)
    vectors = rng.normal(size=(5, 4))
    catalog = make_catalog_items(5)
    write_embeddings(path, catalog.ids(), vectors)
    emb = load_embeddings(path, catalog)
    assert emb.dim == 4
    assert emb.item_ids == catalog.ids()
    norms = np.linalg.norm(emb.vectors.astype(np.float64), axis=1)
    assert np.all(np.abs(norms - 1.0) <= 1e-6)
    # directions preserved
    for i in range(5):
        expect = vectors[i] / np.linalg.norm(vectors[i])
        assert np.allclose(emb.vectors[i], expect, atol=1e-6)


def test_embeddings_join_by_id_ignores_extra_rows(tmp_path):
    path = tmp_path / "emb.bin"
    catalog = make_catalog_items(2)
    write_embeddings(path, ["item-001", "extra", "item-000"], np.eye(3))
    emb = load_embeddings(path, catalog)
    assert np.allclose(emb.vectors[0], [0, 0, 1])  # item-000 row
    assert np.allclose(emb.vectors[1], [1, 0, 0])  # item-001 row


def test_embeddings_bad_magic(tmp_path):
    path = tmp_path / "emb.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(BadMagic):
        load_embeddings(path, make_catalog_items(1))


def test_embeddings_missing_id(tmp_path):
    path = tmp_path / "emb.bin"
    write_embeddings(path, ["item-000"], np.eye(1, 3))
    with pytest.raises(MissingEmbedding):
        load_embeddings(path, make_catalog_items(2))


def test_embeddings_zero_vector_rejected(tmp_path):
    path = tmp_path / "emb.bin"
    write_embeddings(path, ["item-000"], np.zeros((1, 3)))
    with pytest.raises(ParseError):
        load_embeddings(path, make_catalog_items(1))


def test_embeddings_truncated_record(tmp_path):
    path = tmp_path / "emb.bin"
    write_embeddings(path, ["item-000"], np.eye(1, 3))
    data = path.read_bytes()
    path.write_bytes(data[:-4])
    with pytest.raises(ParseError):
        load_embeddings(path, make_catalog_items(1))


# --- kernel estimation ---

def embset(vectors):
    vectors = np.asarray(vectors, dtype=np.float32)
    return EmbeddingSet(
        item_ids=[f"item-{i:03d}" for i in range(len(vectors))],
        dim=vectors.shape[1],
        vectors=vectors,
    )


def test_kernel_two_point_oracle():
    # points (0,0) and (3,4): mean squared distance over ordered pairs
    # including self-pairs is (0 + 25 + 25 + 0) / 4 = 12.5
    emb = embset([[0.0, 0.0], [3.0, 4.0]])
    kernel = estimate_kernel(emb, KernelConfig(delta_percentile=50.0))
    assert kernel.alpha_sq == pytest.approx(12.5, abs=1e-12)
    assert kernel.delta == pytest.approx(2.0)  # capped at 2


def test_kernel_delta_absolute():
    emb = embset([[0.0, 0.0], [3.0, 4.0]])
    kernel = estimate_kernel(emb, KernelConfig(delta_percentile=None, delta_absolute=0.7))
    assert kernel.delta == 0.7


def test_kernel_config_delta_options_are_exclusive():
    with pytest.raises(ValueError):
        KernelConfig(delta_percentile=5.0, delta_absolute=1.0)
    with pytest.raises(ValueError):
        KernelConfig(delta_percentile=None, delta_absolute=None)


def test_kernel_needs_two_items():
    with pytest.raises(TooFewItems):
        estimate_kernel(embset([[1.0, 0.0]]))


def test_kernel_degenerate_identical_points():
    emb = embset([[1.0, 0.0]] * 4)
    with pytest.raises(DegenerateEmbeddings):
        estimate_kernel(emb)


def test_kernel_duplicate_heavy_falls_back_to_smallest_positive_distance():
    emb = embset([[1.0, 0.0]] * 9 + [[0.0, 1.0]])
    kernel = estimate_kernel(emb, KernelConfig(delta_percentile=1.0))
    assert kernel.delta == pytest.approx(math.sqrt(2.0), rel=1e-6)


def test_pairwise_weight_value_and_cutoff():
    kernel = KernelParams(alpha_sq=12.5, delta=5.0)
    assert pairwise_weight([0, 0], [3, 4], kernel) == pytest.approx(
        0.36787944117144233, abs=1e-15
    )
    assert pairwise_weight([0, 0], [3, 4.001], kernel) == 0.0
    assert pairwise_weight([1, 1], [1, 1], kernel) == 1.0


# --- neighbor index ---

def test_neighbor_index_matches_pairwise_oracle(rng):
    vectors = rng.normal(size=(40, 6)).astype(np.float32)
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    emb = embset(vectors)
    kernel = estimate_kernel(emb, KernelConfig(delta_percentile=30.0))
    index = build_neighbor_index(emb, kernel)
    X = emb.vectors.astype(np.float64)
    for i in range(len(emb)):
        nbrs, wts = index.neighbors(i)
        assert list(nbrs) == sorted(nbrs)
        stored = dict(zip(nbrs.tolist(), wts.tolist()))
        assert stored[i] == 1.0
        for j in range(len(emb)):
            expected = 1.0 if j == i else pairwise_weight(X[i], X[j], kernel)
            if expected > 0.0:
                assert stored[j] == pytest.approx(expected, abs=1e-15)
            else:
                assert j not in stored


def test_neighborhood_mask_is_union_of_neighbor_sets(small_assets):
    _, _, _, index = small_assets
    mask = index.neighborhood_mask([0, 5])
    expected = np.zeros(len(index), dtype=bool)
    expected[index.neighbors(0)[0]] = True
    expected[index.neighbors(5)[0]] = True
    assert np.array_equal(mask, expected)
