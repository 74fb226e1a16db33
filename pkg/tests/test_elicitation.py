import math

import numpy as np
import pytest

from palate.catalog import EmbeddingSet, KernelParams, build_neighbor_index
from palate.elicitation import (
    GRID_SIZE,
    MIN_CATALOG_SIZE,
    PHASE1_ITERATIONS,
    Elicitor,
    Phase,
    Presentation,
    Selector,
    StrategyConfig,
    Updater,
    UserState,
    apply_exponentiated_update,
    bottom_fraction,
    entropy,
    fused_update_vector,
    init_state,
    kmeans_pp,
    label_vector,
    perceptron_update,
    propagate,
    select,
    top_fraction,
    update,
)
from palate.errors import CatalogTooSmall, NotEnoughItems, SelectionNotSubset


def embset(vectors):
    vectors = np.asarray(vectors, dtype=np.float32)
    return EmbeddingSet(
        item_ids=[f"item-{i:03d}" for i in range(len(vectors))],
        dim=vectors.shape[1],
        vectors=vectors,
    )


@pytest.fixture()
def line_index():
    """Three points on a line at 0, 3, 4 with radius 3.5: edges (0,1), (1,2)."""
    emb = embset([[0.0], [3.0], [4.0]])
    kernel = KernelParams(alpha_sq=12.5, delta=3.5)
    return build_neighbor_index(emb, kernel)


# --- state and labels ---

def test_init_state_uniform():
    state = init_state(25)
    assert np.allclose(state.p, 1 / 25)
    assert state.p.sum() == pytest.approx(1.0, abs=1e-12)
    assert not state.explored.any()
    assert state.t == 0


def test_init_state_rejects_tiny_catalog():
    with pytest.raises(CatalogTooSmall):
        init_state(MIN_CATALOG_SIZE - 1)


def test_label_vector_signs():
    y = label_vector(K=(0, 2, 4), L=(2,), size=6)
    assert y.tolist() == [-1.0, 0.0, 1.0, 0.0, -1.0, 0.0]


def test_label_vector_requires_subset():
    with pytest.raises(SelectionNotSubset):
        label_vector(K=(0, 1), L=(3,), size=6)


def test_state_serialization_roundtrip():
    state = init_state(20)
    state.t = 3
    state.explored[[1, 5]] = True
    state.history = [((0, 1), (1,)), ((2, 3), ())]
    state.w = np.arange(4, dtype=np.float64)
    doc = state.to_dict()
    restored = UserState.from_dict(doc)
    assert np.array_equal(restored.p, state.p)
    assert np.array_equal(restored.explored, state.explored)
    assert restored.t == 3
    assert restored.history == state.history
    assert np.array_equal(restored.w, state.w)
    assert restored.to_dict() == doc


# --- propagation ---

def test_propagate_line_oracle(line_index):
    # hand-derived: w(0,1) = exp(-9/25), w(1,2) = exp(-1/25), (0,2) out of radius
    w01 = math.exp(-9 / 25)
    w12 = math.exp(-1 / 25)
    y = label_vector(K=(0, 1), L=(0,), size=3)
    u = propagate(y, line_index)
    assert u[0] == pytest.approx(1.0 - w01, abs=1e-15)
    assert u[1] == pytest.approx(w01 - 1.0, abs=1e-15)
    assert u[2] == pytest.approx(-w12, abs=1e-15)


def test_fused_update_matches_per_source_sum(small_assets, rng):
    _, _, _, index = small_assets
    n = len(index)
    for _ in range(20):
        K = tuple(rng.choice(n, size=6, replace=False).tolist())
        L = tuple(k for k in K[:3])
        y = label_vector(K, L, n)
        assert np.max(np.abs(fused_update_vector(K, L, index) - propagate(y, index))) <= 1e-12


# --- exponentiated update ---

def test_exponentiated_update_two_item_oracle():
    # p = (1/2, 1/2), u = (1, 0), beta = 0.2: p' = (e^0.4, 1) / (e^0.4 + 1)
    state = UserState(p=np.array([0.5, 0.5]), explored=np.zeros(2, dtype=bool))
    apply_exponentiated_update(state, np.array([1.0, 0.0]), beta=0.2)
    assert state.p[0] == pytest.approx(0.598687660112452, abs=1e-14)
    assert state.p[1] == pytest.approx(0.401312339887548, abs=1e-14)


def test_exponentiated_update_clamps_blowups():
    state = UserState(
        p=np.array([1e-300, 0.0, 1.0 - 1e-300]), explored=np.zeros(3, dtype=bool)
    )
    apply_exponentiated_update(state, np.array([1.0, -1.0, 0.0]), beta=0.1, clamp=50.0)
    assert np.isfinite(state.p).all()
    assert state.p.min() >= 0.0
    assert state.p.sum() == pytest.approx(1.0, abs=1e-12)


def test_update_with_empty_presentation_only_advances_t(line_index):
    # a skipped grid leaves the preference vector untouched
    state = init_state(20)
    p_before = state.p.copy()
    update(state, (), (), line_index, StrategyConfig())
    assert state.t == 1
    assert np.array_equal(state.p, p_before)
    assert state.history == []


def test_update_normalizes_and_tracks_exploration(small_assets):
    _, _, _, index = small_assets
    state = init_state(len(index))
    K = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9)
    update(state, K, (0, 1), index, StrategyConfig())
    assert state.p.sum() == pytest.approx(1.0, abs=1e-12)
    assert state.p.min() >= 0.0
    assert state.t == 1
    assert state.history == [(K, (0, 1))]
    assert np.array_equal(state.explored, index.neighborhood_mask(K))


# --- perceptron ---

def test_perceptron_frozen_step():
    emb = embset([[1.0, 0.0], [0.0, 1.0]])
    w = perceptron_update(np.zeros(2), K=(0, 1), L=(0,), embeddings=emb)
    assert w.tolist() == [1.0, -1.0]


def test_perceptron_batch_uses_incoming_weights():
    # x1 = -x0: a sequential update after x0 would already classify item 1
    # correctly, but the batch rule still counts it as a mistake against w=0
    emb = embset([[1.0, 0.0], [-1.0, 0.0]])
    w = perceptron_update(np.zeros(2), K=(0, 1), L=(0,), embeddings=emb)
    assert w.tolist() == [2.0, 0.0]


def test_perceptron_no_update_when_correct():
    emb = embset([[1.0, 0.0], [-1.0, 0.0]])
    w0 = np.array([3.0, 0.0])
    w = perceptron_update(w0, K=(0, 1), L=(0,), embeddings=emb)
    assert np.array_equal(w, w0)


def test_perceptron_requires_subset():
    emb = embset([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(SelectionNotSubset):
        perceptron_update(np.zeros(2), K=(0,), L=(1,), embeddings=emb)


# --- entropy and score fractions ---

def test_entropy_uniform_is_log_n():
    assert entropy(np.full(100, 0.01)) == pytest.approx(math.log(100), rel=1e-12)


def test_entropy_ignores_zeros():
    assert entropy(np.array([1.0, 0.0, 0.0])) == 0.0
    assert entropy(np.array([0.5, 0.5, 0.0])) == pytest.approx(math.log(2), rel=1e-12)


def test_top_and_bottom_fraction():
    scores = np.arange(100, dtype=float)
    assert top_fraction(scores, 0.01).tolist() == [99]
    assert bottom_fraction(scores, 0.01).tolist() == [0]
    assert set(top_fraction(scores, 0.10).tolist()) == set(range(90, 100))


def test_fraction_all_equal_returns_first_block():
    scores = np.ones(100)
    assert top_fraction(scores, 0.025).tolist() == [0, 1, 2]
    assert bottom_fraction(scores, 0.025).tolist() == [0, 1, 2]


def test_fraction_bounds():
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            top_fraction(np.ones(5), bad)
        with pytest.raises(ValueError):
            bottom_fraction(np.ones(5), bad)


# --- seeded grid picks ---

def test_kmeans_pp_respects_forced_first(rng):
    X = rng.normal(size=(30, 4))
    picks = kmeans_pp(X, 5, rng, first=7)
    assert picks[0] == 7
    assert len(set(picks)) == 5


def test_kmeans_pp_prefers_distant_points():
    # two far groups: the second pick lands in the opposite group
    X = np.vstack([np.zeros((10, 2)), np.full((10, 2), 100.0)])
    X += np.random.default_rng(1).normal(scale=0.01, size=X.shape)
    for seed in range(10):
        picks = kmeans_pp(X, 2, np.random.default_rng(seed), first=0)
        assert picks[1] >= 10


def test_kmeans_pp_handles_duplicates(rng):
    X = np.ones((15, 3))
    picks = kmeans_pp(X, 4, rng)
    assert len(set(picks)) == 4


def test_kmeans_pp_rejects_oversample(rng):
    with pytest.raises(NotEnoughItems):
        kmeans_pp(np.ones((3, 2)), 4, rng)


# --- presentation selection ---

def test_presentation_validates_size_and_distinctness():
    with pytest.raises(ValueError):
        Presentation(items=(1, 2, 3), phase=Phase.GRID10)
    with pytest.raises(ValueError):
        Presentation(items=(1, 1), phase=Phase.PAIR)
    Presentation(items=tuple(range(10)), phase=Phase.GRID10)
    Presentation(items=(4, 9), phase=Phase.PAIR)


def test_select_phase_one_is_a_grid(small_assets, rng):
    _, embeddings, _, index = small_assets
    state = init_state(len(index))
    for t in (1, PHASE1_ITERATIONS):
        pres = select(state, t, index, StrategyConfig(), rng, embeddings)
        assert pres.phase is Phase.GRID10
        assert len(set(pres.items)) == GRID_SIZE


def test_select_pairs_after_phase_one(small_assets, rng):
    _, embeddings, _, index = small_assets
    state = init_state(len(index))
    pres = select(state, PHASE1_ITERATIONS + 1, index, StrategyConfig(), rng, embeddings)
    assert pres.phase is Phase.PAIR
    assert len(set(pres.items)) == 2


def test_select_pair_mixes_top_scores_with_unexplored(small_assets, rng):
    _, embeddings, _, index = small_assets
    n = len(index)
    state = init_state(n)
    scores = np.arange(n, dtype=float)
    state.explored[:] = True
    state.explored[[3, 8]] = False
    config = StrategyConfig(top_fraction=0.02)
    top = set(top_fraction(scores, 0.02).tolist())
    for _ in range(10):
        pres = select(state, 3, index, config, rng, embeddings, scores=scores)
        assert pres.items[0] in top
        assert pres.items[1] in (3, 8)


def test_select_pair_falls_back_when_everything_explored(small_assets, rng):
    _, embeddings, _, index = small_assets
    n = len(index)
    state = init_state(n)
    state.explored[:] = True
    scores = np.arange(n, dtype=float)
    top = set(top_fraction(scores, 0.02).tolist())
    pres = select(state, 5, index, StrategyConfig(top_fraction=0.02), rng, embeddings, scores=scores)
    assert pres.phase is Phase.PAIR
    assert pres.items[0] in top
    assert pres.items[1] != pres.items[0]


def test_select_random_selector_is_uniformly_random(small_assets):
    _, embeddings, _, index = small_assets
    state = init_state(len(index))
    config = StrategyConfig(selector=Selector.RS)
    rng = np.random.default_rng(4)
    grid = select(state, 1, index, config, rng, embeddings)
    assert grid.phase is Phase.GRID10
    pair = select(state, 3, index, config, rng, embeddings)
    assert pair.phase is Phase.PAIR


# --- strategy config ---

def test_strategy_config_defaults_and_name():
    config = StrategyConfig()
    assert config.name == "LE+EE"
    assert config.effective_beta(100) == pytest.approx(0.005)
    assert StrategyConfig(beta=0.3).effective_beta(100) == 0.3


def test_strategy_config_accepts_strings():
    config = StrategyConfig(updater="OP", selector="RS")
    assert config.updater is Updater.OP
    assert config.selector is Selector.RS
    assert config.name == "OP+RS"


def test_strategy_config_validation():
    with pytest.raises(ValueError):
        StrategyConfig(beta=0.0)
    with pytest.raises(ValueError):
        StrategyConfig(exponent_clamp=-1.0)


# --- engine facade ---

def test_elicitor_session_is_deterministic(small_assets):
    _, embeddings, _, index = small_assets
    results = []
    for _ in range(2):
        elicitor = Elicitor(embeddings, index, StrategyConfig())
        state = elicitor.new_state()
        rng = np.random.default_rng(11)
        trace = []
        for t in range(1, 6):
            pres = elicitor.next_presentation(state, t, rng)
            selected = pres.items[: len(pres.items) // 2]
            elicitor.apply_choices(state, pres.items, selected)
            trace.append(pres.items)
        results.append((trace, state.p.copy()))
    assert results[0][0] == results[1][0]
    assert np.array_equal(results[0][1], results[1][1])


def test_elicitor_perceptron_state_and_scores(small_assets):
    _, embeddings, _, index = small_assets
    elicitor = Elicitor(embeddings, index, StrategyConfig(updater=Updater.OP))
    state = elicitor.new_state()
    assert state.w is not None and not state.w.any()
    rng = np.random.default_rng(2)
    pres = elicitor.next_presentation(state, 1, rng)
    elicitor.apply_choices(state, pres.items, pres.items[:5])
    assert state.t == 1
    scores = elicitor.scores(state)
    assert scores.shape == (len(index),)
    assert np.array_equal(
        scores, embeddings.vectors.astype(np.float64) @ state.w
    )
    # preference vector untouched by the perceptron updater
    assert np.allclose(state.p, 1 / len(index))
