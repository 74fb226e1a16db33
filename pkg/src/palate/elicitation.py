"""Online preference learning over the item catalog.

A session keeps a probability vector over all items.  Choices on presented
images become ±1 labels, label mass is propagated to radius-delta neighbors
through the similarity graph, and the propagated update drives a clamped
exponentiated step on the preference vector.  Selection alternates a
k-means++ seeded exploration phase (two ten-image grids) with
exploitation/exploration pairs: one item from the top-1% preference region,
one from the unexplored region.

The online perceptron updater (OP) and random selector (RS) baselines used
by the evaluation harness live here too.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import logsumexp

from .catalog import EmbeddingSet, NeighborIndex
from .errors import CatalogTooSmall, NotEnoughItems, SelectionNotSubset

GRID_SIZE = 10
PHASE1_ITERATIONS = 2
MIN_CATALOG_SIZE = 2 * GRID_SIZE
DEFAULT_TOP_FRACTION = 0.01
DEFAULT_CLAMP = 50.0

STATE_VERSION = 1


class Updater(str, Enum):
    LE = "LE"  # label propagation + exponentiated gradient
    OP = "OP"  # online perceptron


class Selector(str, Enum):
    EE = "EE"  # exploitation-exploration
    RS = "RS"  # random selection


class Phase(str, Enum):
    GRID10 = "grid10"
    PAIR = "pair"


@dataclass(frozen=True)
class Presentation:
    items: tuple[int, ...]
    phase: Phase

    def __post_init__(self):
        expected = GRID_SIZE if self.phase is Phase.GRID10 else 2
        if len(self.items) != expected or len(set(self.items)) != expected:
            raise ValueError(
                f"{self.phase.value} presentation needs {expected} distinct items"
            )


@dataclass
class StrategyConfig:
    updater: Updater = Updater.LE
    selector: Selector = Selector.EE
    beta: float | None = None  # None -> 0.5 / |S|
    exponent_clamp: float = DEFAULT_CLAMP
    top_fraction: float = DEFAULT_TOP_FRACTION
    rng_seed: int = 0

    def __post_init__(self):
        self.updater = Updater(self.updater)
        self.selector = Selector(self.selector)
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.exponent_clamp > 0:
            raise ValueError("exponent_clamp must be positive")

    def effective_beta(self, n: int) -> float:
        return self.beta if self.beta is not None else 0.5 / n

    @property
    def name(self) -> str:
        return f"{self.updater.value}+{self.selector.value}"


@dataclass
class UserState:
    p: np.ndarray                    # float64 probabilities, sums to 1
    explored: np.ndarray             # bool mask over items
    t: int = 0
    history: list[tuple[tuple[int, ...], tuple[int, ...]]] = field(default_factory=list)
    w: np.ndarray | None = None      # perceptron weights (OP only)

    @property
    def presented(self) -> set[int]:
        return {i for K, _ in self.history for i in K}

    def last_presented_at(self) -> dict[int, int]:
        last = {}
        for step, (K, _) in enumerate(self.history):
            for i in K:
                last[i] = step
        return last

    def to_dict(self) -> dict:
        doc = {
            "version": STATE_VERSION,
            "t": self.t,
            "p": [float(v) for v in self.p],
            "explored": np.nonzero(self.explored)[0].tolist(),
            "history": [
                {"presented": list(K), "selected": list(L)} for K, L in self.history
            ],
        }
        if self.w is not None:
            doc["w"] = [float(v) for v in self.w]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "UserState":
        p = np.asarray(doc["p"], dtype=np.float64)
        explored = np.zeros(len(p), dtype=bool)
        explored[doc["explored"]] = True
        state = cls(
            p=p,
            explored=explored,
            t=int(doc["t"]),
            history=[
                (tuple(e["presented"]), tuple(e["selected"])) for e in doc["history"]
            ],
        )
        if "w" in doc:
            state.w = np.asarray(doc["w"], dtype=np.float64)
        return state


def init_state(catalog_size: int) -> UserState:
    if catalog_size < MIN_CATALOG_SIZE:
        raise CatalogTooSmall(
            f"need at least {MIN_CATALOG_SIZE} items, got {catalog_size}"
        )
    return UserState(
        p=np.full(catalog_size, 1.0 / catalog_size, dtype=np.float64),
        explored=np.zeros(catalog_size, dtype=bool),
    )


def label_vector(K, L, size: int) -> np.ndarray:
    """+1 on selected items, -1 on presented-but-rejected, 0 elsewhere."""
    K, L = set(K), set(L)
    if not L <= K:
        raise SelectionNotSubset(f"selection {sorted(L)} not within presented {sorted(K)}")
    y = np.zeros(size, dtype=np.float64)
    for i in K:
        y[i] = 1.0 if i in L else -1.0
    return y


def propagate(y: np.ndarray, index: NeighborIndex) -> np.ndarray:
    """Sum of per-source propagated labels: u_j = sum_i w_ij * y_i over labeled i."""
    u = np.zeros_like(y)
    for i in np.nonzero(y)[0]:
        nbrs, wts = index.neighbors(int(i))
        u[nbrs] += wts * y[i]
    return u


def fused_update_vector(K, L, index: NeighborIndex) -> np.ndarray:
    """Inner-loop form of the state-update algorithm; must agree with propagate."""
    L = set(L)
    u = np.zeros(len(index), dtype=np.float64)
    for j in K:
        nbrs, wts = index.neighbors(int(j))
        sign = 1.0 if j in L else -1.0
        u[nbrs] += sign * wts
    return u


def apply_exponentiated_update(
    state: UserState, u: np.ndarray, beta: float, clamp: float = DEFAULT_CLAMP
) -> UserState:
    """p_i <- p_i * exp(clamped(beta * u_i / p_i)), renormalized in log space."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        expo = beta * u / state.p
    expo = np.nan_to_num(expo, nan=0.0, posinf=clamp, neginf=-clamp)
    np.clip(expo, -clamp, clamp, out=expo)
    with np.errstate(divide="ignore"):
        logp = np.log(state.p) + expo
    logp -= logsumexp(logp)
    p = np.exp(logp)
    state.p = p / p.sum()
    return state


def update_explored(state: UserState, K, index: NeighborIndex) -> UserState:
    state.explored |= index.neighborhood_mask(K)
    return state


def update(state: UserState, K, L, index: NeighborIndex, config: StrategyConfig) -> UserState:
    """One label-propagation/exponentiated-gradient iteration (updater LE)."""
    if config.updater is not Updater.LE:
        raise ValueError("update() implements the LE updater")
    K, L = tuple(K), tuple(L)
    if not K:
        state.t += 1
        return state
    y = label_vector(K, L, len(state.p))
    u = propagate(y, index)
    apply_exponentiated_update(
        state, u, config.effective_beta(len(state.p)), config.exponent_clamp
    )
    update_explored(state, K, index)
    state.history.append((K, L))
    state.t += 1
    return state


def perceptron_update(w: np.ndarray, K, L, embeddings: EmbeddingSet) -> np.ndarray:
    """Mistake-driven batch step: every presented item misclassified by the
    incoming weights contributes y_i * f(x_i)."""
    L = set(L)
    if not L <= set(K):
        raise SelectionNotSubset(f"selection {sorted(L)} not within presented {sorted(K)}")
    X = embeddings.vectors.astype(np.float64)
    w_new = w.copy()
    for i in K:
        y = 1.0 if i in L else -1.0
        if y * float(w @ X[i]) <= 0:
            w_new += y * X[i]
    return w_new


def entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def top_fraction(scores: np.ndarray, fraction: float) -> np.ndarray:
    """Indices at or above the (1-fraction) quantile; total ties resolve to the
    first ceil(fraction*n) indices."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    if np.all(scores == scores[0]):
        return np.arange(int(np.ceil(fraction * n)))
    threshold = np.quantile(scores, 1.0 - fraction)
    return np.nonzero(scores >= threshold)[0]


def bottom_fraction(scores: np.ndarray, fraction: float) -> np.ndarray:
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    if np.all(scores == scores[0]):
        return np.arange(int(np.ceil(fraction * n)))
    threshold = np.quantile(scores, fraction)
    return np.nonzero(scores <= threshold)[0]


def kmeans_pp(
    vectors: np.ndarray,
    n: int,
    rng: np.random.Generator,
    first: int | None = None,
) -> list[int]:
    """k-means++ seeding: spread picks over the embedding space."""
    X = np.asarray(vectors, dtype=np.float64)
    total = X.shape[0]
    if n > total:
        raise NotEnoughItems(f"cannot pick {n} of {total} items")
    chosen = [int(rng.integers(total)) if first is None else int(first)]
    min_sq = np.einsum("ij,ij->i", X - X[chosen[0]], X - X[chosen[0]])
    while len(chosen) < n:
        mass = float(min_sq.sum())
        if mass <= 0:
            # all remaining candidates coincide with the chosen set
            remaining = np.setdiff1d(np.arange(total), np.asarray(chosen))
            pick = int(rng.choice(remaining))
        else:
            pick = int(rng.choice(total, p=min_sq / mass))
        chosen.append(pick)
        diff = X - X[pick]
        np.minimum(min_sq, np.einsum("ij,ij->i", diff, diff), out=min_sq)
    return chosen


def _distinct_random(n: int, count: int, rng: np.random.Generator) -> list[int]:
    return [int(i) for i in rng.choice(n, size=count, replace=False)]


def select(
    state: UserState,
    t: int,
    index: NeighborIndex,
    config: StrategyConfig,
    rng: np.random.Generator,
    embeddings: EmbeddingSet,
    scores: np.ndarray | None = None,
) -> Presentation:
    """Pick the next presentation for iteration t (1-based)."""
    n = len(state.p)
    if scores is None:
        scores = state.p
    if t <= PHASE1_ITERATIONS:
        if config.selector is Selector.RS:
            items = _distinct_random(n, GRID_SIZE, rng)
        else:
            items = kmeans_pp(embeddings.vectors, GRID_SIZE, rng)
        return Presentation(items=tuple(items), phase=Phase.GRID10)

    if config.selector is Selector.RS:
        return Presentation(items=tuple(_distinct_random(n, 2, rng)), phase=Phase.PAIR)

    presented = state.presented
    top = top_fraction(scores, config.top_fraction)
    fresh_top = [int(i) for i in top if i not in presented]
    first = int(rng.choice(fresh_top if fresh_top else top))

    unexplored = np.nonzero(~state.explored)[0]
    unexplored = unexplored[unexplored != first]
    if unexplored.size:
        second = int(rng.choice(unexplored))
    else:
        second = _exploration_fallback(state, first, rng)
    return Presentation(items=(first, second), phase=Phase.PAIR)


def _exploration_fallback(state: UserState, first: int, rng: np.random.Generator) -> int:
    """Everything is explored: prefer explored-but-never-presented items, then
    the least recently presented ones."""
    n = len(state.p)
    presented = state.presented
    candidates = [i for i in np.nonzero(state.explored)[0] if i not in presented and i != first]
    if candidates:
        return int(rng.choice(candidates))
    last = state.last_presented_at()
    oldest = min(v for k, v in last.items() if k != first) if last else 0
    stale = [i for i, step in last.items() if step == oldest and i != first]
    if stale:
        return int(rng.choice(stale))
    pool = [i for i in range(n) if i != first]
    return int(rng.choice(pool))


class Elicitor:
    """Session engine binding embeddings, the neighbor index, and a strategy."""

    def __init__(self, embeddings: EmbeddingSet, index: NeighborIndex, config: StrategyConfig):
        self.embeddings = embeddings
        self.index = index
        self.config = config
        self._X = embeddings.vectors.astype(np.float64)

    @property
    def size(self) -> int:
        return len(self.embeddings.item_ids)

    def new_state(self) -> UserState:
        state = init_state(self.size)
        if self.config.updater is Updater.OP:
            state.w = np.zeros(self.embeddings.dim, dtype=np.float64)
        return state

    def scores(self, state: UserState) -> np.ndarray:
        if self.config.updater is Updater.OP:
            return self._X @ state.w
        return state.p

    def apply_choices(self, state: UserState, K, L) -> UserState:
        if self.config.updater is Updater.LE:
            return update(state, K, L, self.index, self.config)
        K, L = tuple(K), tuple(L)
        if not K:
            state.t += 1
            return state
        state.w = perceptron_update(state.w, K, L, self.embeddings)
        update_explored(state, K, self.index)
        state.history.append((K, L))
        state.t += 1
        return state

    def next_presentation(self, state: UserState, t: int, rng: np.random.Generator) -> Presentation:
        return select(
            state, t, self.index, self.config, rng, self.embeddings,
            scores=self.scores(state),
        )

    def entropy(self, state: UserState) -> float:
        return entropy(state.p)
