"""Item catalog loading, dietary filtering, and the embedding similarity kernel.

The catalog file is JSON-lines: one object per item with ``id``, ``name``,
``image_url``, ``ingredients``, ``calories``, ``protein``, ``fat`` and an
optional ``diet_tags`` array.  Embeddings arrive in a small binary format
(magic ``EMB1``) and are joined to the catalog by item id.
"""

from __future__ import annotations

import json
import math
import re
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    BadMagic,
    DegenerateEmbeddings,
    DimensionMismatch,
    EmptyAfterFilter,
    FileUnreadable,
    MissingEmbedding,
    ParseError,
    TooFewItems,
)


class DietType(str, Enum):
    NO_RESTRICTIONS = "no_restrictions"
    VEGETARIAN = "vegetarian"
    VEGAN = "vegan"
    KOSHER = "kosher"
    HALAL = "halal"

    @classmethod
    def parse(cls, value) -> "DietType":
        if isinstance(value, DietType):
            return value
        key = str(value).strip().lower().replace(" ", "_").replace("-", "_")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown diet type {value!r}")


# Ingredient terms excluded for the two religious diets.  Matching is a
# case-insensitive whole-token (sequence) match within each ingredient string.
KOSHER_EXCLUDED = (
    "pork", "rabbit", "horse meat", "bear", "shellfish", "shark", "eel",
    "octopus", "octopuses", "moreton bay bugs", "frog",
)
HALAL_EXCLUDED = (
    "pork", "blood sausage", "blood", "blood pudding", "alcohol",
    "grain alcohol", "pure grain alcohol", "ethyl alcohol",
)

EXCLUDED_INGREDIENTS = {
    DietType.KOSHER: KOSHER_EXCLUDED,
    DietType.HALAL: HALAL_EXCLUDED,
}

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _tokens(text: str) -> tuple[str, ...]:
    return tuple(_TOKEN_RE.findall(text.lower()))


def _contains_term(ingredient_tokens: tuple[str, ...], term_tokens: tuple[str, ...]) -> bool:
    k = len(term_tokens)
    if k == 0 or k > len(ingredient_tokens):
        return False
    return any(
        ingredient_tokens[i : i + k] == term_tokens
        for i in range(len(ingredient_tokens) - k + 1)
    )


def ingredient_excluded(ingredients, diet: DietType) -> bool:
    """True if any ingredient string contains an excluded term for `diet`."""
    terms = EXCLUDED_INGREDIENTS.get(diet)
    if not terms:
        return False
    term_tokens = [_tokens(t) for t in terms]
    for ing in ingredients:
        toks = _tokens(ing)
        if any(_contains_term(toks, tt) for tt in term_tokens):
            return True
    return False


@dataclass(frozen=True)
class NutritionFacts:
    calories: float
    protein: float
    fat: float

    def valid(self) -> bool:
        vals = (self.calories, self.protein, self.fat)
        return all(isinstance(v, (int, float)) and math.isfinite(v) and v >= 0 for v in vals)


@dataclass(frozen=True)
class Item:
    id: str
    name: str
    image_url: str
    ingredients: tuple[str, ...]
    nutrition: NutritionFacts
    diet_tags: frozenset[DietType] = frozenset()


@dataclass
class Catalog:
    items: list[Item]
    diet: DietType
    rejected: int = 0  # items dropped for invalid nutrition / missing image

    index_of: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index_of = {item.id: i for i, item in enumerate(self.items)}
        if len(self.index_of) != len(self.items):
            raise ParseError("duplicate item ids in catalog")

    def __len__(self):
        return len(self.items)

    def ids(self) -> list[str]:
        return [item.id for item in self.items]


def _item_from_record(rec: dict, line: int) -> Item | None:
    """Build an Item, or return None when nutrition/image is missing or invalid."""
    for key in ("id", "name", "ingredients"):
        if key not in rec:
            raise ParseError(f"missing field {key!r}", line=line)
    if not isinstance(rec["ingredients"], list):
        raise ParseError("ingredients must be an array of strings", line=line)
    image_url = rec.get("image_url")
    if not image_url:
        return None
    try:
        nutrition = NutritionFacts(
            calories=float(rec["calories"]),
            protein=float(rec["protein"]),
            fat=float(rec["fat"]),
        )
    except (KeyError, TypeError, ValueError):
        return None
    if not nutrition.valid():
        return None
    tags = frozenset(DietType.parse(t) for t in rec.get("diet_tags", []))
    return Item(
        id=str(rec["id"]),
        name=str(rec["name"]),
        image_url=str(image_url),
        ingredients=tuple(str(s).lower() for s in rec["ingredients"]),
        nutrition=nutrition,
        diet_tags=tags,
    )


def item_valid_for_diet(item: Item, diet: DietType) -> bool:
    if diet is DietType.NO_RESTRICTIONS:
        return True
    if diet in (DietType.VEGETARIAN, DietType.VEGAN):
        return diet in item.diet_tags
    # kosher / halal: rule out excluded ingredients
    return not ingredient_excluded(item.ingredients, diet)


def load_catalog(path, diet: DietType | str) -> Catalog:
    diet = DietType.parse(diet)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise FileUnreadable(f"cannot read catalog file {path}: {exc}") from exc

    items: list[Item] = []
    seen: set[str] = set()
    rejected = 0
    for lineno, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
        if not isinstance(rec, dict):
            raise ParseError("expected a JSON object", line=lineno)
        item = _item_from_record(rec, lineno)
        if item is None:
            rejected += 1
            continue
        if item.id in seen:
            raise ParseError(f"duplicate item id {item.id!r}", line=lineno)
        seen.add(item.id)
        if item_valid_for_diet(item, diet):
            items.append(item)

    if not items:
        raise EmptyAfterFilter(diet)
    return Catalog(items=items, diet=diet, rejected=rejected)


# --- embeddings ---

EMBEDDING_MAGIC = b"EMB1"


@dataclass
class EmbeddingSet:
    item_ids: list[str]
    dim: int
    vectors: np.ndarray  # float32, shape (len(item_ids), dim), unit rows

    def __len__(self):
        return len(self.item_ids)


def write_embeddings(path, item_ids, vectors) -> None:
    """Serialize id-aligned vectors in the binary embedding format."""
    vectors = np.asarray(vectors, dtype="<f4")
    if vectors.ndim != 2 or len(item_ids) != vectors.shape[0]:
        raise ValueError("item_ids and vectors must align")
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        fh.write(struct.pack("<II", vectors.shape[0], vectors.shape[1]))
        for item_id, row in zip(item_ids, vectors):
            id_bytes = str(item_id).encode("utf-8")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(row.tobytes())


def load_embeddings(path, catalog: Catalog) -> EmbeddingSet:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise FileUnreadable(f"cannot read embedding file {path}: {exc}") from exc

    if data[:4] != EMBEDDING_MAGIC:
        raise BadMagic(f"bad magic bytes {data[:4]!r}")
    if len(data) < 12:
        raise ParseError("truncated embedding header")
    count, dim = struct.unpack_from("<II", data, 4)
    if dim <= 0:
        raise DimensionMismatch(f"non-positive dimension {dim}")

    rows: dict[str, np.ndarray] = {}
    offset = 12
    row_bytes = 4 * dim
    for _ in range(count):
        if offset + 2 > len(data):
            raise ParseError("truncated embedding record")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + id_len + row_bytes > len(data):
            raise ParseError("truncated embedding record")
        item_id = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += row_bytes
        if item_id in rows:
            raise ParseError(f"duplicate embedding row for id {item_id!r}")
        rows[item_id] = vec

    vectors = np.empty((len(catalog), dim), dtype=np.float64)
    for i, item in enumerate(catalog.items):
        vec = rows.get(item.id)
        if vec is None:
            raise MissingEmbedding(item.id)
        norm = float(np.linalg.norm(vec.astype(np.float64)))
        if norm == 0.0:
            raise ParseError(f"zero embedding vector for id {item.id!r}")
        vectors[i] = vec.astype(np.float64) / norm

    out = vectors.astype(np.float32)
    # renormalize once in float32 so stored rows are unit within 1e-6
    norms = np.linalg.norm(out.astype(np.float64), axis=1)
    out = (out / norms[:, None]).astype(np.float32)
    return EmbeddingSet(item_ids=catalog.ids(), dim=dim, vectors=out)


# --- similarity kernel ---

@dataclass
class KernelConfig:
    delta_percentile: float | None = 5.0
    delta_absolute: float | None = None
    pair_sample_size: int = 1_000_000
    rng_seed: int = 0
    exact_threshold: int = 20_000

    def __post_init__(self):
        if self.delta_absolute is not None and self.delta_percentile is not None:
            raise ValueError("delta_percentile and delta_absolute are mutually exclusive")
        if self.delta_absolute is None and self.delta_percentile is None:
            raise ValueError("one of delta_percentile / delta_absolute is required")


@dataclass(frozen=True)
class KernelParams:
    alpha_sq: float  # mean squared pairwise distance over all ordered pairs
    delta: float     # neighbor radius

    def __post_init__(self):
        if not self.alpha_sq > 0:
            raise ValueError("alpha_sq must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")


def estimate_kernel(embeddings: EmbeddingSet, config: KernelConfig | None = None) -> KernelParams:
    config = config or KernelConfig()
    X = embeddings.vectors.astype(np.float64)
    n = X.shape[0]
    if n < 2:
        raise TooFewItems("kernel estimation needs at least 2 items")

    rng = np.random.default_rng(config.rng_seed)

    if n <= config.exact_threshold:
        # (1/n^2) sum_{i,j} |x_i - x_j|^2 == 2*mean|x|^2 - 2*|mean x|^2,
        # exact and O(n d) instead of the quadratic double loop
        mean_sq = float(np.mean(np.einsum("ij,ij->i", X, X)))
        centroid = X.mean(axis=0)
        alpha_sq = 2.0 * mean_sq - 2.0 * float(centroid @ centroid)
    else:
        ii = rng.integers(0, n, size=config.pair_sample_size)
        jj = rng.integers(0, n, size=config.pair_sample_size)
        diffs = X[ii] - X[jj]
        alpha_sq = float(np.mean(np.einsum("ij,ij->i", diffs, diffs)))

    if alpha_sq <= 1e-15:
        raise DegenerateEmbeddings("all embeddings coincide; alpha^2 is zero")

    if config.delta_absolute is not None:
        delta = float(config.delta_absolute)
        if delta <= 0:
            raise ValueError("delta_absolute must be positive")
    else:
        max_pairs = n * (n - 1)
        if max_pairs <= config.pair_sample_size:
            dists = _all_pairwise_distances(X)
        else:
            ii = rng.integers(0, n, size=config.pair_sample_size)
            jj = rng.integers(0, n, size=config.pair_sample_size)
            mask = ii != jj
            diffs = X[ii[mask]] - X[jj[mask]]
            dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
        delta = float(np.percentile(dists, config.delta_percentile))
        if delta <= 0:
            # duplicate-heavy data: fall back to the smallest positive distance
            positive = dists[dists > 0]
            if positive.size == 0:
                raise DegenerateEmbeddings("no positive pairwise distances")
            delta = float(positive.min())
        delta = min(delta, 2.0)

    return KernelParams(alpha_sq=alpha_sq, delta=delta)


def _all_pairwise_distances(X: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    iu = np.triu_indices(X.shape[0], k=1)
    return np.sqrt(np.maximum(d2[iu], 0.0))


def pairwise_weight(x, y, kernel: KernelParams) -> float:
    """Gaussian similarity with hard radius cutoff; total on all inputs."""
    diff = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    d2 = float(diff @ diff)
    if math.sqrt(d2) > kernel.delta:
        return 0.0
    return math.exp(-d2 / (2.0 * kernel.alpha_sq))


@dataclass
class NeighborIndex:
    """Per-item adjacency within radius delta, including the (i, 1.0) self entry."""

    neighbor_ids: list[np.ndarray]   # int64 arrays, ascending, each contains i itself
    weights: list[np.ndarray]        # float64, aligned with neighbor_ids
    kernel: KernelParams

    def __len__(self):
        return len(self.neighbor_ids)

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return self.neighbor_ids[i], self.weights[i]

    def neighborhood_mask(self, items) -> np.ndarray:
        """Boolean mask of every item within delta of any item in `items`."""
        mask = np.zeros(len(self.neighbor_ids), dtype=bool)
        for i in items:
            mask[self.neighbor_ids[i]] = True
        return mask


def build_neighbor_index(
    embeddings: EmbeddingSet, kernel: KernelParams, chunk: int = 1024
) -> NeighborIndex:
    X = embeddings.vectors.astype(np.float64)
    n = X.shape[0]
    sq = np.einsum("ij,ij->i", X, X)
    pairs_i: list[np.ndarray] = []
    pairs_j: list[np.ndarray] = []
    pairs_w: list[np.ndarray] = []
    # prefilter with a little slack, then recompute candidate pairs with the
    # same direct-difference arithmetic as pairwise_weight so stored weights
    # and membership agree with the oracle bit-for-bit
    delta_sq_slack = kernel.delta * kernel.delta * (1.0 + 1e-9) + 1e-12
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (X[start:stop] @ X.T)
        rows, cols = np.nonzero(d2 <= delta_sq_slack)
        abs_rows = rows + start
        keep = cols > abs_rows
        abs_rows, cols = abs_rows[keep], cols[keep]
        diffs = X[abs_rows] - X[cols]
        d2_exact = np.einsum("ij,ij->i", diffs, diffs)
        inside = np.sqrt(d2_exact) <= kernel.delta
        abs_rows, cols, d2_exact = abs_rows[inside], cols[inside], d2_exact[inside]
        pairs_i.append(abs_rows)
        pairs_j.append(cols)
        pairs_w.append(np.exp(-d2_exact / (2.0 * kernel.alpha_sq)))

    ii = np.concatenate(pairs_i) if pairs_i else np.empty(0, dtype=np.int64)
    jj = np.concatenate(pairs_j) if pairs_j else np.empty(0, dtype=np.int64)
    ww = np.concatenate(pairs_w) if pairs_w else np.empty(0, dtype=np.float64)

    # mirror, then add self entries with weight exactly 1
    src = np.concatenate([ii, jj, np.arange(n)])
    dst = np.concatenate([jj, ii, np.arange(n)])
    wts = np.concatenate([ww, ww, np.ones(n)])

    order = np.lexsort((dst, src))
    src, dst, wts = src[order], dst[order], wts[order]
    boundaries = np.searchsorted(src, np.arange(n + 1))
    neighbor_ids = [dst[boundaries[i] : boundaries[i + 1]].astype(np.int64) for i in range(n)]
    weights = [wts[boundaries[i] : boundaries[i + 1]] for i in range(n)]
    return NeighborIndex(neighbor_ids=neighbor_ids, weights=weights, kernel=kernel)
