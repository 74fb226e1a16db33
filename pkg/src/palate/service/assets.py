"""Per-diet immutable assets: catalog, embeddings, kernel, neighbor index."""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass

from ..catalog import (
    Catalog,
    DietType,
    EmbeddingSet,
    KernelParams,
    NeighborIndex,
    build_neighbor_index,
    estimate_kernel,
    load_catalog,
    load_embeddings,
)
from ..nutrition import SuitabilityTable
from .config import ServiceConfig


@dataclass
class DietAssets:
    diet: DietType
    catalog: Catalog
    embeddings: EmbeddingSet
    kernel: KernelParams
    index: NeighborIndex
    suitability: SuitabilityTable
    config_hash: str


class AssetStore:
    """Lazily loads and caches the immutable per-diet asset bundle."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self._cache: dict[DietType, DietAssets] = {}
        self._lock = threading.Lock()
        self._file_digest: str | None = None

    def _files_digest(self) -> str:
        if self._file_digest is None:
            h = hashlib.sha256()
            for path in (self.config.catalog_path, self.config.embeddings_path):
                with open(path, "rb") as fh:
                    for chunk in iter(lambda: fh.read(1 << 20), b""):
                        h.update(chunk)
            self._file_digest = h.hexdigest()
        return self._file_digest

    def _config_hash(self, diet: DietType) -> str:
        cfg = self.config
        payload = json.dumps(
            {
                "files": self._files_digest(),
                "diet": diet.value,
                "delta_percentile": cfg.delta_percentile,
                "delta_absolute": cfg.delta_absolute,
                "pair_sample_size": cfg.pair_sample_size,
                "kernel_seed": cfg.kernel_seed,
                "beta": cfg.beta,
                "exponent_clamp": cfg.exponent_clamp,
                "T": cfg.T,
                "M": cfg.M,
                "N": cfg.N,
                "fraction": cfg.fraction,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def get(self, diet: DietType | str) -> DietAssets:
        diet = DietType.parse(diet)
        with self._lock:
            if diet not in self._cache:
                catalog = load_catalog(self.config.catalog_path, diet)
                embeddings = load_embeddings(self.config.embeddings_path, catalog)
                kernel = estimate_kernel(embeddings, self.config.kernel_config())
                index = build_neighbor_index(embeddings, kernel)
                self._cache[diet] = DietAssets(
                    diet=diet,
                    catalog=catalog,
                    embeddings=embeddings,
                    kernel=kernel,
                    index=index,
                    suitability=SuitabilityTable.build(catalog),
                    config_hash=self._config_hash(diet),
                )
            return self._cache[diet]

    @classmethod
    def from_assets(cls, config: ServiceConfig, assets_by_diet: dict) -> "AssetStore":
        """Build a store around preconstructed assets (tests, benchmarks)."""
        store = cls(config)
        store._cache = dict(assets_by_diet)
        return store
