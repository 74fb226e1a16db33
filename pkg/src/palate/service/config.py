"""Service configuration: flat key-value JSON with environment overrides.

Every key can be overridden by an environment variable named
``PALATE_<KEY_UPPERCASE>``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from ..catalog import KernelConfig

ENV_PREFIX = "PALATE_"


@dataclass
class ServiceConfig:
    catalog_path: str = "catalog.jsonl"
    embeddings_path: str = "embeddings.bin"
    delta_percentile: float | None = 5.0
    delta_absolute: float | None = None
    pair_sample_size: int = 1_000_000
    kernel_seed: int = 0
    beta: float | None = None
    exponent_clamp: float = 50.0
    T: int = 15
    M: int = 500
    N: int = 10
    fraction: float = 0.01
    bind_host: str = "127.0.0.1"
    bind_port: int = 8000
    persistence_dir: str = "sessions"
    global_seed: int = 0
    session_ttl_seconds: float = 3600.0

    def __post_init__(self):
        if self.T < 3:
            raise ValueError("T must be >= 3 (two grids plus at least one pair)")
        if self.M < self.N:
            raise ValueError("M must be >= N")

    def kernel_config(self) -> KernelConfig:
        return KernelConfig(
            delta_percentile=self.delta_percentile,
            delta_absolute=self.delta_absolute,
            pair_sample_size=self.pair_sample_size,
            rng_seed=self.kernel_seed,
        )

    @classmethod
    def load(cls, path: str | None = None, overrides: dict | None = None) -> "ServiceConfig":
        values: dict = {}
        if path is not None:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            if not isinstance(doc, dict):
                raise ValueError("service config must be a flat JSON object")
            values.update(doc)
        fields = {f.name: f.type for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        for name in fields:
            env = os.environ.get(ENV_PREFIX + name.upper())
            if env is not None:
                values[name] = _coerce(env)
        if overrides:
            values.update(overrides)
        unknown = set(values) - set(fields)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)


def _coerce(raw: str):
    lowered = raw.strip().lower()
    if lowered in ("null", "none", ""):
        return None
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw
