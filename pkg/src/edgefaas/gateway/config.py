"""Gateway configuration: listen address, store/backend selection, knobs."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import yaml

DEFAULT_CONFIG_ENV = "EDGEFAAS_CONFIG"


@dataclass
class GatewayConfig:
    listen: str = "127.0.0.1:8080"
    store: str = "memory"               # memory | local:<dir> | http:<base-url>
    backend: str = "sim"                # sim | http
    fabric: str | None = None           # topology yaml (sim backend)
    profile: str | None = None          # latency profile yaml (experiments)
    policy: str = "two-phase"
    staleness_s: float = 60.0
    result_ttl_s: float = 3600.0
    barrier_timeout_s: float = 300.0
    large_data_threshold: int = 10 * 1024 * 1024

    def __post_init__(self) -> None:
        for field_name in ("staleness_s", "result_ttl_s", "barrier_timeout_s"):
            if getattr(self, field_name) <= 0:
                raise ValueError(f"{field_name} must be positive")
        if self.large_data_threshold <= 0:
            raise ValueError("large_data_threshold must be positive")
        if self.backend not in ("sim", "http"):
            raise ValueError(f"backend must be sim or http, got {self.backend!r}")

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])

    @classmethod
    def from_yaml(cls, path: str | Path) -> "GatewayConfig":
        doc = yaml.safe_load(Path(path).read_text()) or {}
        return cls(**doc)

    @classmethod
    def from_env(cls) -> "GatewayConfig":
        path = os.environ.get(DEFAULT_CONFIG_ENV)
        return cls.from_yaml(path) if path else cls()
