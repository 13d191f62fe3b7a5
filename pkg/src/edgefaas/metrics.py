"""Per-resource utilization snapshots feeding phase-one scheduling.

Providers are pluggable: the simulated provider serves an in-process load
table (the test/harness path); the HTTP provider issues instant queries
against a Prometheus-style endpoint.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Protocol

from .errors import MetricsUnavailable, MismatchedResource
from .registry import ResourceRecord

DEFAULT_STALENESS_S = 60.0


@dataclass(frozen=True)
class MetricsSnapshot:
    """Immutable utilization sample for one resource."""

    resource_id: int
    cpu_used: float            # logical cores
    memory_used: int           # bytes
    io_bandwidth_used: float   # bytes/second
    gpu_used: float
    per_node_load: tuple[float, ...]
    timestamp: float           # monotonic sample time


@dataclass(frozen=True)
class AvailableCapacity:
    memory_free: int
    cpu_free: float
    gpu_free: float


def available(resource: ResourceRecord, snap: MetricsSnapshot) -> AvailableCapacity:
    """Component-wise capacity minus usage, clamped at zero."""
    if snap.resource_id != resource.resource_id:
        raise MismatchedResource(
            f"snapshot for resource {snap.resource_id} paired with "
            f"resource {resource.resource_id}")
    return AvailableCapacity(
        memory_free=max(0, resource.total_memory() - int(snap.memory_used)),
        cpu_free=max(0.0, resource.total_cpu() - snap.cpu_used),
        gpu_free=max(0.0, resource.total_gpu() - snap.gpu_used),
    )


def is_stale(snap: MetricsSnapshot, now: float, bound_s: float = DEFAULT_STALENESS_S) -> bool:
    return (now - snap.timestamp) > bound_s


class MetricsProvider(Protocol):
    def fetch_snapshot(self, resource: ResourceRecord) -> MetricsSnapshot:
        """Latest snapshot for the resource; raises MetricsUnavailable."""
        ...


@dataclass
class SimulatedLoad:
    cpu_used: float = 0.0
    memory_used: int = 0
    io_bandwidth_used: float = 0.0
    gpu_used: float = 0.0
    per_node_load: tuple[float, ...] | None = None


class SimulatedMetricsProvider:
    """In-process load table; unset resources report zero load."""

    def __init__(self, clock: Callable[[], float] = time.monotonic) -> None:
        self._clock = clock
        self._loads: dict[int, SimulatedLoad] = {}
        self._offline: set[int] = set()

    def set_load(self, resource_id: int, **fields) -> None:
        self._loads[resource_id] = SimulatedLoad(**fields)

    def clear_load(self, resource_id: int) -> None:
        self._loads.pop(resource_id, None)

    def set_offline(self, resource_id: int, offline: bool = True) -> None:
        if offline:
            self._offline.add(resource_id)
        else:
            self._offline.discard(resource_id)

    def fetch_snapshot(self, resource: ResourceRecord) -> MetricsSnapshot:
        rid = resource.resource_id
        if rid in self._offline:
            raise MetricsUnavailable(f"resource {rid}: metrics endpoint unreachable")
        load = self._loads.get(rid, SimulatedLoad())
        per_node = load.per_node_load or tuple(0.0 for _ in range(resource.node))
        if len(per_node) != resource.node:
            raise MetricsUnavailable(
                f"resource {rid}: load table has {len(per_node)} node entries, "
                f"resource has {resource.node} nodes")
        return MetricsSnapshot(
            resource_id=rid,
            cpu_used=load.cpu_used,
            memory_used=load.memory_used,
            io_bandwidth_used=load.io_bandwidth_used,
            gpu_used=load.gpu_used,
            per_node_load=tuple(per_node),
            timestamp=self._clock(),
        )


DEFAULT_QUERIES = {
    "cpu_used": 'sum(rate(node_cpu_seconds_total{mode!="idle"}[1m]))',
    "memory_used": "sum(node_memory_MemTotal_bytes - node_memory_MemAvailable_bytes)",
    "io_bandwidth_used": "sum(rate(node_disk_written_bytes_total[1m]))",
    "gpu_used": "sum(DCGM_FI_DEV_GPU_UTIL) / 100",
}


class PrometheusMetricsProvider:
    """Instant-query client for a per-resource metrics endpoint.

    Query strings are configurable per metric; the endpoint comes from the
    resource record. Best-effort backend, excluded from acceptance runs.
    """

    def __init__(self, queries: dict[str, str] | None = None, timeout: float = 5.0,
                 clock: Callable[[], float] = time.monotonic, session=None) -> None:
        import requests

        self.queries = dict(DEFAULT_QUERIES, **(queries or {}))
        self.timeout = timeout
        self._clock = clock
        self._session = session or requests.Session()

    def _query(self, endpoint: str, promql: str) -> float:
        resp = self._session.get(
            f"http://{endpoint}/api/v1/query",
            params={"query": promql},
            timeout=self.timeout,
        )
        resp.raise_for_status()
        body = resp.json()
        results = body.get("data", {}).get("result", [])
        if not results:
            return 0.0
        return float(results[0]["value"][1])

    def fetch_snapshot(self, resource: ResourceRecord) -> MetricsSnapshot:
        try:
            values = {
                metric: self._query(resource.prometheus, promql)
                for metric, promql in self.queries.items()
            }
        except Exception as exc:
            raise MetricsUnavailable(
                f"resource {resource.resource_id}: {exc}") from exc
        return MetricsSnapshot(
            resource_id=resource.resource_id,
            cpu_used=values.get("cpu_used", 0.0),
            memory_used=int(values.get("memory_used", 0.0)),
            io_bandwidth_used=values.get("io_bandwidth_used", 0.0),
            gpu_used=values.get("gpu_used", 0.0),
            per_node_load=tuple(0.0 for _ in range(resource.node)),
            timestamp=self._clock(),
        )
