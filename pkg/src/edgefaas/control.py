"""Control-plane wiring: one object owning every module over a shared store.

Construct with explicit backends, or use ``ControlPlane.with_sim_fabric``
to attach a simulated cluster fabric (the default test/harness path).
Reconstructing a plane over the same durable store restores all mappings.
"""

from __future__ import annotations

import time
from typing import Callable

from .appmodel import ApplicationModel
from .functions import FunctionManager
from .metrics import MetricsProvider
from .registry import Registry
from .scheduler import RttMatrix, Scheduler
from .storage import DEFAULT_LARGE_DATA_THRESHOLD, StorageManager
from .store import MappingStore, MapView, MemoryMappingStore


class ControlPlane:
    def __init__(self, store: MappingStore, provider, object_store,
                 metrics: MetricsProvider, rtt: RttMatrix,
                 clock: Callable[[], float] = time.monotonic,
                 policy: str = "two-phase",
                 staleness_s: float = 60.0,
                 result_ttl_s: float = 3600.0,
                 barrier_timeout_s: float = 300.0,
                 large_data_threshold: int = DEFAULT_LARGE_DATA_THRESHOLD) -> None:
        self.store = store
        self.clock = clock
        self.registry = Registry(store)
        self.apps = ApplicationModel(store)
        self.candidates = MapView(store, "candidate_resource")
        self.rtt = rtt
        self.metrics = metrics
        self.scheduler = Scheduler(self.registry, self.apps, metrics,
                                   self.candidates, rtt, policy=policy,
                                   staleness_s=staleness_s, clock=clock)
        self.storage = StorageManager(self.registry, object_store, store,
                                      large_data_threshold=large_data_threshold)
        self.functions = FunctionManager(
            self.registry, self.apps, provider, self.candidates, metrics, rtt,
            store, clock, scheduler=self.scheduler,
            result_ttl_s=result_ttl_s, barrier_timeout_s=barrier_timeout_s)

    @classmethod
    def with_sim_fabric(cls, fabric, store: MappingStore | None = None,
                        **kwargs) -> "ControlPlane":
        return cls(
            store=store or MemoryMappingStore(),
            provider=fabric.provider,
            object_store=fabric.object_store,
            metrics=fabric.metrics,
            rtt=fabric.rtt,
            clock=fabric.clock,
            **kwargs,
        )

    def unregister_resource(self, resource_id: int) -> None:
        """Unregister, blocked while functions or buckets reference the id."""

        def busy_probe(rid: int) -> list[str]:
            reasons = [f"function {q} deployed"
                       for q in self.functions.functions_on_resource(rid)]
            reasons += [f"bucket {ns} bound"
                        for ns in self.storage.buckets_on_resource(rid)]
            return reasons

        self.registry.unregister(resource_id, busy_probe=busy_probe)
