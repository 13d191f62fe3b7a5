"""Deterministic simulated cluster fabric.

One SimFabric models every registered resource: function state, object
buckets, load table, reachability, plus the network model (symmetric RTT
matrix and per-link bandwidths). All timing runs on a virtual clock, so
experiment traces are pure functions of their inputs.
"""

from __future__ import annotations

import heapq
import json
import math
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np
import yaml

from ..errors import (
    BackendRejected,
    NoLink,
    UnknownObject,
    Unreachable,
)
from ..metrics import SimulatedMetricsProvider
from ..registry import parse_capacity
from ..scheduler import RttMatrix
from ..storage import namespaced_bucket, parse_object_url
from .base import InvocationResult

BEHAVIOR_KINDS = ("echo", "fixed-output", "delay", "vector-average")


class VirtualClock:
    """Manually advanced monotonic time in seconds."""

    def __init__(self, start: float = 0.0) -> None:
        self._now = start

    @property
    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> float:
        if dt < 0:
            raise ValueError("clock cannot go backwards")
        self._now += dt
        return self._now

    def advance_to(self, t: float) -> float:
        self._now = max(self._now, t)
        return self._now

    def __call__(self) -> float:
        return self._now


@dataclass(frozen=True)
class SyntheticFunction:
    """Descriptor-declared behavior standing in for real function code.

    ``compute_s`` maps tier name to execution latency; it must cover every
    tier the function can land on.
    """

    name: str
    kind: str = "echo"
    size: int = 0
    compute_s: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in BEHAVIOR_KINDS:
            raise ValueError(f"unknown behavior kind {self.kind!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "kind": self.kind, "size": self.size,
                "compute_s": dict(self.compute_s)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SyntheticFunction":
        return cls(name=data["name"], kind=data.get("kind", "echo"),
                   size=int(data.get("size", 0)),
                   compute_s=dict(data.get("compute_s", {})))


def build_package(directory: str | Path, behavior: SyntheticFunction) -> str:
    """Write a deployment archive: handler stub plus behavior descriptor."""
    path = Path(directory) / f"{behavior.name}.zip"
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr("descriptor.json", json.dumps(
            {"handler": "handler.process", "behavior": behavior.to_dict()}))
        zf.writestr("handler.py", "def process(payload):\n    return payload\n")
    return str(path)


def read_package_behavior(package: str | Path) -> SyntheticFunction:
    try:
        with zipfile.ZipFile(package) as zf:
            descriptor = json.loads(zf.read("descriptor.json"))
    except (OSError, zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
        raise BackendRejected(f"bad deployment package {package}: {exc}") from exc
    return SyntheticFunction.from_dict(descriptor["behavior"])


@dataclass(frozen=True)
class SimResourceDef:
    id: int
    tier: str
    node: int = 1
    memory: int = 4 * 1024**3
    cpu: int = 4
    storage: int = 64 * 1024**3
    gpunode: int = 0
    gpu: int = 0

    def to_manifest(self) -> dict[str, Any]:
        """Registration document for this simulated resource."""
        return {
            "name": self.tier,
            "node": self.node,
            "memory": self.memory,
            "cpu": self.cpu,
            "storage": self.storage,
            "gpunode": self.gpunode,
            "gpu": self.gpu,
            "gateway": f"10.0.{self.id}.1:8080",
            "pwd": "sim-credential",
            "prometheus": f"10.0.{self.id}.1:30090",
            "minio": f"10.0.{self.id}.1:9000",
            "minioakey": "sim-access",
            "minioskey": "sim-secret",
        }


def _symmetric_matrix(nested: Mapping | None) -> dict[tuple[int, int], float]:
    out: dict[tuple[int, int], float] = {}
    for a, row in (nested or {}).items():
        for b, value in row.items():
            key = (min(int(a), int(b)), max(int(a), int(b)))
            prior = out.get(key)
            if prior is not None and prior != float(value):
                raise ValueError(f"matrix asymmetric at {key}: {prior} vs {value}")
            out[key] = float(value)
    return out


@dataclass
class FabricTopology:
    resources: list[SimResourceDef]
    rtt_ms: RttMatrix
    bandwidth_mbps: dict[tuple[int, int], float]

    def __post_init__(self) -> None:
        ids = [r.id for r in self.resources]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate resource ids in topology")
        known = set(ids)
        for a, b in self.bandwidth_mbps:
            if a not in known or b not in known:
                raise ValueError(f"bandwidth link ({a},{b}) names unknown resource")
            if self.bandwidth_mbps[(a, b)] <= 0:
                raise ValueError(f"bandwidth must be positive on link ({a},{b})")
            if a != b and math.isinf(self.rtt_ms.get(a, b)):
                raise ValueError(f"declared link ({a},{b}) has no rtt entry")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "FabricTopology":
        resources = [
            SimResourceDef(
                id=int(entry["id"]),
                tier=str(entry["tier"]).lower(),
                node=int(entry.get("node", 1)),
                memory=parse_capacity(entry.get("memory", 4 * 1024**3)),
                cpu=int(entry.get("cpu", 4)),
                storage=parse_capacity(entry.get("storage", 64 * 1024**3)),
                gpunode=int(entry.get("gpunode", 0)),
                gpu=int(entry.get("gpu", 0)),
            )
            for entry in doc.get("resources", [])
        ]
        return cls(
            resources=resources,
            rtt_ms=RttMatrix(_symmetric_matrix(doc.get("rtt_ms"))),
            bandwidth_mbps=_symmetric_matrix(doc.get("bandwidth_mbps")),
        )

    @classmethod
    def from_yaml(cls, source: str | Path) -> "FabricTopology":
        text = str(source)
        if "\n" not in text and Path(text).exists():
            text = Path(text).read_text()
        return cls.from_dict(yaml.safe_load(text))


@dataclass
class _SimFunction:
    behavior: SyntheticFunction
    image: str
    status: str = "ready"
    replicas: int = 1
    invocations: int = 0


class SimFabric:
    """In-memory cluster model: FaaS provider + object store + metrics."""

    def __init__(self, topology: FabricTopology) -> None:
        self.topology = topology
        self.clock = VirtualClock()
        self.rtt = topology.rtt_ms
        self.metrics = SimulatedMetricsProvider(clock=self.clock)
        self._defs = {r.id: r for r in topology.resources}
        self._offline: set[int] = set()
        self._functions: dict[int, dict[str, _SimFunction]] = {r.id: {} for r in topology.resources}
        self._buckets: dict[int, dict[str, dict[str, tuple[int, bytes]]]] = {
            r.id: {} for r in topology.resources}
        self.provider = SimFaasProvider(self)
        self.object_store = SimObjectStore(self)

    # -- fabric state ---------------------------------------------------------

    def ids(self) -> list[int]:
        return sorted(self._defs)

    def tier(self, resource_id: int) -> str:
        return self._require(resource_id).tier

    def ids_by_tier(self, tier: str) -> list[int]:
        return sorted(r.id for r in self.topology.resources if r.tier == tier)

    def _require(self, resource_id: int) -> SimResourceDef:
        try:
            return self._defs[resource_id]
        except KeyError:
            raise Unreachable(f"resource {resource_id} is not part of the fabric") from None

    def _check_online(self, resource_id: int) -> None:
        self._require(resource_id)
        if resource_id in self._offline:
            raise Unreachable(f"resource {resource_id} is offline")

    def set_offline(self, resource_id: int, offline: bool = True) -> None:
        self._require(resource_id)
        if offline:
            self._offline.add(resource_id)
        else:
            self._offline.discard(resource_id)
        self.metrics.set_offline(resource_id, offline)

    def manifests(self) -> list[dict[str, Any]]:
        return [self._defs[rid].to_manifest() for rid in self.ids()]

    # -- network model ----------------------------------------------------------

    def _link_time(self, nbytes: int, a: int, b: int) -> float | None:
        key = (min(a, b), max(a, b))
        bw = self.topology.bandwidth_mbps.get(key)
        if bw is None:
            return None
        return nbytes * 8 / (bw * 1e6) + self.rtt.get(a, b) / 1000.0

    def transfer_time(self, nbytes: int, src: int, dst: int) -> float:
        """Seconds to move ``nbytes`` from src to dst.

        Direct link when declared; otherwise one relay hop over declared
        links (the tiered topology's iot-edge-cloud path); NoLink when
        neither exists.
        """
        self._require(src)
        self._require(dst)
        if src == dst:
            return 0.0
        direct = self._link_time(nbytes, src, dst)
        if direct is not None:
            return direct
        best: float | None = None
        for mid in self.ids():
            if mid in (src, dst):
                continue
            first = self._link_time(nbytes, src, mid)
            second = self._link_time(nbytes, mid, dst)
            if first is None or second is None:
                continue
            total = first + second
            if best is None or total < best:
                best = total
        if best is None:
            raise NoLink(f"no declared path from {src} to {dst}")
        return best


class SimFaasProvider:
    def __init__(self, fabric: SimFabric) -> None:
        self._fabric = fabric

    def deploy(self, resource_id: int, qualified: str, package: str) -> None:
        self._fabric._check_online(resource_id)
        behavior = read_package_behavior(package)
        functions = self._fabric._functions[resource_id]
        existing = functions.get(qualified)
        invocations = existing.invocations if existing else 0
        functions[qualified] = _SimFunction(behavior=behavior, image=str(package),
                                            invocations=invocations)

    def remove(self, resource_id: int, qualified: str) -> None:
        self._fabric._check_online(resource_id)
        functions = self._fabric._functions[resource_id]
        if qualified not in functions:
            raise BackendRejected(f"{qualified} is not deployed on {resource_id}")
        del functions[qualified]

    def describe(self, resource_id: int, qualified: str) -> dict[str, Any]:
        self._fabric._check_online(resource_id)
        fn = self._fabric._functions[resource_id].get(qualified)
        if fn is None:
            raise BackendRejected(f"{qualified} is not deployed on {resource_id}")
        return {
            "name": qualified,
            "status": fn.status,
            "replicas": fn.replicas,
            "invocations": fn.invocations,
            "image": fn.image,
            "url": f"http://10.0.{resource_id}.1:8080/function/{qualified}",
            "labels": {"resource_id": resource_id,
                       "tier": self._fabric.tier(resource_id)},
        }

    def deployed(self, resource_id: int) -> list[str]:
        return sorted(self._fabric._functions.get(resource_id, {}))

    def _compute_latency(self, behavior: SyntheticFunction, tier: str) -> float:
        if behavior.kind == "delay" and tier not in behavior.compute_s:
            raise BackendRejected(
                f"{behavior.name}: no compute latency declared for tier {tier!r}")
        return float(behavior.compute_s.get(tier, 0.0))

    def _fetch_vector(self, url: str) -> tuple[np.ndarray, float]:
        parsed = parse_object_url(url)
        ns = namespaced_bucket(parsed.application, parsed.bucket)
        raw = self._fabric.object_store.get_object(
            parsed.resource_id, ns, parsed.object_name)
        doc = json.loads(raw.decode("utf-8"))
        return np.asarray(doc["vector"], dtype=np.float64), float(doc.get("weight", 1.0))

    def invoke(self, resource_id: int, qualified: str, payload: Any) -> InvocationResult:
        self._fabric._check_online(resource_id)
        fn = self._fabric._functions[resource_id].get(qualified)
        if fn is None:
            raise BackendRejected(f"{qualified} is not deployed on {resource_id}")
        if isinstance(payload, Mapping) and "edgefaas" in payload:
            payload = payload.get("payload")  # unwrap the invocation envelope
        tier = self._fabric.tier(resource_id)
        latency = self._compute_latency(fn.behavior, tier)
        fn.invocations += 1

        kind = fn.behavior.kind
        if kind == "echo" or kind == "delay":
            result: Any = payload
        elif kind == "fixed-output":
            result = bytes(fn.behavior.size)
        else:  # vector-average
            if not isinstance(payload, Mapping) or "urls" not in payload:
                raise BackendRejected(
                    f"{qualified}: vector-average expects payload {{'urls': [...]}}")
            vectors, weights = [], []
            for url in payload["urls"]:
                vec, weight = self._fetch_vector(url)
                vectors.append(vec)
                weights.append(weight)
            mean = np.average(np.stack(vectors), axis=0, weights=weights)
            result = {"vector": mean.tolist(), "weight": float(sum(weights))}
        return InvocationResult(result=result, latency_s=latency)


class SimObjectStore:
    def __init__(self, fabric: SimFabric) -> None:
        self._fabric = fabric

    def _bucket(self, resource_id: int, bucket: str) -> dict[str, tuple[int, bytes]]:
        self._fabric._check_online(resource_id)
        buckets = self._fabric._buckets[resource_id]
        if bucket not in buckets:
            raise UnknownObject(f"bucket {bucket} does not exist on {resource_id}")
        return buckets[bucket]

    def make_bucket(self, resource_id: int, bucket: str) -> None:
        self._fabric._check_online(resource_id)
        buckets = self._fabric._buckets[resource_id]
        if bucket in buckets:
            raise BackendRejected(f"bucket {bucket} already exists on {resource_id}")
        buckets[bucket] = {}

    def remove_bucket(self, resource_id: int, bucket: str) -> None:
        contents = self._bucket(resource_id, bucket)
        if contents:
            raise BackendRejected(f"bucket {bucket} on {resource_id} is not empty")
        del self._fabric._buckets[resource_id][bucket]

    def put_object(self, resource_id: int, bucket: str, name: str, data: bytes) -> None:
        contents = self._bucket(resource_id, bucket)
        version = contents[name][0] + 1 if name in contents else 1
        contents[name] = (version, bytes(data))

    def get_object(self, resource_id: int, bucket: str, name: str) -> bytes:
        contents = self._bucket(resource_id, bucket)
        if name not in contents:
            raise UnknownObject(f"{bucket}/{name} on resource {resource_id}")
        return contents[name][1]

    def delete_object(self, resource_id: int, bucket: str, name: str) -> None:
        contents = self._bucket(resource_id, bucket)
        if name not in contents:
            raise UnknownObject(f"{bucket}/{name} on resource {resource_id}")
        del contents[name]

    def list_objects(self, resource_id: int, bucket: str) -> list[str]:
        return sorted(self._bucket(resource_id, bucket))


# -- discrete-event execution ------------------------------------------------

@dataclass
class TraceEvent:
    at: float
    label: str
    resource_id: int | None = None
    info: dict[str, Any] | None = None


@dataclass
class ScheduledEvent:
    """An action at a virtual time; actions may schedule further events."""

    at: float
    label: str
    resource_id: int | None = None
    action: Callable[[float], "list[ScheduledEvent] | None"] | None = None
    info: dict[str, Any] | None = None


def virtual_clock_run(events: list[ScheduledEvent],
                      clock: VirtualClock | None = None) -> list[TraceEvent]:
    """Run events to quiescence in (time, insertion) order.

    Identical inputs produce identical traces; the clock ends at the last
    event's timestamp.
    """
    clock = clock or VirtualClock()
    heap: list[tuple[float, int, ScheduledEvent]] = []
    seq = 0
    for ev in events:
        heapq.heappush(heap, (ev.at, seq, ev))
        seq += 1
    trace: list[TraceEvent] = []
    while heap:
        at, _, ev = heapq.heappop(heap)
        clock.advance_to(at)
        trace.append(TraceEvent(at=at, label=ev.label, resource_id=ev.resource_id,
                                info=ev.info))
        if ev.action is not None:
            for child in ev.action(at) or []:
                if child.at < at:
                    raise ValueError(f"event {child.label} scheduled in the past")
                heapq.heappush(heap, (child.at, seq, child))
                seq += 1
    return trace
