"""Resource registration: manifest parsing, ID assignment, durable records.

A resource is one cluster or device exposing a FaaS gateway plus metrics
and object-store endpoints. Records persist in the ``resource_mapping``
map; IDs are the smallest unused non-negative integer and are reused
after unregistration.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, asdict
from typing import Any, Callable, Mapping

import yaml

from .errors import DuplicateEndpoint, MalformedManifest, ResourceBusy, UnknownResource
from .store import MappingStore, MapView

logger = logging.getLogger(__name__)

REDACTED = "***"
TIERS = ("iot", "edge", "cloud")

MANIFEST_KEYS = (
    "name", "node", "memory", "cpu", "storage", "gpunode", "gpu",
    "gateway", "pwd", "prometheus", "minio", "minioakey", "minioskey",
)

_CAPACITY_RE = re.compile(r"^\s*(\d+)\s*(KB|MB|GB|TB)?\s*$", re.IGNORECASE)
_SUFFIX = {"KB": 1024, "MB": 1024**2, "GB": 1024**3, "TB": 1024**4}
_ENDPOINT_RE = re.compile(r"^[A-Za-z0-9._-]+:(\d{1,5})$")


def parse_capacity(value: Any) -> int:
    """Parse a capacity like ``"64GB"`` into bytes (base 1024).

    Bare integers are taken as bytes. Decimal (1000-based) suffixes are
    not supported.
    """
    if isinstance(value, bool):
        raise MalformedManifest(f"bad capacity: {value!r}")
    if isinstance(value, int):
        if value <= 0:
            raise MalformedManifest(f"capacity must be positive: {value}")
        return value
    m = _CAPACITY_RE.match(str(value))
    if not m:
        raise MalformedManifest(f"bad capacity: {value!r}")
    number, suffix = int(m.group(1)), m.group(2)
    if number <= 0:
        raise MalformedManifest(f"capacity must be positive: {value!r}")
    return number * _SUFFIX[suffix.upper()] if suffix else number


def format_capacity(n: int) -> str:
    for suffix in ("TB", "GB", "MB", "KB"):
        if n % _SUFFIX[suffix] == 0:
            return f"{n // _SUFFIX[suffix]}{suffix}"
    return str(n)


def _require_endpoint(value: Any, field: str) -> str:
    text = str(value)
    m = _ENDPOINT_RE.match(text)
    if not m or not 1 <= int(m.group(1)) <= 65535:
        raise MalformedManifest(f"{field}: not a host:port endpoint: {value!r}")
    return text


def _require_int(value: Any, field: str, minimum: int) -> int:
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise MalformedManifest(f"{field}: not an integer: {value!r}") from None
    if n < minimum:
        raise MalformedManifest(f"{field}: must be >= {minimum}, got {n}")
    return n


@dataclass(frozen=True)
class ResourceRecord:
    """One registered cluster or device (capability + endpoints + credentials)."""

    resource_id: int
    name: str
    node: int
    memory: int           # bytes per node
    cpu: int              # logical cores per node
    storage: int          # bytes per node
    gpunode: int
    gpu: int
    gateway: str
    pwd: str
    prometheus: str
    minio: str
    minio_access_key: str
    minio_secret_key: str

    @property
    def tier(self) -> str:
        return self.name.lower()

    def total_memory(self) -> int:
        return self.node * self.memory

    def total_cpu(self) -> int:
        return self.node * self.cpu

    def total_gpu(self) -> int:
        return self.gpunode * self.gpu

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ResourceRecord":
        return cls(**data)

    def redacted(self) -> dict[str, Any]:
        out = self.to_dict()
        out["pwd"] = REDACTED
        out["minio_access_key"] = REDACTED
        out["minio_secret_key"] = REDACTED
        return out


def parse_manifest(document: str | Mapping[str, Any]) -> dict[str, Any]:
    """Validate a registration document into constructor kwargs (sans id)."""
    if isinstance(document, str):
        try:
            doc = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            raise MalformedManifest(f"unparsable document: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, Mapping):
        raise MalformedManifest("manifest must be a mapping")

    unknown = sorted(set(doc) - set(MANIFEST_KEYS))
    if unknown:
        logger.warning("manifest: ignoring unknown keys %s", unknown)
    missing = [k for k in MANIFEST_KEYS if k not in doc]
    if missing:
        raise MalformedManifest(f"missing fields: {missing}")

    node = _require_int(doc["node"], "node", 1)
    gpunode = _require_int(doc["gpunode"], "gpunode", 0)
    gpu = _require_int(doc["gpu"], "gpu", 0)
    if gpunode > node:
        raise MalformedManifest(f"gpunode {gpunode} exceeds node count {node}")
    if gpu > 0 and gpunode == 0:
        raise MalformedManifest("gpu > 0 requires gpunode > 0")

    name = str(doc["name"])
    if name.lower() not in TIERS:
        logger.warning("manifest: tier label %r is outside %s and will never "
                       "match affinity", name, TIERS)

    for cred in ("pwd", "minioakey", "minioskey"):
        if doc[cred] is None or str(doc[cred]) == "":
            raise MalformedManifest(f"{cred}: must be non-empty")

    return {
        "name": name,
        "node": node,
        "memory": parse_capacity(doc["memory"]),
        "cpu": _require_int(doc["cpu"], "cpu", 1),
        "storage": parse_capacity(doc["storage"]),
        "gpunode": gpunode,
        "gpu": gpu,
        "gateway": _require_endpoint(doc["gateway"], "gateway"),
        "pwd": str(doc["pwd"]),
        "prometheus": _require_endpoint(doc["prometheus"], "prometheus"),
        "minio": _require_endpoint(doc["minio"], "minio"),
        "minio_access_key": str(doc["minioakey"]),
        "minio_secret_key": str(doc["minioskey"]),
    }


class Registry:
    """Live resource records backed by the ``resource_mapping`` map."""

    def __init__(self, store: MappingStore) -> None:
        self._map = MapView(store, "resource_mapping")
        self._records: dict[int, ResourceRecord] = {
            int(key): ResourceRecord.from_dict(value) for key, value in self._map.items()
        }

    def register(self, manifest: str | Mapping[str, Any]) -> int:
        fields = parse_manifest(manifest)
        for record in self._records.values():
            if record.gateway == fields["gateway"]:
                raise DuplicateEndpoint(
                    f"gateway {fields['gateway']} already registered as resource "
                    f"{record.resource_id}")
        resource_id = self._next_id()
        record = ResourceRecord(resource_id=resource_id, **fields)
        self._map.set(str(resource_id), record.to_dict())
        self._records[resource_id] = record
        logger.info("registered resource %d (%s @ %s)", resource_id, record.name,
                    record.gateway)
        return resource_id

    def _next_id(self) -> int:
        rid = 0
        while rid in self._records:
            rid += 1
        return rid

    def unregister(self, resource_id: int,
                   busy_probe: Callable[[int], list[str]] | None = None) -> None:
        """Remove a record; ``busy_probe`` returns reasons that block removal."""
        if resource_id not in self._records:
            raise UnknownResource(f"resource {resource_id}")
        reasons = busy_probe(resource_id) if busy_probe else []
        if reasons:
            raise ResourceBusy(resource_id, reasons)
        self._map.delete(str(resource_id))
        del self._records[resource_id]
        logger.info("unregistered resource %d", resource_id)

    def get(self, resource_id: int) -> ResourceRecord:
        try:
            return self._records[resource_id]
        except KeyError:
            raise UnknownResource(f"resource {resource_id}") from None

    def __contains__(self, resource_id: int) -> bool:
        return resource_id in self._records

    def ids(self) -> list[int]:
        return sorted(self._records)

    def records(self) -> list[ResourceRecord]:
        return [self._records[rid] for rid in self.ids()]

    def list_resources(self) -> list[dict[str, Any]]:
        """All live records with credential fields replaced by a fixed token."""
        return [record.redacted() for record in self.records()]

    def by_tier(self, tier: str) -> list[ResourceRecord]:
        tier = tier.lower()
        return [r for r in self.records() if r.tier == tier]
