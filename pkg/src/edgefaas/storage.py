"""Virtualized object storage across per-resource stores.

Buckets are namespaced per application ("<application>-<bucket>") and
bound to one resource by the data-placement policy; objects are addressed
by the four-segment URL "application/bucket/resourceID/object". Users see
only their own application's buckets and original names.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .errors import (
    BackendWriteFailure,
    BucketExists,
    BucketNotEmpty,
    InvalidBucketName,
    MalformedUrl,
    MapMismatch,
    NoStorageCapacity,
    PlacementFailed,
    UnknownBucket,
)
from .registry import Registry
from .store import MappingStore, MapView

logger = logging.getLogger(__name__)

# S3 naming: 3-63 chars, lowercase letters/digits/hyphens, alnum ends
BUCKET_NAME_RE = re.compile(r"^[a-z0-9][a-z0-9-]{1,61}[a-z0-9]$")

DEFAULT_LARGE_DATA_THRESHOLD = 10 * 1024 * 1024


@dataclass(frozen=True)
class ObjectUrl:
    application: str
    bucket: str
    resource_id: int
    object_name: str

    def render(self) -> str:
        return f"{self.application}/{self.bucket}/{self.resource_id}/{self.object_name}"


def parse_object_url(url: str) -> ObjectUrl:
    parts = url.split("/")
    if len(parts) != 4 or not all(parts):
        raise MalformedUrl(f"expected application/bucket/resourceID/object, got {url!r}")
    application, bucket, rid_text, object_name = parts
    try:
        resource_id = int(rid_text)
    except ValueError:
        raise MalformedUrl(f"resource segment is not an integer: {rid_text!r}") from None
    if resource_id < 0:
        raise MalformedUrl(f"negative resource id in url: {url!r}")
    return ObjectUrl(application, bucket, resource_id, object_name)


def namespaced_bucket(application: str, bucket: str) -> str:
    return f"{application}-{bucket}".lower()


@dataclass
class PlacementHints:
    """Locality hints for choosing the resource backing a bucket."""

    generator_resource: int | list[int] | None = None
    expected_volume: int | None = None
    producer_resource: int | list[int] | None = None
    consumer_resource: int | list[int] | None = None

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any] | None) -> "PlacementHints":
        data = data or {}
        return cls(
            generator_resource=data.get("generator_resource"),
            expected_volume=data.get("expected_volume"),
            producer_resource=data.get("producer_resource"),
            consumer_resource=data.get("consumer_resource"),
        )


def _smallest(ids: int | list[int]) -> int:
    if isinstance(ids, int):
        return ids
    if not ids:
        raise PlacementFailed("empty resource hint")
    return min(int(i) for i in ids)


class StorageManager:
    """Bucket/object operations routed through a pluggable object-store
    backend, with bucket_map / application_bucket kept consistent."""

    def __init__(self, registry: Registry, backend, store: MappingStore,
                 large_data_threshold: int = DEFAULT_LARGE_DATA_THRESHOLD) -> None:
        self.registry = registry
        self.backend = backend
        self.bucket_map = MapView(store, "bucket_map")
        self.application_bucket = MapView(store, "application_bucket")
        self.large_data_threshold = large_data_threshold

    # -- placement -----------------------------------------------------------

    def place_data(self, application: str, bucket: str,
                   hints: PlacementHints | Mapping[str, Any] | None = None) -> int:
        """Pick the resource to hold a bucket.

        Data coming straight off a generating device stays on it; large
        intermediate data stays with its producer; otherwise data follows
        the consumer. Ties and fallbacks resolve to the smallest id.
        """
        if not isinstance(hints, PlacementHints):
            hints = PlacementHints.from_mapping(hints)
        live = self.registry.ids()
        if not any(self.registry.get(rid).storage > 0 for rid in live):
            raise NoStorageCapacity("no registered resource offers storage")

        if hints.generator_resource is not None:
            rid = _smallest(hints.generator_resource)
        elif (hints.expected_volume is not None
                and hints.expected_volume > self.large_data_threshold
                and hints.producer_resource is not None):
            rid = _smallest(hints.producer_resource)
        elif hints.consumer_resource is not None:
            rid = _smallest(hints.consumer_resource)
        elif hints.producer_resource is not None:
            rid = _smallest(hints.producer_resource)
        else:
            rid = min(live)
        if rid not in self.registry:
            raise PlacementFailed(f"hinted resource {rid} is not registered")
        return rid

    # -- buckets ---------------------------------------------------------------

    def _resolve(self, application: str, bucket: str) -> tuple[str, int]:
        ns = namespaced_bucket(application, bucket)
        rid = self.bucket_map.get(ns)
        if rid is None:
            raise UnknownBucket(f"{application}/{bucket}")
        return ns, int(rid)

    def create_bucket(self, application: str, bucket: str,
                      hints: PlacementHints | Mapping[str, Any] | None = None) -> None:
        if not BUCKET_NAME_RE.match(bucket):
            raise InvalidBucketName(
                f"{bucket!r}: 3-63 lowercase letters/digits/hyphens, "
                "alphanumeric at both ends")
        ns = namespaced_bucket(application, bucket)
        if len(ns) > 63:
            raise InvalidBucketName(f"{ns!r}: namespaced name exceeds 63 chars")
        if ns in self.bucket_map:
            raise BucketExists(f"{application}/{bucket}")
        rid = self.place_data(application, bucket, hints)
        self.backend.make_bucket(rid, ns)
        self.bucket_map.set(ns, rid)
        names = list(self.application_bucket.get(application, []))
        if bucket not in names:
            names.append(bucket)
        self.application_bucket.set(application, names)
        logger.info("bucket %s bound to resource %d", ns, rid)

    def delete_bucket(self, application: str, bucket: str) -> None:
        ns, rid = self._resolve(application, bucket)
        if self.backend.list_objects(rid, ns):
            raise BucketNotEmpty(f"{application}/{bucket}")
        self.backend.remove_bucket(rid, ns)
        self.bucket_map.delete(ns)
        names = [n for n in self.application_bucket.get(application, []) if n != bucket]
        if names:
            self.application_bucket.set(application, names)
        else:
            self.application_bucket.delete(application)

    def list_buckets(self, application: str) -> list[str]:
        return sorted(self.application_bucket.get(application, []))

    def bucket_resource(self, application: str, bucket: str) -> int:
        return self._resolve(application, bucket)[1]

    # -- objects ---------------------------------------------------------------

    def put_object(self, file_path: str | Path, application: str, bucket: str) -> str:
        ns, rid = self._resolve(application, bucket)
        path = Path(file_path)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise BackendWriteFailure(f"cannot read {path}: {exc}") from exc
        object_name = path.name
        self.backend.put_object(rid, ns, object_name, data)
        return ObjectUrl(application, bucket, rid, object_name).render()

    def put_bytes(self, data: bytes, object_name: str, application: str,
                  bucket: str) -> str:
        """put_object for in-memory payloads (gateway uploads, harness)."""
        if not object_name or "/" in object_name:
            raise BackendWriteFailure(
                f"object name must be a single non-empty path segment: "
                f"{object_name!r}")
        ns, rid = self._resolve(application, bucket)
        self.backend.put_object(rid, ns, object_name, data)
        return ObjectUrl(application, bucket, rid, object_name).render()

    def get_object(self, url: str, file_path: str | Path) -> None:
        data = self.get_bytes(url)
        Path(file_path).write_bytes(data)

    def get_bytes(self, url: str) -> bytes:
        parsed = parse_object_url(url)
        ns, rid = self._resolve(parsed.application, parsed.bucket)
        if rid != parsed.resource_id:
            raise MapMismatch(
                f"url names resource {parsed.resource_id} but bucket "
                f"{parsed.application}/{parsed.bucket} lives on {rid}")
        return self.backend.get_object(rid, ns, parsed.object_name)

    def delete_object(self, object_name: str, application: str, bucket: str) -> None:
        ns, rid = self._resolve(application, bucket)
        self.backend.delete_object(rid, ns, object_name)

    def list_objects(self, application: str, bucket: str) -> list[str]:
        ns, rid = self._resolve(application, bucket)
        return sorted(self.backend.list_objects(rid, ns))

    # -- registry integration ----------------------------------------------------

    def buckets_on_resource(self, resource_id: int) -> list[str]:
        """Namespaced buckets bound to a resource (blocks its unregistration)."""
        return sorted(ns for ns, rid in self.bucket_map.items()
                      if int(rid) == resource_id)
