"""Backend abstractions: FaaS provider verbs and object-store verbs.

Each registered resource is driven through these two interfaces; the
simulated fabric and the generic HTTP clients both implement them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Protocol


@dataclass
class InvocationResult:
    result: Any
    latency_s: float = 0.0


class FaasProvider(Protocol):
    def deploy(self, resource_id: int, qualified: str, package: str) -> None:
        """Deploy a packaged function under its qualified name."""
        ...

    def remove(self, resource_id: int, qualified: str) -> None:
        ...

    def describe(self, resource_id: int, qualified: str) -> dict[str, Any]:
        """Name, status, replicas, invocation count, image, URL, labels."""
        ...

    def invoke(self, resource_id: int, qualified: str, payload: Any) -> InvocationResult:
        ...


class ObjectStoreBackend(Protocol):
    def make_bucket(self, resource_id: int, bucket: str) -> None:
        ...

    def remove_bucket(self, resource_id: int, bucket: str) -> None:
        ...

    def put_object(self, resource_id: int, bucket: str, name: str, data: bytes) -> None:
        ...

    def get_object(self, resource_id: int, bucket: str, name: str) -> bytes:
        ...

    def delete_object(self, resource_id: int, bucket: str, name: str) -> None:
        ...

    def list_objects(self, resource_id: int, bucket: str) -> list[str]:
        ...
