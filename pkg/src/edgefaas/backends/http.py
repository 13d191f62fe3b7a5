"""Generic HTTP backends: OpenFaaS-style provider and S3-style object store.

Endpoints come from each resource's registration record. These clients are
best-effort adapters for real deployments; the acceptance suite exercises
the simulated fabric only.
"""

from __future__ import annotations

import io
import time
import xml.etree.ElementTree as ET
from typing import Any

import requests

from ..errors import BackendRejected, UnknownObject, Unreachable
from ..registry import Registry
from .base import InvocationResult


class HttpFaasProvider:
    """Drives the OpenFaaS-compatible REST surface of each resource's
    gateway: /system/functions CRUD, /system/function/{name},
    /function/{name} and /async-function/{name}."""

    def __init__(self, registry: Registry, timeout: float = 30.0,
                 session: requests.Session | None = None) -> None:
        self.registry = registry
        self.timeout = timeout
        self._session = session or requests.Session()

    def _base(self, resource_id: int) -> str:
        record = self.registry.get(resource_id)
        return f"http://{record.gateway}"

    def _call(self, resource_id: int, method: str, path: str, **kwargs) -> requests.Response:
        record = self.registry.get(resource_id)
        url = f"http://{record.gateway}{path}"
        kwargs.setdefault("timeout", self.timeout)
        kwargs.setdefault("auth", ("admin", record.pwd))
        try:
            resp = self._session.request(method, url, **kwargs)
        except requests.RequestException as exc:
            raise Unreachable(f"resource {resource_id}: {exc}") from exc
        if resp.status_code >= 400:
            raise BackendRejected(
                f"resource {resource_id}: HTTP {resp.status_code}: {resp.text[:200]}")
        return resp

    def deploy(self, resource_id: int, qualified: str, package: str) -> None:
        body = {"service": qualified, "image": package,
                "labels": {"edgefaas": "1"}}
        self._call(resource_id, "POST", "/system/functions", json=body)

    def remove(self, resource_id: int, qualified: str) -> None:
        self._call(resource_id, "DELETE", "/system/functions",
                   json={"functionName": qualified})

    def describe(self, resource_id: int, qualified: str) -> dict[str, Any]:
        resp = self._call(resource_id, "GET", f"/system/function/{qualified}")
        doc = resp.json()
        return {
            "name": doc.get("name", qualified),
            "status": "ready" if doc.get("availableReplicas", 0) else "pending",
            "replicas": doc.get("replicas", 0),
            "invocations": int(doc.get("invocationCount", 0)),
            "image": doc.get("image", ""),
            "url": f"{self._base(resource_id)}/function/{qualified}",
            "labels": doc.get("labels") or {},
        }

    def invoke(self, resource_id: int, qualified: str, payload: Any) -> InvocationResult:
        started = time.monotonic()
        resp = self._call(resource_id, "POST", f"/function/{qualified}", json=payload)
        latency = time.monotonic() - started
        try:
            result = resp.json()
        except ValueError:
            result = resp.text
        return InvocationResult(result=result, latency_s=latency)


class HttpObjectStore:
    """Path-style S3 verbs against each resource's object-store endpoint."""

    def __init__(self, registry: Registry, timeout: float = 30.0,
                 session: requests.Session | None = None) -> None:
        self.registry = registry
        self.timeout = timeout
        self._session = session or requests.Session()

    def _url(self, resource_id: int, bucket: str, name: str | None = None) -> str:
        record = self.registry.get(resource_id)
        url = f"http://{record.minio}/{bucket}"
        if name is not None:
            url += f"/{name}"
        return url

    def _call(self, resource_id: int, method: str, url: str, ok=(200, 204),
              **kwargs) -> requests.Response:
        kwargs.setdefault("timeout", self.timeout)
        try:
            resp = self._session.request(method, url, **kwargs)
        except requests.RequestException as exc:
            raise Unreachable(f"resource {resource_id}: {exc}") from exc
        if resp.status_code == 404:
            raise UnknownObject(url)
        if resp.status_code not in ok:
            raise BackendRejected(
                f"resource {resource_id}: HTTP {resp.status_code}: {resp.text[:200]}")
        return resp

    def make_bucket(self, resource_id: int, bucket: str) -> None:
        self._call(resource_id, "PUT", self._url(resource_id, bucket))

    def remove_bucket(self, resource_id: int, bucket: str) -> None:
        self._call(resource_id, "DELETE", self._url(resource_id, bucket))

    def put_object(self, resource_id: int, bucket: str, name: str, data: bytes) -> None:
        self._call(resource_id, "PUT", self._url(resource_id, bucket, name), data=data)

    def get_object(self, resource_id: int, bucket: str, name: str) -> bytes:
        return self._call(resource_id, "GET",
                          self._url(resource_id, bucket, name)).content

    def delete_object(self, resource_id: int, bucket: str, name: str) -> None:
        self._call(resource_id, "DELETE", self._url(resource_id, bucket, name))

    def list_objects(self, resource_id: int, bucket: str) -> list[str]:
        resp = self._call(resource_id, "GET", self._url(resource_id, bucket),
                          params={"list-type": "2"})
        root = ET.parse(io.StringIO(resp.text)).getroot()
        namespace = root.tag.split("}")[0] + "}" if "}" in root.tag else ""
        return [el.text or "" for el in root.iter(f"{namespace}Key")]
