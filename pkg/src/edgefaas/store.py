"""Durable mapping store.

All control-plane state lives in named maps (resource_mapping,
candidate_resource, bucket_map, application_bucket, dag_store, ...). The
store contract: once a mutation returns, a restart followed by ``load``
yields the identical map contents. Three backends: an append-log file
store (default), an in-memory store for tests, and a generic HTTP
key-value client for remote backing services.
"""

from __future__ import annotations

import json
import os
import re
import threading
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Iterator

from .errors import CorruptStore

_NAME_RE = re.compile(r"^[a-z0-9_][a-z0-9_.-]*$")


def _check_name(name: str) -> str:
    if not _NAME_RE.match(name):
        raise ValueError(f"bad map name: {name!r}")
    return name


class MappingStore(ABC):
    """Key-value persistence for named maps. Keys are strings, values any
    JSON-serializable structure."""

    @abstractmethod
    def load(self, name: str) -> dict[str, Any]:
        """Return the full current contents of the named map."""

    @abstractmethod
    def put(self, name: str, key: str, value: Any) -> None:
        """Durably set one entry. Returning implies the write survives restart."""

    @abstractmethod
    def delete(self, name: str, key: str) -> None:
        """Durably remove one entry (no-op if absent)."""


class MemoryMappingStore(MappingStore):
    """Volatile store for unit tests and throwaway fabrics."""

    def __init__(self) -> None:
        self._maps: dict[str, dict[str, Any]] = {}

    def load(self, name: str) -> dict[str, Any]:
        return dict(self._maps.get(_check_name(name), {}))

    def put(self, name: str, key: str, value: Any) -> None:
        self._maps.setdefault(_check_name(name), {})[key] = json.loads(json.dumps(value))

    def delete(self, name: str, key: str) -> None:
        self._maps.get(_check_name(name), {}).pop(key, None)


class LocalFileMappingStore(MappingStore):
    """One append-only JSON-lines log per map under ``root``.

    Each mutation appends a record and flushes (fsync by default); ``load``
    replays the log. ``snapshot`` compacts a log in place.
    """

    def __init__(self, root: str | Path, fsync: bool = True) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.fsync = fsync
        self._lock = threading.Lock()

    def _path(self, name: str) -> Path:
        return self.root / f"{_check_name(name)}.jsonl"

    def load(self, name: str) -> dict[str, Any]:
        path = self._path(name)
        if not path.exists():
            return {}
        data: dict[str, Any] = {}
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    op = rec["op"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise CorruptStore(f"{path}:{lineno}: {exc}") from exc
                if op == "set":
                    data[rec["k"]] = rec["v"]
                elif op == "del":
                    data.pop(rec["k"], None)
                elif op == "snapshot":
                    data = dict(rec["data"])
                else:
                    raise CorruptStore(f"{path}:{lineno}: unknown op {op!r}")
        return data

    def _append(self, name: str, record: dict[str, Any]) -> None:
        with self._lock:
            with self._path(name).open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, separators=(",", ":")) + "\n")
                fh.flush()
                if self.fsync:
                    os.fsync(fh.fileno())

    def put(self, name: str, key: str, value: Any) -> None:
        self._append(name, {"op": "set", "k": key, "v": value})

    def delete(self, name: str, key: str) -> None:
        self._append(name, {"op": "del", "k": key})

    def snapshot(self, name: str) -> None:
        """Rewrite the log as a single snapshot record."""
        data = self.load(name)
        tmp = self._path(name).with_suffix(".tmp")
        with self._lock:
            with tmp.open("w", encoding="utf-8") as fh:
                fh.write(json.dumps({"op": "snapshot", "data": data}) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            tmp.replace(self._path(name))


class HttpMappingStore(MappingStore):
    """Client for a generic HTTP key-value service.

    Protocol: ``GET {base}/maps/{name}`` returns the whole map as a JSON
    object; ``PUT {base}/maps/{name}/{key}`` with a JSON body sets an entry;
    ``DELETE {base}/maps/{name}/{key}`` removes one. Best-effort backend;
    not used by the acceptance suite.
    """

    def __init__(self, base_url: str, timeout: float = 10.0, session=None) -> None:
        import requests

        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def _url(self, name: str, key: str | None = None) -> str:
        url = f"{self.base_url}/maps/{_check_name(name)}"
        if key is not None:
            from urllib.parse import quote

            url += f"/{quote(key, safe='')}"
        return url

    def load(self, name: str) -> dict[str, Any]:
        resp = self._session.get(self._url(name), timeout=self.timeout)
        if resp.status_code == 404:
            return {}
        if resp.status_code != 200:
            raise CorruptStore(f"GET {name}: HTTP {resp.status_code}")
        return dict(resp.json())

    def put(self, name: str, key: str, value: Any) -> None:
        resp = self._session.put(self._url(name, key), json=value, timeout=self.timeout)
        if resp.status_code not in (200, 201, 204):
            raise IOError(f"PUT {name}/{key}: HTTP {resp.status_code}")

    def delete(self, name: str, key: str) -> None:
        resp = self._session.delete(self._url(name, key), timeout=self.timeout)
        if resp.status_code not in (200, 204, 404):
            raise IOError(f"DELETE {name}/{key}: HTTP {resp.status_code}")


class MapView:
    """Write-through in-memory view of one named map.

    Mutations hold a lock and hit the durable store before updating the
    cache, so a crash between the two leaves the store ahead of memory,
    never behind (single logical writer per map).
    """

    def __init__(self, store: MappingStore, name: str) -> None:
        self.store = store
        self.name = name
        self._lock = threading.Lock()
        self._data: dict[str, Any] = store.load(name)

    def get(self, key: str, default: Any = None) -> Any:
        return self._data.get(key, default)

    def __contains__(self, key: str) -> bool:
        return key in self._data

    def __len__(self) -> int:
        return len(self._data)

    def keys(self) -> list[str]:
        return list(self._data.keys())

    def items(self) -> Iterator[tuple[str, Any]]:
        return iter(list(self._data.items()))

    def as_dict(self) -> dict[str, Any]:
        return dict(self._data)

    def set(self, key: str, value: Any) -> None:
        with self._lock:
            self.store.put(self.name, key, value)
            self._data[key] = value

    def delete(self, key: str) -> None:
        with self._lock:
            self.store.delete(self.name, key)
            self._data.pop(key, None)
