"""Application manifests parsed into validated function DAGs.

A manifest names the application, its entrypoints, and a ``dag`` list of
function specs (dependencies, requirements, affinity). Parsing validates
acyclicity, dependency references, entrypoints, and the privacy/node-type
binding, then persists the DAG in the ``dag_store`` map.
"""

from __future__ import annotations

import heapq
import re
import uuid
from dataclasses import dataclass, field
from typing import Any, Mapping

import yaml

from .errors import (
    BadEntrypoint,
    CycleDetected,
    DuplicateApplication,
    InvalidField,
    MalformedManifest,
    UnknownApplication,
    UnknownDependency,
)
from .registry import TIERS, parse_capacity
from .store import MappingStore, MapView

# no hyphens in application names: the storage layer joins
# "<application>-<bucket>" and must be able to split it back
APPLICATION_NAME_RE = re.compile(r"^[a-z0-9]([a-z0-9.]*[a-z0-9])?$")
FUNCTION_NAME_RE = re.compile(r"^[a-z0-9]([a-z0-9-]*[a-z0-9])?$")

AFFINITY_TYPES = ("data", "function")
REDUCE_VALUES = ("auto", "1")


@dataclass(frozen=True)
class FunctionSpec:
    """One DAG node: requirements plus placement affinity."""

    name: str
    dependencies: tuple[str, ...] = ()
    memory_req: int = 0
    gpu_req: int = 0
    privacy: int = 0
    nodetype: str = "cloud"
    affinitytype: str = "data"
    reduce: str = "auto"

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "dependencies": list(self.dependencies),
            "memory_req": self.memory_req,
            "gpu_req": self.gpu_req,
            "privacy": self.privacy,
            "nodetype": self.nodetype,
            "affinitytype": self.affinitytype,
            "reduce": self.reduce,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FunctionSpec":
        fields = dict(data)
        fields["dependencies"] = tuple(fields.get("dependencies", ()))
        return cls(**fields)


@dataclass(frozen=True)
class ApplicationDag:
    application: str
    entrypoints: tuple[str, ...]
    nodes: Mapping[str, FunctionSpec]
    dag_id: str = field(default_factory=lambda: uuid.uuid4().hex)

    @property
    def edges(self) -> tuple[tuple[str, str], ...]:
        """(dependency, dependent) pairs."""
        return tuple(
            (dep, name)
            for name in sorted(self.nodes)
            for dep in self.nodes[name].dependencies
        )

    def successors(self, name: str) -> list[str]:
        return sorted(n for n, spec in self.nodes.items() if name in spec.dependencies)

    def to_dict(self) -> dict[str, Any]:
        return {
            "application": self.application,
            "entrypoints": list(self.entrypoints),
            "nodes": {name: spec.to_dict() for name, spec in self.nodes.items()},
            "dag_id": self.dag_id,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ApplicationDag":
        return cls(
            application=data["application"],
            entrypoints=tuple(data["entrypoints"]),
            nodes={name: FunctionSpec.from_dict(spec)
                   for name, spec in data["nodes"].items()},
            dag_id=data["dag_id"],
        )

    def structurally_equal(self, other: "ApplicationDag") -> bool:
        a, b = self.to_dict(), other.to_dict()
        a.pop("dag_id"), b.pop("dag_id")
        return a == b


def _as_name_list(value: Any) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return [value]
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    raise InvalidField(f"expected name or list of names, got {value!r}")


def _parse_affinity(name: str, block: Any) -> tuple[str, str, str]:
    if not isinstance(block, Mapping):
        raise InvalidField(f"{name}: affinity block missing or not a mapping")
    nodetype = str(block.get("nodetype", "")).lower()
    if nodetype not in TIERS:
        raise InvalidField(f"{name}: nodetype must be one of {TIERS}, got "
                           f"{block.get('nodetype')!r}")
    # `nodelocation` is an accepted alias of `affinitytype`
    atype = block.get("affinitytype")
    alias = block.get("nodelocation")
    if atype is not None and alias is not None and str(atype) != str(alias):
        raise InvalidField(f"{name}: affinitytype={atype!r} conflicts with "
                           f"nodelocation={alias!r}")
    affinitytype = str(atype if atype is not None else alias or "").lower()
    if affinitytype not in AFFINITY_TYPES:
        raise InvalidField(f"{name}: affinitytype must be one of {AFFINITY_TYPES}")
    reduce_val = block.get("reduce")
    reduce_str = str(reduce_val).lower() if reduce_val is not None else ""
    if reduce_str not in REDUCE_VALUES:
        raise InvalidField(f"{name}: reduce must be one of {REDUCE_VALUES}, got "
                           f"{reduce_val!r}")
    return nodetype, affinitytype, reduce_str


def _parse_function(entry: Any) -> FunctionSpec:
    if not isinstance(entry, Mapping):
        raise InvalidField(f"dag entry is not a mapping: {entry!r}")
    name = str(entry.get("name", ""))
    if not FUNCTION_NAME_RE.match(name):
        raise InvalidField(f"bad function name: {name!r}")
    dependencies = tuple(_as_name_list(entry.get("dependencies")))

    req = entry.get("requirements") or {}
    if not isinstance(req, Mapping):
        raise InvalidField(f"{name}: requirements must be a mapping")
    try:
        memory_req = parse_capacity(req["memory"]) if "memory" in req else 0
    except MalformedManifest as exc:
        raise InvalidField(f"{name}: {exc}") from exc
    gpu_req = int(req.get("gpu", 0))
    privacy = int(req.get("privacy", 0))
    if privacy not in (0, 1):
        raise InvalidField(f"{name}: privacy must be 0 or 1")
    if gpu_req < 0:
        raise InvalidField(f"{name}: gpu requirement must be >= 0")

    nodetype, affinitytype, reduce_str = _parse_affinity(name, entry.get("affinity"))

    if privacy == 1 and nodetype != "iot":
        raise InvalidField(f"{name}: privacy=1 binds execution to iot devices, "
                           f"nodetype is {nodetype!r}")
    if affinitytype == "function" and not dependencies:
        raise InvalidField(f"{name}: affinitytype=function requires dependencies "
                           "to anchor on")

    return FunctionSpec(
        name=name, dependencies=dependencies, memory_req=memory_req,
        gpu_req=gpu_req, privacy=privacy, nodetype=nodetype,
        affinitytype=affinitytype, reduce=reduce_str,
    )


def parse_application_document(document: str | Mapping[str, Any]) -> ApplicationDag:
    """Validate a manifest into an ApplicationDag (without storing it)."""
    if isinstance(document, str):
        try:
            doc = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            raise InvalidField(f"unparsable document: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, Mapping):
        raise InvalidField("application manifest must be a mapping")

    application = str(doc.get("application", ""))
    if not APPLICATION_NAME_RE.match(application):
        raise InvalidField(f"bad application name: {application!r} "
                           "(lowercase alphanumerics and dots, no hyphens)")

    dag_entries = doc.get("dag")
    if not isinstance(dag_entries, list) or not dag_entries:
        raise InvalidField("dag must be a non-empty list of functions")

    nodes: dict[str, FunctionSpec] = {}
    for entry in dag_entries:
        spec = _parse_function(entry)
        if spec.name in nodes:
            raise InvalidField(f"duplicate function name: {spec.name}")
        nodes[spec.name] = spec

    for spec in nodes.values():
        for dep in spec.dependencies:
            if dep not in nodes:
                raise UnknownDependency(f"{spec.name}: dependency {dep!r} is not "
                                        "a function of this application")
            if dep == spec.name:
                raise CycleDetected(f"{spec.name} depends on itself")

    entrypoints = _as_name_list(doc.get("entrypoint"))
    if not entrypoints:
        raise BadEntrypoint("entrypoint is required")
    for ep in entrypoints:
        if ep not in nodes:
            raise BadEntrypoint(f"entrypoint {ep!r} must be one of the functions "
                                "of the application")
        if nodes[ep].dependencies:
            raise BadEntrypoint(f"entrypoint {ep!r} has dependencies and can "
                                "never be triggered first")

    dag = ApplicationDag(application=application, entrypoints=tuple(entrypoints),
                         nodes=nodes)
    topo_order(dag)  # raises CycleDetected on any cycle
    return dag


def topo_order(dag: ApplicationDag) -> list[str]:
    """Dependency-respecting order; ties broken lexicographically."""
    indegree = {name: len(spec.dependencies) for name, spec in dag.nodes.items()}
    ready = [name for name, deg in sorted(indegree.items()) if deg == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        name = heapq.heappop(ready)
        order.append(name)
        for succ in dag.successors(name):
            indegree[succ] -= 1
            if indegree[succ] == 0:
                heapq.heappush(ready, succ)
    if len(order) != len(dag.nodes):
        stuck = sorted(set(dag.nodes) - set(order))
        raise CycleDetected(f"cycle through {stuck}")
    return order


class ApplicationModel:
    """Registered DAGs backed by the ``dag_store`` map (keyed by dag_id)."""

    def __init__(self, store: MappingStore) -> None:
        self._map = MapView(store, "dag_store")
        self._by_application: dict[str, ApplicationDag] = {}
        for _, data in self._map.items():
            dag = ApplicationDag.from_dict(data)
            self._by_application[dag.application] = dag

    def parse_application(self, document: str | Mapping[str, Any]) -> ApplicationDag:
        dag = parse_application_document(document)
        if dag.application in self._by_application:
            raise DuplicateApplication(dag.application)
        self._map.set(dag.dag_id, dag.to_dict())
        self._by_application[dag.application] = dag
        return dag

    def get(self, application: str) -> ApplicationDag:
        try:
            return self._by_application[application]
        except KeyError:
            raise UnknownApplication(application) from None

    def __contains__(self, application: str) -> bool:
        return application in self._by_application

    def applications(self) -> list[str]:
        return sorted(self._by_application)
