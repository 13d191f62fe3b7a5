"""Virtualized function lifecycle across backends.

Functions live under namespaced names ("application.function"); the
candidate_resource map records where each is deployed. Invocations travel
in a structured envelope carrying the scheduled resource id. Chained
invocation routes each completion to the successor instance serving it
and fires that instance once all of its expected contributors arrive
(fan-in barrier; a reduce=1 successor expects every predecessor instance).
"""

from __future__ import annotations

import logging
import uuid
from dataclasses import dataclass
from typing import Any, Callable, Mapping

from .appmodel import ApplicationModel, topo_order
from .errors import (
    BackendRejected,
    BarrierTimeout,
    InvokeFailure,
    MetricsUnavailable,
    NoCandidates,
    NotASuccessor,
    PartialDeleteFailure,
    PartialDeployFailure,
    UnknownFunction,
    UnknownInvocation,
    Unreachable,
)
from .metrics import MetricsProvider
from .registry import Registry
from .scheduler import FunctionCreation, RttMatrix, Scheduler, assign_anchors
from .store import MappingStore, MapView

logger = logging.getLogger(__name__)

DEFAULT_RESULT_TTL_S = 3600.0
DEFAULT_BARRIER_TIMEOUT_S = 300.0


@dataclass(frozen=True)
class NamespacedFunction:
    application: str
    function: str

    @property
    def qualified(self) -> str:
        return f"{self.application}.{self.function}"

    @classmethod
    def parse(cls, qualified: str) -> "NamespacedFunction":
        application, _, function = qualified.rpartition(".")
        if not application or not function:
            raise UnknownFunction(f"not a qualified name: {qualified!r}")
        return cls(application, function)


@dataclass(frozen=True)
class InvocationEnvelope:
    """Wire form: {"payload": ..., "edgefaas": {resource_id, application,
    function, invocation_id}}."""

    payload: Any
    scheduled_resource_id: int
    application: str
    function: str
    invocation_id: str
    sync: bool = True

    def wire(self) -> dict[str, Any]:
        return {
            "payload": self.payload,
            "edgefaas": {
                "resource_id": self.scheduled_resource_id,
                "application": self.application,
                "function": self.function,
                "invocation_id": self.invocation_id,
            },
        }

    @classmethod
    def from_wire(cls, body: Mapping[str, Any], sync: bool = True) -> "InvocationEnvelope":
        meta = body["edgefaas"]
        return cls(payload=body.get("payload"),
                   scheduled_resource_id=int(meta["resource_id"]),
                   application=meta["application"], function=meta["function"],
                   invocation_id=meta["invocation_id"], sync=sync)


class FunctionManager:
    def __init__(self, registry: Registry, apps: ApplicationModel, provider,
                 candidates: MapView, metrics: MetricsProvider, rtt: RttMatrix,
                 store: MappingStore, clock: Callable[[], float],
                 scheduler: Scheduler | None = None,
                 result_ttl_s: float = DEFAULT_RESULT_TTL_S,
                 barrier_timeout_s: float = DEFAULT_BARRIER_TIMEOUT_S) -> None:
        self.registry = registry
        self.apps = apps
        self.provider = provider
        self.candidates = candidates
        self.metrics = metrics
        self.rtt = rtt
        self.scheduler = scheduler
        self.clock = clock
        self.result_ttl_s = result_ttl_s
        self.barrier_timeout_s = barrier_timeout_s
        self._barriers = MapView(store, "barrier_state")
        self._results: dict[str, tuple[float, dict[int, Any]]] = {}

    # -- helpers -----------------------------------------------------------------

    def _qualified(self, application: str, function: str) -> str:
        dag = self.apps.get(application)
        if function not in dag.nodes:
            raise UnknownFunction(f"{application}.{function}")
        return f"{application}.{function}"

    def _deployed_on(self, qualified: str) -> list[int]:
        placed = self.candidates.get(qualified)
        if not placed:
            raise UnknownFunction(f"{qualified} is not deployed")
        return [int(r) for r in placed]

    # -- lifecycle ---------------------------------------------------------------

    def deploy_function(self, application: str, function: str, package: str) -> list[int]:
        """Deploy the package on every candidate resource.

        Falls back to scheduling now when no candidate set exists yet.
        Failed resources are dropped from the candidate set and reported.
        """
        qualified = self._qualified(application, function)
        placed = self.candidates.get(qualified)
        if not placed:
            if self.scheduler is None:
                raise NoCandidates(f"{qualified}: nothing scheduled and no scheduler")
            placed = self.scheduler.schedule(FunctionCreation(application, function))
        placed = sorted({int(r) for r in placed})

        failed: list[int] = []
        for rid in placed:
            try:
                self.provider.deploy(rid, qualified, package)
            except (Unreachable, BackendRejected) as exc:
                logger.warning("deploy %s on %d failed: %s", qualified, rid, exc)
                failed.append(rid)
        surviving = [r for r in placed if r not in failed]
        self.candidates.set(qualified, surviving)
        if failed:
            raise PartialDeployFailure(qualified, failed)
        return surviving

    def delete_function(self, application: str, function: str) -> None:
        qualified = self._qualified(application, function)
        placed = self._deployed_on(qualified)
        failed: list[int] = []
        for rid in placed:
            try:
                self.provider.remove(rid, qualified)
            except (Unreachable, BackendRejected) as exc:
                logger.warning("delete %s on %d failed: %s", qualified, rid, exc)
                failed.append(rid)
        if failed:
            self.candidates.set(qualified, failed)
            raise PartialDeleteFailure(qualified, failed)
        self.candidates.delete(qualified)

    def get_function(self, application: str, function: str) -> dict[int, dict[str, Any]]:
        """Per-resource description; failures appear as {"error": ...} entries."""
        qualified = self._qualified(application, function)
        placed = self._deployed_on(qualified)
        out: dict[int, dict[str, Any]] = {}
        for rid in placed:
            try:
                out[rid] = self.provider.describe(rid, qualified)
            except (Unreachable, BackendRejected) as exc:
                out[rid] = {"error": str(exc)}
        return out

    def list_functions(self, application: str) -> list[dict[str, Any]]:
        dag = self.apps.get(application)
        entries = []
        for name in topo_order(dag):
            qualified = f"{application}.{name}"
            placed = self.candidates.get(qualified)
            if placed:
                entries.append({
                    "function": name,
                    "status": "deployed",
                    "resources": self.get_function(application, name),
                })
            else:
                entries.append({"function": name, "status": "not deployed"})
        return entries

    # -- invocation --------------------------------------------------------------

    def _load_score(self, rid: int) -> float:
        record = self.registry.get(rid)
        try:
            snap = self.metrics.fetch_snapshot(record)
        except MetricsUnavailable:
            return float("inf")
        capacity = record.total_cpu()
        return snap.cpu_used / capacity if capacity else float("inf")

    def _pick_one(self, placed: list[int]) -> int:
        return min(placed, key=lambda rid: (self._load_score(rid), rid))

    def _dispatch(self, rid: int, qualified: str,
                  envelope: InvocationEnvelope) -> tuple[Any, float]:
        try:
            outcome = self.provider.invoke(rid, qualified, envelope.wire())
        except (Unreachable, BackendRejected) as exc:
            raise InvokeFailure(rid, str(exc)) from exc
        return outcome.result, outcome.latency_s

    def _advance(self, latency_s: float) -> None:
        # dispatches in one call run in parallel: the clock moves by the max
        if latency_s > 0 and hasattr(self.clock, "advance_to"):
            self.clock.advance_to(self.clock() + latency_s)

    def invoke(self, application: str, function: str, payload: Any,
               sync: bool = True, invoke_one: bool = False):
        """Invoke on all candidate resources, or on the least-loaded one.

        Returns {resource_id: result} when sync, else an invocation id for
        later retrieval via get_result().
        """
        qualified = self._qualified(application, function)
        placed = self._deployed_on(qualified)
        targets = [self._pick_one(placed)] if invoke_one else placed
        invocation_id = uuid.uuid4().hex
        results: dict[int, Any] = {}
        slowest = 0.0
        for rid in targets:
            envelope = InvocationEnvelope(
                payload=payload, scheduled_resource_id=rid,
                application=application, function=function,
                invocation_id=invocation_id, sync=sync)
            results[rid], latency = self._dispatch(rid, qualified, envelope)
            slowest = max(slowest, latency)
        self._advance(slowest)
        if sync:
            return results
        self._results[invocation_id] = (self.clock() + self.result_ttl_s, results)
        return invocation_id

    def get_result(self, invocation_id: str) -> dict[int, Any]:
        self._expire_results()
        try:
            return self._results[invocation_id][1]
        except KeyError:
            raise UnknownInvocation(invocation_id) from None

    def _expire_results(self) -> None:
        now = self.clock()
        for key in [k for k, (expiry, _) in self._results.items() if expiry < now]:
            del self._results[key]

    # -- chained invocation --------------------------------------------------------

    def successor_routing(self, application: str, next_function: str
                          ) -> tuple[dict[tuple[str, int], int], dict[int, int]]:
        """How predecessor instances feed the successor's instances.

        Returns (assignment, expected): assignment maps (predecessor
        function, resource) to the successor instance serving it; expected
        counts contributors per successor instance.
        """
        dag = self.apps.get(application)
        spec = dag.nodes[next_function]
        placements = self._deployed_on(f"{application}.{next_function}")
        assignment: dict[tuple[str, int], int] = {}
        for dep in spec.dependencies:
            instances = self._deployed_on(f"{application}.{dep}")
            routed = assign_anchors(instances, placements, self.rtt)
            for rid, target in routed.items():
                assignment[(dep, rid)] = target
        expected: dict[int, int] = {}
        for target in assignment.values():
            expected[target] = expected.get(target, 0) + 1
        return assignment, expected

    def chain_invoke(self, envelope: InvocationEnvelope, next_function: str,
                     output_urls: list[str]) -> list[tuple[int, Any]] | None:
        """Record a completion; fire the successor instance when its barrier
        fills. Returns [(resource_id, result)] on fire, None while pending."""
        application = envelope.application
        dag = self.apps.get(application)
        if envelope.function not in dag.nodes:
            raise UnknownFunction(f"{application}.{envelope.function}")
        if next_function not in dag.successors(envelope.function):
            raise NotASuccessor(
                f"{next_function} is not a successor of {envelope.function}")

        assignment, expected = self.successor_routing(application, next_function)
        source = (envelope.function, envelope.scheduled_resource_id)
        if source not in assignment:
            raise NotASuccessor(
                f"completion from {source} does not feed any instance of "
                f"{next_function}")
        target = assignment[source]

        key = f"{application}.{next_function}.{target}"
        state = self._barriers.get(key) or {"round": 0, "queues": {}, "since": None}
        now = self.clock()
        if state["since"] is not None and now - state["since"] > self.barrier_timeout_s:
            self._barriers.set(key, {"round": state["round"], "queues": {},
                                     "since": None})
            raise BarrierTimeout(
                f"{key}: round {state['round']} incomplete after "
                f"{self.barrier_timeout_s}s")

        queues: dict[str, list[list[str]]] = state["queues"]
        queues.setdefault(f"{source[0]}:{source[1]}", []).append(list(output_urls))
        if state["since"] is None:
            state["since"] = now

        needed = [f"{dep}:{rid}" for (dep, rid), tgt in assignment.items()
                  if tgt == target]
        ready = all(queues.get(k) for k in needed)
        if not ready:
            self._barriers.set(key, state)
            return None

        urls: list[str] = []
        for k in needed:
            urls.extend(queues[k].pop(0))
        still_pending = any(queues.get(k) for k in needed)
        self._barriers.set(key, {
            "round": state["round"] + 1,
            "queues": {k: v for k, v in queues.items() if v},
            "since": now if still_pending else None,
        })

        fire_envelope = InvocationEnvelope(
            payload={"urls": sorted(urls)}, scheduled_resource_id=target,
            application=application, function=next_function,
            invocation_id=uuid.uuid4().hex)
        result, latency = self._dispatch(
            target, f"{application}.{next_function}", fire_envelope)
        self._advance(latency)
        return [(target, result)]

    # -- registry integration -------------------------------------------------------

    def functions_on_resource(self, resource_id: int) -> list[str]:
        """Qualified names deployed on a resource (blocks its unregistration)."""
        return sorted(q for q, placed in self.candidates.items()
                      if resource_id in [int(r) for r in placed])
