"""Two-phase function scheduling.

Phase one filters resources on privacy and live capacity; phase two picks
placements among the survivors by round-trip-time locality. ``reduce``
controls fan-in: ``auto`` places one instance at each anchor's nearest
tier-matching resource, ``1`` places a single instance minimizing the RTT
sum over all anchors. The whole decision sits behind a named policy hook
so alternative strategies can replace it wholesale.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .appmodel import ApplicationModel, FunctionSpec
from .errors import (
    MetricsUnavailable,
    NoAnchors,
    NoCandidates,
    NoTierCandidates,
    UnknownPolicy,
)
from .metrics import MetricsProvider, MetricsSnapshot, available, is_stale
from .registry import Registry, ResourceRecord
from .storage import parse_object_url
from .store import MapView

logger = logging.getLogger(__name__)


class RttMatrix:
    """Symmetric round-trip times in milliseconds; missing pairs are
    unreachable (infinite)."""

    def __init__(self, entries: Mapping[tuple[int, int], float] | None = None) -> None:
        self._rtt: dict[tuple[int, int], float] = {}
        for (a, b), ms in (entries or {}).items():
            self.set(a, b, ms)

    @classmethod
    def from_nested(cls, nested: Mapping) -> "RttMatrix":
        """Build from ``{a: {b: ms}}`` (as read from a topology file)."""
        matrix = cls()
        for a, row in nested.items():
            for b, ms in row.items():
                matrix.set(int(a), int(b), float(ms))
        return matrix

    def set(self, a: int, b: int, ms: float) -> None:
        if ms < 0:
            raise ValueError(f"negative rtt {ms} for ({a},{b})")
        if a == b and ms != 0:
            raise ValueError(f"rtt({a},{a}) must be 0")
        self._rtt[(min(a, b), max(a, b))] = float(ms)

    def get(self, a: int, b: int) -> float:
        if a == b:
            return 0.0
        return self._rtt.get((min(a, b), max(a, b)), math.inf)

    def pairs(self) -> list[tuple[int, int, float]]:
        return [(a, b, ms) for (a, b), ms in sorted(self._rtt.items())]

    def scaled(self, factor: float) -> "RttMatrix":
        return RttMatrix({pair: ms * factor for pair, ms in self._rtt.items()})


@dataclass
class PlacementContext:
    """Everything phase two needs to rank candidates for one function."""

    function: FunctionSpec
    application: str
    data_locations: list[int]
    dependency_placements: dict[str, list[int]]
    rtt: RttMatrix
    tiers: dict[int, str]

    def anchors(self) -> list[int]:
        if self.function.affinitytype == "data":
            found = set(self.data_locations)
        else:
            found = set()
            for placed in self.dependency_placements.values():
                found.update(placed)
        return sorted(found)


def filter_phase_one(
    fn: FunctionSpec,
    resources: Iterable[ResourceRecord],
    snaps: Mapping[int, MetricsSnapshot],
    data_locations: Iterable[int],
) -> list[int]:
    """Resources passing both the privacy check and the capacity check.

    A resource without a snapshot is excluded (conservative). Raises
    NoCandidates when nothing survives.
    """
    data_set = set(data_locations)
    survivors: list[int] = []
    for resource in resources:
        snap = snaps.get(resource.resource_id)
        if snap is None:
            continue
        if fn.privacy == 1:
            if resource.resource_id not in data_set or resource.tier != "iot":
                continue
        free = available(resource, snap)
        if free.memory_free < fn.memory_req:
            continue
        if free.gpu_free < fn.gpu_req:
            continue
        if free.cpu_free <= 0:
            continue
        survivors.append(resource.resource_id)
    if not survivors:
        raise NoCandidates(f"{fn.name}: no resource satisfies its requirements")
    return sorted(survivors)


def _nearest(anchor: int, candidates: list[int], rtt: RttMatrix) -> int:
    return min(candidates, key=lambda c: (rtt.get(anchor, c), c))


def place_phase_two(ctx: PlacementContext, candidates: list[int]) -> list[int]:
    """Locality placement among phase-one survivors.

    Candidates are first restricted to the function's node type; anchors
    come from data locations (``data`` affinity) or dependency placements
    (``function`` affinity). Ties always break toward the smallest
    resource id, which makes the argmin total and the result deterministic.
    """
    fn = ctx.function
    tier_candidates = sorted(
        c for c in candidates if ctx.tiers.get(c, "").lower() == fn.nodetype)
    if not tier_candidates:
        raise NoTierCandidates(
            f"{fn.name}: no candidate of node type {fn.nodetype!r}")
    anchors = ctx.anchors()
    if not anchors:
        raise NoAnchors(f"{fn.name}: empty anchor set for "
                        f"affinitytype={fn.affinitytype}")

    if fn.reduce == "1":
        best = min(tier_candidates,
                   key=lambda c: (sum(ctx.rtt.get(a, c) for a in anchors), c))
        return [best]
    chosen = {_nearest(anchor, tier_candidates, ctx.rtt) for anchor in anchors}
    return sorted(chosen)


def assign_anchors(anchors: Iterable[int], placements: list[int],
                   rtt: RttMatrix) -> dict[int, int]:
    """Map each anchor to the placement instance that serves it.

    For a single placement (reduce=1) everything maps to it; otherwise each
    anchor goes to its nearest instance, mirroring the auto-placement rule.
    """
    if len(placements) == 1:
        return {a: placements[0] for a in anchors}
    return {a: _nearest(a, placements, rtt) for a in anchors}


@dataclass
class FunctionCreation:
    """A function-creation request as seen by the scheduling policy."""

    application: str
    function: str
    data_urls: list[str] = field(default_factory=list)


Policy = Callable[[FunctionCreation, "Scheduler"], list[int]]

_POLICIES: dict[str, Policy] = {}


def register_policy(name: str, policy: Policy) -> None:
    _POLICIES[name] = policy


def two_phase_policy(request: FunctionCreation, scheduler: "Scheduler") -> list[int]:
    """Default policy: requirement filtering, then RTT-locality placement."""
    dag = scheduler.apps.get(request.application)
    if request.function not in dag.nodes:
        from .errors import UnknownFunction

        raise UnknownFunction(f"{request.application}.{request.function}")
    fn = dag.nodes[request.function]

    resources = scheduler.registry.records()
    snaps = scheduler.collect_snapshots(resources)
    data_locations = sorted({
        parse_object_url(url).resource_id for url in request.data_urls})

    candidates = filter_phase_one(fn, resources, snaps, data_locations)
    dependency_placements = {
        dep: scheduler.placements_of(request.application, dep)
        for dep in fn.dependencies
    }
    ctx = PlacementContext(
        function=fn,
        application=request.application,
        data_locations=data_locations,
        dependency_placements=dependency_placements,
        rtt=scheduler.rtt,
        tiers={r.resource_id: r.tier for r in resources},
    )
    return place_phase_two(ctx, candidates)


register_policy("two-phase", two_phase_policy)


class Scheduler:
    """Runs the selected policy and records results in candidate_resource."""

    def __init__(self, registry: Registry, apps: ApplicationModel,
                 metrics: MetricsProvider, candidates: MapView, rtt: RttMatrix,
                 policy: str = "two-phase",
                 staleness_s: float = 60.0,
                 clock: Callable[[], float] | None = None) -> None:
        self.registry = registry
        self.apps = apps
        self.metrics = metrics
        self.candidates = candidates
        self.rtt = rtt
        self.staleness_s = staleness_s
        self._clock = clock
        self.policy_name = policy
        if policy not in _POLICIES:
            raise UnknownPolicy(policy)

    def collect_snapshots(self, resources: Iterable[ResourceRecord]
                          ) -> dict[int, MetricsSnapshot]:
        """Fetch one snapshot per resource; unreachable or stale resources
        are simply missing from the result (phase one then excludes them)."""
        snaps: dict[int, MetricsSnapshot] = {}
        for resource in resources:
            try:
                snap = self.metrics.fetch_snapshot(resource)
            except MetricsUnavailable as exc:
                logger.warning("skipping resource %d: %s", resource.resource_id, exc)
                continue
            if self._clock is not None and is_stale(snap, self._clock(), self.staleness_s):
                logger.warning("skipping resource %d: snapshot stale",
                               resource.resource_id)
                continue
            snaps[resource.resource_id] = snap
        return snaps

    def placements_of(self, application: str, function: str) -> list[int]:
        return list(self.candidates.get(f"{application}.{function}", []))

    def schedule(self, request: FunctionCreation) -> list[int]:
        """Run the policy and persist the resulting candidate set."""
        policy = _POLICIES[self.policy_name]
        placements = list(policy(request, self))
        qualified = f"{request.application}.{request.function}"
        self.candidates.set(qualified, placements)
        logger.info("scheduled %s on %s", qualified, placements)
        return placements
