from __future__ import annotations

import math
import random

import pytest

from edgefaas.appmodel import FunctionSpec
from edgefaas.errors import NoAnchors, NoCandidates, NoTierCandidates
from edgefaas.metrics import MetricsSnapshot
from edgefaas.registry import ResourceRecord
from edgefaas.scheduler import (
    FunctionCreation,
    PlacementContext,
    RttMatrix,
    filter_phase_one,
    place_phase_two,
    register_policy,
)

GIB = 1024**3


def record(rid, tier="iot", node=1, memory=4 * GIB, cpu=4, gpunode=0, gpu=0):
    return ResourceRecord(
        resource_id=rid, name=tier, node=node, memory=memory, cpu=cpu,
        storage=64 * GIB, gpunode=gpunode, gpu=gpu,
        gateway=f"10.9.{rid}.1:8080", pwd="x", prometheus=f"10.9.{rid}.1:30090",
        minio=f"10.9.{rid}.1:9000", minio_access_key="a", minio_secret_key="s")


def snap(rid, cpu_used=0.0, memory_used=0, gpu_used=0.0, nodes=1):
    return MetricsSnapshot(resource_id=rid, cpu_used=cpu_used,
                           memory_used=memory_used, io_bandwidth_used=0.0,
                           gpu_used=gpu_used,
                           per_node_load=tuple(0.0 for _ in range(nodes)),
                           timestamp=0.0)


def fn(privacy=0, memory_req=0, gpu_req=0, nodetype="iot", affinitytype="data",
       reduce="auto", deps=()):
    return FunctionSpec(name="f", dependencies=tuple(deps), memory_req=memory_req,
                        gpu_req=gpu_req, privacy=privacy, nodetype=nodetype,
                        affinitytype=affinitytype, reduce=reduce)


class TestRttMatrix:
    def test_symmetric_and_zero_diagonal(self):
        rtt = RttMatrix({(1, 2): 5.0})
        assert rtt.get(1, 2) == rtt.get(2, 1) == 5.0
        assert rtt.get(7, 7) == 0.0
        assert math.isinf(rtt.get(1, 3))

    def test_rejects_bad_entries(self):
        with pytest.raises(ValueError):
            RttMatrix({(1, 2): -1.0})
        with pytest.raises(ValueError):
            RttMatrix({(3, 3): 2.0})


class TestFilterPhaseOne:
    def test_privacy_restricts_to_iot_data_locations(self):
        resources = [record(i, tier="iot") for i in range(3, 7)]
        resources.append(record(9, tier="edge", memory=64 * GIB, cpu=32))
        snaps = {r.resource_id: snap(r.resource_id, nodes=r.node) for r in resources}
        out = filter_phase_one(fn(privacy=1), resources, snaps,
                               data_locations=[3, 4, 9])
        assert out == [3, 4]

    def test_insufficient_memory_excluded(self):
        resources = [record(0), record(1)]
        snaps = {0: snap(0, memory_used=4 * GIB), 1: snap(1)}
        out = filter_phase_one(fn(memory_req=1024 * 1024**2), resources, snaps, [])
        assert out == [1]

    def test_zero_free_cpu_excluded(self):
        resources = [record(0, cpu=4)]
        snaps = {0: snap(0, cpu_used=4.0)}
        with pytest.raises(NoCandidates):
            filter_phase_one(fn(), resources, snaps, [])

    def test_gpu_requirement(self):
        resources = [record(0, tier="cloud", gpunode=1, gpu=2), record(1, tier="cloud")]
        snaps = {0: snap(0), 1: snap(1)}
        out = filter_phase_one(fn(gpu_req=1, nodetype="cloud"), resources, snaps, [])
        assert out == [0]

    def test_missing_snapshot_excludes_resource(self):
        resources = [record(0), record(1)]
        out = filter_phase_one(fn(), resources, {1: snap(1)}, [])
        assert out == [1]

    def test_empty_result_fails_loudly(self):
        with pytest.raises(NoCandidates):
            filter_phase_one(fn(privacy=1), [record(0, tier="edge")],
                             {0: snap(0)}, [0])


def oracle_filter(spec, resources, snaps, data_locations):
    """Brute-force predicate evaluation, one resource at a time."""
    keep = []
    for r in resources:
        s = snaps.get(r.resource_id)
        if s is None:
            continue
        if spec.privacy == 1:
            if r.resource_id not in data_locations:
                continue
            if r.tier != "iot":
                continue
        memory_free = max(0, r.node * r.memory - s.memory_used)
        cpu_free = max(0.0, r.node * r.cpu - s.cpu_used)
        gpu_free = max(0.0, r.gpunode * r.gpu - s.gpu_used)
        if memory_free < spec.memory_req:
            continue
        if gpu_free < spec.gpu_req:
            continue
        if cpu_free <= 0:
            continue
        keep.append(r.resource_id)
    return sorted(keep)


def random_instance(rng, placement_friendly=False):
    """Random scheduling instance; the friendly variant biases toward
    satisfiable requirements so phase two gets exercised often."""
    n = rng.randint(1, 8)
    resources, snaps, tiers = [], {}, {}
    over_commit = 0.8 if placement_friendly else 1.1
    snap_rate = 0.97 if placement_friendly else 0.9
    for rid in range(n):
        tier = rng.choice(["iot", "edge", "cloud"])
        gpunode = rng.randint(0, 1)
        r = record(rid, tier=tier, node=rng.randint(1, 4),
                   memory=rng.randint(1, 8) * GIB, cpu=rng.randint(1, 16),
                   gpunode=gpunode, gpu=rng.randint(1, 4) if gpunode else 0)
        resources.append(r)
        tiers[rid] = tier
        if rng.random() < snap_rate:  # occasionally a resource has no snapshot
            snaps[rid] = snap(rid,
                              cpu_used=rng.uniform(0, r.node * r.cpu * over_commit),
                              memory_used=rng.randint(0, r.node * r.memory),
                              gpu_used=rng.uniform(0, max(r.gpunode * r.gpu, 1)),
                              nodes=r.node)
    present_tiers = sorted(set(tiers.values()))
    nodetype = (rng.choice(present_tiers) if placement_friendly
                else rng.choice(["iot", "edge", "cloud"]))
    spec = fn(privacy=int(rng.random() < (0.15 if placement_friendly else 0.5)),
              memory_req=rng.randint(0, 1 if placement_friendly else 4) * GIB,
              gpu_req=rng.randint(0, 1 if placement_friendly else 2),
              nodetype=nodetype,
              affinitytype=rng.choice(["data", "function"]),
              reduce=rng.choice(["auto", "1"]))
    data_locations = sorted(rng.sample(range(n),
                                       rng.randint(1 if placement_friendly else 0, n)))
    rtt_entries = {}
    link_rate = 0.9 if placement_friendly else 0.8
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < link_rate:
                rtt_entries[(a, b)] = round(rng.uniform(0.1, 50.0), 3)
    return resources, snaps, tiers, spec, data_locations, RttMatrix(rtt_entries)


def test_filter_matches_bruteforce_oracle_on_random_instances():
    rng = random.Random(7)
    checked = 0
    for _ in range(300):
        resources, snaps, tiers, spec, data_locations, _ = random_instance(rng)
        expected = oracle_filter(spec, resources, snaps, data_locations)
        if expected:
            got = filter_phase_one(spec, resources, snaps, data_locations)
            assert got == expected
            checked += 1
        else:
            with pytest.raises(NoCandidates):
                filter_phase_one(spec, resources, snaps, data_locations)
    assert checked > 50


def build_testbed_context(spec):
    """The evaluation topology: two iot quartets behind their own edge
    servers, one cloud cluster; 1-based ids 1..11."""
    rtt = RttMatrix({(i, 9): 5.7 for i in range(1, 5)}
                    | {(i, 10): 0.6 for i in range(5, 9)}
                    | {(9, 11): 43.4, (10, 11): 4.7})
    tiers = {i: "iot" for i in range(1, 9)} | {9: "edge", 10: "edge", 11: "cloud"}
    return PlacementContext(function=spec, application="fl",
                            data_locations=list(range(1, 9)),
                            dependency_placements={"train": list(range(1, 9))},
                            rtt=rtt, tiers=tiers)


class TestPlacePhaseTwo:
    def test_auto_places_one_instance_per_edge_set(self):
        spec = fn(nodetype="edge", affinitytype="function", reduce="auto",
                  deps=("train",))
        ctx = build_testbed_context(spec)
        assert place_phase_two(ctx, list(range(1, 12))) == [9, 10]

    def test_reduce_one_places_single_cloud_instance(self):
        spec = fn(nodetype="cloud", affinitytype="function", reduce="1",
                  deps=("firstaggregation",))
        ctx = build_testbed_context(spec)
        ctx.dependency_placements = {"firstaggregation": [9, 10]}
        assert place_phase_two(ctx, list(range(1, 12))) == [11]

    def test_single_candidate_wins(self):
        spec = fn(nodetype="edge", affinitytype="data", reduce="auto")
        ctx = build_testbed_context(spec)
        assert place_phase_two(ctx, [9]) == [9]

    def test_no_tier_candidates(self):
        spec = fn(nodetype="cloud", affinitytype="data", reduce="auto")
        ctx = build_testbed_context(spec)
        with pytest.raises(NoTierCandidates):
            place_phase_two(ctx, [1, 2, 9])

    def test_no_anchors(self):
        spec = fn(nodetype="edge", affinitytype="data", reduce="auto")
        ctx = build_testbed_context(spec)
        ctx.data_locations = []
        with pytest.raises(NoAnchors):
            place_phase_two(ctx, [9, 10])

    def test_data_affinity_anchors_on_data(self):
        spec = fn(nodetype="iot", affinitytype="data", reduce="auto")
        ctx = build_testbed_context(spec)
        ctx.data_locations = [2, 6]
        # each data location is its own nearest iot resource (rtt 0)
        assert place_phase_two(ctx, list(range(1, 12))) == [2, 6]

    def test_tie_breaks_to_smallest_id(self):
        spec = fn(nodetype="edge", affinitytype="data", reduce="1")
        rtt = RttMatrix({(1, 2): 4.0, (1, 3): 4.0})
        ctx = PlacementContext(function=spec, application="x",
                               data_locations=[1], dependency_placements={},
                               rtt=rtt, tiers={1: "iot", 2: "edge", 3: "edge"})
        assert place_phase_two(ctx, [2, 3]) == [2]


def oracle_place(ctx, candidates):
    spec = ctx.function
    tier_cands = [c for c in sorted(candidates)
                  if ctx.tiers.get(c, "").lower() == spec.nodetype]
    anchors = ctx.anchors()
    if spec.reduce == "1":
        best, best_cost = None, None
        for c in tier_cands:
            cost = 0.0
            for a in anchors:
                cost += ctx.rtt.get(a, c)
            if best is None or cost < best_cost or (cost == best_cost and c < best):
                best, best_cost = c, cost
        return [best]
    chosen = []
    for a in anchors:
        nearest, nearest_cost = None, None
        for c in tier_cands:
            cost = ctx.rtt.get(a, c)
            if nearest is None or cost < nearest_cost or (cost == nearest_cost
                                                          and c < nearest):
                nearest, nearest_cost = c, cost
        if nearest not in chosen:
            chosen.append(nearest)
    return sorted(chosen)


def test_placement_matches_exhaustive_oracle_and_properties():
    rng = random.Random(23)
    checked = 0
    for _ in range(300):
        resources, snaps, tiers, spec, data_locations, rtt = random_instance(rng)
        deps = {"dep": sorted(rng.sample(range(len(resources)),
                                         rng.randint(0, len(resources))))}
        if spec.affinitytype == "function":
            spec = fn(privacy=spec.privacy, memory_req=spec.memory_req,
                      gpu_req=spec.gpu_req, nodetype=spec.nodetype,
                      affinitytype="function", reduce=spec.reduce, deps=("dep",))
        ctx = PlacementContext(function=spec, application="x",
                               data_locations=data_locations,
                               dependency_placements=deps, rtt=rtt, tiers=tiers)
        candidates = sorted(rng.sample(range(len(resources)),
                                       rng.randint(1, len(resources))))
        tier_ok = any(tiers[c] == spec.nodetype for c in candidates)
        if not tier_ok:
            with pytest.raises(NoTierCandidates):
                place_phase_two(ctx, candidates)
            continue
        if not ctx.anchors():
            with pytest.raises(NoAnchors):
                place_phase_two(ctx, candidates)
            continue
        got = place_phase_two(ctx, candidates)
        assert got == oracle_place(ctx, candidates)
        checked += 1

        # structural properties
        assert set(got) <= set(candidates)
        if spec.reduce == "1":
            assert len(got) == 1
        else:
            assert len(got) <= len(ctx.anchors())
        # determinism
        assert place_phase_two(ctx, candidates) == got
        # rtt scale invariance
        scaled_ctx = PlacementContext(function=spec, application="x",
                                      data_locations=data_locations,
                                      dependency_placements=deps,
                                      rtt=rtt.scaled(37.5), tiers=tiers)
        assert place_phase_two(scaled_ctx, candidates) == got
        # privacy dominance holds through the full two-phase path
        if spec.privacy == 1:
            snaps_ok = {rid: s for rid, s in snaps.items()}
            try:
                survivors = filter_phase_one(spec, resources, snaps_ok,
                                             data_locations)
            except NoCandidates:
                continue
            placed = None
            try:
                placed = place_phase_two(ctx, survivors)
            except (NoTierCandidates, NoAnchors):
                continue
            for rid in placed:
                assert rid in data_locations and tiers[rid] == "iot"
    assert checked > 80


class TestSchedulePolicyHook:
    def _prepare_app(self, plane):
        plane.apps.parse_application({
            "application": "demo",
            "entrypoint": "gen",
            "dag": [
                {"name": "gen", "affinity": {"nodetype": "iot",
                                             "affinitytype": "data",
                                             "reduce": "auto"}},
                {"name": "agg", "dependencies": "gen",
                 "affinity": {"nodetype": "edge", "affinitytype": "function",
                              "reduce": "1"}},
            ],
        })

    def test_default_policy_writes_candidate_set(self, small_plane):
        self._prepare_app(small_plane)
        small_plane.storage.create_bucket("demo", "input",
                                          hints={"generator_resource": 0})
        url = small_plane.storage.put_bytes(b"x", "data.bin", "demo", "input")
        placed = small_plane.scheduler.schedule(
            FunctionCreation("demo", "gen", data_urls=[url]))
        assert placed == [0]
        assert small_plane.candidates.get("demo.gen") == [0]
        # dependency placement anchors the aggregation stage
        assert small_plane.scheduler.schedule(FunctionCreation("demo", "agg")) == [2]

    def test_data_on_each_device_places_on_each(self, small_plane):
        self._prepare_app(small_plane)
        urls = []
        for rid in (0, 1):
            small_plane.storage.create_bucket("demo", f"input-{rid}",
                                              hints={"generator_resource": rid})
            urls.append(small_plane.storage.put_bytes(b"x", "data.bin", "demo",
                                                      f"input-{rid}"))
        placed = small_plane.scheduler.schedule(
            FunctionCreation("demo", "gen", data_urls=urls))
        assert placed == [0, 1]

    def test_constant_policy_replaces_decision(self, small_plane):
        self._prepare_app(small_plane)
        register_policy("always-zero", lambda request, scheduler: [0])
        small_plane.scheduler.policy_name = "always-zero"
        placed = small_plane.scheduler.schedule(FunctionCreation("demo", "agg"))
        assert placed == [0]
        assert small_plane.candidates.get("demo.agg") == [0]

    def test_lowest_load_policy_matches_argmin(self, small_plane, small_fabric):
        self._prepare_app(small_plane)
        loads = {0: 3.0, 1: 0.5, 2: 12.0, 3: 8.0}
        for rid, cpu_used in loads.items():
            nodes = small_plane.registry.get(rid).node
            small_fabric.metrics.set_load(rid, cpu_used=cpu_used,
                                          per_node_load=tuple(0.1 for _ in range(nodes)))

        def lowest_load(request, scheduler):
            snaps = scheduler.collect_snapshots(scheduler.registry.records())
            return [min(snaps, key=lambda rid: (snaps[rid].cpu_used, rid))]

        register_policy("lowest-load", lowest_load)
        small_plane.scheduler.policy_name = "lowest-load"
        expected = min(loads, key=lambda rid: (loads[rid], rid))
        assert small_plane.scheduler.schedule(FunctionCreation("demo", "gen")) \
            == [expected]

    def test_phase_ordering_subsets(self, small_plane):
        self._prepare_app(small_plane)
        records = small_plane.registry.records()
        snaps = small_plane.scheduler.collect_snapshots(records)
        spec = small_plane.apps.get("demo").nodes["gen"]
        survivors = filter_phase_one(spec, records, snaps, [0, 1])
        assert set(survivors) <= {r.resource_id for r in records}
        ctx = PlacementContext(function=spec, application="demo",
                               data_locations=[0, 1], dependency_placements={},
                               rtt=small_plane.rtt,
                               tiers={r.resource_id: r.tier for r in records})
        placed = place_phase_two(ctx, survivors)
        assert set(placed) <= set(survivors)
