"""Executable workflow fixtures over the simulated fabric.

Two desk-scale workflows drive the whole control plane end to end: a
six-stage video-analytics pipeline and a two-level federated-learning
aggregation. Both register the fabric's resources, parse the committed
application manifests, schedule and deploy synthetic stage bodies, then
run one or more items through the chained-invocation path on the virtual
clock, returning placements and a timing trace.
"""

from __future__ import annotations

import json
import tempfile
from dataclasses import dataclass
from importlib import resources as importlib_resources
from typing import Callable

import numpy as np

from ..backends.sim import (
    FabricTopology,
    ScheduledEvent,
    SimFabric,
    SyntheticFunction,
    TraceEvent,
    build_package,
    virtual_clock_run,
)
from ..control import ControlPlane
from ..functions import InvocationEnvelope
from ..scheduler import FunctionCreation
from .profile import EDGE_ONLY, LatencyProfile, end_to_end_latency, stage_tiers

def _fixture_text(name: str) -> str:
    return (importlib_resources.files("edgefaas.harness") / "fixtures" / name).read_text()


def video_manifest() -> str:
    return _fixture_text("video_pipeline.yaml")


def fl_manifest() -> str:
    return _fixture_text("federated_learning.yaml")


def evaluation_fabric() -> FabricTopology:
    return FabricTopology.from_yaml(_fixture_text("evaluation_fabric.yaml"))


def default_profile() -> LatencyProfile:
    return LatencyProfile.from_yaml(_fixture_text("video_profile.yaml"))


def register_fabric(plane: ControlPlane, fabric: SimFabric) -> list[int]:
    """Register every fabric resource; assigned ids must match the
    topology's declared ids (fixtures declare 0..n-1 in order)."""
    assigned = []
    for definition in sorted(fabric.topology.resources, key=lambda r: r.id):
        rid = plane.registry.register(definition.to_manifest())
        if rid != definition.id:
            raise ValueError(
                f"fabric declares id {definition.id} but registry assigned {rid}; "
                "register fabrics into a fresh control plane with ids 0..n-1")
        assigned.append(rid)
    return assigned


# -- shared event helpers -------------------------------------------------------


def trace_pipeline(profile: LatencyProfile,
                   partition: str | None) -> tuple[list[TraceEvent], float]:
    """Discrete-event run of one item through the staged pipeline.

    Uses the profile's latencies directly (no fabric), so the closed-form
    end_to_end_latency total and the trace total must agree.
    """
    tiers = stage_tiers(profile, partition)
    events: list[ScheduledEvent] = []

    def compute_done(i: int) -> Callable:
        def action(at: float) -> list[ScheduledEvent]:
            if i + 1 >= len(profile.stages):
                return []
            dst = tiers[i + 1]
            arrival = at + profile.stages[i].upload_to(dst)
            return [ScheduledEvent(
                at=arrival, label=f"transfer:{profile.stages[i].name}->{dst}",
                action=stage_start(i + 1))]
        return action

    def stage_start(i: int) -> Callable:
        def action(at: float) -> list[ScheduledEvent]:
            stage, tier = profile.stages[i], tiers[i]
            done = at + stage.compute_s[tier]
            return [ScheduledEvent(at=done, label=f"compute:{stage.name}@{tier}",
                                   action=compute_done(i))]
        return action

    events.append(ScheduledEvent(at=0.0, label="start", action=stage_start(0)))
    trace = virtual_clock_run(events)
    return trace, trace[-1].at if trace else 0.0


# -- video analytics ------------------------------------------------------------


@dataclass
class VideoRunResult:
    placements: dict[str, list[int]]
    partition: str
    trace: list[TraceEvent]
    total_s: float
    cost_model_total_s: float


def _deploy_stage(plane: ControlPlane, workdir: str, application: str,
                  function: str, behavior: SyntheticFunction,
                  data_urls: list[str] | None = None) -> list[int]:
    plane.scheduler.schedule(
        FunctionCreation(application, function, data_urls=data_urls or []))
    package = build_package(workdir, behavior)
    return plane.functions.deploy_function(application, function, package)


def run_video_pipeline(fabric: SimFabric, profile: LatencyProfile,
                       plane: ControlPlane | None = None,
                       generator_resources: list[int] | None = None) -> VideoRunResult:
    """Deploy the pipeline manifest on the fabric and push one item through.

    ``generator_resources`` anchors the video sources (defaults to the
    first four iot resources, the co-located iot/edge set).
    """
    plane = plane or ControlPlane.with_sim_fabric(fabric)
    if not plane.registry.ids():
        register_fabric(plane, fabric)
    dag = plane.apps.parse_application(video_manifest())
    app = dag.application
    stage_names = profile.names()
    if stage_names != [s for s in stage_names if s in dag.nodes]:
        raise ValueError("profile stages do not match the pipeline manifest")

    iot_ids = fabric.ids_by_tier("iot")
    sources = generator_resources if generator_resources is not None else iot_ids[:4]

    data_urls = []
    for rid in sources:
        bucket = f"frames-{rid}"
        plane.storage.create_bucket(app, bucket, hints={"generator_resource": rid})
        data_urls.append(plane.storage.put_bytes(b"stream", "video.bin", app, bucket))

    placements: dict[str, list[int]] = {}
    with tempfile.TemporaryDirectory() as workdir:
        for stage in profile.stages:
            behavior = SyntheticFunction(name=stage.name, kind="delay",
                                         compute_s=dict(stage.compute_s))
            urls = data_urls if stage.name == stage_names[0] else None
            placements[stage.name] = _deploy_stage(
                plane, workdir, app, stage.name, behavior, data_urls=urls)

    # partition implied by the realized placements
    partition = EDGE_ONLY
    for stage in profile.stages[1:]:
        if fabric.tier(placements[stage.name][0]) == "cloud":
            partition = stage.name
            break
    tiers = stage_tiers(profile, partition)

    # drive one item per generator through the chain
    output_bucket: dict[str, str] = {}
    for i, stage in enumerate(profile.stages[:-1]):
        host = placements[profile.stages[i + 1].name][0]
        bucket = f"out-{stage.name}"
        plane.storage.create_bucket(
            app, bucket,
            hints={"producer_resource": placements[stage.name],
                   "consumer_resource": host,
                   "expected_volume": stage.output_bytes})
        output_bucket[stage.name] = bucket

    def completion(i: int, rid: int) -> Callable:
        stage = profile.stages[i]

        def action(at: float) -> list[ScheduledEvent]:
            if i + 1 >= len(profile.stages):
                return []
            url = plane.storage.put_bytes(
                json.dumps({"stage": stage.name, "from": rid}).encode(),
                f"item-{rid}.json", app, output_bucket[stage.name])
            envelope = InvocationEnvelope(
                payload=None, scheduled_resource_id=rid, application=app,
                function=stage.name, invocation_id=f"{stage.name}-{rid}")
            fired = plane.functions.chain_invoke(
                envelope, profile.stages[i + 1].name, [url])
            if not fired:
                return []
            children = []
            for target, _ in fired:
                dst_tier = tiers[i + 1]
                arrival = at + stage.upload_to(dst_tier)
                done = arrival + profile.stages[i + 1].compute_s[dst_tier]
                children.append(ScheduledEvent(
                    at=done, label=f"compute:{profile.stages[i + 1].name}",
                    resource_id=target, action=completion(i + 1, target)))
            return children
        return action

    events = []
    generator = profile.stages[0]
    plane.functions.invoke(app, generator.name, {"item": 0}, sync=True)
    for rid in placements[generator.name]:
        events.append(ScheduledEvent(
            at=generator.compute_s["iot"], label=f"compute:{generator.name}",
            resource_id=rid, action=completion(0, rid)))
    trace = virtual_clock_run(events, clock=fabric.clock)
    total = trace[-1].at if trace else 0.0
    return VideoRunResult(
        placements=placements, partition=partition, trace=trace, total_s=total,
        cost_model_total_s=end_to_end_latency(profile, partition).total_s)


# -- federated learning ----------------------------------------------------------


@dataclass
class FlRunResult:
    weights: np.ndarray
    placements: dict[str, list[int]]
    worker_routing: dict[int, int]     # train resource -> edge aggregator
    trace: list[TraceEvent]
    total_s: float
    rounds: int


def default_worker_vectors(seed: int, weight_dim: int
                           ) -> Callable[[int, int], np.ndarray]:
    def source(resource_id: int, round_index: int) -> np.ndarray:
        rng = np.random.default_rng((seed, round_index, resource_id))
        return rng.standard_normal(weight_dim)
    return source


def run_federated_learning(fabric: SimFabric, rounds: int = 1, weight_dim: int = 8,
                           seed: int = 0, plane: ControlPlane | None = None,
                           vector_source: Callable[[int, int], np.ndarray] | None = None,
                           train_compute_s: float = 0.05,
                           aggregate_compute_s: float = 0.02) -> FlRunResult:
    """Train/aggregate rounds over all iot workers with two-level averaging.

    Each worker emits a synthetic weight vector per round; edge aggregators
    average their own workers; the cloud aggregator combines edge results
    weighted by contributing-worker counts, which makes the outcome the
    exact global mean.
    """
    plane = plane or ControlPlane.with_sim_fabric(fabric)
    if not plane.registry.ids():
        register_fabric(plane, fabric)
    dag = plane.apps.parse_application(fl_manifest())
    app = dag.application
    vectors = vector_source or default_worker_vectors(seed, weight_dim)

    workers = fabric.ids_by_tier("iot")
    data_urls = []
    for rid in workers:
        bucket = f"local-{rid}"
        plane.storage.create_bucket(app, bucket, hints={"generator_resource": rid})
        data_urls.append(plane.storage.put_bytes(b"dataset", "samples.bin", app, bucket))

    compute_all = {"iot": train_compute_s, "edge": train_compute_s,
                   "cloud": train_compute_s}
    agg_compute = {"iot": aggregate_compute_s, "edge": aggregate_compute_s,
                   "cloud": aggregate_compute_s}
    placements: dict[str, list[int]] = {}
    with tempfile.TemporaryDirectory() as workdir:
        placements["train"] = _deploy_stage(
            plane, workdir, app, "train",
            SyntheticFunction(name="train", kind="delay", compute_s=compute_all),
            data_urls=data_urls)
        placements["firstaggregation"] = _deploy_stage(
            plane, workdir, app, "firstaggregation",
            SyntheticFunction(name="firstaggregation", kind="vector-average",
                              compute_s=agg_compute))
        placements["secondaggregation"] = _deploy_stage(
            plane, workdir, app, "secondaggregation",
            SyntheticFunction(name="secondaggregation", kind="vector-average",
                              compute_s=agg_compute))

    for rid in placements["firstaggregation"]:
        plane.storage.create_bucket(app, f"agg-{rid}",
                                    hints={"producer_resource": rid})
    cloud_rid = placements["secondaggregation"][0]
    plane.storage.create_bucket(app, "global", hints={"producer_resource": cloud_rid})

    routing = {rid: target for (_, rid), target
               in plane.functions.successor_routing(app, "firstaggregation")[0].items()}

    final: dict[str, np.ndarray | None] = {"weights": None}

    def weights_payload(vector: np.ndarray, weight: float) -> bytes:
        return json.dumps({"vector": vector.tolist(), "weight": weight}).encode()

    def train_done(rid: int, round_index: int) -> Callable:
        def action(at: float) -> list[ScheduledEvent]:
            vec = np.asarray(vectors(rid, round_index), dtype=np.float64)
            payload = weights_payload(vec, 1.0)
            url = plane.storage.put_bytes(payload, f"w-r{round_index}.json",
                                          app, f"local-{rid}")
            envelope = InvocationEnvelope(
                payload=None, scheduled_resource_id=rid, application=app,
                function="train", invocation_id=f"r{round_index}-w{rid}")
            fired = plane.functions.chain_invoke(envelope, "firstaggregation", [url])
            if not fired:
                return []
            children = []
            for target, result in fired:
                contributors = [w for w, t in routing.items() if t == target]
                transfer = max(
                    fabric.transfer_time(len(payload), w, target)
                    for w in contributors)
                done = at + transfer + aggregate_compute_s
                children.append(ScheduledEvent(
                    at=done, label="compute:firstaggregation", resource_id=target,
                    action=first_agg_done(target, round_index, result)))
            return children
        return action

    def first_agg_done(rid: int, round_index: int, result: dict) -> Callable:
        def action(at: float) -> list[ScheduledEvent]:
            payload = weights_payload(np.asarray(result["vector"]), result["weight"])
            url = plane.storage.put_bytes(payload, f"a-r{round_index}.json",
                                          app, f"agg-{rid}")
            envelope = InvocationEnvelope(
                payload=None, scheduled_resource_id=rid, application=app,
                function="firstaggregation", invocation_id=f"r{round_index}-a{rid}")
            fired = plane.functions.chain_invoke(envelope, "secondaggregation", [url])
            if not fired:
                return []
            children = []
            for target, global_result in fired:
                transfer = max(
                    fabric.transfer_time(len(payload), edge, target)
                    for edge in placements["firstaggregation"])
                done = at + transfer + aggregate_compute_s
                children.append(ScheduledEvent(
                    at=done, label="compute:secondaggregation", resource_id=target,
                    action=second_agg_done(target, round_index, global_result)))
            return children
        return action

    def second_agg_done(rid: int, round_index: int, result: dict) -> Callable:
        def action(at: float) -> list[ScheduledEvent]:
            plane.storage.put_bytes(
                weights_payload(np.asarray(result["vector"]), result["weight"]),
                f"g-r{round_index}.json", app, "global")
            final["weights"] = np.asarray(result["vector"], dtype=np.float64)
            if round_index + 1 < rounds:
                return start_round(round_index + 1, at)
            return []
        return action

    def start_round(round_index: int, at: float) -> list[ScheduledEvent]:
        plane.functions.invoke(app, "train", {"round": round_index}, sync=True)
        return [ScheduledEvent(at=at + train_compute_s, label="compute:train",
                               resource_id=rid, action=train_done(rid, round_index))
                for rid in placements["train"]]

    trace = virtual_clock_run(
        [ScheduledEvent(at=0.0, label="round-start", action=lambda at: start_round(0, at))],
        clock=fabric.clock)
    total = trace[-1].at if trace else 0.0
    assert final["weights"] is not None
    return FlRunResult(weights=final["weights"], placements=placements,
                       worker_routing=routing, trace=trace, total_s=total,
                       rounds=rounds)
