from __future__ import annotations

import math
import random

import pytest

from edgefaas.backends import (
    FabricTopology,
    ScheduledEvent,
    SimFabric,
    SyntheticFunction,
    VirtualClock,
    build_package,
    virtual_clock_run,
)
from edgefaas.errors import BackendRejected, NoLink, UnknownObject, Unreachable
from edgefaas.harness import evaluation_fabric

from conftest import tiered_topology


@pytest.fixture
def fabric():
    return SimFabric(tiered_topology())


def deploy_echo(fabric, tmp_path, rid=0, name="app.echo", compute=None):
    behavior = SyntheticFunction(name="echo", kind="echo",
                                 compute_s=compute or {})
    fabric.provider.deploy(rid, name, build_package(tmp_path, behavior))
    return name


class TestProviderVerbs:
    def test_deploy_then_describe(self, fabric, tmp_path):
        deploy_echo(fabric, tmp_path)
        desc = fabric.provider.describe(0, "app.echo")
        assert desc["status"] == "ready"
        assert desc["replicas"] == 1
        assert desc["invocations"] == 0
        assert desc["name"] == "app.echo"
        assert desc["image"].endswith(".zip")
        assert "url" in desc and "labels" in desc

    def test_invoke_echo_returns_payload_after_latency(self, fabric, tmp_path):
        deploy_echo(fabric, tmp_path, compute={"iot": 2.0})
        outcome = fabric.provider.invoke(0, "app.echo", {"k": 1})
        assert outcome.result == {"k": 1}
        assert outcome.latency_s == 2.0

    def test_offline_resource_unreachable(self, fabric, tmp_path):
        fabric.set_offline(0)
        with pytest.raises(Unreachable):
            deploy_echo(fabric, tmp_path)
        fabric.set_offline(0, offline=False)
        deploy_echo(fabric, tmp_path)

    def test_invoke_undeployed_rejected(self, fabric):
        with pytest.raises(BackendRejected):
            fabric.provider.invoke(0, "app.ghost", None)

    def test_remove(self, fabric, tmp_path):
        deploy_echo(fabric, tmp_path)
        fabric.provider.remove(0, "app.echo")
        with pytest.raises(BackendRejected):
            fabric.provider.describe(0, "app.echo")

    def test_delay_requires_tier_entry(self, fabric, tmp_path):
        behavior = SyntheticFunction(name="d", kind="delay",
                                     compute_s={"edge": 1.0})
        fabric.provider.deploy(0, "app.d", build_package(tmp_path, behavior))
        with pytest.raises(BackendRejected):  # resource 0 is iot tier
            fabric.provider.invoke(0, "app.d", None)

    def test_fixed_output_size(self, fabric, tmp_path):
        behavior = SyntheticFunction(name="f", kind="fixed-output", size=32)
        fabric.provider.deploy(0, "app.f", build_package(tmp_path, behavior))
        assert fabric.provider.invoke(0, "app.f", None).result == bytes(32)

    def test_invocation_counter_conservation(self, fabric, tmp_path):
        deploy_echo(fabric, tmp_path)
        n = random.Random(3).randint(3, 9)
        for _ in range(n):
            fabric.provider.invoke(0, "app.echo", None)
        assert fabric.provider.describe(0, "app.echo")["invocations"] == n

    def test_bad_package_rejected(self, fabric, tmp_path):
        bogus = tmp_path / "nope.zip"
        bogus.write_bytes(b"not a zip")
        with pytest.raises(BackendRejected):
            fabric.provider.deploy(0, "app.x", str(bogus))


class TestObjectStoreBackend:
    def test_bucket_and_object_lifecycle(self, fabric):
        store = fabric.object_store
        store.make_bucket(0, "demo-b")
        store.put_object(0, "demo-b", "o", b"payload")
        assert store.get_object(0, "demo-b", "o") == b"payload"
        assert store.list_objects(0, "demo-b") == ["o"]
        store.delete_object(0, "demo-b", "o")
        store.remove_bucket(0, "demo-b")
        with pytest.raises(UnknownObject):
            store.list_objects(0, "demo-b")

    def test_version_counter_keeps_last_write(self, fabric):
        store = fabric.object_store
        store.make_bucket(0, "demo-b")
        store.put_object(0, "demo-b", "o", b"v1")
        store.put_object(0, "demo-b", "o", b"v2")
        assert store.get_object(0, "demo-b", "o") == b"v2"
        assert fabric._buckets[0]["demo-b"]["o"][0] == 2


class TestTransferTime:
    def test_same_resource_is_free(self, fabric):
        assert fabric.transfer_time(10**9, 2, 2) == 0.0

    def test_direct_link_formula(self, fabric):
        # 100 Mbps link with 5 ms rtt
        expected = 10**6 * 8 / (100.0 * 1e6) + 0.005
        assert fabric.transfer_time(10**6, 0, 2) == pytest.approx(expected)

    def test_relay_via_declared_hop(self, fabric):
        direct_legs = (fabric.transfer_time(10**6, 0, 2)
                       + fabric.transfer_time(10**6, 2, 3))
        assert fabric.transfer_time(10**6, 0, 3) == pytest.approx(direct_legs)

    def test_iot_pair_relays_through_shared_edge(self, fabric):
        legs = (fabric.transfer_time(10**6, 0, 2)
                + fabric.transfer_time(10**6, 2, 1))
        assert fabric.transfer_time(10**6, 0, 1) == pytest.approx(legs)

    def test_no_path_raises(self):
        topology = FabricTopology.from_dict({
            "resources": [{"id": 0, "tier": "iot"}, {"id": 1, "tier": "cloud"}],
        })
        with pytest.raises(NoLink):
            SimFabric(topology).transfer_time(1, 0, 1)

    def test_unknown_resource(self, fabric):
        with pytest.raises(Unreachable):
            fabric.transfer_time(1, 0, 99)

    def test_video_upload_calibration(self):
        fabric = SimFabric(evaluation_fabric())
        # 92 MB generator output: 8.5 s to the edge, 92.7 s to the cloud
        assert fabric.transfer_time(92_000_000, 0, 8) == pytest.approx(8.5, rel=0.01)
        assert fabric.transfer_time(92_000_000, 0, 10) == pytest.approx(92.7, rel=0.01)

    def test_quoted_bandwidth_reproduces_upload(self):
        # a single 7.94 Mbps link carries the 92 MB video in ~92.7 s
        topology = FabricTopology.from_dict({
            "resources": [{"id": 0, "tier": "iot"}, {"id": 1, "tier": "cloud"}],
            "rtt_ms": {0: {1: 43.4}},
            "bandwidth_mbps": {0: {1: 7.94}},
        })
        t = SimFabric(topology).transfer_time(92_000_000, 0, 1)
        assert t == pytest.approx(92.7, rel=0.01)

    def test_monotonicity(self, fabric):
        rng = random.Random(1)
        for _ in range(50):
            a = rng.randint(0, 10**8)
            b = a + rng.randint(1, 10**8)
            assert fabric.transfer_time(a, 0, 2) <= fabric.transfer_time(b, 0, 2)

    def test_declared_link_needs_rtt(self):
        with pytest.raises(ValueError):
            FabricTopology.from_dict({
                "resources": [{"id": 0, "tier": "iot"}, {"id": 1, "tier": "edge"}],
                "rtt_ms": {},
                "bandwidth_mbps": {0: {1: 10.0}},
            })


class TestVirtualClockRun:
    def test_single_delay_completes_at_two_seconds(self, fabric, tmp_path):
        behavior = SyntheticFunction(name="d", kind="delay", compute_s={"iot": 2.0})
        fabric.provider.deploy(0, "app.d", build_package(tmp_path, behavior))

        def start(at):
            outcome = fabric.provider.invoke(0, "app.d", None)
            return [ScheduledEvent(at=at + outcome.latency_s, label="done",
                                   resource_id=0)]

        trace = virtual_clock_run(
            [ScheduledEvent(at=0.0, label="invoke", resource_id=0, action=start)],
            clock=fabric.clock)
        assert [(e.at, e.label) for e in trace] == [(0.0, "invoke"), (2.0, "done")]
        assert fabric.clock.now == 2.0

    def test_parallel_invokes_clock_is_max(self):
        clock = VirtualClock()
        events = [
            ScheduledEvent(at=0.0, label="a",
                           action=lambda at: [ScheduledEvent(at + 1.5, "a-done")]),
            ScheduledEvent(at=0.0, label="b",
                           action=lambda at: [ScheduledEvent(at + 4.0, "b-done")]),
        ]
        trace = virtual_clock_run(events, clock=clock)
        assert clock.now == 4.0
        assert {e.label for e in trace} == {"a", "b", "a-done", "b-done"}

    def test_chain_total_is_sum_of_parts(self):
        durations = [0.5, 1.25, 2.0, 0.125, 3.5, 0.625]

        def stage(i):
            def action(at):
                if i == len(durations):
                    return []
                return [ScheduledEvent(at + durations[i], f"s{i}",
                                       action=stage(i + 1))]
            return action

        trace = virtual_clock_run([ScheduledEvent(0.0, "start", action=stage(0))])
        assert trace[-1].at == pytest.approx(sum(durations), abs=1e-12)

    def test_identical_inputs_identical_traces(self):
        def build():
            rng = random.Random(9)
            events = []
            for i in range(20):
                events.append(ScheduledEvent(at=rng.uniform(0, 10), label=f"e{i}"))
            return events

        first = virtual_clock_run(build())
        second = virtual_clock_run(build())
        assert [(e.at, e.label) for e in first] == [(e.at, e.label) for e in second]

    def test_past_scheduling_rejected(self):
        event = ScheduledEvent(
            at=5.0, label="bad",
            action=lambda at: [ScheduledEvent(at=1.0, label="past")])
        with pytest.raises(ValueError):
            virtual_clock_run([event])


class TestTopologyValidation:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            FabricTopology.from_dict({
                "resources": [{"id": 0, "tier": "iot"}, {"id": 0, "tier": "edge"}],
            })

    def test_asymmetric_matrix_rejected(self):
        with pytest.raises(ValueError):
            FabricTopology.from_dict({
                "resources": [{"id": 0, "tier": "iot"}, {"id": 1, "tier": "edge"}],
                "rtt_ms": {0: {1: 5.0}, 1: {0: 6.0}},
            })

    def test_evaluation_fabric_shape(self):
        topology = evaluation_fabric()
        tiers = [r.tier for r in sorted(topology.resources, key=lambda r: r.id)]
        assert tiers == ["iot"] * 8 + ["edge", "edge", "cloud"]
        assert topology.rtt_ms.get(0, 8) == 5.7
        assert topology.rtt_ms.get(4, 9) == 0.6
        assert topology.rtt_ms.get(8, 10) == 43.4
        assert topology.rtt_ms.get(9, 10) == 4.7
        assert math.isinf(topology.rtt_ms.get(0, 9))
