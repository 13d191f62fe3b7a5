from __future__ import annotations

import pytest

from edgefaas.backends import FabricTopology, SimFabric
from edgefaas.control import ControlPlane
from edgefaas.registry import Registry
from edgefaas.store import MemoryMappingStore

TABLE1_MANIFEST = {
    "name": "cloud",
    "node": 10,
    "memory": "64GB",
    "cpu": 32,
    "storage": "512GB",
    "gpunode": 8,
    "gpu": 4,
    "gateway": "10.107.30.249:8080",
    "pwd": "s2TshbDfGi",
    "prometheus": "10.107.30.112:30090",
    "minio": "10.107.30.112:9000",
    "minioakey": "minioadmin",
    "minioskey": "minioadmin",
}


def make_manifest(index: int, tier: str = "iot", **overrides) -> dict:
    doc = {
        "name": tier,
        "node": 1,
        "memory": "4GB",
        "cpu": 4,
        "storage": "64GB",
        "gpunode": 0,
        "gpu": 0,
        "gateway": f"10.1.{index}.1:8080",
        "pwd": "secret",
        "prometheus": f"10.1.{index}.1:30090",
        "minio": f"10.1.{index}.1:9000",
        "minioakey": "akey",
        "minioskey": "skey",
    }
    doc.update(overrides)
    return doc


def tiered_topology() -> FabricTopology:
    """Two iot devices, one edge, one cloud; ids 0..3."""
    return FabricTopology.from_dict({
        "resources": [
            {"id": 0, "tier": "iot", "node": 1, "memory": "4GB", "cpu": 4,
             "storage": "64GB"},
            {"id": 1, "tier": "iot", "node": 1, "memory": "4GB", "cpu": 4,
             "storage": "64GB"},
            {"id": 2, "tier": "edge", "node": 1, "memory": "64GB", "cpu": 32,
             "storage": "400GB"},
            {"id": 3, "tier": "cloud", "node": 10, "memory": "64GB", "cpu": 32,
             "storage": "512GB", "gpunode": 8, "gpu": 4},
        ],
        "rtt_ms": {0: {2: 5.0}, 1: {2: 5.0}, 2: {3: 40.0}},
        "bandwidth_mbps": {0: {2: 100.0}, 1: {2: 100.0}, 2: {3: 10.0}},
    })


@pytest.fixture
def mem_store():
    return MemoryMappingStore()


@pytest.fixture
def registry(mem_store):
    return Registry(mem_store)


@pytest.fixture
def small_fabric():
    return SimFabric(tiered_topology())


@pytest.fixture
def small_plane(small_fabric):
    plane = ControlPlane.with_sim_fabric(small_fabric)
    for definition in small_fabric.topology.resources:
        plane.registry.register(definition.to_manifest())
    return plane
