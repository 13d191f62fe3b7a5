from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgefaas.errors import (
    DuplicateEndpoint,
    MalformedManifest,
    ResourceBusy,
    UnknownResource,
)
from edgefaas.registry import REDACTED, Registry, parse_capacity
from edgefaas.store import LocalFileMappingStore, MemoryMappingStore

from conftest import TABLE1_MANIFEST, make_manifest

GIB = 1024**3


class TestCapacityParsing:
    @pytest.mark.parametrize("text,expected", [
        ("64GB", 64 * GIB),
        ("512GB", 512 * GIB),
        ("1024MB", 1024 * 1024**2),
        ("4KB", 4 * 1024),
        ("2TB", 2 * 1024**4),
        ("2tb", 2 * 1024**4),
        (123, 123),
    ])
    def test_valid(self, text, expected):
        assert parse_capacity(text) == expected

    @pytest.mark.parametrize("text", ["", "GB", "64 gigs", "-5GB", "0GB", 0, -1,
                                      "12.5GB", None])
    def test_invalid(self, text):
        with pytest.raises(MalformedManifest):
            parse_capacity(text)


class TestRegister:
    def test_sample_cloud_manifest_gets_id_zero(self, registry):
        assert registry.register(TABLE1_MANIFEST) == 0
        record = registry.get(0)
        assert record.name == "cloud"
        assert record.node == 10
        assert record.memory == 64 * GIB
        assert record.cpu == 32
        assert record.storage == 512 * GIB
        assert record.gpunode == 8 and record.gpu == 4
        assert record.gateway == "10.107.30.249:8080"

    def test_yaml_text_accepted(self, registry):
        text = "\n".join(f"{k}: {v}" for k, v in TABLE1_MANIFEST.items())
        assert registry.register(text) == 0

    def test_smallest_unused_id(self, registry):
        for i in range(4):
            registry.register(make_manifest(i))
        registry.unregister(2)
        # live ids are {0,1,3}: the gap is filled first
        assert registry.register(make_manifest(9)) == 2

    def test_id_reuse_after_unregister(self, registry):
        for i in range(3):
            registry.register(make_manifest(i))
        registry.unregister(1)
        assert registry.register(make_manifest(7)) == 1

    def test_duplicate_gateway_rejected(self, registry):
        registry.register(make_manifest(0))
        with pytest.raises(DuplicateEndpoint):
            registry.register(make_manifest(1, gateway="10.1.0.1:8080"))

    @pytest.mark.parametrize("field", ["name", "node", "memory", "gateway",
                                       "minioskey"])
    def test_missing_field_rejected(self, registry, field):
        doc = make_manifest(0)
        del doc[field]
        with pytest.raises(MalformedManifest):
            registry.register(doc)

    @pytest.mark.parametrize("overrides", [
        {"node": 0},
        {"cpu": 0},
        {"gpunode": 2},            # exceeds node=1
        {"gpu": 2, "gpunode": 0},  # gpus without gpu nodes
        {"memory": "abc"},
        {"gateway": "not-an-endpoint"},
        {"gateway": "host:99999"},
        {"pwd": ""},
    ])
    def test_invalid_fields_rejected(self, registry, overrides):
        with pytest.raises(MalformedManifest):
            registry.register(make_manifest(0, **overrides))

    def test_unknown_keys_warn_but_register(self, registry, caplog):
        with caplog.at_level("WARNING"):
            rid = registry.register(make_manifest(0, extrakey="x"))
        assert rid == 0
        assert any("unknown keys" in m for m in caplog.messages)

    def test_noncanonical_tier_warns_but_registers(self, registry, caplog):
        with caplog.at_level("WARNING"):
            rid = registry.register(make_manifest(0, name="fog"))
        assert registry.get(rid).tier == "fog"
        assert any("affinity" in m for m in caplog.messages)


class TestUnregisterAndList:
    def test_unregister_unknown(self, registry):
        with pytest.raises(UnknownResource):
            registry.unregister(5)

    def test_unregister_shrinks_list(self, registry):
        registry.register(make_manifest(0))
        registry.register(make_manifest(1))
        registry.unregister(0)
        assert [r["resource_id"] for r in registry.list_resources()] == [1]

    def test_busy_probe_blocks(self, registry):
        registry.register(make_manifest(0))
        with pytest.raises(ResourceBusy) as exc_info:
            registry.unregister(0, busy_probe=lambda rid: ["function f deployed"])
        assert exc_info.value.resource_id == 0
        assert 0 in registry

    def test_list_redacts_credentials(self, registry):
        registry.register(TABLE1_MANIFEST)
        (record,) = registry.list_resources()
        assert record["pwd"] == REDACTED
        assert record["minio_access_key"] == REDACTED
        assert record["minio_secret_key"] == REDACTED
        assert "s2TshbDfGi" not in str(record)

    def test_register_five_unregister_two(self, registry):
        for i in range(5):
            registry.register(make_manifest(i))
        registry.unregister(1)
        registry.unregister(3)
        assert [r["resource_id"] for r in registry.list_resources()] == [0, 2, 4]


class TestPersistence:
    def test_records_survive_reload(self, tmp_path):
        store = LocalFileMappingStore(tmp_path, fsync=False)
        registry = Registry(store)
        registry.register(TABLE1_MANIFEST)
        registry.register(make_manifest(1))
        registry.unregister(0)

        reloaded = Registry(LocalFileMappingStore(tmp_path, fsync=False))
        assert reloaded.ids() == [1]
        assert reloaded.get(1).to_dict() == registry.get(1).to_dict()
        # the freed id is minted again after reload
        assert reloaded.register(make_manifest(2)) == 0

    def test_snapshot_compaction_preserves_contents(self, tmp_path):
        store = LocalFileMappingStore(tmp_path, fsync=False)
        for i in range(20):
            store.put("resource_mapping", str(i), {"v": i})
        for i in range(0, 20, 2):
            store.delete("resource_mapping", str(i))
        before = store.load("resource_mapping")
        store.snapshot("resource_mapping")
        assert store.load("resource_mapping") == before

    @given(st.lists(st.tuples(st.sampled_from(["set", "del"]),
                              st.integers(0, 8),
                              st.integers(0, 100)),
                    max_size=40))
    @settings(max_examples=50, deadline=None)
    def test_mapview_matches_plain_dict(self, ops):
        store = MemoryMappingStore()
        model: dict[str, int] = {}
        for op, key, value in ops:
            if op == "set":
                store.put("m", str(key), value)
                model[str(key)] = value
            else:
                store.delete("m", str(key))
                model.pop(str(key), None)
        assert store.load("m") == model


def oracle_next_id(live: set[int]) -> int:
    rid = 0
    while rid in live:
        rid += 1
    return rid


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_id_assignment_matches_set_oracle(seed):
    rng = random.Random(seed)
    registry = Registry(MemoryMappingStore())
    live: set[int] = set()
    for step in range(30):
        if live and rng.random() < 0.4:
            victim = rng.choice(sorted(live))
            registry.unregister(victim)
            live.discard(victim)
        else:
            rid = registry.register(make_manifest(1000 + step * 37 % 254,
                                                  gateway=f"10.2.{step}.1:8080"))
            assert rid == oracle_next_id(live)
            live.add(rid)
        assert registry.ids() == sorted(live)
