"""Versioned registry lifecycle: install, swap, drain, retire, snapshot."""

import copy

import pytest

from fhirfaas.manifest import MAX_MEMORY_BUDGET
from fhirfaas.registry import (
    BudgetExceeded,
    DuplicateVersion,
    EntryKind,
    EntryState,
    InvalidManifest,
    NotFound,
    Registry,
    RegistryError,
)
from fhirfaas.reference_models import demo_manifests, demo_pipeline
from fhirfaas.resources import Bundle

LOS_DOC = next(d for d in demo_manifests() if d["name"] == "los-predictor")


def los_doc(version: str = "1.0.0") -> dict:
    doc = copy.deepcopy(LOS_DOC)
    doc["version"] = version
    return doc


@pytest.fixture
def registry():
    return Registry(now=lambda: 123.0)


class TestRegistration:
    def test_register_resolves_by_name_and_by_pin(self, registry):
        entry = registry.register(los_doc())
        assert entry.kind is EntryKind.FUNCTION
        assert entry.state is EntryState.ACTIVE
        assert entry.registered_at == 123.0
        assert registry.resolve("los-predictor") is entry
        assert registry.resolve("los-predictor", "1.0.0") is entry

    def test_handler_is_built_from_the_manifest(self, registry):
        entry = registry.register(los_doc())
        assert callable(entry.handler)

    def test_custom_handler_wins_over_builtin(self, registry):
        def custom(request: Bundle) -> Bundle:
            return request

        entry = registry.register(los_doc(), handler=custom)
        assert entry.handler is custom

    def test_duplicate_version_rejected(self, registry):
        registry.register(los_doc())
        with pytest.raises(DuplicateVersion, match="los-predictor@1.0.0"):
            registry.register(los_doc())

    def test_excess_memory_budget_rejected(self, registry):
        doc = los_doc()
        doc["memory_budget_bytes"] = MAX_MEMORY_BUDGET + 1
        with pytest.raises(BudgetExceeded, match="ceiling"):
            registry.register(doc)

    def test_budget_at_the_ceiling_is_accepted(self, registry):
        doc = los_doc()
        doc["memory_budget_bytes"] = MAX_MEMORY_BUDGET
        registry.register(doc)

    @pytest.mark.parametrize(
        "mangle",
        [
            lambda d: d.pop("name"),
            lambda d: d.pop("version"),
            lambda d: d.update(version="one"),
            lambda d: d.update(taxonomy="quantum"),
            lambda d: d.update(name="Has Spaces"),
        ],
    )
    def test_malformed_documents_rejected(self, registry, mangle):
        doc = los_doc()
        mangle(doc)
        with pytest.raises(InvalidManifest):
            registry.register(doc)

    def test_non_dict_document_rejected(self, registry):
        with pytest.raises(InvalidManifest):
            registry.register(["not", "a", "manifest"])


class TestHotSwap:
    def test_new_version_takes_over_routing(self, registry):
        v1 = registry.register(los_doc("1.0.0"))
        v2 = registry.register(los_doc("2.0.0"))
        assert registry.resolve("los-predictor") is v2
        assert v2.state is EntryState.ACTIVE

    def test_idle_previous_version_retires_immediately(self, registry):
        v1 = registry.register(los_doc("1.0.0"))
        registry.register(los_doc("2.0.0"))
        assert v1.state is EntryState.RETIRED

    def test_busy_previous_version_drains_then_retires(self, registry):
        registry.register(los_doc("1.0.0"))
        held = registry.acquire("los-predictor")
        registry.register(los_doc("2.0.0"))
        assert held.state is EntryState.DRAINING
        registry.release(held)
        assert held.state is EntryState.RETIRED

    def test_draining_version_rejects_pinned_requests(self, registry):
        registry.register(los_doc("1.0.0"))
        held = registry.acquire("los-predictor")
        registry.register(los_doc("2.0.0"))
        assert registry.resolve("los-predictor", "1.0.0") is None
        with pytest.raises(NotFound, match="1.0.0"):
            registry.acquire("los-predictor", "1.0.0")
        registry.release(held)

    def test_in_flight_requests_keep_their_entry_through_a_swap(self, registry):
        registry.register(los_doc("1.0.0"))
        held = registry.acquire("los-predictor")
        registry.register(los_doc("2.0.0"))
        # the held entry still carries its manifest and handler
        assert held.manifest.version == "1.0.0"
        assert callable(held.handler)


class TestDeregistration:
    def test_deregister_removes_from_routing(self, registry):
        registry.register(los_doc())
        registry.deregister("los-predictor", "1.0.0")
        assert registry.resolve("los-predictor") is None
        with pytest.raises(NotFound):
            registry.acquire("los-predictor")

    def test_deregister_idle_entry_retires_it(self, registry):
        entry = registry.register(los_doc())
        registry.deregister("los-predictor", "1.0.0")
        assert entry.state is EntryState.RETIRED

    def test_deregister_busy_entry_drains_it(self, registry):
        registry.register(los_doc())
        held = registry.acquire("los-predictor")
        registry.deregister("los-predictor", "1.0.0")
        assert held.state is EntryState.DRAINING
        registry.release(held)
        assert held.state is EntryState.RETIRED

    def test_deregister_unknown_entry_raises(self, registry):
        with pytest.raises(NotFound):
            registry.deregister("los-predictor", "1.0.0")

    def test_deregistering_an_old_version_leaves_routing_alone(self, registry):
        registry.register(los_doc("1.0.0"))
        held = registry.acquire("los-predictor")
        v2 = registry.register(los_doc("2.0.0"))
        registry.release(held)
        registry.deregister("los-predictor", "1.0.0")
        assert registry.resolve("los-predictor") is v2


class TestAcquireRelease:
    def test_acquire_counts_in_flight(self, registry):
        entry = registry.register(los_doc())
        registry.acquire("los-predictor")
        registry.acquire("los-predictor")
        assert entry.in_flight == 2
        registry.release(entry)
        registry.release(entry)
        assert entry.in_flight == 0
        assert entry.state is EntryState.ACTIVE

    def test_acquire_unknown_name(self, registry):
        with pytest.raises(NotFound, match="not registered"):
            registry.acquire("ghost")

    def test_get_sees_every_lifecycle_state(self, registry):
        registry.register(los_doc("1.0.0"))
        registry.register(los_doc("2.0.0"))
        assert registry.get("los-predictor", "1.0.0").state is EntryState.RETIRED
        assert registry.entry_state("los-predictor", "2.0.0") is EntryState.ACTIVE
        assert registry.entry_state("los-predictor", "9.9.9") is None


class TestPipelines:
    def register_stack(self, registry):
        for doc in demo_manifests():
            registry.register(doc)
        return registry.register(demo_pipeline())

    def test_pipeline_requires_registered_stages(self, registry):
        with pytest.raises(InvalidManifest):
            registry.register(demo_pipeline())

    def test_pipeline_registers_after_its_stages(self, registry):
        entry = self.register_stack(registry)
        assert entry.kind is EntryKind.PIPELINE
        assert registry.resolve(entry.name) is entry

    def test_acquire_stages_is_all_or_nothing(self, registry):
        entry = self.register_stack(registry)
        pipeline_entry = registry.acquire(entry.name)
        stages = registry.acquire_stages(pipeline_entry)
        assert [s.name for s in stages] == [s.name for s in entry.pipeline.stages]
        assert all(s.in_flight == 1 for s in stages)
        for stage in stages:
            registry.release(stage)
        registry.release(pipeline_entry)

    def test_acquire_stages_rolls_back_on_a_missing_stage(self, registry):
        entry = self.register_stack(registry)
        last = entry.pipeline.stages[-1]
        registry.deregister(last.name, registry.resolve(last.name).version)
        pipeline_entry = registry.acquire(entry.name)
        with pytest.raises(NotFound):
            registry.acquire_stages(pipeline_entry)
        for stage in entry.pipeline.stages[:-1]:
            assert registry.resolve(stage.name).in_flight == 0
        registry.release(pipeline_entry)

    def test_acquire_stages_demands_a_pipeline(self, registry):
        entry = registry.register(los_doc())
        with pytest.raises(RegistryError, match="not a pipeline"):
            registry.acquire_stages(entry)


class TestViewsAndSnapshots:
    def test_active_entries_sorted_by_name(self, registry):
        for doc in demo_manifests():
            registry.register(doc)
        names = [entry.name for entry in registry.active_entries()]
        assert names == sorted(names)

    def test_snapshot_orders_functions_before_pipelines(self, registry):
        for doc in demo_manifests():
            registry.register(doc)
        registry.register(demo_pipeline())
        snapshot = registry.snapshot()
        kinds = ["pipeline" if "pipeline" in doc else "function" for doc in snapshot["entries"]]
        assert kinds == sorted(kinds)  # "function" < "pipeline"

    def test_snapshot_round_trips_through_a_file(self, registry, tmp_path):
        for doc in demo_manifests():
            registry.register(doc)
        registry.register(demo_pipeline())
        path = tmp_path / "snapshot.json"
        registry.save_snapshot(str(path))
        reloaded = Registry()
        assert reloaded.load_snapshot(str(path)) == 4
        assert reloaded.resolve("los-predictor") is not None
        assert reloaded.resolve("los-pathway").kind is EntryKind.PIPELINE

    def test_snapshot_excludes_drained_versions(self, registry):
        registry.register(los_doc("1.0.0"))
        registry.register(los_doc("2.0.0"))
        snapshot = registry.snapshot()
        versions = [doc["version"] for doc in snapshot["entries"]]
        assert versions == ["2.0.0"]
