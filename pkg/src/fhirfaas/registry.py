"""Versioned function registry with zero-downtime replacement.

Routing is resolved once, at admission: a request acquires its registry
entry (incrementing the entry's in-flight count) under the registry lock,
so a concurrent re-registration can never strand it. Registering a new
version of a name atomically makes it the routing target and puts the
previous version into ``draining``; a draining version finishes its
in-flight requests, accepts no new ones (including pinned ones), and
retires when the last request completes.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .host import Handler
from .manifest import (
    MAX_MEMORY_BUDGET,
    ManifestError,
    ModelManifest,
    manifest_from_dict,
)
from .pipeline import PipelineError, PipelineSpec, pipeline_from_dict, validate_pipeline
from .reference_models import build_handler


class RegistryError(Exception):
    """Base class for registration and lookup failures."""


class InvalidManifest(RegistryError):
    """The registration document does not describe a deployable function."""


class BudgetExceeded(InvalidManifest):
    """The declared memory budget is above the per-function ceiling."""


class DuplicateVersion(RegistryError):
    """This (name, version) pair has already been registered."""


class NotFound(RegistryError):
    """No active entry matches the requested name (and version, if pinned)."""


class EntryState(str, Enum):
    ACTIVE = "active"
    DRAINING = "draining"
    RETIRED = "retired"


class EntryKind(str, Enum):
    FUNCTION = "function"
    PIPELINE = "pipeline"


@dataclass
class RegistryEntry:
    kind: EntryKind
    name: str
    version: str
    document: dict
    registered_at: float
    state: EntryState = EntryState.ACTIVE
    in_flight: int = 0
    manifest: ModelManifest | None = None
    handler: Handler | None = None
    pipeline: PipelineSpec | None = None

    @property
    def key(self) -> tuple[str, str]:
        return (self.name, self.version)


class Registry:
    """Thread-safe name/version table of functions and pipelines."""

    def __init__(self, *, now: Callable[[], float] | None = None):
        self._now = now or time.monotonic
        self._lock = threading.RLock()
        self._entries: dict[tuple[str, str], RegistryEntry] = {}
        self._active: dict[str, RegistryEntry] = {}

    # -- registration ----------------------------------------------------

    def register(self, document: dict, handler: Handler | None = None) -> RegistryEntry:
        """Register a function manifest or pipeline document.

        The previous active version of the same name, if any, starts
        draining. ``handler`` overrides the manifest's built-in handler
        name; pipelines never take one.
        """
        if not isinstance(document, dict):
            raise InvalidManifest("registration document must be a JSON object")
        if "pipeline" in document:
            return self._register_pipeline(document)
        return self._register_function(document, handler)

    def _register_function(self, document: dict, handler: Handler | None) -> RegistryEntry:
        try:
            manifest = manifest_from_dict(document)
        except ManifestError as exc:
            raise InvalidManifest(str(exc)) from exc
        if manifest.memory_budget_bytes > MAX_MEMORY_BUDGET:
            raise BudgetExceeded(
                f"memory budget {manifest.memory_budget_bytes} exceeds the "
                f"{MAX_MEMORY_BUDGET}-byte ceiling"
            )
        if handler is None:
            try:
                handler = build_handler(manifest)
            except ManifestError as exc:
                raise InvalidManifest(str(exc)) from exc
        entry = RegistryEntry(
            kind=EntryKind.FUNCTION,
            name=manifest.name,
            version=manifest.version,
            document=document,
            registered_at=self._now(),
            manifest=manifest,
            handler=handler,
        )
        return self._install(entry)

    def _register_pipeline(self, document: dict) -> RegistryEntry:
        try:
            spec = pipeline_from_dict(document)
            with self._lock:
                validate_pipeline(spec, self._lookup_manifest)
        except PipelineError as exc:
            raise InvalidManifest(str(exc)) from exc
        entry = RegistryEntry(
            kind=EntryKind.PIPELINE,
            name=spec.name,
            version=spec.version,
            document=document,
            registered_at=self._now(),
            pipeline=spec,
        )
        return self._install(entry)

    def _install(self, entry: RegistryEntry) -> RegistryEntry:
        with self._lock:
            if entry.key in self._entries:
                raise DuplicateVersion(f"{entry.name}@{entry.version} is already registered")
            previous = self._active.get(entry.name)
            self._entries[entry.key] = entry
            self._active[entry.name] = entry
            if previous is not None:
                previous.state = (
                    EntryState.RETIRED if previous.in_flight == 0 else EntryState.DRAINING
                )
        return entry

    def deregister(self, name: str, version: str) -> RegistryEntry:
        """Remove an entry from routing. In-flight requests still complete
        because they hold a direct reference to the entry."""
        with self._lock:
            entry = self._entries.pop((name, version), None)
            if entry is None:
                raise NotFound(f"{name}@{version} is not registered")
            if self._active.get(name) is entry:
                del self._active[name]
            entry.state = EntryState.DRAINING if entry.in_flight else EntryState.RETIRED
            return entry

    # -- resolution ------------------------------------------------------

    def resolve(self, name: str, version: str | None = None) -> RegistryEntry | None:
        """Active entry for ``name``; pinned versions resolve only while active."""
        with self._lock:
            if version is None:
                return self._active.get(name)
            entry = self._entries.get((name, version))
            if entry is not None and entry.state is EntryState.ACTIVE:
                return entry
            return None

    def get(self, name: str, version: str) -> RegistryEntry | None:
        """Entry in any lifecycle state, for status reporting."""
        with self._lock:
            return self._entries.get((name, version))

    def acquire(self, name: str, version: str | None = None) -> RegistryEntry:
        """Resolve and mark one request in flight, atomically."""
        with self._lock:
            entry = self.resolve(name, version)
            if entry is None:
                raise NotFound(
                    f"{name}@{version} is not active" if version else f"{name} is not registered"
                )
            entry.in_flight += 1
            return entry

    def acquire_stages(self, entry: RegistryEntry) -> list[RegistryEntry]:
        """Acquire every stage of an already-acquired pipeline entry in one
        atomic step, so a concurrent swap cannot split the chain."""
        if entry.pipeline is None:
            raise RegistryError(f"{entry.name}@{entry.version} is not a pipeline")
        with self._lock:
            acquired: list[RegistryEntry] = []
            try:
                for stage in entry.pipeline.stages:
                    stage_entry = self.acquire(stage.name, stage.version)
                    if stage_entry.kind is not EntryKind.FUNCTION:
                        raise NotFound(f"pipeline stage {stage.name} is not a function")
                    acquired.append(stage_entry)
            except RegistryError:
                for stage_entry in acquired:
                    self.release(stage_entry)
                raise
            return acquired

    def release(self, entry: RegistryEntry) -> None:
        with self._lock:
            entry.in_flight -= 1
            if entry.in_flight <= 0 and entry.state is EntryState.DRAINING:
                entry.state = EntryState.RETIRED

    # -- views -----------------------------------------------------------

    def active_entries(self) -> list[RegistryEntry]:
        with self._lock:
            return sorted(self._active.values(), key=lambda e: e.name)

    def entry_state(self, name: str, version: str) -> EntryState | None:
        with self._lock:
            entry = self._entries.get((name, version))
            return entry.state if entry else None

    def _lookup_manifest(self, name: str, version: str | None) -> ModelManifest | None:
        entry = self.resolve(name, version)
        if entry is None or entry.kind is not EntryKind.FUNCTION:
            return None
        return entry.manifest

    # -- persistence -----------------------------------------------------

    def snapshot(self) -> dict:
        """Serializable view of the active entries (functions first, so a
        reload can re-validate pipelines against them)."""
        with self._lock:
            entries = sorted(
                self._active.values(), key=lambda e: (e.kind is not EntryKind.FUNCTION, e.name)
            )
            return {"entries": [dict(entry.document) for entry in entries]}

    def save_snapshot(self, path: str) -> None:
        data = json.dumps(self.snapshot(), indent=2, sort_keys=True)
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(data + "\n")
        os.replace(tmp, path)

    def load_snapshot(self, path: str) -> int:
        """Register every entry from a snapshot file; returns how many."""
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        documents = data.get("entries", [])
        for document in documents:
            self.register(document)
        return len(documents)
