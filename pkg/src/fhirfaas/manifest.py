"""Function manifests: the declarative description of a deployable model."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .resources import Coding

MAX_MEMORY_BUDGET = 2 * 2**30  # 2 GiB per function
_NAME_RE = re.compile(r"^[a-z0-9-]+$")
_VERSION_RE = re.compile(r"^\d+\.\d+\.\d+$")


class TaxonomyClass(str, Enum):
    """Deployment-oriented model classes.

    Explanatory and predictive classes ship reference handlers; environment
    and interaction classes are registrable with a user-supplied handler.
    """

    EXPLANATORY = "explanatory"
    PREDICTIVE = "predictive"
    ENVIRONMENT = "environment"
    INTERACTION = "interaction"


class ManifestError(ValueError):
    """The manifest document is invalid."""


@dataclass(frozen=True)
class ModelManifest:
    name: str
    version: str
    taxonomy: TaxonomyClass
    input_codes: frozenset[Coding] = frozenset()
    output_codes: frozenset[Coding] = frozenset()
    memory_budget_bytes: int = 256 * 2**20
    description: str = ""
    handler: str | None = None
    config: dict = field(default_factory=dict, hash=False, compare=False)
    scaler_overrides: dict = field(default_factory=dict, hash=False, compare=False)

    def validate(self) -> None:
        if not _NAME_RE.match(self.name):
            raise ManifestError(f"function name {self.name!r} must match [a-z0-9-]+")
        if not _VERSION_RE.match(self.version):
            raise ManifestError(f"version {self.version!r} is not a semantic version")
        if self.memory_budget_bytes <= 0:
            raise ManifestError("memory_budget_bytes must be positive")

    def sorted_inputs(self) -> list[Coding]:
        return sorted(self.input_codes)

    def sorted_outputs(self) -> list[Coding]:
        return sorted(self.output_codes)


def _parse_codes(raw: Any, key: str) -> frozenset[Coding]:
    if raw is None:
        return frozenset()
    if not isinstance(raw, list):
        raise ManifestError(f"{key} must be an array of {{system, code}} objects")
    codes = set()
    for entry in raw:
        if not isinstance(entry, dict) or "system" not in entry or "code" not in entry:
            raise ManifestError(f"{key} entries must carry 'system' and 'code'")
        codes.add(Coding(system=str(entry["system"]), code=str(entry["code"])))
    return frozenset(codes)


def manifest_from_dict(data: dict) -> ModelManifest:
    """Build and validate a manifest from its JSON document form."""
    if not isinstance(data, dict):
        raise ManifestError("manifest must be a JSON object")
    for key in ("name", "version", "taxonomy"):
        if key not in data:
            raise ManifestError(f"manifest is missing required field {key!r}")
    try:
        taxonomy = TaxonomyClass(data["taxonomy"])
    except ValueError:
        raise ManifestError(f"unknown taxonomy class {data['taxonomy']!r}")
    memory = data.get("memory_budget_bytes", 256 * 2**20)
    if not isinstance(memory, int) or isinstance(memory, bool):
        raise ManifestError("memory_budget_bytes must be an integer")
    handler = data.get("handler")
    if handler is not None and not isinstance(handler, str):
        raise ManifestError("handler must be a string naming a built-in")
    manifest = ModelManifest(
        name=str(data["name"]),
        version=str(data["version"]),
        taxonomy=taxonomy,
        input_codes=_parse_codes(data.get("input_codes"), "input_codes"),
        output_codes=_parse_codes(data.get("output_codes"), "output_codes"),
        memory_budget_bytes=memory,
        description=str(data.get("description", "")),
        handler=handler,
        config=dict(data.get("config", {})),
        scaler_overrides=dict(data.get("scaler", {})),
    )
    manifest.validate()
    return manifest


def manifest_to_dict(manifest: ModelManifest) -> dict:
    doc: dict[str, Any] = {
        "name": manifest.name,
        "version": manifest.version,
        "taxonomy": manifest.taxonomy.value,
        "input_codes": [{"code": c.code, "system": c.system} for c in manifest.sorted_inputs()],
        "output_codes": [{"code": c.code, "system": c.system} for c in manifest.sorted_outputs()],
        "memory_budget_bytes": manifest.memory_budget_bytes,
        "description": manifest.description,
    }
    if manifest.handler:
        doc["handler"] = manifest.handler
    if manifest.config:
        doc["config"] = manifest.config
    if manifest.scaler_overrides:
        doc["scaler"] = manifest.scaler_overrides
    return doc


def load_manifest_file(path: str) -> dict:
    """Read a manifest JSON document; returns the raw dict (it may describe
    a function or, via a 'pipeline' field, a pipeline)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: not valid JSON ({exc})") from exc
