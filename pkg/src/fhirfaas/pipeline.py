"""Function chaining: pipeline specs, static wiring checks, and rewrapping.

A pipeline is an ordered list of registered functions. The chaining rule is
deliberately mechanical so that clients can reproduce it by hand:

* The request for stage 1 is the client's bundle unchanged.
* The request for stage *n+1* is the original Patient and Observations plus
  one Observation per CarePlan activity produced by stages 1..n. Each such
  Observation takes the activity's code; its value is the activity's
  probability as a dimensionless Quantity (unit ``"1"``) when present,
  otherwise ``valueBoolean true``. Its id is ``stage{s}-plan{p}-act{a}``
  with 1-based indices, and its subject is the original Patient.
* The pipeline response is the original Patient followed by every stage's
  CarePlans in stage order.

Running the pipeline server-side or replaying it client-side with sequential
POSTs therefore yields byte-identical final bundles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .manifest import _NAME_RE as NAME_RE
from .manifest import _VERSION_RE as VERSION_RE
from .manifest import ModelManifest
from .resources import Bundle, CarePlan, Coding, Observation, Quantity


class PipelineError(ValueError):
    """The pipeline document or wiring is invalid."""


class UnknownStage(PipelineError):
    """A stage references a function that is not registered and active."""


@dataclass(frozen=True)
class PipelineStage:
    name: str
    version: str | None = None

    @classmethod
    def parse(cls, text: str) -> "PipelineStage":
        name, sep, version = text.partition("@")
        if not NAME_RE.match(name):
            raise PipelineError(f"stage name {name!r} must match [a-z0-9-]+")
        if sep and not VERSION_RE.match(version):
            raise PipelineError(f"stage pin {version!r} is not a semantic version")
        return cls(name=name, version=version if sep else None)

    def __str__(self) -> str:
        return f"{self.name}@{self.version}" if self.version else self.name


@dataclass(frozen=True)
class PipelineSpec:
    name: str
    version: str
    stages: tuple[PipelineStage, ...]
    description: str = ""

    def validate(self) -> None:
        if not NAME_RE.match(self.name):
            raise PipelineError(f"pipeline name {self.name!r} must match [a-z0-9-]+")
        if not VERSION_RE.match(self.version):
            raise PipelineError(f"version {self.version!r} is not a semantic version")
        if len(self.stages) < 2:
            raise PipelineError("a pipeline needs at least two stages")


def pipeline_from_dict(data: dict) -> PipelineSpec:
    if not isinstance(data, dict):
        raise PipelineError("pipeline document must be a JSON object")
    for key in ("name", "version", "pipeline"):
        if key not in data:
            raise PipelineError(f"pipeline document is missing required field {key!r}")
    raw_stages = data["pipeline"]
    if not isinstance(raw_stages, list) or not all(isinstance(s, str) for s in raw_stages):
        raise PipelineError("'pipeline' must be an array of stage strings")
    spec = PipelineSpec(
        name=str(data["name"]),
        version=str(data["version"]),
        stages=tuple(PipelineStage.parse(s) for s in raw_stages),
        description=str(data.get("description", "")),
    )
    spec.validate()
    return spec


def pipeline_to_dict(spec: PipelineSpec) -> dict:
    doc = {
        "name": spec.name,
        "version": spec.version,
        "pipeline": [str(stage) for stage in spec.stages],
    }
    if spec.description:
        doc["description"] = spec.description
    return doc


ManifestLookup = Callable[[str, "str | None"], "ModelManifest | None"]


def validate_pipeline(spec: PipelineSpec, lookup: ManifestLookup) -> list[ModelManifest]:
    """Check that every stage resolves and that its inputs are satisfiable.

    A stage's input coding is satisfiable if the first stage's declared
    inputs or any earlier stage's declared outputs provide it (family codes
    match by their three-character prefix). Returns the resolved manifests
    in stage order.
    """
    spec.validate()
    manifests: list[ModelManifest] = []
    for stage in spec.stages:
        manifest = lookup(stage.name, stage.version)
        if manifest is None:
            raise UnknownStage(f"pipeline {spec.name!r}: stage {stage} is not registered")
        manifests.append(manifest)

    available: set[Coding] = set(manifests[0].input_codes)
    for index, manifest in enumerate(manifests[1:], start=2):
        available |= manifests[index - 2].output_codes
        for required in manifest.sorted_inputs():
            if not any(required.matches(provided) for provided in available):
                raise PipelineError(
                    f"pipeline {spec.name!r}: stage {index} ({manifest.name}) requires "
                    f"{required.system}|{required.code} which no earlier stage provides"
                )
    return manifests


def rewrap(original: Bundle, prior_responses: Sequence[Bundle]) -> Bundle:
    """Build the request bundle for the stage after ``prior_responses``."""
    patient = original.first_patient()
    if patient is None:
        raise PipelineError("cannot rewrap a bundle without a Patient")
    entries: list = [patient]
    entries.extend(original.resources_of(Observation))
    for stage_index, response in enumerate(prior_responses, start=1):
        for plan_index, plan in enumerate(response.resources_of(CarePlan), start=1):
            for act_index, activity in enumerate(plan.activity, start=1):
                if activity.probability is not None:
                    value: Quantity | bool = Quantity(activity.probability, "1")
                else:
                    value = True
                entries.append(
                    Observation(
                        id=f"stage{stage_index}-plan{plan_index}-act{act_index}",
                        code=activity.code,
                        value=value,
                        subject=patient.id,
                    )
                )
    return Bundle(entries=entries)


def merge_final(original: Bundle, responses: Sequence[Bundle]) -> Bundle:
    """Compose the pipeline response: the Patient, then each stage's plans."""
    patient = original.first_patient()
    if patient is None:
        raise PipelineError("cannot compose a response without a Patient")
    entries: list = [patient]
    for response in responses:
        entries.extend(response.resources_of(CarePlan))
    return Bundle(entries=entries)


Invoke = Callable[[Bundle], Bundle]


def run_pipeline(original: Bundle, invokers: Sequence[Invoke]) -> Bundle:
    """Drive the chain: invoke each stage on the rewrapped prior results."""
    if not invokers:
        raise PipelineError("a pipeline needs at least one resolved stage")
    responses: list[Bundle] = []
    for invoke in invokers:
        request = original if not responses else rewrap(original, responses)
        responses.append(invoke(request))
    return merge_final(original, responses)
