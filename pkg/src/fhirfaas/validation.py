"""Direction-aware bundle validation.

Inbound bundles (client to model) must carry exactly one Patient, at least
one Observation, and every expected input code. Outbound bundles (model to
client) must carry at least one CarePlan and exactly one Patient. Both
directions additionally check per-resource invariants and intra-bundle
reference closure. Violations are collected into a report, never raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Iterable

from .errors import InvariantViolation
from .resources import (
    Bundle,
    CarePlan,
    Coding,
    Observation,
    OperationOutcome,
    Patient,
    Severity,
    make_operation_outcome,
)


class Direction(str, Enum):
    INBOUND = "inbound"
    OUTBOUND = "outbound"


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass
class ValidationReport:
    direction: Direction
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def add(self, path: str, message: str) -> None:
        self.violations.append(Violation(path, message))

    def to_operation_outcome(self) -> OperationOutcome:
        return make_operation_outcome(
            code="validation-failed",
            severity=Severity.ERROR,
            diagnostics="; ".join(str(v) for v in self.violations) or "valid",
        )


def validate_bundle(
    bundle: Bundle,
    direction: Direction | str,
    expected_codes: Iterable[Coding] = (),
    *,
    today: date | None = None,
) -> ValidationReport:
    """Check a parsed bundle against the protocol rules for one direction.

    ``expected_codes`` are the input codings the receiving function requires;
    each must match some Observation code in the bundle (3-character ICD/CCI
    codes match by prefix). ``today`` anchors the birth-date-in-the-future
    check and defaults to the current day.
    """
    direction = Direction(direction)
    report = ValidationReport(direction=direction)
    today = today or date.today()

    patients = []
    observations = []
    careplans = []
    patient_ids = set()
    for i, entry in enumerate(bundle.entries):
        path = f"Bundle.entry[{i}].{entry.resource_type}"
        try:
            if isinstance(entry, Patient):
                entry.check(path, today=today)
            else:
                entry.check(path)
        except InvariantViolation as exc:
            report.add(exc.path, str(exc).split(": ", 1)[-1])
        if isinstance(entry, Patient):
            patients.append((i, entry))
            patient_ids.add(entry.id)
        elif isinstance(entry, Observation):
            observations.append((i, entry))
        elif isinstance(entry, CarePlan):
            careplans.append((i, entry))

    # Reference closure: every subject must resolve inside this bundle.
    for i, obs in observations:
        if obs.subject is not None and obs.subject not in patient_ids:
            report.add(
                f"Bundle.entry[{i}].Observation.subject",
                f"dangling reference to Patient {obs.subject!r}",
            )
    for i, plan in careplans:
        if plan.subject not in patient_ids:
            report.add(
                f"Bundle.entry[{i}].CarePlan.subject",
                f"dangling reference to Patient {plan.subject!r}",
            )

    if direction is Direction.INBOUND:
        if not patients:
            report.add("Bundle", "missing Patient resource")
        elif len(patients) > 1:
            report.add("Bundle", f"ambiguous patient context: {len(patients)} Patient resources")
        if not observations:
            report.add("Bundle", "missing Observation resource")
        observed = [obs.code for _, obs in observations]
        for expected in sorted(set(expected_codes)):
            if not any(expected.matches(code) for code in observed):
                report.add(
                    "Bundle",
                    f"required input code {expected.system}|{expected.code} not present among Observations",
                )
    else:
        if not careplans:
            report.add("Bundle", "missing CarePlan resource")
        if not patients:
            report.add("Bundle", "missing echoed Patient resource")
        elif len(patients) > 1:
            report.add("Bundle", f"ambiguous patient context: {len(patients)} Patient resources")

    return report
