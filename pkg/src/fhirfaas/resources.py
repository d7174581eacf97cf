"""Typed model of the profiled FHIR R4 subset.

Six resource types are modeled: Patient, Observation, CarePlan, Endpoint,
Subscription and OperationOutcome, plus the Bundle that carries them. Each
type knows how to build itself from a decoded JSON object (``from_wire``),
how to render itself back to a plain object tree for the canonical encoder
(``to_wire``), and how to check its own structural invariants (``check``).

Unknown JSON fields are ignored on read and therefore dropped on write; the
profile is deliberately lossy for off-profile elements. Decimals are kept as
:class:`decimal.Decimal` end to end so canonical output is byte-stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Any, Union
from urllib.parse import urlparse

from .errors import InvariantViolation, SchemaViolation, UnknownResourceType

FHIR_JSON_MIME = "application/fhir+json"

# Code systems used by the shipped profile.
CODE_SYSTEM = "urn:fhirfaas:codes"
ICD_SYSTEM = "http://hl7.org/fhir/sid/icd-10"
CCI_SYSTEM = "https://fhir.infoway-inforoute.ca/CodeSystem/cci"
CONNECTION_TYPE_SYSTEM = "http://terminology.hl7.org/CodeSystem/endpoint-connection-type"
CONNECTION_TYPE_CODE = "hl7-fhir-rest"
PROBABILITY_EXT_URL = "urn:fhirfaas:probability"

# Systems whose 3-character codes act as prefix patterns during validation,
# mirroring the first-3-characters coding convention of the feature builder.
PREFIX_MATCH_SYSTEMS = frozenset({ICD_SYSTEM, CCI_SYSTEM})


class Gender(str, Enum):
    MALE = "male"
    FEMALE = "female"
    OTHER = "other"
    UNKNOWN = "unknown"


class CarePlanStatus(str, Enum):
    DRAFT = "draft"
    ACTIVE = "active"
    COMPLETED = "completed"


class EndpointStatus(str, Enum):
    ACTIVE = "active"
    SUSPENDED = "suspended"
    OFF = "off"


class Severity(str, Enum):
    FATAL = "fatal"
    ERROR = "error"
    WARNING = "warning"
    INFORMATION = "information"


def as_decimal(value: int | float | str | Decimal) -> Decimal:
    """Coerce a numeric input to Decimal; floats go through repr to keep
    the shortest round-trip digits."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, bool):
        raise InvariantViolation("decimal", "boolean is not a decimal value")
    if isinstance(value, (int, str)):
        try:
            return Decimal(value)
        except InvalidOperation as exc:
            raise InvariantViolation("decimal", f"not a decimal: {value!r}") from exc
    if isinstance(value, float):
        return Decimal(repr(value))
    raise InvariantViolation("decimal", f"not a decimal: {value!r}")


def _require(data: dict, key: str, path: str) -> Any:
    if key not in data:
        raise SchemaViolation(f"{path}.{key}", "required field missing")
    return data[key]


def _require_str(data: dict, key: str, path: str) -> str:
    value = _require(data, key, path)
    if not isinstance(value, str):
        raise SchemaViolation(f"{path}.{key}", "expected a string")
    return value


def _require_nonempty_str(data: dict, key: str, path: str) -> str:
    value = _require_str(data, key, path)
    if not value:
        raise SchemaViolation(f"{path}.{key}", "must be non-empty")
    return value


def _parse_decimal(value: Any, path: str) -> Decimal:
    if isinstance(value, bool) or not isinstance(value, (int, Decimal)):
        raise SchemaViolation(path, "expected a decimal number")
    return value if isinstance(value, Decimal) else Decimal(value)


def _parse_date(text: str, path: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise SchemaViolation(path, f"not an ISO-8601 date: {text!r}") from exc


def is_absolute_url(url: str) -> bool:
    parsed = urlparse(url)
    return parsed.scheme in ("http", "https") and bool(parsed.netloc)


@dataclass(frozen=True, order=True)
class Coding:
    """A (system, code) pair."""

    system: str
    code: str

    @classmethod
    def from_wire(cls, data: Any, path: str) -> "Coding":
        if not isinstance(data, dict):
            raise SchemaViolation(path, "expected a coding object")
        codings = data.get("coding")
        if not isinstance(codings, list) or not codings:
            raise SchemaViolation(f"{path}.coding", "expected a non-empty coding array")
        first = codings[0]
        if not isinstance(first, dict):
            raise SchemaViolation(f"{path}.coding[0]", "expected a coding object")
        return cls(
            system=_require_str(first, "system", f"{path}.coding[0]"),
            code=_require_str(first, "code", f"{path}.coding[0]"),
        )

    def to_wire(self) -> dict:
        return {"coding": [{"code": self.code, "system": self.system}]}

    def matches(self, other: "Coding") -> bool:
        """True when ``other`` satisfies this coding as an expected input.

        3-character codes in a prefix-matching system (ICD, CCI) match any
        code sharing their first three characters; everything else matches
        exactly.
        """
        if self.system != other.system:
            return False
        if self.code == other.code:
            return True
        return (
            self.system in PREFIX_MATCH_SYSTEMS
            and len(self.code) == 3
            and other.code[:3] == self.code
        )


@dataclass(frozen=True)
class Quantity:
    value: Decimal
    unit: str = ""

    @classmethod
    def from_wire(cls, data: Any, path: str) -> "Quantity":
        if not isinstance(data, dict):
            raise SchemaViolation(path, "expected a quantity object")
        value = _parse_decimal(_require(data, "value", path), f"{path}.value")
        unit = data.get("unit", "")
        if not isinstance(unit, str):
            raise SchemaViolation(f"{path}.unit", "expected a string")
        return cls(value=value, unit=unit)

    def to_wire(self) -> dict:
        wire: dict[str, Any] = {"value": self.value}
        if self.unit:
            wire["unit"] = self.unit
        return wire


@dataclass(frozen=True)
class ReferenceRange:
    low: Decimal | None = None
    high: Decimal | None = None

    def check(self, path: str) -> None:
        if self.low is not None and self.high is not None and self.low > self.high:
            raise InvariantViolation(f"{path}.referenceRange", "low exceeds high")


@dataclass
class Patient:
    id: str
    name: str | None = None
    gender: Gender = Gender.UNKNOWN
    birth_date: date | None = None

    resource_type = "Patient"

    @classmethod
    def from_wire(cls, data: dict, path: str) -> "Patient":
        gender_text = data.get("gender", "unknown")
        try:
            gender = Gender(gender_text)
        except ValueError:
            raise SchemaViolation(f"{path}.gender", f"not a gender code: {gender_text!r}")
        name = None
        names = data.get("name")
        if names is not None:
            if not isinstance(names, list) or not all(isinstance(n, dict) for n in names):
                raise SchemaViolation(f"{path}.name", "expected an array of name objects")
            if names:
                name = names[0].get("text")
                if name is not None and not isinstance(name, str):
                    raise SchemaViolation(f"{path}.name[0].text", "expected a string")
        birth_date = None
        if "birthDate" in data:
            raw = data["birthDate"]
            if not isinstance(raw, str):
                raise SchemaViolation(f"{path}.birthDate", "expected a string")
            birth_date = _parse_date(raw, f"{path}.birthDate")
        return cls(
            id=_require_nonempty_str(data, "id", path),
            name=name,
            gender=gender,
            birth_date=birth_date,
        )

    def to_wire(self) -> dict:
        wire: dict[str, Any] = {
            "resourceType": "Patient",
            "id": self.id,
            "gender": self.gender.value,
        }
        if self.name is not None:
            wire["name"] = [{"text": self.name}]
        if self.birth_date is not None:
            wire["birthDate"] = self.birth_date.isoformat()
        return wire

    def check(self, path: str = "Patient", *, today: date | None = None) -> None:
        if not self.id:
            raise InvariantViolation(f"{path}.id", "must be non-empty")
        if today is not None and self.birth_date is not None and self.birth_date > today:
            raise InvariantViolation(f"{path}.birthDate", "birth date lies in the future")


ObservationValue = Union[Quantity, bool, str, None]


@dataclass
class Observation:
    id: str
    code: Coding
    value: ObservationValue = None
    reference_range: ReferenceRange | None = None
    subject: str | None = None

    resource_type = "Observation"

    @classmethod
    def from_wire(cls, data: dict, path: str) -> "Observation":
        value: ObservationValue = None
        present = [k for k in ("valueQuantity", "valueBoolean", "valueString") if k in data]
        if len(present) > 1:
            raise SchemaViolation(f"{path}.value[x]", "multiple value[x] fields present")
        if present:
            key = present[0]
            raw = data[key]
            if key == "valueQuantity":
                value = Quantity.from_wire(raw, f"{path}.valueQuantity")
            elif key == "valueBoolean":
                if not isinstance(raw, bool):
                    raise SchemaViolation(f"{path}.valueBoolean", "expected a boolean")
                value = raw
            else:
                if not isinstance(raw, str):
                    raise SchemaViolation(f"{path}.valueString", "expected a string")
                value = raw
        reference_range = None
        if "referenceRange" in data:
            ranges = data["referenceRange"]
            if not isinstance(ranges, list) or not ranges or not isinstance(ranges[0], dict):
                raise SchemaViolation(f"{path}.referenceRange", "expected a non-empty array")
            entry = ranges[0]
            low = high = None
            if "low" in entry:
                low = Quantity.from_wire(entry["low"], f"{path}.referenceRange[0].low").value
            if "high" in entry:
                high = Quantity.from_wire(entry["high"], f"{path}.referenceRange[0].high").value
            reference_range = ReferenceRange(low=low, high=high)
        subject = None
        if "subject" in data:
            subject = _parse_reference(data["subject"], f"{path}.subject")
        return cls(
            id=_require_nonempty_str(data, "id", path),
            code=Coding.from_wire(_require(data, "code", path), f"{path}.code"),
            value=value,
            reference_range=reference_range,
            subject=subject,
        )

    def to_wire(self) -> dict:
        wire: dict[str, Any] = {
            "resourceType": "Observation",
            "id": self.id,
            "code": self.code.to_wire(),
        }
        if isinstance(self.value, Quantity):
            wire["valueQuantity"] = self.value.to_wire()
        elif isinstance(self.value, bool):
            wire["valueBoolean"] = self.value
        elif isinstance(self.value, str):
            wire["valueString"] = self.value
        if self.reference_range is not None:
            entry: dict[str, Any] = {}
            if self.reference_range.low is not None:
                entry["low"] = {"value": self.reference_range.low}
            if self.reference_range.high is not None:
                entry["high"] = {"value": self.reference_range.high}
            wire["referenceRange"] = [entry]
        if self.subject is not None:
            wire["subject"] = {"reference": f"Patient/{self.subject}"}
        return wire

    def check(self, path: str = "Observation") -> None:
        if not self.id:
            raise InvariantViolation(f"{path}.id", "must be non-empty")
        if not self.code.code:
            raise InvariantViolation(f"{path}.code", "code must be non-empty")
        if self.reference_range is not None:
            self.reference_range.check(path)


@dataclass
class CarePlanActivity:
    code: Coding
    detail: str = ""
    probability: Decimal | None = None

    @classmethod
    def from_wire(cls, data: Any, path: str) -> "CarePlanActivity":
        if not isinstance(data, dict):
            raise SchemaViolation(path, "expected an activity object")
        detail_obj = _require(data, "detail", path)
        if not isinstance(detail_obj, dict):
            raise SchemaViolation(f"{path}.detail", "expected an object")
        code = Coding.from_wire(_require(detail_obj, "code", f"{path}.detail"), f"{path}.detail.code")
        detail_text = detail_obj.get("description", "")
        if not isinstance(detail_text, str):
            raise SchemaViolation(f"{path}.detail.description", "expected a string")
        probability = None
        extensions = detail_obj.get("extension", [])
        if not isinstance(extensions, list):
            raise SchemaViolation(f"{path}.detail.extension", "expected an array")
        for i, ext in enumerate(extensions):
            if isinstance(ext, dict) and ext.get("url") == PROBABILITY_EXT_URL:
                probability = _parse_decimal(
                    _require(ext, "valueDecimal", f"{path}.detail.extension[{i}]"),
                    f"{path}.detail.extension[{i}].valueDecimal",
                )
        return cls(code=code, detail=detail_text, probability=probability)

    def to_wire(self) -> dict:
        detail: dict[str, Any] = {"code": self.code.to_wire()}
        if self.detail:
            detail["description"] = self.detail
        if self.probability is not None:
            detail["extension"] = [{"url": PROBABILITY_EXT_URL, "valueDecimal": self.probability}]
        return {"detail": detail}


@dataclass
class CarePlan:
    id: str
    subject: str
    activity: list[CarePlanActivity] = field(default_factory=list)
    status: CarePlanStatus = CarePlanStatus.ACTIVE
    author: tuple[str, str] | None = None

    resource_type = "CarePlan"

    @classmethod
    def from_wire(cls, data: dict, path: str) -> "CarePlan":
        status_text = data.get("status", "active")
        try:
            status = CarePlanStatus(status_text)
        except ValueError:
            raise SchemaViolation(f"{path}.status", f"not a care plan status: {status_text!r}")
        raw_activity = _require(data, "activity", path)
        if not isinstance(raw_activity, list):
            raise SchemaViolation(f"{path}.activity", "expected an array")
        activity = [
            CarePlanActivity.from_wire(entry, f"{path}.activity[{i}]")
            for i, entry in enumerate(raw_activity)
        ]
        author = None
        if "author" in data:
            author_obj = data["author"]
            if not isinstance(author_obj, dict):
                raise SchemaViolation(f"{path}.author", "expected an object")
            display = _require_str(author_obj, "display", f"{path}.author")
            if "@" not in display:
                raise SchemaViolation(f"{path}.author.display", "expected '<name>@<version>'")
            name, version = display.rsplit("@", 1)
            author = (name, version)
        return cls(
            id=_require_nonempty_str(data, "id", path),
            subject=_parse_reference(_require(data, "subject", path), f"{path}.subject"),
            activity=activity,
            status=status,
            author=author,
        )

    def to_wire(self) -> dict:
        wire: dict[str, Any] = {
            "resourceType": "CarePlan",
            "id": self.id,
            "status": self.status.value,
            "subject": {"reference": f"Patient/{self.subject}"},
            "activity": [a.to_wire() for a in self.activity],
        }
        if self.author is not None:
            wire["author"] = {"display": f"{self.author[0]}@{self.author[1]}"}
        return wire

    def check(self, path: str = "CarePlan") -> None:
        if not self.id:
            raise InvariantViolation(f"{path}.id", "must be non-empty")
        if not self.activity:
            raise InvariantViolation(f"{path}.activity", "at least one activity is required")
        for i, act in enumerate(self.activity):
            if act.probability is not None and not (0 <= act.probability <= 1):
                raise InvariantViolation(
                    f"{path}.activity[{i}]", f"probability {act.probability} outside [0,1]"
                )


@dataclass
class Endpoint:
    name: str
    address: str
    status: EndpointStatus = EndpointStatus.ACTIVE
    connection_type: Coding = field(
        default_factory=lambda: Coding(CONNECTION_TYPE_SYSTEM, CONNECTION_TYPE_CODE)
    )
    header: list[str] = field(default_factory=list)
    payload_type: list[Coding] = field(default_factory=list)
    payload_mime_type: list[str] = field(default_factory=lambda: [FHIR_JSON_MIME])

    resource_type = "Endpoint"

    @classmethod
    def from_wire(cls, data: dict, path: str) -> "Endpoint":
        status_text = _require_str(data, "status", path)
        try:
            status = EndpointStatus(status_text)
        except ValueError:
            raise SchemaViolation(f"{path}.status", f"not an endpoint status: {status_text!r}")
        conn = data.get("connectionType")
        if not isinstance(conn, dict):
            raise SchemaViolation(f"{path}.connectionType", "required field missing")
        connection_type = Coding(
            system=_require_str(conn, "system", f"{path}.connectionType"),
            code=_require_str(conn, "code", f"{path}.connectionType"),
        )
        header = data.get("header", [])
        if not isinstance(header, list) or not all(isinstance(h, str) for h in header):
            raise SchemaViolation(f"{path}.header", "expected an array of strings")
        raw_payload = data.get("payloadType", [])
        if not isinstance(raw_payload, list):
            raise SchemaViolation(f"{path}.payloadType", "expected an array")
        payload_type = [
            Coding.from_wire(entry, f"{path}.payloadType[{i}]") for i, entry in enumerate(raw_payload)
        ]
        mime = data.get("payloadMimeType", [FHIR_JSON_MIME])
        if not isinstance(mime, list) or not all(isinstance(m, str) for m in mime):
            raise SchemaViolation(f"{path}.payloadMimeType", "expected an array of strings")
        return cls(
            name=_require_nonempty_str(data, "name", path),
            address=_require_nonempty_str(data, "address", path),
            status=status,
            connection_type=connection_type,
            header=list(header),
            payload_type=payload_type,
            payload_mime_type=list(mime),
        )

    def to_wire(self) -> dict:
        return {
            "resourceType": "Endpoint",
            "status": self.status.value,
            "connectionType": {"code": self.connection_type.code, "system": self.connection_type.system},
            "name": self.name,
            "address": self.address,
            "header": list(self.header),
            "payloadType": [c.to_wire() for c in self.payload_type],
            "payloadMimeType": list(self.payload_mime_type),
        }

    def check(self, path: str = "Endpoint") -> None:
        if not is_absolute_url(self.address):
            raise InvariantViolation(f"{path}.address", f"not an absolute URL: {self.address!r}")
        last_segment = urlparse(self.address).path.rstrip("/").rsplit("/", 1)[-1]
        if last_segment != self.name:
            raise InvariantViolation(
                f"{path}.address", f"path must terminate in the function name {self.name!r}"
            )


@dataclass
class SubscriptionChannel:
    endpoint: str
    type: str = "rest-hook"
    payload: str = FHIR_JSON_MIME


@dataclass
class Subscription:
    id: str
    criteria: str
    channel: SubscriptionChannel

    resource_type = "Subscription"

    @classmethod
    def from_wire(cls, data: dict, path: str) -> "Subscription":
        channel_obj = _require(data, "channel", path)
        if not isinstance(channel_obj, dict):
            raise SchemaViolation(f"{path}.channel", "expected an object")
        channel_type = _require_str(channel_obj, "type", f"{path}.channel")
        if channel_type != "rest-hook":
            raise SchemaViolation(f"{path}.channel.type", "profile requires 'rest-hook'")
        channel = SubscriptionChannel(
            endpoint=_require_nonempty_str(channel_obj, "endpoint", f"{path}.channel"),
            payload=channel_obj.get("payload", FHIR_JSON_MIME),
        )
        return cls(
            id=_require_nonempty_str(data, "id", path),
            criteria=_require_nonempty_str(data, "criteria", path),
            channel=channel,
        )

    def to_wire(self) -> dict:
        return {
            "resourceType": "Subscription",
            "id": self.id,
            "criteria": self.criteria,
            "channel": {
                "endpoint": self.channel.endpoint,
                "payload": self.channel.payload,
                "type": self.channel.type,
            },
        }

    def check(self, path: str = "Subscription") -> None:
        if not is_absolute_url(self.channel.endpoint):
            raise InvariantViolation(
                f"{path}.channel.endpoint", f"not an absolute URL: {self.channel.endpoint!r}"
            )


@dataclass
class OperationOutcome:
    severity: Severity
    code: str
    diagnostics: str = ""

    resource_type = "OperationOutcome"

    @classmethod
    def from_wire(cls, data: dict, path: str) -> "OperationOutcome":
        issues = _require(data, "issue", path)
        if not isinstance(issues, list) or not issues or not isinstance(issues[0], dict):
            raise SchemaViolation(f"{path}.issue", "expected a non-empty array")
        issue = issues[0]
        severity_text = _require_str(issue, "severity", f"{path}.issue[0]")
        try:
            severity = Severity(severity_text)
        except ValueError:
            raise SchemaViolation(f"{path}.issue[0].severity", f"not a severity: {severity_text!r}")
        diagnostics = issue.get("diagnostics", "")
        if not isinstance(diagnostics, str):
            raise SchemaViolation(f"{path}.issue[0].diagnostics", "expected a string")
        return cls(
            severity=severity,
            code=_require_nonempty_str(issue, "code", f"{path}.issue[0]"),
            diagnostics=diagnostics,
        )

    def to_wire(self) -> dict:
        issue: dict[str, Any] = {"code": self.code, "severity": self.severity.value}
        if self.diagnostics:
            issue["diagnostics"] = self.diagnostics
        return {"issue": [issue], "resourceType": "OperationOutcome"}

    def check(self, path: str = "OperationOutcome") -> None:
        if not self.code:
            raise InvariantViolation(f"{path}.code", "must be non-empty")


Resource = Union[Patient, Observation, CarePlan, Endpoint, Subscription, OperationOutcome, "Bundle"]


@dataclass
class Bundle:
    entries: list[Resource] = field(default_factory=list)

    resource_type = "Bundle"
    type = "collection"

    @classmethod
    def from_wire(cls, data: dict, path: str) -> "Bundle":
        bundle_type = _require_str(data, "type", path)
        if bundle_type != "collection":
            raise SchemaViolation(f"{path}.type", f"profile supports 'collection' only, got {bundle_type!r}")
        raw_entries = data.get("entry", [])
        if not isinstance(raw_entries, list):
            raise SchemaViolation(f"{path}.entry", "expected an array")
        entries: list[Resource] = []
        for i, entry in enumerate(raw_entries):
            if not isinstance(entry, dict) or "resource" not in entry:
                raise SchemaViolation(f"{path}.entry[{i}]", "expected an object holding 'resource'")
            entries.append(parse_wire_object(entry["resource"], f"{path}.entry[{i}]"))
        return cls(entries=entries)

    def to_wire(self) -> dict:
        wire: dict[str, Any] = {"resourceType": "Bundle", "type": "collection"}
        if self.entries:
            wire["entry"] = [{"resource": r.to_wire()} for r in self.entries]
        return wire

    def check(self, path: str = "Bundle") -> None:
        for i, entry in enumerate(self.entries):
            entry.check(f"{path}.entry[{i}].{entry.resource_type}")

    def resources_of(self, resource_type: type) -> list:
        return [r for r in self.entries if isinstance(r, resource_type)]

    def first_patient(self) -> Patient | None:
        patients = self.resources_of(Patient)
        return patients[0] if patients else None


RESOURCE_TYPES: dict[str, type] = {
    "Patient": Patient,
    "Observation": Observation,
    "CarePlan": CarePlan,
    "Endpoint": Endpoint,
    "Subscription": Subscription,
    "OperationOutcome": OperationOutcome,
    "Bundle": Bundle,
}


def parse_wire_object(data: Any, path: str = "") -> Resource:
    """Dispatch a decoded JSON object to the matching resource type."""
    if not isinstance(data, dict):
        raise SchemaViolation(path or "$", "expected a JSON object")
    if "resourceType" not in data:
        raise SchemaViolation(f"{path}.resourceType" if path else "resourceType", "required field missing")
    type_name = data["resourceType"]
    if not isinstance(type_name, str) or type_name not in RESOURCE_TYPES:
        raise UnknownResourceType(str(type_name), path)
    resource_path = f"{path}.{type_name}" if path else type_name
    return RESOURCE_TYPES[type_name].from_wire(data, resource_path)


def _parse_reference(data: Any, path: str) -> str:
    if not isinstance(data, dict):
        raise SchemaViolation(path, "expected a reference object")
    ref = _require_nonempty_str(data, "reference", path)
    if "/" in ref:
        return ref.rsplit("/", 1)[-1]
    return ref


def make_operation_outcome(code: str, severity: Severity | str, diagnostics: str) -> OperationOutcome:
    """Build an error/report resource; ``code`` must be non-empty."""
    if not code:
        raise ValueError("OperationOutcome code must be non-empty")
    if isinstance(severity, str):
        severity = Severity(severity)
    return OperationOutcome(severity=severity, code=code, diagnostics=diagnostics)
