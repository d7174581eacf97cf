"""Shared test utilities: corpus access, gateway assembly, generators, oracles.

The oracles here are deliberately independent reimplementations working on
raw wire JSON (never on the package's typed layer), so agreement between the
two is meaningful evidence rather than a tautology.
"""

from __future__ import annotations

import json
from datetime import date
from decimal import Decimal
from pathlib import Path
from random import Random

from fhirfaas.clock import LogicalClock
from fhirfaas.codec import canonical_json, parse_resource
from fhirfaas.gateway import Gateway, GatewayConfig, HttpReply
from fhirfaas.reference_models import demo_manifests, demo_pipeline
from fhirfaas.registry import Registry
from fhirfaas.resources import (
    CCI_SYSTEM,
    CODE_SYSTEM,
    FHIR_JSON_MIME,
    ICD_SYSTEM,
    Bundle,
    CarePlan,
    CarePlanActivity,
    Coding,
    Endpoint,
    EndpointStatus,
    Gender,
    Observation,
    OperationOutcome,
    Patient,
    Quantity,
    ReferenceRange,
    Severity,
    Subscription,
    SubscriptionChannel,
)
from fhirfaas.scaler import Scaler
from fhirfaas.subscriptions import Dispatcher

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
MANIFESTS = ROOT / "manifests"


def corpus_bytes(relative: str) -> bytes:
    return (CORPUS / relative).read_bytes()


def read_corpus_json(relative: str):
    return json.loads((CORPUS / relative).read_text(encoding="utf-8"), parse_float=Decimal)


def corpus_files() -> list[Path]:
    """Every canonical fixture file (resources and bundles)."""
    return sorted((CORPUS / "resources").glob("*.json")) + sorted(
        (CORPUS / "bundles").glob("*.json")
    )


# -- in-process gateway -------------------------------------------------------


class RecordingSink:
    """Scriptable subscription sink.

    ``plan`` maps a URL to the list of statuses to return on successive
    calls; once exhausted (or for unplanned URLs) ``default`` is returned.
    A ``delay`` is charged to ``clock`` per call to model a slow receiver.
    """

    def __init__(self, plan=None, default=200, delay=0.0, clock=None):
        self.plan = {url: list(statuses) for url, statuses in (plan or {}).items()}
        self.default = default
        self.delay = delay
        self.clock = clock
        self.calls: list[tuple[str, bytes, dict]] = []

    def __call__(self, url: str, body: bytes, headers: dict) -> int:
        self.calls.append((url, body, dict(headers)))
        if self.delay and self.clock is not None:
            self.clock.sleep(self.delay)
        statuses = self.plan.get(url)
        if statuses:
            return statuses.pop(0)
        return self.default


def make_gateway(
    *,
    deterministic: bool = True,
    register_demo: bool = True,
    sink: RecordingSink | None = None,
    clock: LogicalClock | None = None,
    config: GatewayConfig | None = None,
) -> tuple[Gateway, RecordingSink]:
    clock = clock or LogicalClock()
    sink = sink or RecordingSink()
    gateway = Gateway(
        config or GatewayConfig(deterministic_mode=deterministic),
        registry=Registry(now=clock.now),
        scaler=Scaler(),
        dispatcher=Dispatcher(clock=clock, post_fn=sink),
        clock=clock,
    )
    if register_demo:
        for document in demo_manifests():
            gateway.registry.register(document)
        gateway.registry.register(demo_pipeline())
    return gateway, sink


def post(gateway: Gateway, name: str, body: bytes, content_type: str = FHIR_JSON_MIME, headers=None) -> HttpReply:
    return gateway.handle_post_function(name, body, content_type, headers)


# -- conformance case replay --------------------------------------------------


def conformance_cases() -> list[dict]:
    cases = []
    for path in sorted((CORPUS / "conformance").glob("*.json")):
        case = json.loads(path.read_text(encoding="utf-8"), parse_float=Decimal)
        case["_file"] = path.name
        cases.append(case)
    return cases


def case_body(case: dict) -> bytes:
    if "body" in case:
        return canonical_json(case["body"])
    if "body_file" in case:
        return corpus_bytes(case["body_file"])
    if "body_raw" in case:
        return case["body_raw"].encode("utf-8")
    if "body_size" in case:
        return b"x" * int(case["body_size"])
    raise AssertionError(f"case {case['name']} carries no body source")


def run_case(gateway: Gateway, case: dict) -> HttpReply:
    headers = dict(case.get("headers") or {})
    if case["method"] == "GET":
        return gateway.handle_get_function(case["function"], headers.get("X-Function-Version"))
    return gateway.handle_post_function(
        case["function"], case_body(case), case.get("content_type", FHIR_JSON_MIME), headers
    )


def assert_case(reply: HttpReply, case: dict) -> None:
    expect = case["expect"]
    assert reply.status == expect["status"], (
        f"{case['name']}: status {reply.status} != {expect['status']} ({reply.body[:200]!r})"
    )
    document = json.loads(reply.body, parse_float=Decimal)
    assert document["resourceType"] == expect["resource_type"], case["name"]
    if "outcome_code" in expect:
        assert document["issue"][0]["code"] == expect["outcome_code"], case["name"]
    # Every reply body, success or error, must be a parseable profiled resource.
    parse_resource(reply.body)


# -- random resource generator ------------------------------------------------

_NAME_POOL = [
    "Jo Doe",
    "Åsa Öberg",
    "Строка Проба",
    "患者 例",
    'quote " and \\ backslash',
    "new\nline and tab\t",
    "emoji ☃ ⚕",
]
_CODE_POOL = ["I500", "I10", "E119", "N189", "J449", "1HZ55", "2HZ08", "los-gt-10d", "note"]
_SYSTEM_POOL = [ICD_SYSTEM, CCI_SYSTEM, CODE_SYSTEM]


def random_decimal(rng: Random) -> Decimal:
    return Decimal(rng.randint(-(10**6), 10**6)).scaleb(-rng.randint(0, 6))


def random_probability(rng: Random) -> Decimal:
    return Decimal(rng.randint(0, 10**6)).scaleb(-6)


def random_patient(rng: Random, pid: str) -> Patient:
    return Patient(
        id=pid,
        name=rng.choice(_NAME_POOL) if rng.random() < 0.8 else None,
        gender=rng.choice(list(Gender)),
        birth_date=None
        if rng.random() < 0.2
        else date(rng.randint(1920, 2020), rng.randint(1, 12), rng.randint(1, 28)),
    )


def random_observation(rng: Random, oid: str, subject: str | None) -> Observation:
    kind = rng.randrange(4)
    value = (
        Quantity(random_decimal(rng), rng.choice(["", "1", "mg", "bpm"]))
        if kind == 0
        else rng.random() < 0.5
        if kind == 1
        else rng.choice(_NAME_POOL)
        if kind == 2
        else None
    )
    reference_range = None
    if rng.random() < 0.2:
        bounds = sorted([random_decimal(rng), random_decimal(rng)])
        reference_range = ReferenceRange(low=bounds[0], high=bounds[1])
    return Observation(
        id=oid,
        code=Coding(rng.choice(_SYSTEM_POOL), rng.choice(_CODE_POOL)),
        value=value,
        reference_range=reference_range,
        subject=subject if rng.random() < 0.7 else None,
    )


def random_careplan(rng: Random, cid: str, subject: str) -> CarePlan:
    activities = [
        CarePlanActivity(
            code=Coding(CODE_SYSTEM, rng.choice(_CODE_POOL)),
            detail=rng.choice(_NAME_POOL) if rng.random() < 0.5 else "",
            probability=random_probability(rng) if rng.random() < 0.6 else None,
        )
        for _ in range(rng.randint(1, 3))
    ]
    author = (f"fn-{rng.randint(0, 9)}", "1.0.0") if rng.random() < 0.5 else None
    return CarePlan(id=cid, subject=subject, activity=activities, author=author)


def random_bundle(rng: Random) -> Bundle:
    """A structurally valid bundle exercising every resource type and value
    kind; not necessarily inbound-valid (that is the validator's business)."""
    pid = f"pt-{rng.randint(0, 9999)}"
    entries: list = [random_patient(rng, pid)]
    for i in range(rng.randint(1, 6)):
        entries.append(random_observation(rng, f"ob-{i}", pid))
    for i in range(rng.randint(0, 2)):
        entries.append(random_careplan(rng, f"cp-{i}", pid))
    if rng.random() < 0.3:
        entries.append(
            Subscription(
                id="sub-0",
                criteria=rng.choice(["*", "los-gt-10d", f"{CODE_SYSTEM}|note"]),
                channel=SubscriptionChannel(endpoint="http://sink.example/hook"),
            )
        )
    if rng.random() < 0.2:
        entries.append(
            Endpoint(
                name="fn-x",
                address="https://host.example/function/fn-x",
                status=rng.choice(list(EndpointStatus)),
            )
        )
    if rng.random() < 0.2:
        entries.append(
            OperationOutcome(
                severity=rng.choice(list(Severity)),
                code="informational",
                diagnostics=rng.choice(_NAME_POOL),
            )
        )
    rest = entries[1:]
    rng.shuffle(rest)
    return Bundle(entries=[entries[0], *rest])


# -- independent pipeline oracle (wire-level) ---------------------------------

PROBABILITY_URL = "urn:fhirfaas:probability"


def _wire_entries(bundle_wire: dict) -> list[dict]:
    return [entry["resource"] for entry in bundle_wire.get("entry", [])]


def oracle_rewrap(original_wire: dict, prior_response_wires: list[dict]) -> dict:
    """Chaining rule, reimplemented over raw JSON: original Patient and
    Observations plus one Observation per prior CarePlan activity."""
    entries = _wire_entries(original_wire)
    patient = next(r for r in entries if r["resourceType"] == "Patient")
    out = [patient]
    out.extend(r for r in entries if r["resourceType"] == "Observation")
    for stage_no, response in enumerate(prior_response_wires, start=1):
        plans = [r for r in _wire_entries(response) if r["resourceType"] == "CarePlan"]
        for plan_no, plan in enumerate(plans, start=1):
            for act_no, activity in enumerate(plan["activity"], start=1):
                detail = activity["detail"]
                probability = None
                for extension in detail.get("extension", []):
                    if extension.get("url") == PROBABILITY_URL:
                        probability = extension["valueDecimal"]
                observation = {
                    "resourceType": "Observation",
                    "id": f"stage{stage_no}-plan{plan_no}-act{act_no}",
                    "code": {"coding": [dict(detail["code"]["coding"][0])]},
                    "subject": {"reference": f"Patient/{patient['id']}"},
                }
                if probability is not None:
                    observation["valueQuantity"] = {"unit": "1", "value": probability}
                else:
                    observation["valueBoolean"] = True
                out.append(observation)
    return {
        "resourceType": "Bundle",
        "type": "collection",
        "entry": [{"resource": r} for r in out],
    }


def oracle_merge(original_wire: dict, response_wires: list[dict]) -> dict:
    entries = _wire_entries(original_wire)
    patient = next(r for r in entries if r["resourceType"] == "Patient")
    out = [patient]
    for response in response_wires:
        out.extend(r for r in _wire_entries(response) if r["resourceType"] == "CarePlan")
    return {
        "resourceType": "Bundle",
        "type": "collection",
        "entry": [{"resource": r} for r in out],
    }


def parse_wire(body: bytes) -> dict:
    return json.loads(body, parse_float=Decimal)
