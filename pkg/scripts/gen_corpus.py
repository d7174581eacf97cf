#!/usr/bin/env python3
"""Regenerate the checked-in fixture corpus, demo manifests and profiles.

Everything under corpus/ and manifests/ is derived by this script, so the
fixtures always agree with the package's canonical encoder. Fixture files
under corpus/resources/ and corpus/bundles/ hold exactly the canonical bytes
of one resource; corpus/conformance/ holds request/expectation case
documents replayed by the conformance suite.

Run from anywhere: ``python3 scripts/gen_corpus.py``.
"""

from __future__ import annotations

import json
from decimal import Decimal
from pathlib import Path

from fhirfaas.codec import canonical_json, serialize_resource
from fhirfaas.reference_models import demo_manifests, demo_pipeline
from fhirfaas.resources import CCI_SYSTEM, CODE_SYSTEM, ICD_SYSTEM, parse_wire_object

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
MANIFESTS = ROOT / "manifests"

MAX_BODY = 1 * 2**20


# --- wire-form builders -----------------------------------------------------


def patient(pid: str, name: str | None = None, gender: str = "unknown", birth: str | None = None) -> dict:
    wire: dict = {"resourceType": "Patient", "id": pid, "gender": gender}
    if name is not None:
        wire["name"] = [{"text": name}]
    if birth is not None:
        wire["birthDate"] = birth
    return wire


def observation(
    oid: str,
    system: str,
    code: str,
    value: Decimal | bool | str | None = None,
    unit: str = "",
    subject: str | None = None,
) -> dict:
    wire: dict = {
        "resourceType": "Observation",
        "id": oid,
        "code": {"coding": [{"system": system, "code": code}]},
    }
    if isinstance(value, bool):
        wire["valueBoolean"] = value
    elif isinstance(value, Decimal):
        quantity: dict = {"value": value}
        if unit:
            quantity["unit"] = unit
        wire["valueQuantity"] = quantity
    elif isinstance(value, str):
        wire["valueString"] = value
    if subject is not None:
        wire["subject"] = {"reference": f"Patient/{subject}"}
    return wire


def careplan(
    cid: str,
    subject: str,
    code: str,
    detail: str = "",
    probability: Decimal | None = None,
    author: str | None = None,
) -> dict:
    activity_detail: dict = {"code": {"coding": [{"system": CODE_SYSTEM, "code": code}]}}
    if detail:
        activity_detail["description"] = detail
    if probability is not None:
        activity_detail["extension"] = [
            {"url": "urn:fhirfaas:probability", "valueDecimal": probability}
        ]
    wire: dict = {
        "resourceType": "CarePlan",
        "id": cid,
        "status": "active",
        "subject": {"reference": f"Patient/{subject}"},
        "activity": [{"detail": activity_detail}],
    }
    if author:
        wire["author"] = {"display": author}
    return wire


def subscription(sid: str, criteria: str, endpoint: str) -> dict:
    return {
        "resourceType": "Subscription",
        "id": sid,
        "criteria": criteria,
        "channel": {"type": "rest-hook", "endpoint": endpoint, "payload": "application/fhir+json"},
    }


def bundle(*resources: dict) -> dict:
    wire: dict = {"resourceType": "Bundle", "type": "collection"}
    if resources:
        wire["entry"] = [{"resource": r} for r in resources]
    return wire


def ecg_bundle(bits: str, pid: str = "pt-ecg") -> dict:
    assert len(bits) == 15 and set(bits) <= {"0", "1"}
    obs = [
        observation(f"ecg-{i:02d}", CODE_SYSTEM, f"ecg-f{i:02d}", Decimal(bit), subject=pid)
        for i, bit in enumerate(bits, start=1)
    ]
    return bundle(patient(pid, gender="female", birth="1972-03-14"), *obs)


# --- fixture corpus ---------------------------------------------------------


def resource_fixtures() -> dict[str, dict]:
    return {
        "patient_minimal": patient("pt-min"),
        "patient_full": patient("pt-full", "Jo Doe", "male", "1958-07-22"),
        "patient_unicode": patient("pt-uni", "Åsa Öberg ☃", "female", "1990-12-31"),
        "observation_quantity": observation(
            "ob-qty", ICD_SYSTEM, "I500", Decimal("0.1"), unit="1", subject="pt-full"
        ),
        "observation_boolean": observation("ob-bool", CODE_SYSTEM, "los-gt-10d", True),
        "observation_string": observation("ob-str", CODE_SYSTEM, "note", "фхир ok"),
        "observation_decimal_edges": observation(
            "ob-edge", CODE_SYSTEM, "edge", Decimal("0.000001"), unit="mg"
        ),
        "observation_refrange": {
            **observation("ob-range", CODE_SYSTEM, "hr", Decimal(72), unit="bpm"),
            "referenceRange": [{"low": {"value": Decimal(60)}, "high": {"value": Decimal(100)}}],
        },
        "careplan_basic": careplan("cp-basic", "pt-full", "routine-discharge", "Routine discharge"),
        "careplan_probability": careplan(
            "cp-prob",
            "pt-full",
            "los-gt-10d",
            "Stay risk",
            probability=Decimal("0.25"),
            author="los-predictor@1.0.0",
        ),
        "endpoint_sample": {
            "resourceType": "Endpoint",
            "name": "sample-fn",
            "address": "http://localhost:8080/function/sample-fn",
            "status": "active",
            "connectionType": {
                "system": "http://terminology.hl7.org/CodeSystem/endpoint-connection-type",
                "code": "hl7-fhir-rest",
            },
            "header": ["X-Output-Code: urn:fhirfaas:codes|demo"],
            "payloadType": [{"coding": [{"system": CODE_SYSTEM, "code": "demo-in"}]}],
            "payloadMimeType": ["application/fhir+json"],
        },
        "subscription_star": subscription("sub-star", "*", "http://sink.example/hook"),
        "subscription_coded": subscription(
            "sub-coded", "discharge-planning-consult", "http://sink.example/consults"
        ),
        "outcome_error": {
            "resourceType": "OperationOutcome",
            "issue": [
                {"severity": "error", "code": "validation-failed", "diagnostics": "example"}
            ],
        },
        "outcome_info": {
            "resourceType": "OperationOutcome",
            "issue": [{"severity": "information", "code": "ok"}],
        },
    }


def bundle_fixtures() -> dict[str, dict]:
    los_patient = patient("pt-los", "Pat Example", "male", "1960-05-01")
    i500 = observation("ob-i500", ICD_SYSTEM, "I500", subject="pt-los")
    fixtures: dict[str, dict] = {
        # decision-tree requests
        "arrhythmia_zeros": ecg_bundle("0" * 15),
        "arrhythmia_ones": ecg_bundle("1" * 15),
        "arrhythmia_alternating": ecg_bundle("101010101010101"),
        "arrhythmia_pattern_b": ecg_bundle("011001110001011"),
        # scorecard requests
        "los_male_i500": bundle(los_patient, i500),
        "los_female_i50": bundle(
            patient("pt-f", "Fem Example", "female", "1991-01-15"),
            observation("ob-i50", ICD_SYSTEM, "I50", subject="pt-f"),
        ),
        "los_comorbid": bundle(
            patient("pt-co", "Co Morbid", "male", "1949-11-30"),
            observation("ob-1", ICD_SYSTEM, "I500", subject="pt-co"),
            observation("ob-2", ICD_SYSTEM, "E119", subject="pt-co"),
            observation("ob-3", ICD_SYSTEM, "N189", subject="pt-co"),
            observation("ob-4", CCI_SYSTEM, "1HZ55", subject="pt-co"),
        ),
        "los_unknown_gender": bundle(
            patient("pt-u", None, "unknown", "1980-06-06"),
            observation("ob-u", ICD_SYSTEM, "I509", subject="pt-u"),
        ),
        "los_extra_observations": bundle(
            los_patient,
            i500,
            observation("ob-z", ICD_SYSTEM, "Z991", subject="pt-los"),
            observation("ob-note", CODE_SYSTEM, "note", "transferred from ward 3"),
        ),
        "los_with_subscription": bundle(
            los_patient, i500, subscription("sub-1", "los-gt-10d", "http://sink.example/hook")
        ),
        # threshold requests
        "discharge_high": bundle(
            patient("pt-hi", None, "female", "1955-02-02"),
            observation("ob-p", CODE_SYSTEM, "los-gt-10d", Decimal("0.7"), unit="1", subject="pt-hi"),
        ),
        "discharge_low": bundle(
            patient("pt-lo", None, "male", "1985-09-09"),
            observation("ob-p", CODE_SYSTEM, "los-gt-10d", Decimal("0.2"), unit="1", subject="pt-lo"),
        ),
        # an outbound-shaped response and a bundle using every resource type
        "outbound_sample": bundle(
            los_patient,
            careplan(
                "cp-out",
                "pt-los",
                "los-gt-10d",
                "Stay risk",
                probability=Decimal("0.574442516811659"),
                author="los-predictor@1.0.0",
            ),
        ),
        "mixed_all_types": bundle(
            patient("pt-mix", "Mix", "other", "2000-01-01"),
            observation("ob-mix", CODE_SYSTEM, "note", "mixed"),
            careplan("cp-mix", "pt-mix", "routine-discharge"),
            {
                "resourceType": "Endpoint",
                "name": "mix-fn",
                "address": "https://host.example/function/mix-fn",
                "status": "suspended",
                "connectionType": {
                    "system": "http://terminology.hl7.org/CodeSystem/endpoint-connection-type",
                    "code": "hl7-fhir-rest",
                },
            },
            subscription("sub-mix", "*", "http://sink.example/mix"),
            {
                "resourceType": "OperationOutcome",
                "issue": [{"severity": "warning", "code": "partial"}],
            },
        ),
        "empty": bundle(),
        # structurally valid bundles that fail inbound validation
        "invalid_missing_patient": bundle(i500),
        "invalid_patient_only": bundle(los_patient),
        "invalid_two_patients": bundle(
            patient("pt-a", None, "male", "1970-01-01"),
            patient("pt-b", None, "female", "1971-01-01"),
            observation("ob-x", ICD_SYSTEM, "I500", subject="pt-a"),
        ),
        "invalid_dangling_subject": bundle(
            los_patient, observation("ob-d", ICD_SYSTEM, "I500", subject="pt-ghost")
        ),
        "invalid_missing_required_code": bundle(
            los_patient, observation("ob-z", ICD_SYSTEM, "Z991", subject="pt-los")
        ),
        "invalid_ecg_missing_feature": bundle(
            patient("pt-ecg", None, "female", "1972-03-14"),
            *[
                observation(f"ecg-{i:02d}", CODE_SYSTEM, f"ecg-f{i:02d}", Decimal(0), subject="pt-ecg")
                for i in range(1, 15)
            ],
        ),
    }
    return fixtures


# --- conformance cases -------------------------------------------------------


def conformance_cases() -> list[dict]:
    fhir = "application/fhir+json"

    def get(name: str, function: str, status: int, rtype: str, code: str | None = None, **extra) -> dict:
        case = {
            "name": name,
            "method": "GET",
            "function": function,
            "expect": {"status": status, "resource_type": rtype},
        }
        if code:
            case["expect"]["outcome_code"] = code
        case.update(extra)
        return case

    def post(name: str, function: str, status: int, rtype: str, code: str | None = None, **extra) -> dict:
        case = {
            "name": name,
            "method": "POST",
            "function": function,
            "content_type": extra.pop("content_type", fhir),
            "expect": {"status": status, "resource_type": rtype},
        }
        if code:
            case["expect"]["outcome_code"] = code
        case.update(extra)
        return case

    ok = "Bundle"
    oo = "OperationOutcome"
    cases = [
        # discovery
        get("get-arrhythmia-classifier", "arrhythmia-classifier", 200, "Endpoint"),
        get("get-los-predictor", "los-predictor", 200, "Endpoint"),
        get("get-discharge-planner", "discharge-planner", 200, "Endpoint"),
        get("get-pipeline-los-pathway", "los-pathway", 200, "Endpoint"),
        get("get-unknown-function", "no-such-function", 404, oo, "not-found"),
        # successful invocations
        post("post-arrhythmia-zeros", "arrhythmia-classifier", 200, ok, body_file="bundles/arrhythmia_zeros.json"),
        post("post-arrhythmia-ones", "arrhythmia-classifier", 200, ok, body_file="bundles/arrhythmia_ones.json"),
        post("post-arrhythmia-alternating", "arrhythmia-classifier", 200, ok, body_file="bundles/arrhythmia_alternating.json"),
        post("post-arrhythmia-pattern-b", "arrhythmia-classifier", 200, ok, body_file="bundles/arrhythmia_pattern_b.json"),
        post("post-los-male-i500", "los-predictor", 200, ok, body_file="bundles/los_male_i500.json"),
        post("post-los-female-i50", "los-predictor", 200, ok, body_file="bundles/los_female_i50.json"),
        post("post-los-comorbid", "los-predictor", 200, ok, body_file="bundles/los_comorbid.json"),
        post("post-los-unknown-gender", "los-predictor", 200, ok, body_file="bundles/los_unknown_gender.json"),
        post("post-los-extra-observations", "los-predictor", 200, ok, body_file="bundles/los_extra_observations.json"),
        post("post-los-with-subscription", "los-predictor", 200, ok, body_file="bundles/los_with_subscription.json"),
        post("post-discharge-high", "discharge-planner", 200, ok, body_file="bundles/discharge_high.json"),
        post("post-discharge-low", "discharge-planner", 200, ok, body_file="bundles/discharge_low.json"),
        post("post-pipeline-male-i500", "los-pathway", 200, ok, body_file="bundles/los_male_i500.json"),
        post("post-pipeline-comorbid", "los-pathway", 200, ok, body_file="bundles/los_comorbid.json"),
        # media type and size
        post("post-wrong-media-type-text", "los-predictor", 415, oo, "unsupported-media-type",
             content_type="text/plain", body_file="bundles/los_male_i500.json"),
        post("post-wrong-media-type-json", "los-predictor", 415, oo, "unsupported-media-type",
             content_type="application/json", body_file="bundles/los_male_i500.json"),
        post("post-body-too-large", "los-predictor", 413, oo, "body-too-large",
             body_size=MAX_BODY + 1),
        # malformed bodies
        post("post-malformed-json", "los-predictor", 400, oo, "malformed-json", body_raw="{"),
        post("post-empty-body", "los-predictor", 400, oo, "malformed-json", body_raw=""),
        post("post-unknown-resource-type", "los-predictor", 400, oo, "unknown-resource-type",
             body={"resourceType": "Procedure", "id": "x"}),
        post("post-numeric-resource-type", "los-predictor", 400, oo, "unknown-resource-type",
             body={"resourceType": 42}),
        post("post-not-a-bundle-patient", "los-predictor", 400, oo, "not-a-bundle",
             body=patient("pt-1", None, "male", "1970-01-01")),
        post("post-not-a-bundle-observation", "los-predictor", 400, oo, "not-a-bundle",
             body=observation("ob-1", ICD_SYSTEM, "I500")),
        post("post-wrong-bundle-type", "los-predictor", 400, oo, "schema-violation",
             body={"resourceType": "Bundle", "type": "searchset", "entry": []}),
        post("post-missing-resource-type", "los-predictor", 400, oo, "schema-violation",
             body={"type": "collection"}),
        post("post-two-values-observation", "los-predictor", 400, oo, "schema-violation",
             body=bundle(
                 patient("pt-1", None, "male", "1970-01-01"),
                 {**observation("ob-1", ICD_SYSTEM, "I500", True), "valueString": "also"},
             )),
        post("post-bad-birthdate", "los-predictor", 400, oo, "schema-violation",
             body=bundle(patient("pt-1", None, "male", "01-1970"),
                         observation("ob-1", ICD_SYSTEM, "I500"))),
        post("post-bad-gender", "los-predictor", 400, oo, "schema-violation",
             body=bundle(patient("pt-1", None, "neither", "1970-01-01"),
                         observation("ob-1", ICD_SYSTEM, "I500"))),
        # routing
        post("post-unknown-function", "no-such-function", 404, oo, "not-found",
             body_file="bundles/los_male_i500.json"),
        post("post-unknown-version-pin", "los-predictor", 404, oo, "not-found",
             body_file="bundles/los_male_i500.json",
             headers={"X-Function-Version": "9.9.9"}),
        # inbound validation
        post("post-empty-bundle", "los-predictor", 422, oo, "validation-failed",
             body_file="bundles/empty.json"),
        post("post-missing-patient", "los-predictor", 422, oo, "validation-failed",
             body_file="bundles/invalid_missing_patient.json"),
        post("post-missing-observation", "los-predictor", 422, oo, "validation-failed",
             body_file="bundles/invalid_patient_only.json"),
        post("post-two-patients", "los-predictor", 422, oo, "validation-failed",
             body_file="bundles/invalid_two_patients.json"),
        post("post-dangling-subject", "los-predictor", 422, oo, "validation-failed",
             body_file="bundles/invalid_dangling_subject.json"),
        post("post-future-birthdate", "los-predictor", 422, oo, "validation-failed",
             body=bundle(patient("pt-1", None, "male", "9999-01-01"),
                         observation("ob-1", ICD_SYSTEM, "I500", subject="pt-1"))),
        post("post-missing-required-code", "los-predictor", 422, oo, "validation-failed",
             body_file="bundles/invalid_missing_required_code.json"),
        post("post-ecg-missing-feature", "arrhythmia-classifier", 422, oo, "validation-failed",
             body_file="bundles/invalid_ecg_missing_feature.json"),
        post("post-bad-probability-careplan", "los-predictor", 422, oo, "validation-failed",
             body=bundle(
                 patient("pt-1", None, "male", "1970-01-01"),
                 observation("ob-1", ICD_SYSTEM, "I500", subject="pt-1"),
                 careplan("cp-1", "pt-1", "los-gt-10d", probability=1.5),
             )),
        post("post-pipeline-stage1-invalid", "los-pathway", 422, oo, "validation-failed",
             body_file="bundles/invalid_missing_required_code.json"),
        # handler contract
        post("post-ecg-nonbinary-value", "arrhythmia-classifier", 500, oo, "exception",
             body=bundle(
                 patient("pt-ecg", None, "female", "1972-03-14"),
                 *[observation(f"ecg-{i:02d}", CODE_SYSTEM, f"ecg-f{i:02d}",
                               Decimal("0.5") if i == 1 else Decimal(0), subject="pt-ecg")
                   for i in range(1, 16)],
             )),
    ]
    return cases


# --- profiles and deployment ------------------------------------------------


def profiles() -> dict[str, dict]:
    return {
        "constant": {
            "function": "arrhythmia-classifier",
            "version": "1.0.0",
            "service_time": 0.05,
            "phases": [{"start": 0.0, "duration": 10.0, "rate": 20.0}],
        },
        "burst": {
            "function": "arrhythmia-classifier",
            "version": "1.0.0",
            "service_time": 0.05,
            "phases": [
                {"start": 0.0, "duration": 5.0, "rate": 40.0},
                {"start": 5.0, "duration": 2.0, "rate": 300.0},
                {"start": 7.0, "duration": 5.0, "rate": 40.0},
            ],
        },
        "onoff": {
            "function": "arrhythmia-classifier",
            "version": "1.0.0",
            "service_time": 0.05,
            "phases": [
                {"start": 0.0, "duration": 5.0, "rate": 1.0},
                {"start": 40.0, "duration": 5.0, "rate": 1.0},
                {"start": 80.0, "duration": 5.0, "rate": 1.0},
            ],
        },
    }


def write_json(path: Path, document: dict | list) -> None:
    # Case files are plain JSON (the conformance runner re-reads numerics as
    # Decimal before canonicalising), so exact-float Decimals are fine here.
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False, default=float)
    path.write_text(text + "\n", encoding="utf-8")


def write_canonical(path: Path, wire: dict) -> None:
    # Round through the typed layer so each fixture is profile-checked and
    # stored in exactly canonical form.
    resource = parse_wire_object(wire)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(serialize_resource(resource))


def main() -> None:
    for name, wire in resource_fixtures().items():
        write_canonical(CORPUS / "resources" / f"{name}.json", wire)
    for name, wire in bundle_fixtures().items():
        write_canonical(CORPUS / "bundles" / f"{name}.json", wire)
    for index, case in enumerate(conformance_cases(), start=1):
        name = case["name"]
        write_json(CORPUS / "conformance" / f"{index:02d}-{name}.json", case)

    for document in demo_manifests():
        write_json(MANIFESTS / f"{document['name']}.json", document)
    write_json(MANIFESTS / "los-pathway.json", demo_pipeline())
    write_json(
        MANIFESTS / "config.json",
        {
            "gateway": {"bind_port": 8080},
            "scaler": {},
            "manifests": [
                "arrhythmia-classifier.json",
                "los-predictor.json",
                "discharge-planner.json",
                "los-pathway.json",
            ],
        },
    )
    for name, profile in profiles().items():
        write_json(MANIFESTS / "profiles" / f"{name}.json", profile)

    counts = {
        "resources": len(resource_fixtures()),
        "bundles": len(bundle_fixtures()),
        "conformance": len(conformance_cases()),
    }
    print(", ".join(f"{k}: {v}" for k, v in counts.items()))


if __name__ == "__main__":
    main()
