"""Direction-aware bundle validation rules."""

from datetime import date
from decimal import Decimal

from fhirfaas.codec import parse_resource
from fhirfaas.resources import (
    CODE_SYSTEM,
    ICD_SYSTEM,
    Bundle,
    CarePlan,
    CarePlanActivity,
    Coding,
    Observation,
    Patient,
)
from fhirfaas.validation import Direction, validate_bundle
from helpers import corpus_bytes

TODAY = date(2025, 1, 1)


def patient(pid="p1", birth=date(1960, 5, 1)):
    return Patient(id=pid, birth_date=birth)


def observation(oid="o1", code=Coding(ICD_SYSTEM, "I500"), subject="p1"):
    return Observation(id=oid, code=code, subject=subject)


def violations(bundle, direction, expected=(), today=TODAY):
    report = validate_bundle(bundle, direction, expected, today=today)
    return [str(v) for v in report.violations]


class TestInbound:
    def test_minimal_valid_bundle(self):
        report = validate_bundle(
            Bundle([patient(), observation()]), Direction.INBOUND, today=TODAY
        )
        assert report.valid

    def test_patient_required(self):
        assert any(
            "missing Patient" in v for v in violations(Bundle([observation()]), "inbound")
        )

    def test_exactly_one_patient(self):
        bundle = Bundle([patient("p1"), patient("p2"), observation()])
        assert any("ambiguous patient" in v for v in violations(bundle, "inbound"))

    def test_observation_required(self):
        assert any(
            "missing Observation" in v for v in violations(Bundle([patient()]), "inbound")
        )

    def test_subject_must_resolve_within_bundle(self):
        bundle = Bundle([patient("p1"), observation(subject="ghost")])
        assert any("dangling reference" in v for v in violations(bundle, "inbound"))

    def test_subjectless_observation_is_fine(self):
        bundle = Bundle([patient(), observation(subject=None)])
        assert validate_bundle(bundle, "inbound", today=TODAY).valid

    def test_future_birth_date_rejected(self):
        bundle = Bundle([patient(birth=date(2100, 1, 1)), observation()])
        assert any("future" in v for v in violations(bundle, "inbound"))

    def test_required_code_present_exactly(self):
        expected = [Coding(ICD_SYSTEM, "I500")]
        assert validate_bundle(
            Bundle([patient(), observation()]), "inbound", expected, today=TODAY
        ).valid

    def test_required_family_code_satisfied_by_prefix(self):
        expected = [Coding(ICD_SYSTEM, "I50")]
        assert validate_bundle(
            Bundle([patient(), observation(code=Coding(ICD_SYSTEM, "I509"))]),
            "inbound",
            expected,
            today=TODAY,
        ).valid

    def test_missing_required_code_reported(self):
        expected = [Coding(ICD_SYSTEM, "I50")]
        bundle = Bundle([patient(), observation(code=Coding(ICD_SYSTEM, "E119"))])
        found = violations(bundle, "inbound", expected)
        assert any("required input code" in v and "I50" in v for v in found)

    def test_required_code_must_match_system(self):
        expected = [Coding(CODE_SYSTEM, "I500")]
        bundle = Bundle([patient(), observation()])  # same code, ICD system
        assert any("required input code" in v for v in violations(bundle, "inbound", expected))

    def test_per_resource_invariants_collected_not_raised(self):
        bad_plan = CarePlan(
            id="cp",
            subject="p1",
            activity=[CarePlanActivity(code=Coding(CODE_SYSTEM, "x"), probability=Decimal("2"))],
        )
        bundle = Bundle([patient(), observation(), bad_plan])
        assert any("probability" in v for v in violations(bundle, "inbound"))


class TestOutbound:
    def careplan(self, subject="p1"):
        return CarePlan(
            id="cp", subject=subject, activity=[CarePlanActivity(code=Coding(CODE_SYSTEM, "x"))]
        )

    def test_minimal_valid_response(self):
        bundle = Bundle([patient(), self.careplan()])
        assert validate_bundle(bundle, Direction.OUTBOUND, today=TODAY).valid

    def test_careplan_required(self):
        assert any(
            "missing CarePlan" in v for v in violations(Bundle([patient()]), "outbound")
        )

    def test_echoed_patient_required(self):
        assert any(
            "missing echoed Patient" in v
            for v in violations(Bundle([self.careplan()]), "outbound")
        )

    def test_careplan_subject_must_resolve(self):
        bundle = Bundle([patient("p1"), self.careplan(subject="other")])
        assert any("dangling reference" in v for v in violations(bundle, "outbound"))

    def test_no_observation_requirement_outbound(self):
        bundle = Bundle([patient(), self.careplan()])
        assert validate_bundle(bundle, "outbound", today=TODAY).valid


def test_report_renders_as_operation_outcome():
    bundle = Bundle([observation()])
    report = validate_bundle(bundle, "inbound", today=TODAY)
    outcome = report.to_operation_outcome()
    assert outcome.code == "validation-failed"
    assert "missing Patient" in outcome.diagnostics


def test_corpus_invalid_bundles_fail_inbound():
    for name in (
        "invalid_missing_patient",
        "invalid_patient_only",
        "invalid_two_patients",
        "invalid_dangling_subject",
        "invalid_ecg_missing_feature",
    ):
        bundle = parse_resource(corpus_bytes(f"bundles/{name}.json"))
        if name == "invalid_ecg_missing_feature":
            expected = [Coding(CODE_SYSTEM, "ecg-f15")]
        else:
            expected = []
        assert not validate_bundle(bundle, "inbound", expected, today=TODAY).valid, name
