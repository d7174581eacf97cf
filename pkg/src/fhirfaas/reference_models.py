"""Built-in reference handlers and the demo deployment they ship with.

Three handlers cover the two taxonomy classes that have reference
implementations:

* ``decision-tree``: explanatory; walks the packaged 15-feature binary tree
  and emits the class as a CarePlan activity.
* ``los-scorecard``: predictive; vectorizes the record and applies a
  logistic scorecard. Weights are illustrative configuration, not a
  clinically trained model.
* ``code-threshold``: explanatory; turns an upstream probability into one
  of two recommendations, which makes it a natural second pipeline stage.

Environment and interaction classes are registrable but have no built-in
handler here; registering one requires a caller-supplied handler.
"""

from __future__ import annotations

import json
from datetime import date
from decimal import Decimal
from importlib import resources as importlib_resources
from typing import Callable

from .host import Handler, make_response
from .manifest import ManifestError, ModelManifest
from .resources import (
    CCI_SYSTEM,
    CODE_SYSTEM,
    ICD_SYSTEM,
    Bundle,
    CarePlan,
    CarePlanActivity,
    CarePlanStatus,
    Coding,
    Observation,
    Quantity,
)
from .scorecard import los_featurize, los_predict, wrap_careplan
from .tree import DecisionTree, decision_tree_classify

ECG_FEATURE_CODES = [f"ecg-f{i:02d}" for i in range(1, 16)]
LOS_OUTPUT_CODE = "los-gt-10d"

DEFAULT_ICD_PREFIXES = ["E11", "I10", "I50", "J44", "N18"]
DEFAULT_CCI_PREFIXES = ["1HZ", "1IJ", "2HZ"]
# Illustrative, non-clinical weights.
DEFAULT_SCORECARD = {
    "icd_prefixes": DEFAULT_ICD_PREFIXES,
    "cci_prefixes": DEFAULT_CCI_PREFIXES,
    "weights": {
        "age_over_40": 0.8,
        "gender_male": 0.1,
        "E11": 0.4,
        "I10": 0.2,
        "I50": 0.9,
        "J44": 0.5,
        "N18": 0.6,
        "1HZ": 0.3,
        "1IJ": 0.7,
        "2HZ": -0.2,
    },
    "bias": -1.5,
    "as_of": "2025-01-01",
}


def load_reference_tree() -> list[dict]:
    text = importlib_resources.files("fhirfaas.data").joinpath("arrhythmia_tree.json").read_text()
    return json.loads(text)


def _observation_binary_value(obs: Observation) -> int:
    if isinstance(obs.value, bool):
        return 1 if obs.value else 0
    if isinstance(obs.value, Quantity):
        if obs.value.value in (Decimal(0), Decimal(1)):
            return int(obs.value.value)
    raise ValueError(f"Observation {obs.id!r} value is not binary")


def make_decision_tree_handler(manifest: ModelManifest) -> Handler:
    nodes = manifest.config.get("nodes") or load_reference_tree()
    tree = DecisionTree.from_node_dicts(nodes, root=int(manifest.config.get("root", 0)))
    feature_codes = manifest.sorted_inputs()

    def handle(request: Bundle) -> Bundle:
        observations = request.resources_of(Observation)
        by_code = {obs.code: obs for obs in observations}
        features = []
        for coding in feature_codes:
            obs = by_code.get(coding)
            if obs is None:
                raise ValueError(f"missing feature observation {coding.code}")
            features.append(_observation_binary_value(obs))
        label = decision_tree_classify(tree, features)
        patient = request.first_patient()
        plan = CarePlan(
            id="",
            subject=patient.id if patient else "",
            activity=[
                CarePlanActivity(
                    code=Coding(CODE_SYSTEM, f"arrhythmia-class-{label}"),
                    detail=f"Decision tree classification: class {label} of 6",
                )
            ],
            status=CarePlanStatus.ACTIVE,
        )
        return make_response(request, [plan])

    return handle


def make_los_scorecard_handler(manifest: ModelManifest) -> Handler:
    config = {**DEFAULT_SCORECARD, **manifest.config}
    icd_prefixes = list(config["icd_prefixes"])
    cci_prefixes = list(config["cci_prefixes"])
    weights_by_name = {str(k): v for k, v in config["weights"].items()}
    bias = config["bias"]
    as_of = date.fromisoformat(config["as_of"])
    output_code = Coding(CODE_SYSTEM, str(config.get("output_code", LOS_OUTPUT_CODE)))
    detail = str(config.get("detail", "Probability that length of stay exceeds 10 days"))

    def handle(request: Bundle) -> Bundle:
        patient = request.first_patient()
        observations = request.resources_of(Observation)
        features = los_featurize(patient, observations, icd_prefixes, cci_prefixes, as_of)
        weights = [weights_by_name.get(name, 0) for name in features.names()]
        probability = los_predict(features, weights, bias)
        plan = wrap_careplan(probability, output_code, patient.id, detail=detail)
        return make_response(request, [plan])

    return handle


def make_code_threshold_handler(manifest: ModelManifest) -> Handler:
    config = manifest.config
    input_code = Coding(
        str(config.get("input_system", CODE_SYSTEM)), str(config["input_code"])
    )
    threshold = Decimal(str(config.get("threshold", "0.5")))
    high = CarePlanActivity(
        code=Coding(CODE_SYSTEM, str(config["high_code"])),
        detail=str(config.get("high_detail", "")),
    )
    low = CarePlanActivity(
        code=Coding(CODE_SYSTEM, str(config["low_code"])),
        detail=str(config.get("low_detail", "")),
    )

    def handle(request: Bundle) -> Bundle:
        value = None
        for obs in request.resources_of(Observation):
            if obs.code == input_code:
                if isinstance(obs.value, Quantity):
                    value = obs.value.value
                elif isinstance(obs.value, bool):
                    value = Decimal(1 if obs.value else 0)
                break
        if value is None:
            raise ValueError(f"missing input observation {input_code.code}")
        activity = high if value >= threshold else low
        patient = request.first_patient()
        plan = CarePlan(
            id="",
            subject=patient.id if patient else "",
            activity=[CarePlanActivity(code=activity.code, detail=activity.detail)],
            status=CarePlanStatus.ACTIVE,
        )
        return make_response(request, [plan])

    return handle


BUILTIN_HANDLERS: dict[str, Callable[[ModelManifest], Handler]] = {
    "decision-tree": make_decision_tree_handler,
    "los-scorecard": make_los_scorecard_handler,
    "code-threshold": make_code_threshold_handler,
}


def build_handler(manifest: ModelManifest) -> Handler:
    """Resolve the manifest's handler name to a callable."""
    if not manifest.handler:
        raise ManifestError(f"manifest {manifest.name!r} names no handler")
    factory = BUILTIN_HANDLERS.get(manifest.handler)
    if factory is None:
        raise ManifestError(f"unknown built-in handler {manifest.handler!r}")
    try:
        return factory(manifest)
    except (KeyError, ValueError) as exc:
        raise ManifestError(f"handler config for {manifest.name!r} is invalid: {exc}") from exc


def demo_manifests() -> list[dict]:
    """Manifest documents for the shipped demo deployment (3 functions)."""
    return [
        {
            "name": "arrhythmia-classifier",
            "version": "1.0.0",
            "taxonomy": "explanatory",
            "handler": "decision-tree",
            "input_codes": [{"system": CODE_SYSTEM, "code": c} for c in ECG_FEATURE_CODES],
            "output_codes": [
                {"system": CODE_SYSTEM, "code": f"arrhythmia-class-{k}"} for k in range(1, 7)
            ],
            "memory_budget_bytes": 64 * 2**20,
            "description": "Classifies six rhythm classes from 15 binary waveform features.",
        },
        {
            "name": "los-predictor",
            "version": "1.0.0",
            "taxonomy": "predictive",
            "handler": "los-scorecard",
            "input_codes": [{"system": ICD_SYSTEM, "code": "I50"}],
            "output_codes": [{"system": CODE_SYSTEM, "code": LOS_OUTPUT_CODE}],
            "memory_budget_bytes": 64 * 2**20,
            "description": (
                "Probability of a stay exceeding 10 days for heart-failure admissions; "
                "illustrative scorecard weights, not clinically derived."
            ),
            "config": DEFAULT_SCORECARD,
        },
        {
            "name": "discharge-planner",
            "version": "1.0.0",
            "taxonomy": "explanatory",
            "handler": "code-threshold",
            "input_codes": [{"system": CODE_SYSTEM, "code": LOS_OUTPUT_CODE}],
            "output_codes": [
                {"system": CODE_SYSTEM, "code": "discharge-planning-consult"},
                {"system": CODE_SYSTEM, "code": "routine-discharge"},
            ],
            "memory_budget_bytes": 32 * 2**20,
            "description": "Recommends a discharge-planning consult when the stay risk is high.",
            "config": {
                "input_code": LOS_OUTPUT_CODE,
                "threshold": 0.5,
                "high_code": "discharge-planning-consult",
                "high_detail": "Arrange discharge planning consult",
                "low_code": "routine-discharge",
                "low_detail": "Routine discharge pathway",
            },
        },
    ]


def demo_pipeline() -> dict:
    """Manifest document for the shipped demo pipeline."""
    return {
        "name": "los-pathway",
        "version": "1.0.0",
        "pipeline": ["los-predictor", "discharge-planner"],
        "description": "Stay-risk scoring chained into a discharge recommendation.",
    }


# Systems referenced by the demo deployment, re-exported for fixture builders.
DEMO_SYSTEMS = {"local": CODE_SYSTEM, "icd": ICD_SYSTEM, "cci": CCI_SYSTEM}
