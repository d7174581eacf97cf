"""Logistic scorecard over binarized discharge-abstract features.

Feature construction follows the coded-record convention: demographics
become ``age_over_40`` (strictly over 40 completed years) and
``gender_male``; each configured 3-character ICD or CCI prefix becomes a
flag that is 1 iff some observation code starts with that prefix. The
score is a plain logistic unit over those flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from decimal import Decimal
from typing import Iterable, Sequence

from .resources import CarePlan, CarePlanActivity, CarePlanStatus, Coding, Observation, Patient, as_decimal

AGE_FEATURE = "age_over_40"
GENDER_FEATURE = "gender_male"


class MissingBirthDate(ValueError):
    """Patient lacks the birthDate required for the age feature."""


class ArityMismatch(ValueError):
    """Weight vector length differs from the feature count."""


@dataclass(frozen=True)
class FeatureVector:
    """Binary features keyed by name, ordered lexicographically by name."""

    items: tuple[tuple[str, int], ...]

    @classmethod
    def from_flags(cls, flags: dict[str, int]) -> "FeatureVector":
        for name, value in flags.items():
            if value not in (0, 1):
                raise ValueError(f"feature {name!r} is {value!r}, expected 0 or 1")
        return cls(items=tuple(sorted(flags.items())))

    def names(self) -> list[str]:
        return [name for name, _ in self.items]

    def values(self) -> list[int]:
        return [value for _, value in self.items]

    def __len__(self) -> int:
        return len(self.items)


def completed_years(birth_date: date, as_of: date) -> int:
    """Whole years completed between birth_date and as_of."""
    years = as_of.year - birth_date.year
    if (as_of.month, as_of.day) < (birth_date.month, birth_date.day):
        years -= 1
    return years


def los_featurize(
    patient: Patient,
    observations: Iterable[Observation],
    icd_prefixes: Sequence[str],
    cci_prefixes: Sequence[str],
    as_of: date,
) -> FeatureVector:
    """Vectorize a patient record into ordered binary features.

    A prefix flag is 1 iff any observation code's first 3 characters equal
    that prefix; observation values and order are irrelevant. Codes not
    covered by a configured prefix are ignored.
    """
    if patient.birth_date is None:
        raise MissingBirthDate(f"Patient {patient.id!r} has no birthDate")
    flags: dict[str, int] = {
        AGE_FEATURE: 1 if completed_years(patient.birth_date, as_of) > 40 else 0,
        GENDER_FEATURE: 1 if patient.gender.value == "male" else 0,
    }
    prefixes = list(icd_prefixes) + list(cci_prefixes)
    for prefix in prefixes:
        flags[prefix] = 0
    seen = {obs.code.code[:3] for obs in observations}
    for prefix in prefixes:
        if prefix in seen:
            flags[prefix] = 1
    return FeatureVector.from_flags(flags)


def sigmoid(x: float) -> float:
    # Two-branch form avoids overflow for large negative inputs.
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def los_predict(
    features: FeatureVector | Sequence[int],
    weights: Sequence[Decimal | float | int | str],
    bias: Decimal | float | int | str = 0,
) -> float:
    """Logistic score sigma(bias + sum(w_i * f_i)), strictly inside (0, 1)."""
    values = features.values() if isinstance(features, FeatureVector) else list(features)
    if len(values) != len(weights):
        raise ArityMismatch(f"{len(weights)} weights for {len(values)} features")
    total = float(as_decimal(bias))
    for value, weight in zip(values, weights):
        if value not in (0, 1):
            raise ValueError(f"feature value {value!r} outside {{0,1}}")
        total += value * float(as_decimal(weight))
    return sigmoid(total)


def wrap_careplan(
    prediction: float | Decimal,
    label: Coding,
    patient_id: str,
    author: tuple[str, str] | None = None,
    detail: str = "",
    plan_id: str = "",
) -> CarePlan:
    """Package a probability as a single-activity CarePlan recommendation."""
    probability = as_decimal(prediction)
    if not (0 <= probability <= 1):
        raise ValueError(f"prediction {probability} outside [0,1]")
    activity = CarePlanActivity(code=label, detail=detail, probability=probability)
    return CarePlan(
        id=plan_id,
        subject=patient_id,
        activity=[activity],
        status=CarePlanStatus.ACTIVE,
        author=author,
    )
