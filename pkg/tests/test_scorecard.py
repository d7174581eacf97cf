"""Logistic scorecard: featurization and the sigmoid against mpmath."""

from datetime import date
from decimal import Decimal
from random import Random

import mpmath
import pytest
from hypothesis import given, strategies as st

from fhirfaas.resources import CCI_SYSTEM, CODE_SYSTEM, ICD_SYSTEM, Coding, Gender, Observation, Patient
from fhirfaas.scorecard import (
    ArityMismatch,
    FeatureVector,
    MissingBirthDate,
    completed_years,
    los_featurize,
    los_predict,
    sigmoid,
    wrap_careplan,
)

mpmath.mp.dps = 50

ICD_PREFIXES = ["E11", "I10", "I50", "J44", "N18"]
CCI_PREFIXES = ["1HZ", "1IJ", "2HZ"]
AS_OF = date(2025, 1, 1)


def mp_sigmoid(x: float) -> float:
    return float(1 / (1 + mpmath.exp(-mpmath.mpf(x))))


def observation(code: str, system: str = ICD_SYSTEM) -> Observation:
    return Observation(id=f"ob-{code}", code=Coding(system, code))


@pytest.mark.parametrize(
    ("birth", "as_of", "years"),
    [
        (date(1960, 5, 1), date(2000, 4, 30), 39),
        (date(1960, 5, 1), date(2000, 5, 1), 40),
        (date(1960, 5, 1), date(2000, 5, 2), 40),
        (date(2000, 2, 29), date(2001, 2, 28), 0),
        (date(2000, 2, 29), date(2001, 3, 1), 1),
    ],
)
def test_completed_years_birthday_boundary(birth, as_of, years):
    assert completed_years(birth, as_of) == years


class TestFeaturize:
    def featurize(self, patient, observations):
        return los_featurize(patient, observations, ICD_PREFIXES, CCI_PREFIXES, AS_OF)

    def test_feature_names_sorted_and_complete(self):
        patient = Patient(id="p", gender=Gender.MALE, birth_date=date(1960, 5, 1))
        features = self.featurize(patient, [])
        assert features.names() == sorted(["age_over_40", "gender_male"] + ICD_PREFIXES + CCI_PREFIXES)

    def test_flags_for_known_record(self):
        patient = Patient(id="p", gender=Gender.MALE, birth_date=date(1960, 5, 1))
        features = self.featurize(
            patient, [observation("I500"), observation("1HZ55", CCI_SYSTEM)]
        )
        flags = dict(features.items)
        assert flags["age_over_40"] == 1
        assert flags["gender_male"] == 1
        assert flags["I50"] == 1
        assert flags["1HZ"] == 1
        assert flags["E11"] == flags["I10"] == flags["J44"] == flags["N18"] == 0
        assert flags["1IJ"] == flags["2HZ"] == 0

    def test_age_flag_uses_completed_years(self):
        young = Patient(id="p", birth_date=date(1985, 1, 2))  # 39 at AS_OF
        old = Patient(id="p", birth_date=date(1985, 1, 1))  # 40 at AS_OF: not > 40
        older = Patient(id="p", birth_date=date(1984, 1, 1))  # 41
        assert dict(self.featurize(young, []).items)["age_over_40"] == 0
        assert dict(self.featurize(old, []).items)["age_over_40"] == 0
        assert dict(self.featurize(older, []).items)["age_over_40"] == 1

    def test_gender_flag(self):
        base = dict(id="p", birth_date=date(1960, 1, 1))
        assert dict(self.featurize(Patient(gender=Gender.MALE, **base), []).items)["gender_male"] == 1
        assert dict(self.featurize(Patient(gender=Gender.FEMALE, **base), []).items)["gender_male"] == 0

    def test_unconfigured_codes_ignored(self):
        patient = Patient(id="p", birth_date=date(1960, 1, 1))
        features = self.featurize(patient, [observation("Z991"), observation("A000")])
        assert all(value == 0 for name, value in features.items if name not in ("age_over_40",))

    def test_missing_birth_date_raises(self):
        with pytest.raises(MissingBirthDate):
            self.featurize(Patient(id="p"), [observation("I500")])

    def test_observation_values_are_irrelevant(self):
        patient = Patient(id="p", birth_date=date(1960, 1, 1))
        with_value = observation("I500")
        without = Observation(id="x", code=Coding(ICD_SYSTEM, "I509"))
        a = self.featurize(patient, [with_value])
        b = self.featurize(patient, [without])
        assert a == b  # both set only the I50 family flag


class TestSigmoid:
    def test_against_mpmath_oracle(self):
        rng = Random(20250825)
        for _ in range(1000):
            x = rng.uniform(-40, 40)
            assert sigmoid(x) == pytest.approx(mp_sigmoid(x), abs=1e-12)

    def test_extremes_stay_finite_and_bounded(self):
        assert 0.0 <= sigmoid(-1e6) < 1e-300 or sigmoid(-1e6) == 0.0
        assert sigmoid(1e6) == 1.0 or sigmoid(1e6) < 1.0
        assert sigmoid(0.0) == 0.5

    def test_symmetry(self):
        for x in (0.1, 1.0, 3.7, 20.0):
            assert sigmoid(x) + sigmoid(-x) == pytest.approx(1.0, abs=1e-15)


class TestPredict:
    def test_closed_form_value(self):
        # bias -1.5 with active flags 0.8 + 0.1 + 0.9 => sigmoid(0.3)
        features = FeatureVector.from_flags({"a": 1, "b": 1, "c": 1, "d": 0})
        weights = [Decimal("0.8"), Decimal("0.1"), Decimal("0.9"), Decimal("0.5")]
        got = los_predict(features, weights, Decimal("-1.5"))
        assert got == pytest.approx(mp_sigmoid(0.3), abs=1e-15)

    def test_weight_arity_enforced(self):
        features = FeatureVector.from_flags({"a": 1, "b": 0})
        with pytest.raises(ArityMismatch):
            los_predict(features, [1.0])

    def test_accepts_plain_sequences(self):
        assert los_predict([1, 0, 1], [2, 3, -2], 0) == pytest.approx(sigmoid(0.0))

    def test_random_vectors_against_oracle(self):
        rng = Random(99)
        for _ in range(300):
            n = rng.randint(1, 12)
            values = [rng.randint(0, 1) for _ in range(n)]
            weights = [Decimal(rng.randint(-400, 400)).scaleb(-2) for _ in range(n)]
            bias = Decimal(rng.randint(-300, 300)).scaleb(-2)
            expected = mp_sigmoid(float(sum(w for v, w in zip(values, weights) if v) + bias))
            assert los_predict(values, weights, bias) == pytest.approx(expected, abs=1e-12)

    @given(
        st.lists(st.booleans(), min_size=1, max_size=10),
        st.integers(min_value=0, max_value=9),
        st.decimals(min_value=Decimal("0.01"), max_value=Decimal("5"), places=2),
        st.decimals(min_value=Decimal("-3"), max_value=Decimal("3"), places=2),
    )
    def test_positive_weight_flag_never_decreases_score(self, flags, position, weight, bias):
        position %= len(flags)
        values = [int(f) for f in flags]
        weights = [Decimal("0.3")] * len(values)
        weights[position] = weight
        low, high = list(values), list(values)
        low[position], high[position] = 0, 1
        assert los_predict(high, weights, bias) >= los_predict(low, weights, bias)


class TestWrapCareplan:
    def test_prediction_becomes_probability_extension(self):
        plan = wrap_careplan(0.25, Coding(CODE_SYSTEM, "los-gt-10d"), "p1", detail="risk")
        assert plan.subject == "p1"
        assert plan.activity[0].probability == Decimal("0.25")
        assert plan.activity[0].code.code == "los-gt-10d"

    def test_out_of_range_prediction_rejected(self):
        with pytest.raises(ValueError):
            wrap_careplan(1.5, Coding(CODE_SYSTEM, "x"), "p1")
        with pytest.raises(ValueError):
            wrap_careplan(-0.1, Coding(CODE_SYSTEM, "x"), "p1")

    def test_author_and_id_pass_through(self):
        plan = wrap_careplan(
            0.5, Coding(CODE_SYSTEM, "x"), "p1", author=("fn", "1.0.0"), plan_id="cp-1"
        )
        assert plan.author == ("fn", "1.0.0")
        assert plan.id == "cp-1"
