"""Canonical JSON encoder/decoder behavior."""

from decimal import Decimal
from random import Random

import pytest

from fhirfaas.codec import canonical_decimal, canonical_json, parse_resource, serialize_resource
from fhirfaas.errors import InvariantViolation, MalformedJson
from helpers import corpus_files, random_bundle


def test_keys_sorted_and_whitespace_free():
    value = {"b": 1, "a": [True, None, "x"], "c": {"z": 2, "y": 3}}
    assert canonical_json(value) == b'{"a":[true,null,"x"],"b":1,"c":{"y":3,"z":2}}'


@pytest.mark.parametrize(
    ("value", "expected"),
    [
        (Decimal("1.50"), "1.5"),
        (Decimal("1.0"), "1"),
        (Decimal("100"), "100"),
        (Decimal("1E+2"), "100"),
        (Decimal("-0"), "0"),
        (Decimal("-0.0"), "0"),
        (Decimal("0.000001"), "0.000001"),
        (Decimal("1E-6"), "0.000001"),
        (Decimal("-2.5"), "-2.5"),
        (Decimal("0"), "0"),
    ],
)
def test_decimal_rendering(value, expected):
    assert canonical_decimal(value) == expected
    assert canonical_json(value) == expected.encode()


def test_decimal_rendering_is_stable_under_reparse():
    rng = Random(7)
    for _ in range(2000):
        value = Decimal(rng.randint(-(10**9), 10**9)).scaleb(rng.randint(-9, 3))
        text = canonical_decimal(value)
        again = Decimal(text)
        assert again == value
        assert canonical_decimal(again) == text


def test_non_finite_decimal_rejected():
    with pytest.raises(InvariantViolation):
        canonical_json(Decimal("NaN"))
    with pytest.raises(InvariantViolation):
        canonical_json(Decimal("Infinity"))


def test_binary_floats_rejected():
    with pytest.raises(InvariantViolation):
        canonical_json({"value": 0.5})
    with pytest.raises(InvariantViolation):
        canonical_json([1.0])


def test_non_string_keys_and_foreign_types_rejected():
    with pytest.raises(InvariantViolation):
        canonical_json({1: "x"})
    with pytest.raises(InvariantViolation):
        canonical_json({"x": object()})


def test_unicode_passes_through_unescaped():
    assert canonical_json("Åsa ☃ 漢") == '"Åsa ☃ 漢"'.encode("utf-8")
    assert canonical_json("tab\there\nnewline") == b'"tab\\there\\nnewline"'


def test_parse_rejects_malformed_input():
    with pytest.raises(MalformedJson):
        parse_resource(b"{")
    with pytest.raises(MalformedJson):
        parse_resource(b"")
    with pytest.raises(MalformedJson):
        parse_resource(b"\xff\xfe")


def test_numbers_parse_as_decimal_not_float():
    resource = parse_resource(
        b'{"resourceType":"Observation","id":"o","code":{"coding":[{"system":"s","code":"c"}]},'
        b'"valueQuantity":{"value":0.1}}'
    )
    assert resource.value.value == Decimal("0.1")
    assert isinstance(resource.value.value, Decimal)


def test_corpus_files_are_canonical_fixed_points():
    for path in corpus_files():
        original = path.read_bytes()
        resource = parse_resource(original)
        assert serialize_resource(resource) == original, path.name
        assert parse_resource(serialize_resource(resource)) == resource, path.name


def test_generated_bundles_round_trip():
    rng = Random(1234)
    for i in range(200):
        bundle = random_bundle(rng)
        wire = serialize_resource(bundle)
        reparsed = parse_resource(wire)
        assert reparsed == bundle, f"generation {i}"
        assert serialize_resource(reparsed) == wire, f"generation {i}"


def test_object_keys_sorted_in_serialized_output():
    import json

    rng = Random(99)
    wire = serialize_resource(random_bundle(rng))

    def walk(node):
        if isinstance(node, list):
            if all(isinstance(item, tuple) for item in node):  # object
                keys = [k for k, _ in node]
                assert keys == sorted(keys)
                for _, child in node:
                    walk(child)
            else:
                for child in node:
                    walk(child)

    walk(json.loads(wire, object_pairs_hook=list, parse_float=Decimal))
