"""Wire codec: canonical JSON for the profiled resource types.

Canonical form, applied to every byte this package ever emits:

* object keys sorted lexicographically (codepoint order),
* no insignificant whitespace,
* strings UTF-8 with only the escapes JSON requires,
* decimals rendered without exponent notation, without trailing zeros and
  without a trailing ``.0`` on integral values; ``-0`` collapses to ``0``.

``serialize(parse(text))`` is a fixed point on canonical input, and
``parse(serialize(r))`` structurally equals ``r`` for any valid resource.
Parsing decodes JSON numbers with a decimal, not binary-float, reader so
re-serialization cannot drift.
"""

from __future__ import annotations

import json
from decimal import Decimal
from typing import Any

from .errors import InvariantViolation, MalformedJson
from .resources import Resource, parse_wire_object


def canonical_decimal(value: Decimal) -> str:
    if not value.is_finite():
        raise InvariantViolation("decimal", "only finite decimals are serializable")
    norm = value.normalize()
    if norm.as_tuple().exponent > 0:
        # normalize() turns 100 into 1E+2; quantize back to plain digits
        norm = norm.quantize(Decimal(1))
    text = format(norm, "f")
    return "0" if text == "-0" else text


def _emit(value: Any, parts: list[str]) -> None:
    if value is True:
        parts.append("true")
    elif value is False:
        parts.append("false")
    elif value is None:
        parts.append("null")
    elif isinstance(value, str):
        parts.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, Decimal):
        parts.append(canonical_decimal(value))
    elif isinstance(value, int):
        parts.append(str(value))
    elif isinstance(value, float):
        # Floats must be converted to Decimal before they reach the wire.
        raise InvariantViolation("number", f"binary float {value!r} has no canonical form")
    elif isinstance(value, dict):
        parts.append("{")
        for i, key in enumerate(sorted(value)):
            if not isinstance(key, str):
                raise InvariantViolation("object", f"non-string key {key!r}")
            if i:
                parts.append(",")
            parts.append(json.dumps(key, ensure_ascii=False))
            parts.append(":")
            _emit(value[key], parts)
        parts.append("}")
    elif isinstance(value, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(value):
            if i:
                parts.append(",")
            _emit(item, parts)
        parts.append("]")
    else:
        raise InvariantViolation("value", f"unserializable value of type {type(value).__name__}")


def canonical_json(value: Any) -> bytes:
    """Render a plain object tree (dict/list/str/int/Decimal/bool/None) to
    canonical JSON bytes."""
    parts: list[str] = []
    _emit(value, parts)
    return "".join(parts).encode("utf-8")


def parse_resource(text: str | bytes) -> Resource:
    """Parse a JSON document into a typed resource.

    Unknown fields are ignored. Raises MalformedJson for unparseable text,
    UnknownResourceType for off-profile resourceType values and
    SchemaViolation (with a field path) for shape errors.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedJson(f"invalid UTF-8: {exc}") from exc
    try:
        data = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise MalformedJson(str(exc)) from exc
    return parse_wire_object(data)


def serialize_resource(resource: Resource) -> bytes:
    """Serialize a resource to canonical JSON bytes.

    Structural invariants are checked first; an invalid resource raises
    InvariantViolation rather than producing broken wire output.
    """
    resource.check(resource.resource_type)
    return canonical_json(resource.to_wire())
