"""Stateless function host.

A handler is a pure Bundle -> Bundle function. The host owns everything
around it: it stamps the author onto CarePlans, assigns ids the handler
left blank, and verifies the handler honored the output contract (an
outbound-valid bundle echoing the request's Patient). In deterministic
mode generated ids derive from a hash of (name, version, request bytes),
so equal requests produce byte-identical responses.
"""

from __future__ import annotations

import hashlib
import uuid
from typing import Callable

from .codec import serialize_resource
from .manifest import ModelManifest
from .resources import Bundle, CarePlan
from .validation import Direction, validate_bundle

Handler = Callable[[Bundle], Bundle]


class HandlerFault(Exception):
    """The handler raised; surfaces as OperationOutcome code 'exception'."""


class ContractBreach(Exception):
    """The handler returned an outbound-invalid bundle ('invalid-output')."""


def request_seed(name: str, version: str, request_bytes: bytes) -> str:
    digest = hashlib.sha256()
    digest.update(name.encode())
    digest.update(b"\x00")
    digest.update(version.encode())
    digest.update(b"\x00")
    digest.update(request_bytes)
    return digest.hexdigest()


def make_response(request: Bundle, careplans: list[CarePlan]) -> Bundle:
    """Assemble the standard response shape: echoed Patient, then CarePlans."""
    patient = request.first_patient()
    entries: list = [patient] if patient is not None else []
    entries.extend(careplans)
    return Bundle(entries=entries)


def invoke_model(
    manifest: ModelManifest,
    handler: Handler,
    request: Bundle,
    deterministic: bool = False,
    *,
    request_bytes: bytes | None = None,
) -> Bundle:
    """Run a handler under the stateless function contract.

    The request must already have passed inbound validation against the
    manifest's input codes. Raises HandlerFault if the handler raises and
    ContractBreach if its output fails the outbound rules or does not echo
    the request's Patient verbatim.
    """
    if request_bytes is None:
        request_bytes = serialize_resource(request)
    seed = request_seed(manifest.name, manifest.version, request_bytes)

    try:
        response = handler(request)
    except Exception as exc:
        raise HandlerFault(f"{manifest.name}@{manifest.version}: {exc}") from exc
    if not isinstance(response, Bundle):
        raise ContractBreach(f"handler returned {type(response).__name__}, expected Bundle")

    counter = 0
    for entry in response.entries:
        if isinstance(entry, CarePlan):
            entry.author = (manifest.name, manifest.version)
            if not entry.id:
                if deterministic:
                    entry.id = f"cp-{seed[:12]}-{counter}"
                else:
                    entry.id = f"cp-{uuid.uuid4().hex[:12]}-{counter}"
                counter += 1

    report = validate_bundle(response, Direction.OUTBOUND)
    if not report.valid:
        raise ContractBreach("; ".join(str(v) for v in report.violations))
    request_patient = request.first_patient()
    response_patient = response.first_patient()
    if request_patient is not None and response_patient != request_patient:
        raise ContractBreach("response does not echo the request's Patient resource")
    return response
