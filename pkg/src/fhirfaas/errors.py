"""Exception types shared by the wire codec and resource model."""


class FhirError(Exception):
    """Base class for protocol-level failures."""


class MalformedJson(FhirError):
    """The request body is not parseable JSON."""


class UnknownResourceType(FhirError):
    """resourceType is present but outside the profiled subset."""

    def __init__(self, resource_type: str, path: str = ""):
        self.resource_type = resource_type
        self.path = path
        super().__init__(f"unsupported resourceType {resource_type!r}" + (f" at {path}" if path else ""))


class SchemaViolation(FhirError):
    """A required field is missing or has the wrong shape.

    ``path`` points at the offending element, e.g. ``Bundle.entry[2].Observation.code``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class InvariantViolation(FhirError):
    """A caller constructed a resource that breaks its own invariants."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
