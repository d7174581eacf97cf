"""Stateless clinical model functions behind a FHIR-speaking gateway.

The package is organized in four layers:

* wire format — :mod:`fhirfaas.resources`, :mod:`fhirfaas.codec`,
  :mod:`fhirfaas.validation`
* model host — :mod:`fhirfaas.manifest`, :mod:`fhirfaas.host`,
  :mod:`fhirfaas.tree`, :mod:`fhirfaas.scorecard`,
  :mod:`fhirfaas.reference_models`
* runtime — :mod:`fhirfaas.scaler`, :mod:`fhirfaas.registry`,
  :mod:`fhirfaas.pipeline`, :mod:`fhirfaas.subscriptions`,
  :mod:`fhirfaas.gateway`, :mod:`fhirfaas.httpserver`
* operations — :mod:`fhirfaas.cli`, :mod:`fhirfaas.loadgen`
"""

from .clock import Clock, LogicalClock, SystemClock
from .codec import canonical_json, parse_resource, serialize_resource
from .errors import (
    FhirError,
    InvariantViolation,
    MalformedJson,
    SchemaViolation,
    UnknownResourceType,
)
from .gateway import Gateway, GatewayConfig, build_gateway, describe_endpoint, load_config_file
from .host import ContractBreach, HandlerFault, invoke_model
from .manifest import ModelManifest, TaxonomyClass, manifest_from_dict
from .pipeline import PipelineSpec, pipeline_from_dict, rewrap, run_pipeline, validate_pipeline
from .registry import Registry, RegistryEntry
from .resources import (
    Bundle,
    CarePlan,
    CarePlanActivity,
    Coding,
    Endpoint,
    Observation,
    OperationOutcome,
    Patient,
    Quantity,
    Subscription,
)
from .scaler import InstancePool, Scaler, ScalerConfig
from .subscriptions import Dispatcher
from .validation import Direction, ValidationReport, validate_bundle

__version__ = "0.1.0"

__all__ = [
    "Bundle",
    "CarePlan",
    "CarePlanActivity",
    "Clock",
    "Coding",
    "ContractBreach",
    "Direction",
    "Dispatcher",
    "Endpoint",
    "FhirError",
    "Gateway",
    "GatewayConfig",
    "HandlerFault",
    "InstancePool",
    "InvariantViolation",
    "LogicalClock",
    "MalformedJson",
    "ModelManifest",
    "Observation",
    "OperationOutcome",
    "Patient",
    "PipelineSpec",
    "Quantity",
    "Registry",
    "RegistryEntry",
    "Scaler",
    "ScalerConfig",
    "SchemaViolation",
    "Subscription",
    "SystemClock",
    "TaxonomyClass",
    "UnknownResourceType",
    "ValidationReport",
    "build_gateway",
    "canonical_json",
    "describe_endpoint",
    "invoke_model",
    "load_config_file",
    "manifest_from_dict",
    "parse_resource",
    "pipeline_from_dict",
    "rewrap",
    "run_pipeline",
    "serialize_resource",
    "validate_bundle",
    "validate_pipeline",
]
