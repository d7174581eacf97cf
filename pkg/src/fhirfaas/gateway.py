"""Transport-independent HTTP semantics: routing, status codes, bodies.

The gateway owns the protocol surface — which request maps to which
registry/scaler/host operation and which OperationOutcome comes back when
something goes wrong — without binding to a socket. The stdlib server in
:mod:`fhirfaas.httpserver` and the in-process test harnesses both drive the
same handlers, so protocol behavior is tested without networking.

Every response body is exactly one of Bundle, Endpoint or OperationOutcome
(the plain-text ``/metrics`` page is the single deliberate exception).
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field

from .clock import Clock, LogicalClock, SystemClock
from .codec import canonical_json, parse_resource, serialize_resource
from .errors import InvariantViolation, MalformedJson, SchemaViolation, UnknownResourceType
from .host import ContractBreach, HandlerFault, invoke_model, request_seed
from .manifest import ModelManifest
from .pipeline import merge_final, rewrap
from .registry import (
    BudgetExceeded,
    DuplicateVersion,
    EntryKind,
    EntryState,
    InvalidManifest,
    NotFound,
    Registry,
    RegistryEntry,
)
from .resources import (
    FHIR_JSON_MIME,
    Bundle,
    Coding,
    Endpoint,
    EndpointStatus,
    Severity,
    is_absolute_url,
    make_operation_outcome,
)
from .scaler import Enqueued, InstancePool, Rejected, Scaler, ScalerConfig
from .subscriptions import Dispatcher
from .validation import Direction, validate_bundle

DEFAULT_PORT = 8080
DEFAULT_MAX_BODY = 1 * 2**20  # 1 MiB

PORT_ENV = "FHIRFAAS_PORT"
BASE_URL_ENV = "FHIRFAAS_BASE_URL"


class ConfigError(ValueError):
    """The gateway or deployment configuration is invalid."""


@dataclass(frozen=True)
class GatewayConfig:
    bind_port: int = DEFAULT_PORT
    base_url: str = ""
    max_body_bytes: int = DEFAULT_MAX_BODY
    request_timeout: float = 10.0
    deterministic_mode: bool = False

    def validate(self) -> None:
        # Port 0 asks the OS for an ephemeral port; the server folds the
        # real port back into the config once the socket is bound.
        if not 0 <= self.bind_port <= 65535:
            raise ConfigError(f"bind_port {self.bind_port} outside [0, 65535]")
        if self.max_body_bytes <= 0:
            raise ConfigError("max_body_bytes must be positive")
        if self.request_timeout <= 0:
            raise ConfigError("request_timeout must be positive")
        if self.base_url and not is_absolute_url(self.base_url):
            raise ConfigError(f"base_url {self.base_url!r} is not an absolute http(s) URL")

    @property
    def resolved_base_url(self) -> str:
        return self.base_url.rstrip("/") if self.base_url else f"http://localhost:{self.bind_port}"


@dataclass
class HttpReply:
    status: int
    body: bytes
    media_type: str = FHIR_JSON_MIME
    headers: dict[str, str] = field(default_factory=dict)


class _HttpError(Exception):
    """Internal control flow: unwinds to an OperationOutcome reply."""

    def __init__(self, status: int, code: str, diagnostics: str):
        super().__init__(diagnostics)
        self.status = status
        self.code = code
        self.diagnostics = diagnostics


def describe_endpoint(
    manifest: ModelManifest,
    base_url: str,
    status: EndpointStatus = EndpointStatus.ACTIVE,
) -> Endpoint:
    """Deterministic manifest → Endpoint mapping used by GET and the index.

    Inputs are advertised as payloadType codings; outputs, which plain
    FHIR endpoints cannot carry, ride in ``X-Output-Code`` header lines.
    """
    return _build_endpoint(
        name=manifest.name,
        version=manifest.version,
        inputs=manifest.sorted_inputs(),
        outputs=manifest.sorted_outputs(),
        base_url=base_url,
        status=status,
    )


def _build_endpoint(
    name: str,
    version: str,
    inputs: list[Coding],
    outputs: list[Coding],
    base_url: str,
    status: EndpointStatus,
) -> Endpoint:
    header = [f"X-Output-Code: {c.system}|{c.code}" for c in sorted(outputs)]
    header.append(f"X-Function-Version: {version}")
    return Endpoint(
        name=name,
        address=f"{base_url.rstrip('/')}/function/{name}",
        status=status,
        header=header,
        payload_type=list(inputs),
        payload_mime_type=[FHIR_JSON_MIME],
    )


class Gateway:
    """Protocol core shared by the real server and in-process harnesses."""

    def __init__(
        self,
        config: GatewayConfig | None = None,
        *,
        registry: Registry | None = None,
        scaler: Scaler | None = None,
        dispatcher: Dispatcher | None = None,
        clock: Clock | None = None,
        snapshot_path: str | None = None,
    ):
        self.config = config or GatewayConfig()
        self.config.validate()
        self.clock = clock or SystemClock()
        self.registry = registry or Registry(now=self.clock.now)
        self.scaler = scaler or Scaler()
        self.dispatcher = dispatcher or Dispatcher(clock=self.clock)
        self.snapshot_path = snapshot_path
        # One condition guards every pool transition; queued requests wait
        # on it for the (pool, token) -> instance handoff.
        self._pools = threading.Condition()
        self._handoff: dict[tuple[int, int], str] = {}

    # -- discovery ---------------------------------------------------------

    def handle_get_function(self, name: str, version: str | None = None) -> HttpReply:
        if version is None:
            entry = self.registry.resolve(name)
            if entry is None:
                return self._outcome(404, "not-found", f"no active function named {name!r}")
            return self._endpoint_reply(entry, EndpointStatus.ACTIVE, 200)
        entry = self.registry.get(name, version)
        if entry is None or entry.state is EntryState.RETIRED:
            return self._outcome(404, "not-found", f"{name}@{version} is not available")
        status = (
            EndpointStatus.ACTIVE if entry.state is EntryState.ACTIVE else EndpointStatus.SUSPENDED
        )
        return self._endpoint_reply(entry, status, 200)

    def handle_index(self) -> HttpReply:
        endpoints = [self._endpoint_for(entry, EndpointStatus.ACTIVE) for entry in self.registry.active_entries()]
        bundle = Bundle(entries=endpoints)
        return HttpReply(200, serialize_resource(bundle))

    def _endpoint_reply(self, entry: RegistryEntry, status: EndpointStatus, http_status: int) -> HttpReply:
        endpoint = self._endpoint_for(entry, status)
        return HttpReply(http_status, serialize_resource(endpoint))

    def _endpoint_for(self, entry: RegistryEntry, status: EndpointStatus) -> Endpoint:
        base = self.config.resolved_base_url
        if entry.kind is EntryKind.FUNCTION:
            assert entry.manifest is not None
            return describe_endpoint(entry.manifest, base, status)
        assert entry.pipeline is not None
        inputs: list[Coding] = []
        outputs: set[Coding] = set()
        for index, stage in enumerate(entry.pipeline.stages):
            stage_entry = self.registry.resolve(stage.name, stage.version)
            if stage_entry is None or stage_entry.manifest is None:
                continue
            if index == 0:
                inputs = stage_entry.manifest.sorted_inputs()
            outputs |= stage_entry.manifest.output_codes
        return _build_endpoint(
            name=entry.name,
            version=entry.version,
            inputs=inputs,
            outputs=sorted(outputs),
            base_url=base,
            status=status,
        )

    # -- invocation ----------------------------------------------------------

    def handle_post_function(
        self,
        name: str,
        body: bytes,
        content_type: str,
        headers: dict[str, str] | None = None,
    ) -> HttpReply:
        headers = {k.lower(): v for k, v in (headers or {}).items()}
        media_type = content_type.partition(";")[0].strip().lower()
        if media_type != FHIR_JSON_MIME:
            return self._outcome(
                415,
                "unsupported-media-type",
                f"POST requires Content-Type {FHIR_JSON_MIME}, got {content_type!r}",
            )
        if len(body) > self.config.max_body_bytes:
            return self._outcome(
                413,
                "body-too-large",
                f"body of {len(body)} bytes exceeds the {self.config.max_body_bytes}-byte limit",
            )
        pin = headers.get("x-function-version")
        try:
            entry = self.registry.acquire(name, pin)
        except NotFound as exc:
            return self._outcome(404, "not-found", str(exc))
        try:
            return self._post_acquired(entry, body)
        finally:
            self.registry.release(entry)

    def _post_acquired(self, entry: RegistryEntry, body: bytes) -> HttpReply:
        try:
            bundle = self._parse_inbound(body)
            if self.config.deterministic_mode:
                request_id = request_seed(entry.name, entry.version, body)[:16]
            else:
                request_id = uuid.uuid4().hex[:16]
            if entry.kind is EntryKind.FUNCTION:
                response = self._run_function(entry, bundle, body)
            else:
                response = self._run_pipeline(entry, bundle, body)
        except _HttpError as err:
            return self._outcome(err.status, err.code, err.diagnostics)
        response_bytes = serialize_resource(response)
        reply = HttpReply(200, response_bytes, headers={"X-Request-Id": request_id})
        # Commit point: dispatch is queued only after the reply exists, so
        # slow or failing subscription sinks never delay the caller.
        self.dispatcher.submit(request_id, bundle, response)
        return reply

    def _parse_inbound(self, body: bytes) -> Bundle:
        try:
            resource = parse_resource(body)
        except MalformedJson as exc:
            raise _HttpError(400, "malformed-json", str(exc))
        except UnknownResourceType as exc:
            raise _HttpError(400, "unknown-resource-type", str(exc))
        except (SchemaViolation, InvariantViolation) as exc:
            raise _HttpError(400, "schema-violation", str(exc))
        if not isinstance(resource, Bundle):
            raise _HttpError(
                400, "not-a-bundle", f"POST body must be a Bundle, got {resource.resource_type}"
            )
        return resource

    def _run_function(self, entry: RegistryEntry, bundle: Bundle, body: bytes) -> Bundle:
        assert entry.manifest is not None and entry.handler is not None
        report = validate_bundle(bundle, Direction.INBOUND, entry.manifest.input_codes)
        if not report.valid:
            raise _HttpError(
                422, "validation-failed", "; ".join(str(v) for v in report.violations)
            )
        return self._admit_and_invoke(entry, bundle, body)

    def _run_pipeline(self, entry: RegistryEntry, bundle: Bundle, body: bytes) -> Bundle:
        assert entry.pipeline is not None
        try:
            stages = self.registry.acquire_stages(entry)
        except NotFound as exc:
            raise _HttpError(404, "not-found", str(exc))
        try:
            responses: list[Bundle] = []
            for index, stage in enumerate(stages, start=1):
                assert stage.manifest is not None
                if index == 1:
                    stage_bundle, stage_bytes = bundle, body
                else:
                    stage_bundle = rewrap(bundle, responses)
                    stage_bytes = canonical_json(stage_bundle.to_wire())
                report = validate_bundle(
                    stage_bundle, Direction.INBOUND, stage.manifest.input_codes
                )
                if not report.valid:
                    raise _HttpError(
                        422,
                        "validation-failed",
                        f"stage {index}: " + "; ".join(str(v) for v in report.violations),
                    )
                try:
                    responses.append(self._admit_and_invoke(stage, stage_bundle, stage_bytes))
                except _HttpError as err:
                    raise _HttpError(err.status, err.code, f"stage {index}: {err.diagnostics}")
            return merge_final(bundle, responses)
        finally:
            for stage in stages:
                self.registry.release(stage)

    def _admit_and_invoke(self, entry: RegistryEntry, bundle: Bundle, request_bytes: bytes) -> Bundle:
        assert entry.manifest is not None and entry.handler is not None
        overrides = entry.manifest.scaler_overrides
        pool = self.scaler.pool_for(entry.name, entry.version, overrides)
        with self._pools:
            verdict = pool.admit(self.clock.now())
        if isinstance(verdict, Rejected):
            raise _HttpError(
                503, "overloaded", f"{entry.name}@{entry.version}: all instances busy, queue full"
            )
        if isinstance(verdict, Enqueued):
            instance_id = self._await_assignment(pool, verdict.token, entry)
            added_latency = 0.0
        else:
            instance_id = verdict.instance_id
            added_latency = verdict.added_latency
        if added_latency:
            self.clock.sleep(added_latency)
        try:
            try:
                return invoke_model(
                    entry.manifest,
                    entry.handler,
                    bundle,
                    self.config.deterministic_mode,
                    request_bytes=request_bytes,
                )
            except HandlerFault as exc:
                raise _HttpError(500, "exception", str(exc))
            except ContractBreach as exc:
                raise _HttpError(500, "invalid-output", str(exc))
        finally:
            with self._pools:
                assignment = pool.complete(instance_id, self.clock.now())
                if assignment is not None:
                    self._handoff[(id(pool), assignment.token)] = assignment.instance_id
                    self._pools.notify_all()

    def _await_assignment(self, pool: InstancePool, token: int, entry: RegistryEntry) -> str:
        """Block until a freed instance is handed to this queued request."""
        key = (id(pool), token)
        timeout_error = _HttpError(
            504, "timeout", f"{entry.name}@{entry.version}: timed out waiting in queue"
        )
        if isinstance(self.clock, LogicalClock):
            # Single-threaded deterministic runs have no concurrent
            # completions to wait for; shed the request instead of hanging.
            with self._pools:
                if key in self._handoff:
                    return self._handoff.pop(key)
                pool.cancel(token)
            raise timeout_error
        deadline = time.monotonic() + self.config.request_timeout
        with self._pools:
            while key not in self._handoff:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    pool.cancel(token)
                    raise timeout_error
                self._pools.wait(remaining)
            return self._handoff.pop(key)

    # -- registry operations -------------------------------------------------

    def handle_register(self, body: bytes, content_type: str = "application/json") -> HttpReply:
        media_type = content_type.partition(";")[0].strip().lower()
        if media_type not in ("application/json", FHIR_JSON_MIME):
            return self._outcome(
                415, "unsupported-media-type", f"registration requires JSON, got {content_type!r}"
            )
        try:
            document = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return self._outcome(400, "malformed-json", f"registration body: {exc}")
        try:
            entry = self.registry.register(document)
        except DuplicateVersion as exc:
            return self._outcome(409, "duplicate-version", str(exc))
        except BudgetExceeded as exc:
            return self._outcome(400, "budget-exceeded", str(exc))
        except InvalidManifest as exc:
            return self._outcome(400, "invalid-manifest", str(exc))
        self._save_snapshot()
        return self._endpoint_reply(entry, EndpointStatus.ACTIVE, 201)

    def handle_deregister(self, name: str, version: str) -> HttpReply:
        try:
            self.registry.deregister(name, version)
        except NotFound as exc:
            return self._outcome(404, "not-found", str(exc))
        with self._pools:
            self.scaler.remove(name, version)
        self._save_snapshot()
        outcome = make_operation_outcome(
            "deregistered", Severity.INFORMATION, f"{name}@{version} removed from routing"
        )
        return HttpReply(200, serialize_resource(outcome))

    def _save_snapshot(self) -> None:
        if self.snapshot_path:
            self.registry.save_snapshot(self.snapshot_path)

    # -- plumbing --------------------------------------------------------

    def handle_healthz(self) -> HttpReply:
        outcome = make_operation_outcome("ok", Severity.INFORMATION, "gateway is serving")
        return HttpReply(200, serialize_resource(outcome))

    def handle_metrics(self) -> HttpReply:
        lines = []
        with self._pools:
            snapshots = self.scaler.metrics()
        for (name, version), m in snapshots.items():
            label = f'{{function="{name}",version="{version}"}}'
            lines.append(f"live{label} {m.live}")
            lines.append(f"queued{label} {m.queued}")
            lines.append(f"served_total{label} {m.served}")
            lines.append(f"cold_starts_total{label} {m.cold_starts}")
            lines.append(f"rejected_total{label} {m.rejected}")
            lines.append(f"scale_downs_total{label} {m.scale_downs}")
        lines.append(f"subscription_deliveries_total {self.dispatcher.deliveries_total}")
        lines.append(f"subscription_failures_total {self.dispatcher.failures_total}")
        body = "\n".join(lines) + "\n"
        return HttpReply(200, body.encode("utf-8"), media_type="text/plain; charset=utf-8")

    def handle_deliveries(self, request_id: str) -> HttpReply:
        report = self.dispatcher.report(request_id)
        if report is None:
            return self._outcome(404, "not-found", f"no delivery report for request {request_id!r}")
        return HttpReply(200, serialize_resource(report.to_bundle()))

    def tick(self) -> None:
        """One scaler sweep; the server runs this every ``tick_interval``."""
        with self._pools:
            self.scaler.tick_all(self.clock.now())

    def flush_deliveries(self) -> int:
        return self.dispatcher.flush()

    # -- helpers -----------------------------------------------------------

    def _outcome(
        self, status: int, code: str, diagnostics: str, severity: Severity = Severity.ERROR
    ) -> HttpReply:
        outcome = make_operation_outcome(code, severity, diagnostics)
        return HttpReply(status, serialize_resource(outcome))


# -- configuration ---------------------------------------------------------


def load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            document = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: configuration must be a JSON object")
    document.setdefault("_config_dir", os.path.dirname(os.path.abspath(path)))
    return document


def build_gateway(
    document: dict | None = None,
    *,
    clock: Clock | None = None,
    dispatcher: Dispatcher | None = None,
    deterministic: bool | None = None,
) -> Gateway:
    """Assemble a gateway from a configuration document.

    Recognized keys: ``gateway`` (GatewayConfig fields), ``scaler``
    (ScalerConfig defaults), ``registry_snapshot`` (path), ``manifests``
    (inline documents or paths relative to the config file). The
    ``FHIRFAAS_PORT`` and ``FHIRFAAS_BASE_URL`` environment variables
    override the configured port and base URL.
    """
    document = document or {}
    config_dir = document.get("_config_dir", os.getcwd())

    gw_settings = dict(document.get("gateway", {}))
    if deterministic is not None:
        gw_settings["deterministic_mode"] = deterministic
    port_env = os.environ.get(PORT_ENV)
    if port_env:
        try:
            gw_settings["bind_port"] = int(port_env)
        except ValueError:
            raise ConfigError(f"{PORT_ENV} must be an integer, got {port_env!r}")
    base_env = os.environ.get(BASE_URL_ENV)
    if base_env:
        gw_settings["base_url"] = base_env
    unknown = set(gw_settings) - {f for f in GatewayConfig.__dataclass_fields__}
    if unknown:
        raise ConfigError(f"unknown gateway settings: {sorted(unknown)}")
    config = GatewayConfig(**gw_settings)

    scaler_settings = dict(document.get("scaler", {}))
    try:
        defaults = ScalerConfig().with_overrides(scaler_settings)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    clock = clock or (LogicalClock() if config.deterministic_mode else SystemClock())
    snapshot_path = document.get("registry_snapshot")
    if snapshot_path and not os.path.isabs(snapshot_path):
        snapshot_path = os.path.join(config_dir, snapshot_path)
    gateway = Gateway(
        config,
        scaler=Scaler(defaults),
        dispatcher=dispatcher,
        clock=clock,
        snapshot_path=snapshot_path,
    )

    if snapshot_path and os.path.exists(snapshot_path):
        gateway.registry.load_snapshot(snapshot_path)
    for item in document.get("manifests", []):
        if isinstance(item, str):
            manifest_path = item if os.path.isabs(item) else os.path.join(config_dir, item)
            with open(manifest_path, "r", encoding="utf-8") as fh:
                item = json.load(fh)
        try:
            gateway.registry.register(item)
        except DuplicateVersion:
            pass  # already present via the snapshot
    return gateway
