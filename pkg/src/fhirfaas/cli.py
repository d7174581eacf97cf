"""Operator command line.

All commands except ``serve`` and ``simulate-load`` are thin HTTP clients —
they share no state with the server process. Exit codes: 0 success, 1 usage
error, 2 local validation failure, 3 transport failure, 4 the server
answered with an error OperationOutcome.
"""

from __future__ import annotations

import json
import sys

import click
import httpx

from .codec import parse_resource
from .errors import FhirError
from .gateway import build_gateway, load_config_file
from .loadgen import ProfileError, SimulationError, load_profile_file, render_report, simulate
from .manifest import ManifestError, manifest_from_dict
from .pipeline import PipelineError, PipelineSpec, pipeline_from_dict
from .resources import Bundle, Coding, Endpoint
from .scaler import ScalerConfig, ScalerError

USAGE, VALIDATION, TRANSPORT, SERVER = 1, 2, 3, 4
DEFAULT_SERVER = "http://localhost:8080"

HEADER_OUTPUT_PREFIX = "X-Output-Code: "
HEADER_VERSION_PREFIX = "X-Function-Version: "


class CliFailure(click.ClickException):
    """ClickException with a chosen exit code; message goes to stderr."""

    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _client(server: str) -> httpx.Client:
    return httpx.Client(base_url=server.rstrip("/"), timeout=30.0)


def _request(client: httpx.Client, method: str, url: str, **kwargs) -> httpx.Response:
    try:
        return client.request(method, url, **kwargs)
    except httpx.HTTPError as exc:
        raise CliFailure(f"transport failure: {exc}", TRANSPORT)


def _expect_success(response: httpx.Response) -> httpx.Response:
    if response.status_code >= 400:
        raise CliFailure(response.text, SERVER)
    return response


def _read_file(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise CliFailure(f"cannot read {path}: {exc}", VALIDATION)


@click.group()
@click.option(
    "--server",
    "-s",
    default=DEFAULT_SERVER,
    envvar="FHIRFAAS_SERVER",
    show_default=True,
    help="Gateway base URL for client commands.",
)
@click.pass_context
def cli(ctx: click.Context, server: str) -> None:
    """Stateless clinical model functions behind a FHIR-speaking gateway."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@cli.command()
@click.option("--config", "config_path", type=click.Path(), help="Deployment config JSON.")
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.option("--host", default="0.0.0.0", show_default=True)
@click.option("--deterministic", is_flag=True, help="Derive ids from request bytes.")
def serve(config_path: str | None, port: int | None, host: str, deterministic: bool) -> None:
    """Run the gateway (blocking)."""
    from . import httpserver

    document = load_config_file(config_path) if config_path else {}
    if port is not None:
        document.setdefault("gateway", {})["bind_port"] = port
    try:
        gateway = build_gateway(document, deterministic=deterministic or None)
    except (ValueError, OSError) as exc:
        raise CliFailure(f"invalid configuration: {exc}", VALIDATION)
    click.echo(f"serving {len(gateway.registry.active_entries())} entries on port "
               f"{gateway.config.bind_port}")
    httpserver.serve(gateway, host=host)


@cli.command()
@click.argument("manifest_path", type=click.Path())
@click.pass_context
def register(ctx: click.Context, manifest_path: str) -> None:
    """Register a function manifest or pipeline document."""
    body = _read_file(manifest_path)
    try:
        document = json.loads(body.decode("utf-8"))
        if "pipeline" in document:
            pipeline_from_dict(document)
        else:
            manifest_from_dict(document)
    except (ValueError, ManifestError, PipelineError) as exc:
        raise CliFailure(f"{manifest_path}: {exc}", VALIDATION)
    with _client(ctx.obj["server"]) as client:
        response = _request(
            client, "POST", "/registry", content=body,
            headers={"Content-Type": "application/json"},
        )
    _expect_success(response)
    click.echo(response.text)


@cli.command()
@click.argument("name")
@click.argument("version")
@click.pass_context
def deregister(ctx: click.Context, name: str, version: str) -> None:
    """Remove a registered version from routing."""
    with _client(ctx.obj["server"]) as client:
        response = _request(client, "DELETE", f"/registry/{name}/{version}")
    _expect_success(response)
    click.echo(response.text)


@cli.command()
@click.argument("name")
@click.option("--version", default=None, help="Describe a specific version.")
@click.pass_context
def describe(ctx: click.Context, name: str, version: str | None) -> None:
    """Print a function's Endpoint document."""
    headers = {"X-Function-Version": version} if version else {}
    with _client(ctx.obj["server"]) as client:
        response = _request(client, "GET", f"/function/{name}", headers=headers)
    _expect_success(response)
    click.echo(response.text)


@cli.command()
@click.argument("name")
@click.argument("bundle_path", type=click.Path())
@click.option("--version", default=None, help="Pin the function version.")
@click.pass_context
def invoke(ctx: click.Context, name: str, bundle_path: str, version: str | None) -> None:
    """POST a bundle file to a function and print the response bundle."""
    body = _read_file(bundle_path)
    try:
        resource = parse_resource(body)
    except FhirError as exc:
        raise CliFailure(f"{bundle_path}: {exc}", VALIDATION)
    if not isinstance(resource, Bundle):
        raise CliFailure(f"{bundle_path}: expected a Bundle document", VALIDATION)
    headers = {"Content-Type": "application/fhir+json"}
    if version:
        headers["X-Function-Version"] = version
    with _client(ctx.obj["server"]) as client:
        response = _request(client, "POST", f"/function/{name}", content=body, headers=headers)
    _expect_success(response)
    click.echo(response.text)


@cli.group()
def pipeline() -> None:
    """Pipeline tooling."""


@pipeline.command("validate")
@click.argument("manifest_path", type=click.Path())
@click.pass_context
def pipeline_validate(ctx: click.Context, manifest_path: str) -> None:
    """Check a pipeline document's wiring against the live discovery index."""
    body = _read_file(manifest_path)
    try:
        spec = pipeline_from_dict(json.loads(body.decode("utf-8")))
    except (ValueError, PipelineError) as exc:
        raise CliFailure(f"{manifest_path}: {exc}", VALIDATION)
    with _client(ctx.obj["server"]) as client:
        response = _request(client, "GET", "/functions")
    _expect_success(response)
    index = parse_resource(response.content)
    assert isinstance(index, Bundle)
    violations = _check_wiring(spec, index.resources_of(Endpoint))
    if violations:
        raise CliFailure("\n".join(violations), VALIDATION)
    click.echo(f"pipeline {spec.name}@{spec.version} is valid ({len(spec.stages)} stages)")


def _check_wiring(spec: PipelineSpec, endpoints: list[Endpoint]) -> list[str]:
    """The chaining rule, reconstructed purely from discovery documents:
    inputs from payloadType, outputs and versions from the header lines."""
    by_name: dict[str, tuple[str, list[Coding], list[Coding]]] = {}
    for endpoint in endpoints:
        version = ""
        outputs = []
        for line in endpoint.header:
            if line.startswith(HEADER_OUTPUT_PREFIX):
                system, _, code = line[len(HEADER_OUTPUT_PREFIX):].partition("|")
                outputs.append(Coding(system, code))
            elif line.startswith(HEADER_VERSION_PREFIX):
                version = line[len(HEADER_VERSION_PREFIX):]
        by_name[endpoint.name] = (version, list(endpoint.payload_type), outputs)

    violations: list[str] = []
    available: set[Coding] = set()
    previous_outputs: set[Coding] = set()
    for index, stage in enumerate(spec.stages, start=1):
        described = by_name.get(stage.name)
        if described is None:
            violations.append(f"stage {index} ({stage.name}): not in the discovery index")
            continue
        version, inputs, outputs = described
        if stage.version and stage.version != version:
            violations.append(
                f"stage {index} ({stage.name}): pinned to {stage.version} but the active "
                f"version is {version}"
            )
        if index == 1:
            available = set(inputs)
        else:
            available |= previous_outputs
            for required in sorted(inputs):
                if not any(required.matches(provided) for provided in available):
                    violations.append(
                        f"stage {index} ({stage.name}): requires "
                        f"{required.system}|{required.code} which no earlier stage provides"
                    )
        previous_outputs = set(outputs)
    return violations


@cli.command("simulate-load")
@click.argument("profile_path", type=click.Path())
@click.option("--config", "config_path", type=click.Path(), help="Deployment config JSON "
              "supplying scaler defaults.")
def simulate_load(profile_path: str, config_path: str | None) -> None:
    """Replay an arrival profile through the scaling policy and report."""
    try:
        profile = load_profile_file(profile_path)
    except (ProfileError, OSError) as exc:
        raise CliFailure(f"{profile_path}: {exc}", VALIDATION)
    defaults = ScalerConfig()
    if config_path:
        try:
            document = load_config_file(config_path)
            defaults = defaults.with_overrides(dict(document.get("scaler", {})))
        except (ValueError, OSError) as exc:
            raise CliFailure(f"{config_path}: {exc}", VALIDATION)
    try:
        result = simulate(profile, defaults)
    except (ScalerError, SimulationError) as exc:
        raise CliFailure(f"simulation failed: {exc}", VALIDATION)
    click.echo(render_report(profile, defaults, result))


def main(argv: list[str] | None = None) -> int:
    """Console entry point mapping failures onto the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
    except CliFailure as exc:
        click.echo(exc.format_message(), err=True)
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return USAGE
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return USAGE
    except click.ClickException as exc:
        click.echo(exc.format_message(), err=True)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
