"""Deterministic load harness for the instance-pool scaling policy.

Replays an arrival profile — a list of (start, duration, rate) phases with a
fixed per-request service time — through an :class:`InstancePool` as a
discrete-event simulation on logical time. No sleeping, no threads: results
are exact and repeatable, which is what lets conservation and capacity
bounds be asserted as equalities.

Event ordering at equal timestamps is fixed (completions, then the periodic
sweep, then arrivals) so every run of a profile is identical.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from statistics import fmean

from .scaler import Admission, Enqueued, InstancePool, ScalerConfig

_COMPLETE, _TICK, _ARRIVAL = 0, 1, 2


class ProfileError(ValueError):
    """The load profile document is invalid."""


class SimulationError(AssertionError):
    """A scaling invariant failed during the run."""


@dataclass(frozen=True)
class LoadPhase:
    start: float
    duration: float
    rate: float

    def validate(self) -> None:
        if self.start < 0:
            raise ProfileError("phase start must not be negative")
        if self.duration <= 0 or self.rate <= 0:
            raise ProfileError("phase duration and rate must be positive")

    def arrival_times(self) -> list[float]:
        count = int(round(self.rate * self.duration))
        return [self.start + k / self.rate for k in range(count)]


@dataclass(frozen=True)
class LoadProfile:
    function: str
    service_time: float
    phases: tuple[LoadPhase, ...]
    version: str = ""
    scaler: dict | None = None

    def validate(self) -> None:
        if not self.function:
            raise ProfileError("profile must name a function")
        if self.service_time <= 0:
            raise ProfileError("service_time must be positive")
        if not self.phases:
            raise ProfileError("profile needs at least one phase")
        for phase in self.phases:
            phase.validate()

    def total_arrivals(self) -> int:
        return sum(len(phase.arrival_times()) for phase in self.phases)


def profile_from_dict(data: dict) -> LoadProfile:
    if not isinstance(data, dict):
        raise ProfileError("profile must be a JSON object")
    raw_phases = data.get("phases")
    if not isinstance(raw_phases, list):
        raise ProfileError("profile must carry a 'phases' array")
    phases = []
    for i, raw in enumerate(raw_phases):
        if not isinstance(raw, dict):
            raise ProfileError(f"phases[{i}] must be an object")
        try:
            phases.append(
                LoadPhase(
                    start=float(raw["start"]),
                    duration=float(raw["duration"]),
                    rate=float(raw["rate"]),
                )
            )
        except KeyError as exc:
            raise ProfileError(f"phases[{i}] is missing {exc}")
    profile = LoadProfile(
        function=str(data.get("function", "")),
        service_time=float(data.get("service_time", 0)),
        phases=tuple(phases),
        version=str(data.get("version", "")),
        scaler=dict(data["scaler"]) if isinstance(data.get("scaler"), dict) else None,
    )
    profile.validate()
    return profile


def load_profile_file(path: str) -> LoadProfile:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProfileError(f"{path}: not valid JSON ({exc})") from exc
    return profile_from_dict(data)


def percentile(sorted_values: list[float], q: float) -> float:
    """Nearest-rank percentile; ``sorted_values`` must be ascending."""
    if not sorted_values:
        return math.nan
    rank = max(1, math.ceil(q / 100 * len(sorted_values)))
    return sorted_values[rank - 1]


@dataclass
class SimulationResult:
    arrivals: int
    served: int
    rejected: int
    cold_starts: int
    cold_admissions: int
    scale_downs: int
    max_live: int
    max_queued: int
    ticks: int
    simulated_seconds: float
    latencies: list[float]

    def percentiles(self) -> dict[str, float]:
        ordered = sorted(self.latencies)
        return {
            "p50": percentile(ordered, 50),
            "p90": percentile(ordered, 90),
            "p95": percentile(ordered, 95),
            "p99": percentile(ordered, 99),
            "max": ordered[-1] if ordered else math.nan,
            "mean": fmean(ordered) if ordered else math.nan,
        }


def simulate(profile: LoadProfile, config: ScalerConfig) -> SimulationResult:
    """Run the profile to completion (all work drained, pool back to zero)."""
    profile.validate()
    config = config.with_overrides(profile.scaler or {})
    pool = InstancePool(config)

    events: list[tuple[float, int, int, tuple]] = []
    seq = 0

    def push(time: float, kind: int, payload: tuple) -> None:
        nonlocal seq
        heapq.heappush(events, (time, kind, seq, payload))
        seq += 1

    for phase in profile.phases:
        for t in phase.arrival_times():
            push(t, _ARRIVAL, ())
    push(config.tick_interval, _TICK, ())

    arrivals = 0
    rejected = 0
    cold_admissions = 0
    in_flight = 0
    pending_arrivals = profile.total_arrivals()
    queued_at: dict[int, float] = {}
    latencies: list[float] = []
    max_live = max_queued = 0
    ticks = 0
    now = 0.0

    def observe_gauges() -> None:
        nonlocal max_live, max_queued
        max_live = max(max_live, pool.live)
        max_queued = max(max_queued, pool.queued)

    while events:
        now, kind, _, payload = heapq.heappop(events)
        if kind == _ARRIVAL:
            arrivals += 1
            pending_arrivals -= 1
            verdict = pool.admit(now)
            if isinstance(verdict, Admission):
                if verdict.cold:
                    cold_admissions += 1
                latency = verdict.added_latency + profile.service_time
                in_flight += 1
                push(now + latency, _COMPLETE, (verdict.instance_id, latency))
            elif isinstance(verdict, Enqueued):
                queued_at[verdict.token] = now
            else:
                rejected += 1
        elif kind == _COMPLETE:
            instance_id, latency = payload
            latencies.append(latency)
            in_flight -= 1
            assignment = pool.complete(instance_id, now)
            if assignment is not None:
                wait = now - queued_at.pop(assignment.token)
                total = wait + profile.service_time
                in_flight += 1
                push(now + profile.service_time, _COMPLETE, (assignment.instance_id, total))
        else:
            ticks += 1
            pool.tick(now)
            _check_invariants(pool, config, arrivals, in_flight)
            if in_flight or pool.queued or pending_arrivals or pool.live:
                push(now + config.tick_interval, _TICK, ())
        observe_gauges()

    if pool.served + pool.rejected != arrivals:
        raise SimulationError(
            f"conservation broken after drain: served {pool.served} + rejected "
            f"{pool.rejected} != arrivals {arrivals}"
        )
    if cold_admissions != pool.cold_starts:
        raise SimulationError(
            f"cold-start accounting broken: {cold_admissions} cold admissions vs "
            f"counter {pool.cold_starts}"
        )
    return SimulationResult(
        arrivals=arrivals,
        served=pool.served,
        rejected=rejected,
        cold_starts=pool.cold_starts,
        cold_admissions=cold_admissions,
        scale_downs=pool.scale_downs,
        max_live=max_live,
        max_queued=max_queued,
        ticks=ticks,
        simulated_seconds=now,
        latencies=latencies,
    )


def _check_invariants(
    pool: InstancePool, config: ScalerConfig, arrivals: int, in_flight: int
) -> None:
    if pool.live > config.max_instances:
        raise SimulationError(f"live {pool.live} exceeds max_instances {config.max_instances}")
    if pool.queued > config.queue_capacity:
        raise SimulationError(f"queued {pool.queued} exceeds capacity {config.queue_capacity}")
    accounted = pool.served + pool.rejected + in_flight + pool.queued
    if accounted != arrivals:
        raise SimulationError(
            f"conservation broken at tick: served {pool.served} + rejected {pool.rejected} "
            f"+ in-flight {in_flight} + queued {pool.queued} != arrivals {arrivals}"
        )


def render_report(profile: LoadProfile, config: ScalerConfig, result: SimulationResult) -> str:
    config = config.with_overrides(profile.scaler or {})
    target = profile.function + (f"@{profile.version}" if profile.version else "")
    label = f'{{function="{profile.function}",version="{profile.version or "latest"}"}}'
    pct = result.percentiles()
    lines = [
        f"target: {target}  service_time: {profile.service_time:g}s  "
        f"phases: {len(profile.phases)}",
        f"scaler: max_instances={config.max_instances} queue_capacity={config.queue_capacity} "
        f"cold_start_delay={config.cold_start_delay:g}s idle_timeout={config.idle_timeout:g}s "
        f"tick_interval={config.tick_interval:g}s",
        f"arrivals: {result.arrivals}  simulated: {result.simulated_seconds:.3f}s  "
        f"ticks: {result.ticks}",
        f"served_total{label} {result.served}",
        f"rejected_total{label} {result.rejected}",
        f"cold_starts_total{label} {result.cold_starts}",
        f"scale_downs_total{label} {result.scale_downs}",
        f"max_live{label} {result.max_live}",
        f"max_queued{label} {result.max_queued}",
        "latency seconds: "
        + " ".join(f"{k}={v:.4f}" for k, v in pct.items() if not math.isnan(v)),
    ]
    return "\n".join(lines)
