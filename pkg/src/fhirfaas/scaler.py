"""Simulated function-as-a-service scaling: instance pools per function version.

The pool is a pure state machine — no threads, no sleeping, no wall clock.
Callers feed it timestamps and route its verdicts:

* :meth:`InstancePool.admit` either hands the request an instance (possibly
  cold, with the cold-start penalty expressed as added latency), enqueues it
  in a bounded FIFO, or rejects it outright when the queue is full.
* :meth:`InstancePool.complete` retires the request from its instance and
  eagerly reassigns the instance to the queue head, if any.
* :meth:`InstancePool.tick` is the periodic sweep that retires instances
  that have sat idle past the timeout, which is what lets a pool scale back
  to zero.

Keeping the pool synchronous makes it equally usable from the threaded HTTP
server (wrapped in a lock and condition) and from the discrete-event load
simulator (driven directly on a logical clock).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace


class ScalerError(ValueError):
    """Raised for nonsensical scaler configuration."""


@dataclass(frozen=True)
class ScalerConfig:
    max_instances: int = 8
    queue_capacity: int = 16
    cold_start_delay: float = 0.5
    idle_timeout: float = 30.0
    tick_interval: float = 1.0

    def validate(self) -> None:
        if self.max_instances < 1:
            raise ScalerError("max_instances must be at least 1")
        if self.queue_capacity < 0:
            raise ScalerError("queue_capacity must not be negative")
        for name in ("cold_start_delay", "idle_timeout", "tick_interval"):
            if getattr(self, name) <= 0:
                raise ScalerError(f"{name} must be a positive duration")

    def with_overrides(self, overrides: dict) -> "ScalerConfig":
        unknown = set(overrides) - {f.name for f in self.__dataclass_fields__.values()}
        if unknown:
            raise ScalerError(f"unknown scaler settings: {sorted(unknown)}")
        merged = replace(self, **overrides)
        merged.validate()
        return merged


@dataclass(frozen=True)
class Admission:
    """The request may run now on ``instance_id``.

    ``added_latency`` is the cold-start penalty the caller must charge to
    the request before the handler runs; zero for a warm instance.
    """

    instance_id: str
    added_latency: float
    cold: bool


@dataclass(frozen=True)
class Enqueued:
    """All instances are busy and the pool is at capacity; wait for a slot."""

    token: int


@dataclass(frozen=True)
class Rejected:
    """Queue full; the request is shed."""


@dataclass(frozen=True)
class Assignment:
    """A queued request has been given the instance that just freed up."""

    token: int
    instance_id: str


@dataclass
class _Instance:
    busy: bool
    idle_since: float


@dataclass(frozen=True)
class PoolMetrics:
    live: int
    queued: int
    served: int
    cold_starts: int
    rejected: int
    scale_downs: int


class InstancePool:
    """Bounded pool of single-request instances for one function version."""

    def __init__(self, config: ScalerConfig):
        config.validate()
        self.config = config
        self._instances: dict[str, _Instance] = {}
        self._queue: deque[int] = deque()
        self._cancelled: set[int] = set()
        self._next_instance = 0
        self._next_token = 0
        self.served = 0
        self.cold_starts = 0
        self.rejected = 0
        self.scale_downs = 0

    @property
    def live(self) -> int:
        return len(self._instances)

    @property
    def queued(self) -> int:
        return len(self._queue)

    def admit(self, now: float) -> Admission | Enqueued | Rejected:
        for instance_id, instance in self._instances.items():
            if not instance.busy:
                instance.busy = True
                return Admission(instance_id, added_latency=0.0, cold=False)
        if len(self._instances) < self.config.max_instances:
            instance_id = f"i-{self._next_instance:04d}"
            self._next_instance += 1
            self._instances[instance_id] = _Instance(busy=True, idle_since=now)
            self.cold_starts += 1
            return Admission(instance_id, added_latency=self.config.cold_start_delay, cold=True)
        if len(self._queue) < self.config.queue_capacity:
            token = self._next_token
            self._next_token += 1
            self._queue.append(token)
            return Enqueued(token)
        self.rejected += 1
        return Rejected()

    def complete(self, instance_id: str, now: float) -> Assignment | None:
        """Finish a request; hand the instance to the queue head if one waits."""
        instance = self._instances.get(instance_id)
        if instance is None or not instance.busy:
            raise ScalerError(f"complete() for instance {instance_id!r} that is not running")
        self.served += 1
        token = self._pop_queue()
        if token is not None:
            return Assignment(token, instance_id)
        instance.busy = False
        instance.idle_since = now
        return None

    def cancel(self, token: int) -> None:
        """Abandon a queued request (timed out waiting); counts as shed load."""
        if token in self._queue:
            self._cancelled.add(token)
            self.rejected += 1

    def tick(self, now: float) -> list[str]:
        """Periodic sweep: retire instances idle for at least ``idle_timeout``."""
        retired = [
            instance_id
            for instance_id, instance in self._instances.items()
            if not instance.busy and now - instance.idle_since >= self.config.idle_timeout
        ]
        for instance_id in retired:
            del self._instances[instance_id]
            self.scale_downs += 1
        return retired

    def metrics(self) -> PoolMetrics:
        return PoolMetrics(
            live=self.live,
            queued=self.queued,
            served=self.served,
            cold_starts=self.cold_starts,
            rejected=self.rejected,
            scale_downs=self.scale_downs,
        )

    def _pop_queue(self) -> int | None:
        while self._queue:
            token = self._queue.popleft()
            if token in self._cancelled:
                self._cancelled.discard(token)
                continue
            return token
        return None


class Scaler:
    """Routes each function version to its own :class:`InstancePool`."""

    def __init__(self, defaults: ScalerConfig | None = None):
        self.defaults = defaults or ScalerConfig()
        self.defaults.validate()
        self._pools: dict[tuple[str, str], InstancePool] = {}

    def pool_for(
        self, name: str, version: str, overrides: dict | None = None
    ) -> InstancePool:
        key = (name, version)
        pool = self._pools.get(key)
        if pool is None:
            config = self.defaults.with_overrides(overrides or {})
            pool = InstancePool(config)
            self._pools[key] = pool
        return pool

    def remove(self, name: str, version: str) -> None:
        self._pools.pop((name, version), None)

    def tick_all(self, now: float) -> None:
        for pool in self._pools.values():
            pool.tick(now)

    def metrics(self) -> dict[tuple[str, str], PoolMetrics]:
        return {key: pool.metrics() for key, pool in sorted(self._pools.items())}
