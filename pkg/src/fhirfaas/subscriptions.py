"""Push notification dispatch for request-borne Subscription resources.

Clients may include Subscription resources in the bundle they POST. After
the gateway has committed its response, every subscription whose criteria
matches the response — ``"*"`` matches anything, a bare code matches any
CarePlan activity code, and ``system|code`` pins the system too — gets the
full response bundle POSTed to its channel endpoint.

Dispatch is decoupled from the serving path: :meth:`Dispatcher.submit` only
enqueues work. A live server drains the queue on a background worker thread;
deterministic setups call :meth:`Dispatcher.flush` explicitly. Failed posts
are retried with exponential backoff (0.1 s, 0.2 s, ...) up to
``max_attempts`` total tries per subscription.
"""

from __future__ import annotations

import queue
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .clock import Clock, SystemClock
from .codec import canonical_json
from .resources import (
    FHIR_JSON_MIME,
    Bundle,
    CarePlan,
    OperationOutcome,
    Severity,
    Subscription,
)

PostFn = Callable[[str, bytes, dict], int]
"""POST ``body`` to ``url`` with ``headers``; returns the HTTP status code."""


def httpx_post(url: str, body: bytes, headers: dict) -> int:
    import httpx

    response = httpx.post(url, content=body, headers=headers, timeout=10.0)
    return response.status_code


class DeliveryOutcome(str, Enum):
    DELIVERED = "delivered"
    FAILED = "failed"


@dataclass
class DeliveryRecord:
    endpoint: str
    attempts: int
    outcome: DeliveryOutcome
    last_status: int | None


@dataclass
class DeliveryReport:
    request_id: str
    records: list[DeliveryRecord] = field(default_factory=list)
    complete: bool = False

    def to_bundle(self) -> Bundle:
        outcomes = []
        if not self.complete:
            outcomes.append(
                OperationOutcome(
                    severity=Severity.INFORMATION,
                    code="pending",
                    diagnostics=f"delivery for request {self.request_id} has not run yet",
                )
            )
        for record in self.records:
            delivered = record.outcome is DeliveryOutcome.DELIVERED
            outcomes.append(
                OperationOutcome(
                    severity=Severity.INFORMATION if delivered else Severity.ERROR,
                    code=record.outcome.value,
                    diagnostics=(
                        f"endpoint={record.endpoint} attempts={record.attempts} "
                        f"last_status={record.last_status}"
                    ),
                )
            )
        return Bundle(entries=outcomes)


def _criteria_matches(criteria: str, response: Bundle) -> bool:
    if criteria == "*":
        return True
    system, sep, code = criteria.partition("|")
    for plan in response.resources_of(CarePlan):
        for activity in plan.activity:
            if sep:
                if activity.code.system == system and activity.code.code == code:
                    return True
            elif activity.code.code == criteria:
                return True
    return False


@dataclass
class _Job:
    request_id: str
    subscriptions: list[Subscription]
    response_bytes: bytes
    response: Bundle


class Dispatcher:
    """Queues and executes subscription deliveries after response commit."""

    def __init__(
        self,
        clock: Clock | None = None,
        post_fn: PostFn | None = None,
        *,
        max_attempts: int = 3,
        backoff_base: float = 0.1,
        store_limit: int = 1024,
    ):
        self.clock = clock or SystemClock()
        self.post_fn = post_fn or httpx_post
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.store_limit = store_limit
        self.deliveries_total = 0
        self.failures_total = 0
        self._queue: "queue.Queue[_Job | None]" = queue.Queue()
        self._reports: "OrderedDict[str, DeliveryReport]" = OrderedDict()
        self._lock = threading.Lock()
        self._worker: threading.Thread | None = None

    # -- intake ----------------------------------------------------------

    def submit(self, request_id: str, request: Bundle, response: Bundle) -> bool:
        """Enqueue deliveries for one committed response.

        Never performs I/O; returns whether the request carried any
        Subscription resources (and so has a report to look up later).
        """
        subscriptions = request.resources_of(Subscription)
        if not subscriptions:
            return False
        matched = [s for s in subscriptions if _criteria_matches(s.criteria, response)]
        report = DeliveryReport(request_id=request_id)
        self._store(report)
        if not matched:
            report.complete = True
            return True
        self._queue.put(
            _Job(
                request_id=request_id,
                subscriptions=matched,
                response_bytes=canonical_json(response.to_wire()),
                response=response,
            )
        )
        return True

    # -- execution -------------------------------------------------------

    def flush(self) -> int:
        """Process every queued delivery inline; returns jobs processed."""
        processed = 0
        while True:
            try:
                job = self._queue.get_nowait()
            except queue.Empty:
                return processed
            if job is None:
                continue
            self._process(job)
            processed += 1

    def start_worker(self) -> None:
        if self._worker is not None:
            return
        self._worker = threading.Thread(target=self._worker_loop, daemon=True)
        self._worker.start()

    def stop_worker(self) -> None:
        if self._worker is None:
            return
        self._queue.put(None)
        self._worker.join(timeout=5.0)
        self._worker = None

    def _worker_loop(self) -> None:
        while True:
            job = self._queue.get()
            if job is None:
                return
            self._process(job)

    def _process(self, job: _Job) -> None:
        report = self._reports.get(job.request_id) or DeliveryReport(request_id=job.request_id)
        headers = {"Content-Type": FHIR_JSON_MIME, "X-Request-Id": job.request_id}
        for subscription in job.subscriptions:
            url = subscription.channel.endpoint
            attempts = 0
            last_status: int | None = None
            delivered = False
            while attempts < self.max_attempts:
                if attempts:
                    self.clock.sleep(self.backoff_base * 2 ** (attempts - 1))
                attempts += 1
                try:
                    last_status = self.post_fn(url, job.response_bytes, headers)
                except Exception:
                    last_status = None
                else:
                    if 200 <= last_status < 300:
                        delivered = True
                        break
            outcome = DeliveryOutcome.DELIVERED if delivered else DeliveryOutcome.FAILED
            if delivered:
                self.deliveries_total += 1
            else:
                self.failures_total += 1
            report.records.append(
                DeliveryRecord(
                    endpoint=url, attempts=attempts, outcome=outcome, last_status=last_status
                )
            )
        report.complete = True
        self._store(report)

    # -- reports ---------------------------------------------------------

    def report(self, request_id: str) -> DeliveryReport | None:
        with self._lock:
            return self._reports.get(request_id)

    def _store(self, report: DeliveryReport) -> None:
        with self._lock:
            self._reports[report.request_id] = report
            self._reports.move_to_end(report.request_id)
            while len(self._reports) > self.store_limit:
                self._reports.popitem(last=False)
