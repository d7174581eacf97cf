"""Socket binding for the gateway: a threaded stdlib HTTP/1.1 server.

Routes::

    GET    /function/{name}           Endpoint document (discovery)
    POST   /function/{name}           invoke a function or pipeline
    GET    /functions                 Bundle of Endpoints for every active entry
    POST   /registry                  register a manifest or pipeline document
    DELETE /registry/{name}/{version} remove an entry from routing
    GET    /deliveries/{request-id}   subscription delivery report
    GET    /healthz                   liveness probe
    GET    /metrics                   plain-text counters

All protocol decisions live in :class:`fhirfaas.gateway.Gateway`; this module
only moves bytes and runs the background ticker and delivery worker.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .gateway import Gateway, HttpReply

logger = logging.getLogger(__name__)


class _RequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: "GatewayHttpServer"

    @property
    def gateway(self) -> Gateway:
        return self.server.gateway

    def log_message(self, format: str, *args) -> None:
        logger.debug("%s %s", self.address_string(), format % args)

    def _segments(self) -> list[str]:
        path = self.path.partition("?")[0]
        return [s for s in path.split("/") if s]

    def _read_body(self) -> bytes:
        declared = int(self.headers.get("Content-Length", 0) or 0)
        limit = self.gateway.config.max_body_bytes
        if declared > limit:
            # Read at most one byte past the limit so the gateway's size
            # check trips without buffering an arbitrarily large body.
            self.close_connection = True
            return self.rfile.read(limit + 1)
        return self.rfile.read(declared)

    def _send(self, reply: HttpReply) -> None:
        self.send_response(reply.status)
        self.send_header("Content-Type", reply.media_type)
        self.send_header("Content-Length", str(len(reply.body)))
        for key, value in reply.headers.items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(reply.body)

    def _not_found(self) -> None:
        self._send(self.gateway._outcome(404, "not-found", f"no route for {self.path!r}"))

    def do_GET(self) -> None:  # noqa: N802 (stdlib naming)
        segments = self._segments()
        if len(segments) == 2 and segments[0] == "function":
            version = self.headers.get("X-Function-Version")
            self._send(self.gateway.handle_get_function(segments[1], version))
        elif segments == ["functions"]:
            self._send(self.gateway.handle_index())
        elif segments == ["healthz"]:
            self._send(self.gateway.handle_healthz())
        elif segments == ["metrics"]:
            self._send(self.gateway.handle_metrics())
        elif len(segments) == 2 and segments[0] == "deliveries":
            self._send(self.gateway.handle_deliveries(segments[1]))
        else:
            self._not_found()

    def do_POST(self) -> None:  # noqa: N802
        segments = self._segments()
        body = self._read_body()
        content_type = self.headers.get("Content-Type", "")
        if len(segments) == 2 and segments[0] == "function":
            headers = {k: v for k, v in self.headers.items()}
            self._send(
                self.gateway.handle_post_function(segments[1], body, content_type, headers)
            )
        elif segments == ["registry"]:
            self._send(self.gateway.handle_register(body, content_type))
        else:
            self._not_found()

    def do_DELETE(self) -> None:  # noqa: N802
        segments = self._segments()
        if len(segments) == 3 and segments[0] == "registry":
            self._send(self.gateway.handle_deregister(segments[1], segments[2]))
        else:
            self._not_found()


class GatewayHttpServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, gateway: Gateway, host: str = "0.0.0.0"):
        self.gateway = gateway
        super().__init__((host, gateway.config.bind_port), _RequestHandler)
        if gateway.config.bind_port == 0:
            # Ephemeral bind (tests): fold the real port back into the config
            # so discovery documents advertise reachable addresses.
            gateway.config = replace(gateway.config, bind_port=self.server_address[1])
        self._ticker_stop = threading.Event()
        self._ticker: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start_workers(self) -> None:
        """Start the delivery worker and the scaler ticker (daemon threads)."""
        self.gateway.dispatcher.start_worker()
        interval = self.gateway.scaler.defaults.tick_interval
        self._ticker = threading.Thread(target=self._tick_loop, args=(interval,), daemon=True)
        self._ticker.start()

    def start_background(self) -> None:
        """Workers plus the accept loop on a daemon thread (test setups)."""
        self.start_workers()
        threading.Thread(target=self.serve_forever, daemon=True).start()

    def _tick_loop(self, interval: float) -> None:
        while not self._ticker_stop.wait(interval):
            self.gateway.tick()

    def stop(self) -> None:
        self._ticker_stop.set()
        self.gateway.dispatcher.stop_worker()
        self.shutdown()
        self.server_close()


def serve(gateway: Gateway, host: str = "0.0.0.0") -> None:
    """Blocking entry point used by the ``serve`` CLI command."""
    server = GatewayHttpServer(gateway, host=host)
    server.start_workers()
    logger.info("serving on port %d", server.port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
