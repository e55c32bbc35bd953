"""Shared scaffolding for the loopback-friendly HTTP services.

Each service subclasses ServiceHandler with routing methods and runs under
a ThreadingHTTPServer via ServiceRunner. Handlers speak HTTP/1.1 with
explicit Content-Length so clients can keep connections alive.
"""

from __future__ import annotations

import logging
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class ServiceHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "odoh"
    sys_version = ""
    disable_nagle_algorithm = True  # small request/reply bodies; never batch
    log = logging.getLogger("odoh.http")

    def read_body(self, cap: int | None = None) -> bytes | None:
        """Request body by Content-Length; None when over the cap."""
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            length = 0
        if cap is not None and length > cap:
            return None
        body = self.rfile.read(length) if length > 0 else b""
        tap = getattr(self.server, "request_tap", None)
        if tap is not None:
            tap(self.requestline.encode(), self.headers.as_bytes(), body)
        return body

    def reply(self, status: int, body: bytes = b"", content_type: str = "text/plain", extra_headers: dict | None = None) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        for name, value in (extra_headers or {}).items():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt, *args):  # noqa: A003 - stdlib signature
        # Never log the peer address; services must not record who spoke to them.
        self.log.debug("%s", fmt % args)

    def log_error(self, fmt, *args):
        self.log.debug("%s", fmt % args)

    def address_string(self) -> str:
        return "-"


class _QuietServer(ThreadingHTTPServer):
    daemon_threads = True

    def handle_error(self, request, client_address):
        # peers hanging up early (their timeout fired) is normal, not an error
        exc = sys.exc_info()[1]
        if isinstance(exc, (BrokenPipeError, ConnectionResetError)):
            return
        logging.getLogger("odoh.http").debug("request handling error", exc_info=True)


class ServiceRunner:
    """Owns a ThreadingHTTPServer and its serve thread."""

    def __init__(self, handler_cls, listen: str = "127.0.0.1:0"):
        host, _, port = listen.rpartition(":")
        self.server = _QuietServer((host or "127.0.0.1", int(port)), handler_cls)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self.server.server_address[0], self.server.server_address[1]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> "ServiceRunner":
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
