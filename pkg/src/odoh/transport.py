"""Thin HTTP client layer with explicit connection control.

Built directly on http.client so that (a) outbound headers are exactly the
ones we choose — nothing implicit leaks through a relay — and (b) connection
reuse is an observable, switchable property: the reuse benchmarks hinge on
knowing precisely when a new transport connection was opened.
"""

from __future__ import annotations

import http.client
import socket
import ssl
import threading
import time
from dataclasses import dataclass
from urllib.parse import urlsplit


class TransportError(Exception):
    """Connection could not be established or broke mid-request."""


class TransportTimeout(TransportError):
    """The peer did not answer within the deadline."""


@dataclass
class HttpReply:
    status: int
    headers: dict[str, str]  # lowercased names
    body: bytes


def split_host_port(netloc: str, default_port: int) -> tuple[str, int]:
    if ":" in netloc:
        host, _, port = netloc.rpartition(":")
        return host, int(port)
    return netloc, default_port


class HttpTransport:
    """One logical connection to one host.

    reuse=True keeps the socket open across requests (HTTP/1.1 keep-alive);
    reuse=False opens a fresh connection per request. connect_cost_ms adds a
    fixed sleep on every new connection, standing in for TCP/TLS handshake
    latency in loopback benchmarks.
    """

    def __init__(
        self,
        host: str,
        port: int | None = None,
        *,
        scheme: str = "http",
        reuse: bool = True,
        timeout: float = 5.0,
        connect_cost_ms: float = 0.0,
        source_address: tuple[str, int] | None = None,
    ):
        self.host = host
        self.port = port if port is not None else (443 if scheme == "https" else 80)
        self.scheme = scheme
        self.reuse = reuse
        self.timeout = timeout
        self.connect_cost_ms = connect_cost_ms
        self.source_address = source_address
        self.connections_opened = 0
        self._conn: http.client.HTTPConnection | None = None
        self._lock = threading.Lock()

    @classmethod
    def from_url(cls, url: str, **kwargs) -> "HttpTransport":
        parts = urlsplit(url)
        scheme = parts.scheme or "http"
        host, port = split_host_port(parts.netloc, 443 if scheme == "https" else 80)
        return cls(host, port, scheme=scheme, **kwargs)

    def _connect(self) -> http.client.HTTPConnection:
        if self.scheme == "https":
            conn = http.client.HTTPSConnection(
                self.host,
                self.port,
                timeout=self.timeout,
                context=ssl.create_default_context(),
                source_address=self.source_address,
            )
        else:
            conn = http.client.HTTPConnection(
                self.host, self.port, timeout=self.timeout, source_address=self.source_address
            )
        if self.connect_cost_ms > 0:
            time.sleep(self.connect_cost_ms / 1000.0)
        try:
            conn.connect()
            conn.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        except socket.timeout as exc:
            raise TransportTimeout(f"connect to {self.host}:{self.port} timed out") from exc
        except OSError as exc:
            raise TransportError(f"connect to {self.host}:{self.port} failed: {exc}") from exc
        self.connections_opened += 1
        return conn

    def _send(self, conn, method: str, path: str, body: bytes, headers: dict[str, str]) -> HttpReply:
        # putrequest/putheader instead of request(): no implicit Accept-Encoding.
        conn.putrequest(method, path, skip_accept_encoding=True)
        sent_names = set()
        for name, value in headers.items():
            conn.putheader(name, value)
            sent_names.add(name.lower())
        if body and "content-length" not in sent_names:
            conn.putheader("Content-Length", str(len(body)))
        conn.endheaders(body if body else None)
        resp = conn.getresponse()
        data = resp.read()
        return HttpReply(
            status=resp.status,
            headers={k.lower(): v for k, v in resp.getheaders()},
            body=data,
        )

    def request(
        self, method: str, path: str, body: bytes = b"", headers: dict[str, str] | None = None
    ) -> HttpReply:
        headers = headers or {}
        with self._lock:
            attempts = 0
            while True:
                fresh = self._conn is None
                conn = self._conn if self._conn is not None else self._connect()
                try:
                    reply = self._send(conn, method, path, body, headers)
                except socket.timeout as exc:
                    conn.close()
                    self._conn = None
                    raise TransportTimeout(f"{method} {path} timed out") from exc
                except (http.client.HTTPException, OSError) as exc:
                    conn.close()
                    self._conn = None
                    if not fresh and attempts == 0:
                        attempts += 1  # stale keep-alive socket: retry once, fresh
                        continue
                    raise TransportError(f"{method} {path} failed: {exc}") from exc
                if self.reuse:
                    self._conn = conn
                else:
                    conn.close()
                    self._conn = None
                return reply

    def close(self) -> None:
        with self._lock:
            if self._conn is not None:
                self._conn.close()
                self._conn = None


class TransportPool:
    """Checkout/checkin pool of reusable transports, keyed by endpoint.

    Concurrent holders each get their own connection; released connections
    are kept for reuse by later requests to the same endpoint.
    """

    def __init__(self, *, timeout: float = 5.0):
        self.timeout = timeout
        self._idle: dict[tuple[str, str, int], list[HttpTransport]] = {}
        self._lock = threading.Lock()

    def acquire(self, scheme: str, host: str, port: int) -> HttpTransport:
        key = (scheme, host, port)
        with self._lock:
            bucket = self._idle.get(key)
            if bucket:
                return bucket.pop()
        return HttpTransport(host, port, scheme=scheme, reuse=True, timeout=self.timeout)

    def release(self, transport: HttpTransport) -> None:
        key = (transport.scheme, transport.host, transport.port)
        with self._lock:
            self._idle.setdefault(key, []).append(transport)

    def discard(self, transport: HttpTransport) -> None:
        transport.close()

    def request(
        self,
        scheme: str,
        host: str,
        port: int,
        method: str,
        path: str,
        body: bytes = b"",
        headers: dict[str, str] | None = None,
    ) -> HttpReply:
        transport = self.acquire(scheme, host, port)
        try:
            reply = transport.request(method, path, body, headers)
        except TransportError:
            self.discard(transport)
            raise
        self.release(transport)
        return reply

    def close(self) -> None:
        with self._lock:
            for bucket in self._idle.values():
                for transport in bucket:
                    transport.close()
            self._idle.clear()
