"""The oblivious relay: forwards opaque bodies to a client-chosen target.

The proxy reads nothing of the body beyond its length, strips every header
that could carry client identity, and never logs a peer address. Its only
defenses are structural: a content-type gate, an optional target allowlist,
a body size cap, and a per-client token bucket.
"""

from __future__ import annotations

import argparse
import logging
import sys
import threading
import time
from dataclasses import dataclass
from typing import Mapping

from .configfile import env_overrides, load_kv_file
from .httpd import ServiceHandler, ServiceRunner
from .transport import TransportError, TransportPool, TransportTimeout, split_host_port

log = logging.getLogger("odoh.proxy")

ODOH_CONTENT_TYPE = "application/oblivious-dns-message"
DNS_CONTENT_TYPE = "application/dns-message"
# Both DNS payload types relay; pdoh/cleartext baselines ride the same proxy.
RELAYABLE_CONTENT_TYPES = frozenset({ODOH_CONTENT_TYPE, DNS_CONTENT_TYPE})

USER_AGENT = "odoh-proxy/0.1"

# Inbound headers that may influence the outbound request. Everything else
# (Forwarded, X-Forwarded-For, X-Real-IP, Via, Cookie, Authorization, ...)
# is dropped, not blocklisted: an allowlist cannot miss a new identity header.
FORWARDABLE_HEADERS = ("content-type", "accept")


@dataclass
class ProxyConfig:
    listen: str = "127.0.0.1:0"
    allowed_targets: list[str] | None = None  # None: any target
    rate_limit_per_minute: float = 300.0
    burst: int = 50
    forward_timeout_ms: float = 3_000.0
    injected_delay_ms: float = 0.0  # test-only: emulates the hop's two transits
    insecure_http: bool = False  # loopback/integration testing only
    max_body_bytes: int = 8_192

    def __post_init__(self) -> None:
        if self.rate_limit_per_minute <= 0:
            raise ValueError("rate limit must be positive")
        if self.burst < 1:
            raise ValueError("burst must be >= 1")


@dataclass
class _Bucket:
    tokens: float
    updated: float


class RateLimiter:
    """Per-address token bucket: capacity = burst, refill = rate/60 per second."""

    def __init__(self, rate_per_minute: float, burst: int):
        self.rate_per_second = rate_per_minute / 60.0
        self.burst = float(burst)
        self._buckets: dict[str, _Bucket] = {}
        self._lock = threading.Lock()

    def check(self, client_addr: str, now: float | None = None) -> bool:
        now = time.monotonic() if now is None else now
        with self._lock:
            bucket = self._buckets.get(client_addr)
            if bucket is None:
                bucket = _Bucket(tokens=self.burst, updated=now)
                self._buckets[client_addr] = bucket
            else:
                elapsed = max(0.0, now - bucket.updated)
                bucket.tokens = min(self.burst, bucket.tokens + elapsed * self.rate_per_second)
                bucket.updated = now
            if bucket.tokens >= 1.0:
                bucket.tokens -= 1.0
                return True
            return False

    def tokens(self, client_addr: str) -> float:
        with self._lock:
            bucket = self._buckets.get(client_addr)
            return self.burst if bucket is None else bucket.tokens


def sanitize_headers(inbound: Mapping[str, str]) -> dict[str, str]:
    """Outbound header set: Content-Type/Accept passthrough + fixed User-Agent.

    Host and Content-Length are supplied by the transport from the actual
    target and body; nothing here may derive from the client address.
    """
    lowered = {k.lower(): v for k, v in inbound.items()}
    out = {}
    for name in FORWARDABLE_HEADERS:
        if name in lowered:
            out[name.title()] = lowered[name]
    out["User-Agent"] = USER_AGENT
    return out


class ProxyCore:
    def __init__(self, config: ProxyConfig):
        self.config = config
        self.limiter = RateLimiter(config.rate_limit_per_minute, config.burst)
        self.pool = TransportPool(timeout=config.forward_timeout_ms / 1000.0)
        self._counter_lock = threading.Lock()
        self.forwards_total = 0
        self.rate_limited_total = 0
        self.upstream_errors_total = 0

    def _bump(self, counter: str) -> None:
        with self._counter_lock:
            setattr(self, counter, getattr(self, counter) + 1)

    def handle_proxy_request(
        self,
        query_params: Mapping[str, str],
        body: bytes | None,
        inbound_headers: Mapping[str, str],
        client_addr: str,
    ) -> tuple[int, str, bytes]:
        delay = self.config.injected_delay_ms / 1000.0
        if delay:
            time.sleep(delay)
        try:
            return self._handle(query_params, body, inbound_headers, client_addr)
        finally:
            if delay:
                time.sleep(delay)

    def _handle(self, query_params, body, inbound_headers, client_addr) -> tuple[int, str, bytes]:
        lowered = {k.lower(): v for k, v in inbound_headers.items()}
        content_type = lowered.get("content-type", "").split(";")[0].strip()
        if content_type not in RELAYABLE_CONTENT_TYPES:
            return 415, "text/plain", b"unsupported content type"
        targethost = query_params.get("targethost", "")
        targetpath = query_params.get("targetpath", "")
        if not targethost or not targetpath:
            return 400, "text/plain", b"missing targethost or targetpath"
        if not targetpath.startswith("/"):
            return 400, "text/plain", b"targetpath must be absolute"
        if self.config.allowed_targets is not None:
            hostname = targethost.rsplit(":", 1)[0].lower()
            if hostname not in {t.lower() for t in self.config.allowed_targets}:
                return 403, "text/plain", b"target not allowed"
        if not self.limiter.check(client_addr):
            self._bump("rate_limited_total")
            return 429, "text/plain", b"rate limited"
        if body is None:
            return 413, "text/plain", b"body too large"

        scheme = "http" if self.config.insecure_http else "https"
        host, port = split_host_port(targethost, 80 if scheme == "http" else 443)
        try:
            reply = self.pool.request(
                scheme,
                host,
                port,
                "POST",
                targetpath,
                body=body,
                headers=sanitize_headers(inbound_headers),
            )
        except TransportTimeout:
            self._bump("upstream_errors_total")
            return 504, "text/plain", b"target timeout"
        except TransportError:
            self._bump("upstream_errors_total")
            return 502, "text/plain", b"target unreachable"
        self._bump("forwards_total")
        return reply.status, reply.headers.get("content-type", "application/octet-stream"), reply.body

    def metrics_text(self) -> str:
        return (
            f"forwards_total {self.forwards_total}\n"
            f"rate_limited_total {self.rate_limited_total}\n"
            f"upstream_errors_total {self.upstream_errors_total}\n"
        )


class ProxyServer:
    def __init__(self, config: ProxyConfig):
        self.core = ProxyCore(config)
        core = self.core

        class Handler(ServiceHandler):
            def do_POST(self):
                from urllib.parse import parse_qsl, urlsplit

                parts = urlsplit(self.path)
                if parts.path != "/proxy":
                    self.reply(404, b"not found")
                    return
                params = dict(parse_qsl(parts.query))
                body = self.read_body(cap=core.config.max_body_bytes)
                status, ctype, out = core.handle_proxy_request(
                    params, body, dict(self.headers.items()), self.client_address[0]
                )
                self.reply(status, out, content_type=ctype)

            def do_GET(self):
                if self.path == "/health":
                    self.reply(200, b"ok")
                elif self.path == "/metrics":
                    self.reply(200, core.metrics_text().encode())
                else:
                    self.reply(404, b"not found")

        self.runner = ServiceRunner(Handler, config.listen)

    @property
    def url(self) -> str:
        return self.runner.url

    def start(self) -> "ProxyServer":
        self.runner.start()
        return self

    def stop(self) -> None:
        self.runner.stop()
        self.core.pool.close()


# ---------------------------------------------------------------------------
# CLI


def _config_from_sources(args) -> ProxyConfig:
    values: dict[str, str] = {}
    if args.config:
        values = load_kv_file(args.config)
    values = env_overrides(values, "ODOH_PROXY_")

    allowed = args.allow_target or [
        t.strip() for t in values.get("allowed_targets", "").split(",") if t.strip()
    ]
    return ProxyConfig(
        listen=args.listen or values.get("listen", "127.0.0.1:8080"),
        allowed_targets=allowed or None,
        rate_limit_per_minute=float(args.rate_limit or values.get("rate_limit_per_minute", 300)),
        burst=int(args.burst or values.get("burst", 50)),
        forward_timeout_ms=float(args.timeout_ms or values.get("forward_timeout_ms", 3_000)),
        injected_delay_ms=float(args.injected_delay_ms or values.get("injected_delay_ms", 0)),
        insecure_http=args.insecure_http or values.get("insecure_http", "") == "true",
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="odoh-proxy", description=__doc__)
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--listen")
    parser.add_argument("--allow-target", action="append", help="allowlisted target hostname")
    parser.add_argument("--rate-limit", type=float, help="requests/minute per client address")
    parser.add_argument("--burst", type=int)
    parser.add_argument("--timeout-ms", type=float)
    parser.add_argument("--injected-delay-ms", type=float)
    parser.add_argument(
        "--insecure-http",
        action="store_true",
        help="forward to targets over plain HTTP (loopback testing)",
    )
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")

    config = _config_from_sources(args)
    server = ProxyServer(config).start()
    log.info(
        "proxy on %s (rate %.0f/min burst %d, targets: %s)",
        server.url,
        config.rate_limit_per_minute,
        config.burst,
        "any" if config.allowed_targets is None else ",".join(config.allowed_targets),
    )
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
