"""The oblivious target: decrypts queries, resolves them, seals answers.

The service never sees a client address (only the proxy connects to it) and
never logs one. Resolution goes through a TTL+LRU cache, then an upstream
DoH resolver chosen deterministically from the client's one-shot response
key so repeated experiments distribute queries the same way.
"""

from __future__ import annotations

import argparse
import logging
import sys
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass
from urllib.parse import urlsplit

from . import dnswire
from .configfile import env_overrides, load_kv_file
from .httpd import ServiceHandler, ServiceRunner
from .protocol import (
    DEFAULT_SUITE,
    DecryptFailure,
    MalformedDnsError,
    MalformedMessageError,
    MalformedPlaintextError,
    ProtocolError,
    TargetKeyPair,
    UnknownKeyIdError,
    derive_key_id,
    generate_key_pair,
    load_key_pairs,
    open_query,
    parse_message,
    save_key_pairs,
    seal_response,
    serialize_config_list,
    serialize_message,
)
from .transport import TransportError, TransportPool, TransportTimeout, split_host_port

log = logging.getLogger("odoh.target")

ODOH_CONTENT_TYPE = "application/oblivious-dns-message"
DNS_CONTENT_TYPE = "application/dns-message"

TTL_CLAMP_MIN_S = 1
TTL_CLAMP_MAX_S = 86_400


class UpstreamError(Exception):
    pass


class UpstreamUnreachable(UpstreamError):
    pass


class UpstreamTimeout(UpstreamError):
    pass


class UpstreamBadStatus(UpstreamError):
    pass


@dataclass
class TargetConfig:
    key_pairs: list[TargetKeyPair]
    upstream_resolvers: list[str]  # DoH URLs; `mock:<zone file>` resolves in-process
    cache_capacity: int = 10_000
    upstream_timeout_ms: float = 3_000.0
    injected_delay_ms: float = 0.0  # test-only: emulates the extra hop's two transits
    listen: str = "127.0.0.1:0"

    def __post_init__(self) -> None:
        if not self.key_pairs:
            raise ValueError("target needs at least one key pair")
        if not self.upstream_resolvers:
            raise ValueError("target needs at least one upstream resolver")
        if self.cache_capacity < 0:
            raise ValueError("cache capacity must be >= 0")


@dataclass
class CacheEntry:
    response_template: bytes
    expires_at: float  # monotonic deadline


class DnsCache:
    """TTL-bounded LRU keyed by (lowercased qname, qtype, qclass)."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._entries: OrderedDict[tuple, CacheEntry] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: tuple, now: float | None = None) -> bytes | None:
        now = time.monotonic() if now is None else now
        with self._lock:
            entry = self._entries.get(key)
            if entry is None or entry.expires_at <= now:
                if entry is not None:
                    del self._entries[key]
                self.misses += 1
                return None
            self._entries.move_to_end(key)
            self.hits += 1
            return entry.response_template

    def put(self, key: tuple, response: bytes, min_ttl: float, now: float | None = None) -> None:
        if self.capacity == 0:
            return
        now = time.monotonic() if now is None else now
        ttl = min(max(min_ttl, TTL_CLAMP_MIN_S), TTL_CLAMP_MAX_S)
        with self._lock:
            self._entries[key] = CacheEntry(response, now + ttl)
            self._entries.move_to_end(key)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def select_resolver(response_key: bytes, resolvers: list[str]) -> int:
    """Deterministic pick: first key byte mod resolver count."""
    if not resolvers:
        raise ValueError("no resolvers configured")
    return response_key[0] % len(resolvers)


class TargetCore:
    """Service logic, independent of HTTP plumbing (call handle_* directly in tests)."""

    def __init__(self, config: TargetConfig):
        self.config = config
        self.pairs_by_key_id = {derive_key_id(p.config): p for p in config.key_pairs}
        self.cache = DnsCache(config.cache_capacity)
        self.pool = TransportPool(timeout=config.upstream_timeout_ms / 1000.0)
        self._zones: dict[str, object] = {}
        self._counter_lock = threading.Lock()
        self.queries_total = 0
        self.decrypt_failures = 0

    def _bump(self, counter: str) -> None:
        with self._counter_lock:
            setattr(self, counter, getattr(self, counter) + 1)

    # -- upstream ----------------------------------------------------------

    def _mock_zone(self, url: str):
        from .bench.mockdns import Zone

        path = url[len("mock:") :]
        if path not in self._zones:
            self._zones[path] = Zone.from_file(path)
        return self._zones[path]

    def resolve_upstream(self, query: bytes, resolver_url: str, timeout_ms: float) -> bytes:
        if resolver_url.startswith("mock:"):
            from .bench.mockdns import resolve

            return resolve(self._mock_zone(resolver_url), query)
        parts = urlsplit(resolver_url)
        scheme = parts.scheme or "http"
        host, port = split_host_port(parts.netloc, 443 if scheme == "https" else 80)
        try:
            reply = self.pool.request(
                scheme,
                host,
                port,
                "POST",
                parts.path or "/dns-query",
                body=query,
                headers={"Content-Type": DNS_CONTENT_TYPE, "Accept": DNS_CONTENT_TYPE},
            )
        except TransportTimeout as exc:
            raise UpstreamTimeout(str(exc)) from exc
        except TransportError as exc:
            raise UpstreamUnreachable(str(exc)) from exc
        if reply.status != 200:
            raise UpstreamBadStatus(f"{resolver_url} answered {reply.status}")
        return reply.body

    def _resolve(self, dns_query: bytes, selector_byte: int) -> tuple[bytes, bool]:
        """Cache lookup, else upstream (selected resolver, then one fallback)."""
        msg_id, _, qname, qtype, qclass = dnswire.parse_query_info(dns_query)
        key = (qname.lower(), qtype, qclass)
        cached = self.cache.get(key)
        if cached is not None:
            served = dnswire.rewrite_id(dnswire.echo_question_casing(cached, dns_query), msg_id)
            return served, True
        resolvers = self.config.upstream_resolvers
        index = selector_byte % len(resolvers)
        attempts = [index] if len(resolvers) == 1 else [index, (index + 1) % len(resolvers)]
        last_error: UpstreamError | None = None
        response = None
        for i in attempts:
            try:
                response = self.resolve_upstream(
                    dns_query, resolvers[i], self.config.upstream_timeout_ms
                )
                break
            except UpstreamTimeout:
                raise
            except UpstreamError as exc:
                last_error = exc
        if response is None:
            raise last_error if last_error is not None else UpstreamUnreachable("no upstream")
        try:
            summary = dnswire.parse_response(response)
        except MalformedDnsError as exc:
            raise UpstreamBadStatus(f"unparseable upstream response: {exc}") from exc
        self.cache.put(key, response, summary.min_ttl)
        return response, False

    # -- handlers ----------------------------------------------------------

    def handle_odoh_request(self, body: bytes, content_type: str) -> tuple[int, str, bytes]:
        delay = self.config.injected_delay_ms / 1000.0
        if delay:
            time.sleep(delay)
        try:
            return self._handle_odoh(body, content_type)
        finally:
            if delay:
                time.sleep(delay)

    def _handle_odoh(self, body: bytes, content_type: str) -> tuple[int, str, bytes]:
        if content_type.split(";")[0].strip() != ODOH_CONTENT_TYPE:
            return 415, "text/plain", b"expected " + ODOH_CONTENT_TYPE.encode()
        try:
            msg = parse_message(body)
        except MalformedMessageError as exc:
            return 400, "text/plain", f"malformed message: {exc}".encode()
        pair = self.pairs_by_key_id.get(msg.key_id)
        if pair is None:
            return 401, "text/plain", b"unknown key id"
        try:
            dns_query, response_key = open_query(pair, msg)
        except (UnknownKeyIdError, DecryptFailure):
            self._bump("decrypt_failures")
            return 401, "text/plain", b"decrypt failure"
        except (MalformedPlaintextError, ProtocolError) as exc:
            return 400, "text/plain", f"bad query plaintext: {exc}".encode()
        try:
            _, qdcount, _, _, _ = dnswire.parse_query_info(dns_query)
            if qdcount != 1:
                raise MalformedDnsError("inner query must carry exactly one question")
        except MalformedDnsError as exc:
            return 400, "text/plain", f"malformed DNS query: {exc}".encode()
        self._bump("queries_total")
        try:
            response, _hit = self._resolve(dns_query, response_key[0])
        except UpstreamTimeout as exc:
            return 504, "text/plain", f"upstream timeout: {exc}".encode()
        except UpstreamError as exc:
            return 502, "text/plain", f"upstream failure: {exc}".encode()
        sealed = seal_response(response_key, pair.config.suite, response)
        return 200, ODOH_CONTENT_TYPE, serialize_message(sealed)

    def handle_cleartext_request(self, body: bytes, content_type: str) -> tuple[int, str, bytes]:
        """Relay an unencrypted DNS body through the same resolve pipeline.

        Measurement aid: isolates network cost from crypto cost. The resolver
        selector byte comes from the DNS message ID (no response key exists).
        """
        delay = self.config.injected_delay_ms / 1000.0
        if delay:
            time.sleep(delay)
        try:
            if content_type.split(";")[0].strip() != DNS_CONTENT_TYPE:
                return 415, "text/plain", b"expected " + DNS_CONTENT_TYPE.encode()
            try:
                msg_id, qdcount, _, _, _ = dnswire.parse_query_info(body)
                if qdcount != 1:
                    raise MalformedDnsError("query must carry exactly one question")
            except MalformedDnsError as exc:
                return 400, "text/plain", f"malformed DNS query: {exc}".encode()
            self._bump("queries_total")
            try:
                response, _hit = self._resolve(body, msg_id & 0xFF)
            except UpstreamTimeout as exc:
                return 504, "text/plain", f"upstream timeout: {exc}".encode()
            except UpstreamError as exc:
                return 502, "text/plain", f"upstream failure: {exc}".encode()
            return 200, DNS_CONTENT_TYPE, response
        finally:
            if delay:
                time.sleep(delay)

    def serve_configs(self) -> tuple[int, bytes]:
        blob = serialize_config_list([p.config for p in self.config.key_pairs])
        return 200, blob

    def metrics_text(self) -> str:
        return (
            f"queries_total {self.queries_total}\n"
            f"cache_hits {self.cache.hits}\n"
            f"cache_misses {self.cache.misses}\n"
            f"decrypt_failures {self.decrypt_failures}\n"
        )


class TargetServer:
    def __init__(self, config: TargetConfig):
        self.core = TargetCore(config)
        core = self.core

        class Handler(ServiceHandler):
            def do_POST(self):
                path = self.path.split("?")[0]
                body = self.read_body()
                ctype = self.headers.get("Content-Type", "")
                if path == "/dns-query":
                    status, out_type, out = core.handle_odoh_request(body, ctype)
                elif path == "/dns-query-cleartext":
                    status, out_type, out = core.handle_cleartext_request(body, ctype)
                else:
                    self.reply(404, b"not found")
                    return
                self.reply(status, out, content_type=out_type)

            def do_GET(self):
                if self.path == "/.well-known/odoh/configs":
                    status, blob = core.serve_configs()
                    self.reply(
                        status,
                        blob,
                        content_type="application/octet-stream",
                        extra_headers={"Cache-Control": "max-age=3600"},
                    )
                elif self.path == "/health":
                    self.reply(200, b"ok")
                elif self.path == "/metrics":
                    self.reply(200, core.metrics_text().encode())
                else:
                    self.reply(404, b"not found")

        self.runner = ServiceRunner(Handler, config.listen)

    @property
    def url(self) -> str:
        return self.runner.url

    @property
    def host_port(self) -> str:
        host, port = self.runner.address
        return f"{host}:{port}"

    def start(self) -> "TargetServer":
        self.runner.start()
        return self

    def stop(self) -> None:
        self.runner.stop()
        self.core.pool.close()


# ---------------------------------------------------------------------------
# CLI


def _config_from_sources(args) -> TargetConfig:
    values: dict[str, str] = {}
    if args.config:
        values = load_kv_file(args.config)
    values = env_overrides(values, "ODOH_TARGET_")

    listen = args.listen or values.get("listen", "127.0.0.1:8443")
    upstreams = args.upstream or [
        u.strip() for u in values.get("upstreams", "").split(",") if u.strip()
    ]
    key_file = args.key_file or values.get("key_file")
    if key_file:
        key_pairs = load_key_pairs(key_file)
    else:
        log.warning("no key file configured; generating an ephemeral key pair")
        key_pairs = [generate_key_pair(DEFAULT_SUITE)]
    return TargetConfig(
        key_pairs=key_pairs,
        upstream_resolvers=upstreams,
        cache_capacity=int(args.cache_capacity or values.get("cache_capacity", 10_000)),
        upstream_timeout_ms=float(args.timeout_ms or values.get("upstream_timeout_ms", 3_000)),
        injected_delay_ms=float(args.injected_delay_ms or values.get("injected_delay_ms", 0)),
        listen=listen,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="odoh-target", description=__doc__)
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--listen")
    parser.add_argument("--upstream", action="append", help="DoH resolver URL (repeatable)")
    parser.add_argument("--key-file")
    parser.add_argument("--cache-capacity", type=int)
    parser.add_argument("--timeout-ms", type=float)
    parser.add_argument("--injected-delay-ms", type=float)
    parser.add_argument(
        "--generate-key",
        metavar="PATH",
        help="write a fresh default-suite key pair to PATH and exit",
    )
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")

    if args.generate_key:
        save_key_pairs(args.generate_key, [generate_key_pair(DEFAULT_SUITE)])
        print(f"wrote key pair to {args.generate_key}")
        return 0

    config = _config_from_sources(args)
    server = TargetServer(config).start()
    log.info(
        "target on %s (%d key pair(s), %d upstream(s), cache %d)",
        server.url,
        len(config.key_pairs),
        len(config.upstream_resolvers),
        config.cache_capacity,
    )
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
