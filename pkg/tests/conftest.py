"""Shared fixtures: loopback stack components with per-test teardown."""

import threading

import pytest

from odoh.bench.mockdns import MockResolverServer, Zone
from odoh.httpd import ServiceHandler, ServiceRunner
from odoh.protocol import DEFAULT_SUITE, generate_key_pair
from odoh.proxy import ProxyConfig, ProxyServer
from odoh.target import TargetConfig, TargetServer

ZONE_LINES = [
    "example.com A 300 93.184.216.34",
    "odoh.test A 60 127.0.0.1",
    "short-ttl.test A 1 10.0.0.9",
    "multi.test A 300 10.0.0.2",
    "multi.test A 60 10.0.0.3",
    "txt.test TXT 120 hello-world",
]


@pytest.fixture
def zone_file(tmp_path):
    path = tmp_path / "zone.txt"
    path.write_text("\n".join(ZONE_LINES) + "\n")
    return str(path)


@pytest.fixture
def zone(zone_file):
    return Zone.from_file(zone_file)


@pytest.fixture
def stack(zone_file):
    """Factory for resolver/target/proxy trios; everything stopped at teardown."""

    class Stack:
        def __init__(self):
            self._services = []

        def resolver(self, delay_ms=0.0) -> MockResolverServer:
            service = MockResolverServer(Zone.from_file(zone_file), delay_ms=delay_ms).start()
            self._services.append(service)
            return service

        def target(
            self,
            upstreams,
            *,
            key_pairs=None,
            suites=(DEFAULT_SUITE,),
            cache_capacity=10_000,
            timeout_ms=3_000.0,
            delay_ms=0.0,
        ) -> TargetServer:
            pairs = key_pairs or [generate_key_pair(s) for s in suites]
            server = TargetServer(
                TargetConfig(
                    key_pairs=pairs,
                    upstream_resolvers=list(upstreams),
                    cache_capacity=cache_capacity,
                    upstream_timeout_ms=timeout_ms,
                    injected_delay_ms=delay_ms,
                )
            ).start()
            self._services.append(server)
            return server

        def proxy(
            self,
            *,
            rate_limit=60_000.0,
            burst=100_000,
            allowed_targets=None,
            timeout_ms=3_000.0,
            delay_ms=0.0,
            max_body_bytes=8_192,
        ) -> ProxyServer:
            server = ProxyServer(
                ProxyConfig(
                    allowed_targets=allowed_targets,
                    rate_limit_per_minute=rate_limit,
                    burst=burst,
                    forward_timeout_ms=timeout_ms,
                    injected_delay_ms=delay_ms,
                    insecure_http=True,
                    max_body_bytes=max_body_bytes,
                )
            ).start()
            self._services.append(server)
            return server

        def stop_all(self):
            for service in reversed(self._services):
                service.stop()
            self._services.clear()

    stack = Stack()
    yield stack
    stack.stop_all()


class RecordingTarget:
    """Stub HTTP endpoint that records raw inbound requests byte-for-byte."""

    def __init__(self, status=200, body=b"stub-response", content_type="application/oblivious-dns-message"):
        self.requests = []  # (request line, header bytes, body)
        self._lock = threading.Lock()
        outer = self

        class Handler(ServiceHandler):
            def do_POST(self):
                raw_headers = self.headers.as_bytes()
                payload = self.read_body()
                with outer._lock:
                    outer.requests.append((self.requestline.encode(), raw_headers, payload))
                self.reply(status, body, content_type=content_type)

        self.runner = ServiceRunner(Handler)

    @property
    def host_port(self) -> str:
        host, port = self.runner.address
        return f"{host}:{port}"

    def start(self):
        self.runner.start()
        return self

    def stop(self):
        self.runner.stop()


@pytest.fixture
def recording_target():
    target = RecordingTarget().start()
    yield target
    target.stop()
