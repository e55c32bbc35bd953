"""C x N @ R load generation across the protocol modes.

Workers run concurrently, pace themselves at R queries/minute with +-10%
jitter, sample domains uniformly with replacement, and push one sample per
attempted query (failures included, status recorded) into a shared sink.
"""

from __future__ import annotations

import random
import secrets
import threading
import time
from dataclasses import dataclass, field
from urllib.parse import urlsplit

from ..client import (
    ClientError,
    ClientSession,
    DNS_CONTENT_TYPE,
    HttpStatusError,
    discover_config,
)
from ..dnswire import DnsQuestion, build_query
from ..protocol import ProtocolError
from ..transport import HttpTransport, TransportError, split_host_port
from .report import BenchReport, LatencySample, summarize

MODES = ("doh", "pdoh", "odoh", "cleartext-odoh", "odoh-coloc")


class EndpointUnreachableError(Exception):
    pass


@dataclass
class BenchConfig:
    mode: str
    clients: int  # C
    queries_per_client: int  # N
    rate_per_minute: float  # R
    domains: list[str] = field(default_factory=list)
    reuse_connections: bool = True
    proxy_url: str | None = None
    target_host: str | None = None
    coloc_target_host: str | None = None
    resolver_url: str | None = None
    target_path: str = "/dns-query"
    cleartext_path: str = "/dns-query-cleartext"
    insecure_http: bool = False
    connect_cost_ms: float = 0.0
    jitter: float = 0.10
    timeout: float = 5.0
    seed: int | None = None
    # best-effort cache-hit attribution via target metrics deltas; only
    # meaningful with a single sequential client
    scrape_cache_hits: bool = False
    # injected per-hop delays, carried for the record (services apply them)
    delay_proxy_ms: float = 0.0
    delay_target_ms: float = 0.0
    delay_resolver_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r} (expected one of {MODES})")
        if self.clients < 1 or self.queries_per_client < 1 or self.rate_per_minute < 1:
            raise ValueError("clients, queries per client, and rate must all be >= 1")
        if not self.domains:
            raise ValueError("domain list is empty")
        needs = {
            "doh": ("resolver_url",),
            "pdoh": ("proxy_url", "resolver_url"),
            "cleartext-odoh": ("proxy_url", "target_host"),
            "odoh": ("proxy_url", "target_host"),
            "odoh-coloc": ("proxy_url",),
        }[self.mode]
        for name in needs:
            if not getattr(self, name):
                raise ValueError(f"mode {self.mode} needs {name}")
        if self.mode == "odoh-coloc" and not (self.coloc_target_host or self.target_host):
            raise ValueError("mode odoh-coloc needs coloc_target_host or target_host")


def load_domains_file(path: str) -> list[str]:
    with open(path, encoding="ascii") as fh:
        names = [line.strip() for line in fh if line.strip() and not line.startswith("#")]
    if not names:
        raise ValueError(f"no domains in {path}")
    return names


def _mode_target_host(cfg: BenchConfig) -> str | None:
    if cfg.mode == "odoh-coloc":
        return cfg.coloc_target_host or cfg.target_host
    return cfg.target_host


def _check_reachable(url_or_host: str, insecure: bool, timeout: float) -> None:
    if "://" in url_or_host:
        transport = HttpTransport.from_url(url_or_host, reuse=False, timeout=timeout)
        path = "/health"
    else:
        scheme = "http" if insecure else "https"
        host, port = split_host_port(url_or_host, 80 if insecure else 443)
        transport = HttpTransport(host, port, scheme=scheme, reuse=False, timeout=timeout)
        path = "/health"
    try:
        transport.request("GET", path)  # any HTTP status proves reachability
    except TransportError as exc:
        raise EndpointUnreachableError(f"{url_or_host}: {exc}") from exc
    finally:
        transport.close()


def preflight(cfg: BenchConfig) -> None:
    endpoints: list[str] = []
    if cfg.mode in ("pdoh", "cleartext-odoh", "odoh", "odoh-coloc"):
        endpoints.append(cfg.proxy_url)
    if cfg.mode in ("doh", "pdoh"):
        endpoints.append(cfg.resolver_url)
    if cfg.mode in ("cleartext-odoh", "odoh", "odoh-coloc"):
        endpoints.append(_mode_target_host(cfg))
    for endpoint in endpoints:
        _check_reachable(endpoint, cfg.insecure_http, cfg.timeout)


class _Sink:
    def __init__(self):
        self._samples: list[LatencySample] = []
        self._lock = threading.Lock()

    def append(self, sample: LatencySample) -> None:
        with self._lock:
            self._samples.append(sample)

    def drain(self) -> list[LatencySample]:
        with self._lock:
            return sorted(self._samples, key=lambda s: s.timestamp)


class _Worker:
    def __init__(self, cfg: BenchConfig, worker_id: int, sink: _Sink, shared_config):
        self.cfg = cfg
        self.sink = sink
        self.rng = random.Random(None if cfg.seed is None else cfg.seed + worker_id)
        self.session: ClientSession | None = None
        self.transport: HttpTransport | None = None
        self.metrics_transport: HttpTransport | None = None
        self.path = "/"
        self.headers: dict[str, str] = {}
        mode = cfg.mode

        if cfg.scrape_cache_hits and cfg.clients == 1 and mode in ("odoh", "odoh-coloc"):
            scheme = "http" if cfg.insecure_http else "https"
            host, port = split_host_port(_mode_target_host(cfg), 80 if cfg.insecure_http else 443)
            self.metrics_transport = HttpTransport(
                host, port, scheme=scheme, reuse=True, timeout=cfg.timeout
            )

        if mode in ("odoh", "odoh-coloc"):
            self.session = ClientSession(
                cfg.proxy_url,
                _mode_target_host(cfg),
                target_path=cfg.target_path,
                config=shared_config,
                reuse_connections=cfg.reuse_connections,
                insecure_http=cfg.insecure_http,
                timeout=cfg.timeout,
                connect_cost_ms=cfg.connect_cost_ms,
            )
        elif mode == "doh":
            parts = urlsplit(cfg.resolver_url)
            self.transport = HttpTransport.from_url(
                cfg.resolver_url, reuse=cfg.reuse_connections,
                timeout=cfg.timeout, connect_cost_ms=cfg.connect_cost_ms,
            )
            self.path = parts.path or "/dns-query"
            self.headers = {"Content-Type": DNS_CONTENT_TYPE, "Accept": DNS_CONTENT_TYPE}
        elif mode == "pdoh":
            parts = urlsplit(cfg.resolver_url)
            resolver_host = parts.netloc
            resolver_path = parts.path or "/dns-query"
            self.transport = HttpTransport.from_url(
                cfg.proxy_url, reuse=cfg.reuse_connections,
                timeout=cfg.timeout, connect_cost_ms=cfg.connect_cost_ms,
            )
            self.path = f"/proxy?targethost={resolver_host}&targetpath={resolver_path}"
            self.headers = {"Content-Type": DNS_CONTENT_TYPE, "Accept": DNS_CONTENT_TYPE}
        elif mode == "cleartext-odoh":
            self.transport = HttpTransport.from_url(
                cfg.proxy_url, reuse=cfg.reuse_connections,
                timeout=cfg.timeout, connect_cost_ms=cfg.connect_cost_ms,
            )
            self.path = f"/proxy?targethost={cfg.target_host}&targetpath={cfg.cleartext_path}"
            self.headers = {"Content-Type": DNS_CONTENT_TYPE, "Accept": DNS_CONTENT_TYPE}

    def _one_query(self, domain: str) -> tuple[int, float, float]:
        """(http_status, seal_us, open_us); status 0 on transport-level failure."""
        if self.session is not None:
            try:
                result = self.session.query_once(domain)
                return 200, result.timings.seal_us, result.timings.open_us
            except HttpStatusError as exc:
                return exc.status, 0.0, 0.0
            except (TransportError, ProtocolError, ClientError):
                return 0, 0.0, 0.0
        query = build_query(DnsQuestion(domain), secrets.randbits(16))
        try:
            reply = self.transport.request("POST", self.path, query, self.headers)
            return reply.status, 0.0, 0.0
        except TransportError:
            return 0, 0.0, 0.0

    def _cache_hits_counter(self) -> int | None:
        try:
            reply = self.metrics_transport.request("GET", "/metrics")
        except TransportError:
            return None
        for line in reply.body.decode(errors="replace").splitlines():
            if line.startswith("cache_hits "):
                return int(line.split()[1])
        return None

    def run(self) -> None:
        cfg = self.cfg
        interval = 60.0 / cfg.rate_per_minute
        next_send = time.perf_counter()
        for _ in range(cfg.queries_per_client):
            now = time.perf_counter()
            if now < next_send:
                time.sleep(next_send - now)
            domain = self.rng.choice(cfg.domains)
            hits_before = self._cache_hits_counter() if self.metrics_transport else None
            start = time.perf_counter()
            status, seal_us, open_us = self._one_query(domain)
            total_ms = (time.perf_counter() - start) * 1e3
            cache_hit = None
            if hits_before is not None:
                hits_after = self._cache_hits_counter()
                if hits_after is not None:
                    cache_hit = hits_after > hits_before
            self.sink.append(
                LatencySample(
                    timestamp=time.time(),
                    mode=cfg.mode,
                    domain=domain,
                    total_ms=total_ms,
                    seal_us=seal_us,
                    open_us=open_us,
                    http_status=status,
                    cache_hit=cache_hit,
                )
            )
            jitter = self.rng.uniform(1.0 - cfg.jitter, 1.0 + cfg.jitter)
            next_send += interval * jitter

    def close(self) -> None:
        if self.session is not None:
            self.session.close()
        if self.transport is not None:
            self.transport.close()
        if self.metrics_transport is not None:
            self.metrics_transport.close()


def run_load(cfg: BenchConfig) -> tuple[BenchReport, list[LatencySample]]:
    """Run the configured load; returns (report, one sample per attempted query)."""
    preflight(cfg)
    shared_config = None
    if cfg.mode in ("odoh", "odoh-coloc"):
        # one discovery up front; workers share the published config
        shared_config = discover_config(
            _mode_target_host(cfg), insecure_http=cfg.insecure_http, timeout=cfg.timeout
        )
    sink = _Sink()
    workers = [_Worker(cfg, i, sink, shared_config) for i in range(cfg.clients)]
    threads = [threading.Thread(target=w.run, daemon=True) for w in workers]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    for worker in workers:
        worker.close()
    samples = sink.drain()
    return summarize(samples), samples
