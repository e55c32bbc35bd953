"""dig-like client: discovery, route selection, queries through the relay.

A session owns one transport per proxy (kept alive across queries unless
reuse is disabled) and one discovered key config per target. Every query
draws a fresh one-shot response key; two queries never share crypto state.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import secrets
import statistics
import sys
import time
from dataclasses import dataclass

from . import dnswire
from .protocol import (
    DecryptFailure,
    ProtocolError,
    TargetKeyConfig,
    derive_key_id,
    open_response,
    parse_config_list,
    parse_message,
    seal_query,
    serialize_message,
)
from .transport import HttpTransport, TransportError, split_host_port

log = logging.getLogger("odoh.client")

ODOH_CONTENT_TYPE = "application/oblivious-dns-message"
DNS_CONTENT_TYPE = "application/dns-message"
CONFIG_WELL_KNOWN_PATH = "/.well-known/odoh/configs"
DISCOVERY_PROBE_NAME = "odoh.test"

STRATEGIES = ("random-pair", "fastest-proxy", "fastest-pair")


class ClientError(Exception):
    pass


class DiscoveryError(ClientError):
    pass


class NoSupportedSuiteError(DiscoveryError):
    pass


class ProbeFailedError(ClientError):
    pass


class VerifyFailure(ClientError):
    """0x20 echo did not match the sent casing."""


class HttpStatusError(ClientError):
    def __init__(self, status: int, body: bytes):
        super().__init__(f"HTTP {status}: {body[:120]!r}")
        self.status = status
        self.body = body


# ---------------------------------------------------------------------------
# Discovery


def discover_config(
    target_host: str,
    *,
    insecure_http: bool = False,
    preferred_suite=None,
    timeout: float = 5.0,
) -> TargetKeyConfig:
    """Fetch the target's published configs over HTTPS (well-known path).

    Fetches twice and verifies the derived key id is stable; on rotation
    between fetches, warns and uses the newest.
    """
    scheme = "http" if insecure_http else "https"
    host, port = split_host_port(target_host, 80 if insecure_http else 443)
    transport = HttpTransport(host, port, scheme=scheme, reuse=True, timeout=timeout)
    try:
        blobs = []
        for _ in range(2):
            try:
                reply = transport.request("GET", CONFIG_WELL_KNOWN_PATH)
            except TransportError as exc:
                raise DiscoveryError(f"config fetch from {target_host} failed: {exc}") from exc
            if reply.status != 200:
                raise DiscoveryError(f"config fetch from {target_host}: HTTP {reply.status}")
            blobs.append(reply.body)
    finally:
        transport.close()
    config = _pick_config(blobs[-1], preferred_suite)
    if blobs[0] != blobs[1]:
        try:
            previous = _pick_config(blobs[0], preferred_suite)
            stable = derive_key_id(previous) == derive_key_id(config)
        except DiscoveryError:
            stable = False
        if not stable:
            log.warning("target %s rotated configs between fetches; using newest", target_host)
    return config


def discover_config_dns(
    bootstrap_resolver_url: str,
    *,
    name: str = DISCOVERY_PROBE_NAME,
    preferred_suite=None,
    timeout: float = 5.0,
) -> TargetKeyConfig:
    """Discovery via a DNS HTTPS-record lookup through a bootstrap DoH resolver.

    No signature chain is validated on this path; callers must treat the
    result as unverified.
    """
    question = dnswire.DnsQuestion(name, qtype=dnswire.QTYPE_HTTPS)
    query = dnswire.build_query(question, secrets.randbits(16))
    transport = HttpTransport.from_url(bootstrap_resolver_url, reuse=False, timeout=timeout)
    from urllib.parse import urlsplit

    path = urlsplit(bootstrap_resolver_url).path or "/dns-query"
    try:
        reply = transport.request(
            "POST", path, body=query,
            headers={"Content-Type": DNS_CONTENT_TYPE, "Accept": DNS_CONTENT_TYPE},
        )
    except TransportError as exc:
        raise DiscoveryError(f"bootstrap resolver failed: {exc}") from exc
    finally:
        transport.close()
    if reply.status != 200:
        raise DiscoveryError(f"bootstrap resolver: HTTP {reply.status}")
    try:
        summary = dnswire.parse_response(reply.body)
    except ProtocolError as exc:
        raise DiscoveryError(f"bad discovery response: {exc}") from exc
    for record in summary.answers:
        if record.rtype == dnswire.QTYPE_HTTPS:
            return _pick_config(record.rdata, preferred_suite)
    raise DiscoveryError(f"no HTTPS record for {name} at {bootstrap_resolver_url}")


def _pick_config(blob: bytes, preferred_suite) -> TargetKeyConfig:
    try:
        configs = parse_config_list(blob)
    except ProtocolError as exc:
        raise DiscoveryError(f"unparseable config list: {exc}") from exc
    if not configs:
        raise NoSupportedSuiteError("config list offers no supported suite")
    if preferred_suite is not None:
        for config in configs:
            if config.suite == preferred_suite:
                return config
        raise NoSupportedSuiteError(f"target does not offer {preferred_suite}")
    return configs[0]


# ---------------------------------------------------------------------------
# Sessions and queries


@dataclass
class QueryTimings:
    seal_us: float
    rtt_ms: float
    open_us: float


@dataclass
class QueryResult:
    name: str
    qtype: int
    rcode: int
    answers: list[dict]
    timings: QueryTimings
    proxy: str
    target: str


class ClientSession:
    """One proxy/target pair plus its transport and discovered config."""

    def __init__(
        self,
        proxy_url: str,
        target_host: str,
        *,
        target_path: str = "/dns-query",
        config: TargetKeyConfig | None = None,
        reuse_connections: bool = True,
        insecure_http: bool = False,
        use_0x20: bool = False,
        timeout: float = 5.0,
        connect_cost_ms: float = 0.0,
        source_address: tuple[str, int] | None = None,
    ):
        self.proxy_url = proxy_url
        self.target_host = target_host
        self.target_path = target_path
        self.reuse_connections = reuse_connections
        self.insecure_http = insecure_http
        self.use_0x20 = use_0x20
        self.timeout = timeout
        self.config = config
        self.transport = HttpTransport.from_url(
            proxy_url,
            reuse=reuse_connections,
            timeout=timeout,
            connect_cost_ms=connect_cost_ms,
            source_address=source_address,
        )
        self.last_context = None  # inspectable by tests: per-query key freshness

    def ensure_config(self, preferred_suite=None) -> TargetKeyConfig:
        if self.config is None:
            self.config = discover_config(
                self.target_host,
                insecure_http=self.insecure_http,
                preferred_suite=preferred_suite,
                timeout=self.timeout,
            )
        return self.config

    def _proxy_path(self) -> str:
        return f"/proxy?targethost={self.target_host}&targetpath={self.target_path}"

    def query_once(self, name: str, qtype: int = dnswire.QTYPE_A) -> QueryResult:
        config = self.ensure_config()
        question = dnswire.DnsQuestion(name, qtype=qtype)
        dns_query = dnswire.build_query(question, secrets.randbits(16), use_0x20=self.use_0x20)

        t0 = time.perf_counter()
        msg, ctx = seal_query(config, dns_query)
        t1 = time.perf_counter()
        self.last_context = ctx
        reply = self.transport.request(
            "POST",
            self._proxy_path(),
            body=serialize_message(msg),
            headers={"Content-Type": ODOH_CONTENT_TYPE, "Accept": ODOH_CONTENT_TYPE},
        )
        t2 = time.perf_counter()
        if reply.status != 200:
            raise HttpStatusError(reply.status, reply.body)
        dns_response = open_response(ctx, parse_message(reply.body))
        t3 = time.perf_counter()
        if self.use_0x20 and not dnswire.verify_0x20(dns_query, dns_response):
            raise VerifyFailure(f"0x20 casing mismatch for {name}")
        summary = dnswire.parse_response(dns_response)
        answers = [
            {
                "name": r.name,
                "type": dnswire.QTYPE_NAMES.get(r.rtype, str(r.rtype)),
                "ttl": r.ttl,
                "data": dnswire.rdata_to_text(r.rtype, r.rdata),
            }
            for r in summary.answers
        ]
        return QueryResult(
            name=name,
            qtype=qtype,
            rcode=summary.rcode,
            answers=answers,
            timings=QueryTimings(
                seal_us=(t1 - t0) * 1e6,
                rtt_ms=(t2 - t1) * 1e3,
                open_us=(t3 - t2) * 1e6,
            ),
            proxy=self.proxy_url,
            target=self.target_host,
        )

    def close(self) -> None:
        self.transport.close()


# ---------------------------------------------------------------------------
# Route selection


@dataclass
class RouteSelection:
    strategy: str
    proxies: list[str]
    targets: list[str]
    probe_count: int
    chosen_proxy: str
    chosen_target: str
    probe_rtt_ms: float | None = None  # median RTT of the winning probe set
    fallback: bool = False  # all probes failed; degraded to random-pair


def probe_latency(
    proxy_url: str,
    target_host: str,
    count: int,
    *,
    config: TargetKeyConfig | None = None,
    insecure_http: bool = False,
    timeout: float = 5.0,
) -> float:
    """Median wall-clock ms over `count` full queries for the fixed probe name.

    Probing always asks for the same name so probes never leak real intent.
    Returns +inf when every attempt fails.
    """
    if count < 1:
        raise ValueError("probe count must be >= 1")
    samples = []
    session = ClientSession(
        proxy_url,
        target_host,
        config=config,
        reuse_connections=False,
        insecure_http=insecure_http,
        timeout=timeout,
    )
    try:
        for _ in range(count):
            start = time.perf_counter()
            try:
                session.query_once(DISCOVERY_PROBE_NAME)
            except (ClientError, TransportError, ProtocolError):
                continue
            samples.append((time.perf_counter() - start) * 1e3)
    finally:
        session.close()
    if not samples:
        return float("inf")
    return statistics.median(samples)


def select_route(
    strategy: str,
    proxies: list[str],
    targets: list[str],
    *,
    probe_count: int = 3,
    insecure_http: bool = False,
    timeout: float = 5.0,
    config_cache: dict | None = None,
    rng: random.Random | None = None,
) -> RouteSelection:
    """Pick a proxy/target pair.

    random-pair: uniform, no probing. fastest-proxy: probe every proxy
    against one random target, keep the argmin proxy and a random target.
    fastest-pair: probe the full cross product, keep the argmin pair.
    Ties break by list order; if every probe fails, fall back to random-pair.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r} (expected one of {STRATEGIES})")
    if not proxies or not targets:
        raise ValueError("proxy and target lists must be non-empty")
    rng = rng or random.Random()
    config_cache = config_cache if config_cache is not None else {}

    def config_for(target: str):
        if target not in config_cache:
            config_cache[target] = discover_config(target, insecure_http=insecure_http, timeout=timeout)
        return config_cache[target]

    def probe(proxy: str, target: str) -> float:
        try:
            config = config_for(target)
        except DiscoveryError:
            return float("inf")
        return probe_latency(
            proxy, target, probe_count,
            config=config, insecure_http=insecure_http, timeout=timeout,
        )

    if strategy == "random-pair":
        return RouteSelection(
            strategy, proxies, targets, probe_count,
            chosen_proxy=rng.choice(proxies), chosen_target=rng.choice(targets),
        )

    if strategy == "fastest-proxy":
        probe_target = rng.choice(targets)
        rtts = [(probe(p, probe_target), i) for i, p in enumerate(proxies)]
        best_rtt, best_index = min(rtts, key=lambda pair: (pair[0], pair[1]))
        if best_rtt == float("inf"):
            log.warning("all probes failed; falling back to random-pair")
            return RouteSelection(
                strategy, proxies, targets, probe_count,
                chosen_proxy=rng.choice(proxies), chosen_target=rng.choice(targets),
                fallback=True,
            )
        return RouteSelection(
            strategy, proxies, targets, probe_count,
            chosen_proxy=proxies[best_index], chosen_target=rng.choice(targets),
            probe_rtt_ms=best_rtt,
        )

    # fastest-pair
    rtts = [
        (probe(p, t), i, j)
        for i, p in enumerate(proxies)
        for j, t in enumerate(targets)
    ]
    best_rtt, best_i, best_j = min(rtts, key=lambda item: (item[0], item[1], item[2]))
    if best_rtt == float("inf"):
        log.warning("all probes failed; falling back to random-pair")
        return RouteSelection(
            strategy, proxies, targets, probe_count,
            chosen_proxy=rng.choice(proxies), chosen_target=rng.choice(targets),
            fallback=True,
        )
    return RouteSelection(
        strategy, proxies, targets, probe_count,
        chosen_proxy=proxies[best_i], chosen_target=targets[best_j],
        probe_rtt_ms=best_rtt,
    )


def parse_routes_file(path: str) -> tuple[list[str], list[str]]:
    """Route lists: one URL/host per line under [proxies] / [targets] sections."""
    proxies: list[str] = []
    targets: list[str] = []
    section = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.lower() == "[proxies]":
                section = proxies
            elif line.lower() == "[targets]":
                section = targets
            elif section is not None:
                section.append(line)
            else:
                raise ValueError(f"{path}: line {line!r} outside any section")
    return proxies, targets


# ---------------------------------------------------------------------------
# CLI


def _print_human(result: QueryResult, route: RouteSelection | None, unverified: bool) -> None:
    rcode_names = {0: "NOERROR", 2: "SERVFAIL", 3: "NXDOMAIN"}
    print(f";; rcode: {rcode_names.get(result.rcode, str(result.rcode))}")
    if unverified:
        print(";; WARNING: config discovered over DNS without signature validation (unverified)")
    if route is not None:
        note = " (fallback)" if route.fallback else ""
        print(f";; route [{route.strategy}{note}]: proxy={route.chosen_proxy} target={route.chosen_target}")
        if route.probe_rtt_ms is not None:
            print(f";; probe median: {route.probe_rtt_ms:.1f} ms")
    for answer in result.answers:
        print(f"{answer['name']}\t{answer['ttl']}\tIN\t{answer['type']}\t{answer['data']}")
    if not result.answers:
        print(";; no answers")
    t = result.timings
    print(f";; timings: seal {t.seal_us:.0f} us, network {t.rtt_ms:.2f} ms, open {t.open_us:.0f} us")


def run_dig(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(
        prog="odoh-dig", description="Resolve a name through an oblivious proxy/target pair."
    )
    parser.add_argument("name", help="hostname to resolve")
    parser.add_argument("qtype", nargs="?", default="A", help="record type (A, AAAA, TXT, HTTPS)")
    parser.add_argument("--proxy", help="proxy URL, e.g. https://proxy.example")
    parser.add_argument("--target", help="target host[:port]")
    parser.add_argument("--target-path", default="/dns-query")
    parser.add_argument("--routes", help="route list file with [proxies]/[targets] sections")
    parser.add_argument("--strategy", choices=STRATEGIES, default="random-pair")
    parser.add_argument("--probes", type=int, default=3, help="probe count per pair")
    parser.add_argument("--no-reuse", action="store_true", help="fresh connection per query")
    parser.add_argument("--use-0x20", action="store_true", help="randomize and verify name casing")
    parser.add_argument("--json", action="store_true", dest="as_json")
    parser.add_argument("--insecure-http", action="store_true", help="plain HTTP (loopback testing)")
    parser.add_argument(
        "--dnssec-less-discovery",
        action="store_true",
        help="discover the key config via a DNS HTTPS lookup (unverified)",
    )
    parser.add_argument("--bootstrap-resolver", help="DoH URL for --dnssec-less-discovery")
    parser.add_argument("--timeout", type=float, default=5.0)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    qtype = dnswire.QTYPE_IDS.get(args.qtype.upper())
    if qtype is None:
        print(f"unsupported qtype {args.qtype!r}", file=sys.stderr)
        return 2

    route = None
    if args.routes:
        proxies, targets = parse_routes_file(args.routes)
        if not proxies or not targets:
            print("routes file needs at least one proxy and one target", file=sys.stderr)
            return 2
        route = select_route(
            args.strategy, proxies, targets,
            probe_count=args.probes, insecure_http=args.insecure_http, timeout=args.timeout,
        )
        proxy_url, target_host = route.chosen_proxy, route.chosen_target
    elif args.proxy and args.target:
        proxy_url, target_host = args.proxy, args.target
    else:
        print("need --proxy and --target, or --routes", file=sys.stderr)
        return 2

    config = None
    unverified = False
    if args.dnssec_less_discovery:
        if not args.bootstrap_resolver:
            print("--dnssec-less-discovery needs --bootstrap-resolver", file=sys.stderr)
            return 2
        try:
            config = discover_config_dns(args.bootstrap_resolver, timeout=args.timeout)
            unverified = True
        except DiscoveryError as exc:
            print(f"discovery failed: {exc}", file=sys.stderr)
            return 1

    session = ClientSession(
        proxy_url,
        target_host,
        target_path=args.target_path,
        config=config,
        reuse_connections=not args.no_reuse,
        insecure_http=args.insecure_http,
        use_0x20=args.use_0x20,
        timeout=args.timeout,
    )
    try:
        result = session.query_once(args.name, qtype)
    except (ClientError, TransportError, ProtocolError) as exc:
        print(f"query failed: {exc}", file=sys.stderr)
        return 1
    finally:
        session.close()

    if args.as_json:
        payload = {
            "name": result.name,
            "qtype": args.qtype.upper(),
            "rcode": result.rcode,
            "answers": result.answers,
            "timings": {
                "seal_us": round(result.timings.seal_us, 1),
                "rtt_ms": round(result.timings.rtt_ms, 3),
                "open_us": round(result.timings.open_us, 1),
            },
            "route": {
                "proxy": result.proxy,
                "target": result.target,
                "strategy": route.strategy if route else "direct",
            },
        }
        if unverified:
            payload["discovery"] = "unverified"
        print(json.dumps(payload, indent=2))
    else:
        _print_human(result, route, unverified)
    return 0


def main() -> None:
    logging.basicConfig(level=logging.WARNING)
    sys.exit(run_dig(sys.argv[1:]))


if __name__ == "__main__":
    main()
