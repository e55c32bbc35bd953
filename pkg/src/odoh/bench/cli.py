"""Benchmark CLI.

Load modes (doh/pdoh/odoh/cleartext-odoh/odoh-coloc) drive whatever
endpoints you point them at; any endpoint left unspecified is spawned as a
hermetic loopback service (mock resolver from --zone or a zone synthesized
from the domain list, target, proxy) with the requested injected delays.
Reports (CSV, summary, CDF tables, CDF figure) land in --out.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys

from ..protocol import CipherSuite, DEFAULT_SUITE, generate_key_pair
from .load import BenchConfig, MODES, load_domains_file, run_load
from .micro import micro_crypto_bench, micro_size_bench
from .report import emit_report

log = logging.getLogger("odoh.bench")

_KEM_TOKENS = {"x25519": 0x0020, "x448": 0x0021, "p256": 0x0010, "p521": 0x0012}
_KDF_TOKENS = {"sha256": 0x0001, "sha384": 0x0002, "sha512": 0x0003}
_AEAD_TOKENS = {"aes128gcm": 0x0001, "aes256gcm": 0x0002, "chacha20poly1305": 0x0003}


def parse_suite(text: str) -> CipherSuite:
    """`kem-kdf-aead`, e.g. x25519-sha256-aes128gcm."""
    try:
        kem, kdf, aead = text.lower().split("-")
        return CipherSuite(_KEM_TOKENS[kem], _KDF_TOKENS[kdf], _AEAD_TOKENS[aead])
    except (ValueError, KeyError) as exc:
        raise argparse.ArgumentTypeError(
            f"bad suite {text!r}; expected kem-kdf-aead like x25519-sha256-aes128gcm"
        ) from exc


def synthesize_zone(domains: list[str], path: str) -> str:
    """Deterministic A records for every domain (hash-derived 10.x.y.z)."""
    lines = []
    for name in sorted(set(domains) | {"odoh.test"}):
        digest = hashlib.sha256(name.encode()).digest()
        lines.append(f"{name} A 300 10.{digest[0]}.{digest[1]}.{digest[2]}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


class SpawnedStack:
    """Loopback services standing in for endpoints the caller did not supply."""

    def __init__(self):
        self.services = []

    def spawn_missing(self, args, domains: list[str], out_dir: str) -> dict[str, str]:
        from ..proxy import ProxyConfig, ProxyServer
        from ..target import TargetConfig, TargetServer
        from .mockdns import MockResolverServer, Zone

        endpoints = {
            "resolver_url": args.resolver,
            "target_host": args.target,
            "coloc_target_host": args.coloc_target,
            "proxy_url": args.proxy,
        }
        zone_path = args.zone
        need_resolver = not args.resolver and args.mode in ("doh", "pdoh", "cleartext-odoh", "odoh")
        need_target = not args.target and args.mode in ("cleartext-odoh", "odoh")
        need_coloc = not args.coloc_target and not args.target and args.mode == "odoh-coloc"
        need_proxy = not args.proxy and args.mode != "doh"

        if (need_resolver or need_coloc) and not zone_path:
            zone_path = synthesize_zone(domains, os.path.join(out_dir, "zone.synth.txt"))
            log.info("synthesized zone at %s", zone_path)

        if need_resolver:
            resolver = MockResolverServer(
                Zone.from_file(zone_path), delay_ms=args.delay_resolver
            ).start()
            self.services.append(resolver)
            endpoints["resolver_url"] = resolver.url
            log.info("spawned mock resolver at %s", resolver.url)

        key_pairs = [generate_key_pair(DEFAULT_SUITE)]
        if need_target:
            target = TargetServer(
                TargetConfig(
                    key_pairs=key_pairs,
                    upstream_resolvers=[endpoints["resolver_url"]],
                    injected_delay_ms=args.delay_target,
                )
            ).start()
            self.services.append(target)
            endpoints["target_host"] = target.host_port
            log.info("spawned target at %s", target.url)
        if need_coloc:
            coloc = TargetServer(
                TargetConfig(
                    key_pairs=key_pairs,
                    upstream_resolvers=[f"mock:{zone_path}"],
                    injected_delay_ms=args.delay_target,
                )
            ).start()
            self.services.append(coloc)
            endpoints["coloc_target_host"] = coloc.host_port
            log.info("spawned co-located target at %s", coloc.url)
        if need_proxy:
            proxy = ProxyServer(
                ProxyConfig(
                    rate_limit_per_minute=1_000_000,
                    burst=1_000_000,
                    injected_delay_ms=args.delay_proxy,
                    insecure_http=True,
                )
            ).start()
            self.services.append(proxy)
            endpoints["proxy_url"] = proxy.url
            log.info("spawned proxy at %s", proxy.url)
        return endpoints

    def stop(self) -> None:
        for service in reversed(self.services):
            service.stop()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="odoh-bench", description=__doc__)
    parser.add_argument(
        "--mode", required=True, choices=list(MODES) + ["micro-crypto", "micro-size"]
    )
    parser.add_argument("-C", "--clients", type=int, default=1)
    parser.add_argument("-N", "--queries", type=int, default=10)
    parser.add_argument("-R", "--rate", type=float, default=600.0, help="queries/minute per client")
    parser.add_argument("--domains", help="file with one domain per line")
    parser.add_argument("--proxy", help="proxy URL")
    parser.add_argument("--target", help="target host[:port]")
    parser.add_argument("--coloc-target", help="co-located target host[:port]")
    parser.add_argument("--resolver", help="DoH resolver URL")
    parser.add_argument("--no-reuse", action="store_true")
    parser.add_argument("--delay-proxy", type=float, default=0.0, metavar="MS")
    parser.add_argument("--delay-target", type=float, default=0.0, metavar="MS")
    parser.add_argument("--delay-resolver", type=float, default=0.0, metavar="MS")
    parser.add_argument("--connect-cost", type=float, default=0.0, metavar="MS",
                        help="injected per-new-connection cost")
    parser.add_argument("--zone", help="zone file for spawned mock resolver")
    parser.add_argument("--out", required=True, help="report directory")
    parser.add_argument("--suite", type=parse_suite, default=DEFAULT_SUITE,
                        help="cipher suite for micro benches (kem-kdf-aead)")
    parser.add_argument("--iterations", type=int, default=10_000, help="micro-crypto iterations")
    parser.add_argument("--insecure-http", action="store_true",
                        help="talk plain HTTP to externally supplied endpoints")
    parser.add_argument("--seed", type=int, help="domain sampling seed")
    parser.add_argument("--no-figure", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    os.makedirs(args.out, exist_ok=True)

    if args.mode == "micro-crypto":
        results = micro_crypto_bench(args.suite, args.iterations)
        lines = [f"suite {args.suite}"] + [f"{k} {v:.1f}" for k, v in results.items()]
        text = "\n".join(lines) + "\n"
        with open(os.path.join(args.out, "micro_crypto.txt"), "w") as fh:
            fh.write(text)
        print(text, end="")
        return 0

    if args.mode == "micro-size":
        if not args.domains:
            parser.error("--mode micro-size needs --domains")
        results = micro_size_bench(args.domains, args.suite)
        lines = [f"suite {args.suite}"] + [f"{k} {v:.2f}" for k, v in results.items()]
        text = "\n".join(lines) + "\n"
        with open(os.path.join(args.out, "micro_size.txt"), "w") as fh:
            fh.write(text)
        print(text, end="")
        return 0

    if not args.domains:
        parser.error("load modes need --domains")
    domains = load_domains_file(args.domains)

    stack = SpawnedStack()
    try:
        endpoints = stack.spawn_missing(args, domains, args.out)
        spawned_any = bool(stack.services)
        cfg = BenchConfig(
            mode=args.mode,
            clients=args.clients,
            queries_per_client=args.queries,
            rate_per_minute=args.rate,
            domains=domains,
            reuse_connections=not args.no_reuse,
            proxy_url=endpoints["proxy_url"],
            target_host=endpoints["target_host"],
            coloc_target_host=endpoints["coloc_target_host"],
            resolver_url=endpoints["resolver_url"],
            insecure_http=args.insecure_http or spawned_any,
            connect_cost_ms=args.connect_cost,
            seed=args.seed,
            delay_proxy_ms=args.delay_proxy,
            delay_target_ms=args.delay_target,
            delay_resolver_ms=args.delay_resolver,
        )
        report, samples = run_load(cfg)
    finally:
        stack.stop()

    paths = emit_report(samples, args.out, render_figure=not args.no_figure)
    with open(paths["summary"]) as fh:
        print(fh.read(), end="")
    log.info("report written to %s", args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
