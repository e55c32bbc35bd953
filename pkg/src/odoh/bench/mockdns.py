"""Hermetic mock DoH resolver.

Serves a zone file over POST /dns-query (application/dns-message) so the
whole stack can run on loopback without touching real resolvers. Zone lines
are `name TYPE ttl rdata`; unknown names get NXDOMAIN. The question section
is echoed byte-for-byte, so 0x20 casing survives.
"""

from __future__ import annotations

import argparse
import ipaddress
import logging
import struct
import sys
import time

from ..dnswire import (
    MalformedDnsError,
    QTYPE_IDS,
    encode_qname,
    parse_query_info,
)
from ..httpd import ServiceHandler, ServiceRunner

log = logging.getLogger("odoh.mockdns")

DNS_CONTENT_TYPE = "application/dns-message"


def _rdata_from_text(qtype_name: str, text: str) -> bytes:
    if qtype_name == "A":
        return ipaddress.IPv4Address(text).packed
    if qtype_name == "AAAA":
        return ipaddress.IPv6Address(text).packed
    if qtype_name == "TXT":
        raw = text.encode("ascii")
        return bytes([len(raw)]) + raw
    if qtype_name == "HTTPS":
        # raw rdata as hex; carries opaque blobs (e.g. published key configs)
        return bytes.fromhex(text)
    raise ValueError(f"unsupported zone record type {qtype_name}")


class Zone:
    """(lowercased name, qtype) -> [(ttl, rdata)]."""

    def __init__(self):
        self.records: dict[tuple[str, int], list[tuple[int, bytes]]] = {}

    @classmethod
    def from_file(cls, path: str) -> "Zone":
        zone = cls()
        with open(path, encoding="ascii") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                try:
                    name, type_name, ttl, rdata_text = line.split(None, 3)
                    zone.add(name, type_name.upper(), int(ttl), rdata_text)
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad zone line {line!r}: {exc}") from exc
        return zone

    def add(self, name: str, type_name: str, ttl: int, rdata_text: str) -> None:
        qtype = QTYPE_IDS[type_name]
        key = (name.rstrip(".").lower(), qtype)
        self.records.setdefault(key, []).append((ttl, _rdata_from_text(type_name, rdata_text)))

    def lookup(self, qname: str, qtype: int) -> list[tuple[int, bytes]] | None:
        return self.records.get((qname.rstrip(".").lower(), qtype))


def build_response(query: bytes, records: list[tuple[int, bytes]] | None, qtype: int) -> bytes:
    """Answer for `query`: echoes ID and question bytes, NXDOMAIN when records is None."""
    msg_id, _, qname, _, _ = parse_query_info(query)
    # splice the original question bytes (casing included) instead of re-encoding
    q_len = len(encode_qname(qname)) + 4
    question = query[12 : 12 + q_len]
    rcode = 0 if records is not None else 3
    flags = 0x8180 | rcode  # QR=1 RD=1 RA=1
    answers = records or []
    out = struct.pack(">HHHHHH", msg_id, flags, 1, len(answers), 0, 0) + question
    for ttl, rdata in answers:
        out += b"\xc0\x0c" + struct.pack(">HHIH", qtype, 1, ttl, len(rdata)) + rdata
    return out


def resolve(zone: Zone, query: bytes) -> bytes:
    """Zone lookup as wire bytes; raises MalformedDnsError on garbage input."""
    _, qdcount, qname, qtype, _ = parse_query_info(query)
    if qdcount != 1:
        raise MalformedDnsError("expected exactly one question")
    return build_response(query, zone.lookup(qname, qtype), qtype)


class MockResolverServer:
    """DoH endpoint over a zone, with an optional fixed service delay."""

    def __init__(self, zone: Zone, *, delay_ms: float = 0.0, listen: str = "127.0.0.1:0"):
        self.zone = zone
        self.delay_ms = delay_ms
        self.queries_served = 0
        outer = self

        class Handler(ServiceHandler):
            def do_POST(self):
                if self.path.split("?")[0] != "/dns-query":
                    self.reply(404, b"not found")
                    return
                if self.headers.get("Content-Type", "") != DNS_CONTENT_TYPE:
                    self.reply(415, b"expected " + DNS_CONTENT_TYPE.encode())
                    return
                body = self.read_body()
                if outer.delay_ms > 0:
                    time.sleep(outer.delay_ms / 1000.0)
                try:
                    answer = resolve(outer.zone, body)
                except MalformedDnsError as exc:
                    self.reply(400, f"malformed DNS query: {exc}".encode())
                    return
                outer.queries_served += 1
                self.reply(200, answer, content_type=DNS_CONTENT_TYPE)

            def do_GET(self):
                if self.path == "/health":
                    self.reply(200, b"ok")
                else:
                    self.reply(404, b"not found")

        self.runner = ServiceRunner(Handler, listen)

    @property
    def url(self) -> str:
        return self.runner.url + "/dns-query"

    def start(self) -> "MockResolverServer":
        self.runner.start()
        return self

    def stop(self) -> None:
        self.runner.stop()


def mock_resolver_serve(zone_file: str, delay_ms: float = 0.0, listen: str = "127.0.0.1:0") -> MockResolverServer:
    """Parse the zone and start serving; returns the running service."""
    return MockResolverServer(Zone.from_file(zone_file), delay_ms=delay_ms, listen=listen).start()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="odoh-mock-resolver", description=__doc__)
    parser.add_argument("--zone", required=True, help="zone file: `name TYPE ttl rdata` per line")
    parser.add_argument("--listen", default="127.0.0.1:8053")
    parser.add_argument("--delay-ms", type=float, default=0.0, help="fixed service delay")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")

    service = mock_resolver_serve(args.zone, args.delay_ms, args.listen)
    log.info("mock resolver on %s (zone records: %d)", service.url, len(service.zone.records))
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        service.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
