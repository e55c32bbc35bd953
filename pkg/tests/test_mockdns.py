import time

import pytest

from odoh.bench.mockdns import MockResolverServer, build_response, resolve
from odoh.dnswire import DnsQuestion, build_query, parse_query_info, parse_response
from odoh.transport import HttpTransport

DNS_CT = "application/dns-message"


def test_zone_entry_answers_with_ttl(zone):
    query = build_query(DnsQuestion("example.com"), 0x1111)
    summary = parse_response(resolve(zone, query))
    assert summary.rcode == 0
    assert summary.msg_id == 0x1111
    assert [r.ttl for r in summary.answers] == [300]
    assert summary.answers[0].rdata == bytes([93, 184, 216, 34])


def test_unknown_name_is_nxdomain(zone):
    summary = parse_response(resolve(zone, build_query(DnsQuestion("nope.test"), 7)))
    assert summary.rcode == 3
    assert summary.answers == ()


def test_multiple_records_served(zone):
    summary = parse_response(resolve(zone, build_query(DnsQuestion("multi.test"), 7)))
    assert sorted(r.ttl for r in summary.answers) == [60, 300]
    assert summary.min_ttl == 60


def test_0x20_casing_echoed(zone):
    query = build_query(DnsQuestion("example.com"), 3, use_0x20=True)
    sent_name = parse_query_info(query)[2]
    response = resolve(zone, query)
    assert parse_response(response).question_name == sent_name


def test_zone_lookup_case_insensitive(zone):
    query = build_query(DnsQuestion("ExAmPlE.CoM"), 3)
    assert parse_response(resolve(zone, query)).rcode == 0


def test_http_service_roundtrip(zone):
    service = MockResolverServer(zone).start()
    try:
        transport = HttpTransport.from_url(service.url)
        query = build_query(DnsQuestion("example.com"), 9)
        reply = transport.request("POST", "/dns-query", query, {"Content-Type": DNS_CT})
        assert reply.status == 200
        assert reply.headers["content-type"] == DNS_CT
        assert parse_response(reply.body).answers[0].rdata == bytes([93, 184, 216, 34])
        transport.close()
    finally:
        service.stop()


def test_http_service_rejects_garbage(zone):
    service = MockResolverServer(zone).start()
    try:
        transport = HttpTransport.from_url(service.url)
        reply = transport.request("POST", "/dns-query", b"\x01\x02", {"Content-Type": DNS_CT})
        assert reply.status == 400
        reply = transport.request("POST", "/dns-query", b"x" * 20, {"Content-Type": "text/plain"})
        assert reply.status == 415
        transport.close()
    finally:
        service.stop()


def test_service_delay_floor(zone):
    service = MockResolverServer(zone, delay_ms=50).start()
    try:
        transport = HttpTransport.from_url(service.url)
        query = build_query(DnsQuestion("example.com"), 1)
        start = time.perf_counter()
        transport.request("POST", "/dns-query", query, {"Content-Type": DNS_CT})
        assert (time.perf_counter() - start) * 1e3 >= 50
        transport.close()
    finally:
        service.stop()


def test_build_response_rejects_nothing_but_marks_nxdomain(zone):
    query = build_query(DnsQuestion("gone.test"), 2)
    assert parse_response(build_response(query, None, 1)).rcode == 3
    assert parse_response(build_response(query, [(5, b"\x01\x02\x03\x04")], 1)).rcode == 0


def test_bad_zone_line_raises(tmp_path):
    path = tmp_path / "bad.zone"
    path.write_text("example.com A 300\n")  # missing rdata
    from odoh.bench.mockdns import Zone

    with pytest.raises(ValueError):
        Zone.from_file(str(path))
