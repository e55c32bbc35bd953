"""Micro-benchmarks: crypto timing and wire-size accounting."""

from __future__ import annotations

import secrets
import time

from ..dnswire import DnsQuestion, build_query
from ..protocol import (
    CipherSuite,
    generate_key_pair,
    open_query,
    query_overhead,
    seal_query,
    seal_response,
    serialize_message,
)
from .mockdns import build_response
from .report import nearest_rank


def micro_crypto_bench(suite: CipherSuite, iterations: int) -> dict[str, float]:
    """Time seal/open over `iterations` distinct-domain type-A queries.

    Each query is sealed to a different public key; key generation happens
    before the timed section. Returns nearest-rank P50/P99 in microseconds.
    """
    if iterations < 1000:
        raise ValueError("need at least 1000 iterations for stable percentiles")
    pairs = [generate_key_pair(suite) for _ in range(iterations)]
    queries = [
        build_query(DnsQuestion(f"bench-{i}.example"), secrets.randbits(16))
        for i in range(iterations)
    ]
    seal_us: list[float] = []
    open_us: list[float] = []
    sealed = []
    for pair, query in zip(pairs, queries):
        t0 = time.perf_counter()
        msg, _ctx = seal_query(pair.config, query)
        seal_us.append((time.perf_counter() - t0) * 1e6)
        sealed.append(msg)
    for pair, msg in zip(pairs, sealed):
        t0 = time.perf_counter()
        open_query(pair, msg)
        open_us.append((time.perf_counter() - t0) * 1e6)
    seal_us.sort()
    open_us.sort()
    return {
        "seal_p50_us": nearest_rank(seal_us, 50),
        "seal_p99_us": nearest_rank(seal_us, 99),
        "open_p50_us": nearest_rank(open_us, 50),
        "open_p99_us": nearest_rank(open_us, 99),
        "iterations": iterations,
    }


def _load_domains(domains) -> list[str]:
    if isinstance(domains, str):
        with open(domains, encoding="ascii") as fh:
            names = [line.strip() for line in fh if line.strip() and not line.startswith("#")]
    else:
        names = list(domains)
    if not names:
        raise ValueError("domain list is empty")
    return names


def micro_size_bench(domains, suite: CipherSuite) -> dict[str, float]:
    """Mean wire sizes over a domain corpus plus the constant per-query overhead.

    `domains` is a file path or an iterable of names. The response overhead
    is measured by sealing a synthetic A answer for every query.
    """
    names = _load_domains(domains)
    pair = generate_key_pair(suite)
    clear_sizes: list[int] = []
    sealed_sizes: list[int] = []
    query_overheads: set[int] = set()
    response_overheads: set[int] = set()
    for name in names:
        query = build_query(DnsQuestion(name), 0)
        msg, ctx = seal_query(pair.config, query)
        wire = serialize_message(msg)
        clear_sizes.append(len(query))
        sealed_sizes.append(len(wire))
        query_overheads.add(len(wire) - len(query))
        answer = build_response(query, [(300, b"\x0a\x00\x00\x01")], qtype=1)
        sealed_answer = seal_response(ctx.response_key, suite, answer)
        response_overheads.add(len(sealed_answer.encrypted_message) - len(answer))
    if len(query_overheads) != 1 or len(response_overheads) != 1:
        raise AssertionError(
            f"overhead not constant: queries {query_overheads}, responses {response_overheads}"
        )
    assert query_overheads == {query_overhead(suite)}
    return {
        "count": len(names),
        "mean_cleartext_query_bytes": sum(clear_sizes) / len(clear_sizes),
        "mean_odoh_query_bytes": sum(sealed_sizes) / len(sealed_sizes),
        "query_overhead_bytes": query_overheads.pop(),
        "response_overhead_bytes": response_overheads.pop(),
    }
