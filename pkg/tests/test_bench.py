import statistics

import pytest

from odoh.bench.load import BenchConfig, EndpointUnreachableError, preflight, run_load
from odoh.bench.micro import micro_crypto_bench, micro_size_bench
from odoh.protocol import CipherSuite, DEFAULT_SUITE, query_overhead

DOMAINS = ["example.com", "odoh.test", "multi.test"]


@pytest.fixture
def full_stack(stack):
    resolver = stack.resolver()
    target = stack.target([resolver.url])
    proxy = stack.proxy()
    return resolver, target, proxy


def make_cfg(mode, full_stack, **overrides):
    resolver, target, proxy = full_stack
    defaults = dict(
        mode=mode,
        clients=2,
        queries_per_client=5,
        rate_per_minute=60_000,
        domains=list(DOMAINS),
        proxy_url=proxy.url,
        target_host=target.host_port,
        resolver_url=resolver.url,
        insecure_http=True,
        seed=7,
    )
    defaults.update(overrides)
    return BenchConfig(**defaults)


# ---------------------------------------------------------------------------
# config validation


def test_invalid_mode_rejected(full_stack):
    with pytest.raises(ValueError):
        make_cfg("quic", full_stack)


def test_zero_clients_rejected(full_stack):
    with pytest.raises(ValueError):
        make_cfg("doh", full_stack, clients=0)


def test_missing_endpoint_rejected(full_stack):
    with pytest.raises(ValueError):
        make_cfg("odoh", full_stack, proxy_url=None)


def test_preflight_unreachable(full_stack):
    cfg = make_cfg("odoh", full_stack, proxy_url="http://127.0.0.1:1", timeout=0.3)
    with pytest.raises(EndpointUnreachableError):
        preflight(cfg)


# ---------------------------------------------------------------------------
# accounting and modes


@pytest.mark.parametrize("mode", ["doh", "pdoh", "cleartext-odoh", "odoh"])
def test_exact_sample_accounting(mode, full_stack):
    cfg = make_cfg(mode, full_stack)
    report, samples = run_load(cfg)
    assert len(samples) == 10  # C=2 x N=5
    assert report.stats[mode].count == 10
    assert report.stats[mode].failure_rate == 0.0


def test_odoh_coloc_mode(full_stack, zone_file, stack):
    coloc = stack.target([f"mock:{zone_file}"])
    cfg = make_cfg("odoh-coloc", full_stack, coloc_target_host=coloc.host_port)
    report, samples = run_load(cfg)
    assert report.stats["odoh-coloc"].failure_rate == 0.0
    assert coloc.core.queries_total == 10


def test_odoh_samples_carry_crypto_timings(full_stack):
    _, samples = run_load(make_cfg("odoh", full_stack))
    assert all(s.seal_us > 0 and s.open_us > 0 for s in samples)


def test_doh_failures_recorded_not_raised(full_stack, stack):
    slow = stack.resolver(delay_ms=300)
    cfg = make_cfg("doh", full_stack, resolver_url=slow.url, timeout=0.1,
                   clients=1, queries_per_client=3)
    report, samples = run_load(cfg)
    assert len(samples) == 3
    assert report.stats["doh"].failure_rate == 1.0
    assert all(s.http_status == 0 for s in samples)


def test_pacing_mean_interval(full_stack):
    # R=1200/min -> 50ms interval; N=50 sends per worker
    cfg = make_cfg("doh", full_stack, clients=1, queries_per_client=50, rate_per_minute=1200)
    _, samples = run_load(cfg)
    times = [s.timestamp for s in samples]
    gaps = [b - a for a, b in zip(times, times[1:])]
    mean_gap = statistics.fmean(gaps)
    assert 0.050 * 0.85 <= mean_gap <= 0.050 * 1.15


# ---------------------------------------------------------------------------
# micro benches


def test_micro_crypto_bench_shape():
    results = micro_crypto_bench(DEFAULT_SUITE, 1000)
    assert results["iterations"] == 1000
    assert 0 < results["seal_p50_us"] <= results["seal_p99_us"]
    assert 0 < results["open_p50_us"] <= results["open_p99_us"]


def test_micro_crypto_bench_rejects_small_iteration_counts():
    with pytest.raises(ValueError):
        micro_crypto_bench(DEFAULT_SUITE, 0)
    with pytest.raises(ValueError):
        micro_crypto_bench(DEFAULT_SUITE, 999)


def test_micro_size_bench_constant_overheads(tmp_path):
    domains_file = tmp_path / "domains.txt"
    domains_file.write_text("\n".join(f"host-{i}.example" for i in range(20)) + "\n")
    results = micro_size_bench(str(domains_file), DEFAULT_SUITE)
    assert results["count"] == 20
    assert results["query_overhead_bytes"] == 107
    assert results["response_overhead_bytes"] == 16
    assert (
        results["mean_odoh_query_bytes"] - results["mean_cleartext_query_bytes"]
    ) == pytest.approx(107)


def test_micro_size_bench_other_suite_overhead():
    suite = CipherSuite(0x0010, 0x0001, 0x0002)  # P-256 / AES-256-GCM
    results = micro_size_bench([f"d{i}.example" for i in range(5)], suite)
    assert results["query_overhead_bytes"] == query_overhead(suite) == 37 + 65 + 6 + 32 + 16


def test_micro_size_bench_empty_rejected():
    with pytest.raises(ValueError):
        micro_size_bench([], DEFAULT_SUITE)


def test_cache_hit_attribution_via_metrics_scrape(full_stack):
    cfg = make_cfg(
        "odoh", full_stack, clients=1, queries_per_client=6,
        domains=["example.com"], scrape_cache_hits=True,
    )
    _, samples = run_load(cfg)
    assert samples[0].cache_hit is False  # first query fills the cache
    assert all(s.cache_hit is True for s in samples[1:])


def test_cache_hit_attribution_off_by_default(full_stack):
    _, samples = run_load(make_cfg("odoh", full_stack, clients=1, queries_per_client=2))
    assert all(s.cache_hit is None for s in samples)
