"""Benchmark harness: micro-benchmarks, load generation, mock resolver, reports."""
