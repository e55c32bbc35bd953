"""Sample aggregation and report emission.

Reports land as delimited files plus a rendered CDF figure:
samples.csv (fixed column set), summary.txt, cdf_<mode>.csv, cdf.png.
Percentiles are nearest-rank: the smallest sample such that at least p% of
samples are <= it.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field


class EmptySamplesError(ValueError):
    pass


@dataclass
class LatencySample:
    timestamp: float
    mode: str
    domain: str
    total_ms: float
    seal_us: float
    open_us: float
    http_status: int
    cache_hit: bool | None = None

    @property
    def ok(self) -> bool:
        return self.http_status == 200


CSV_COLUMNS = ["timestamp", "mode", "domain", "total_ms", "seal_us", "open_us", "http_status"]

PERCENTILES = (50, 90, 95, 99)


def nearest_rank(sorted_values: list[float], pct: float) -> float:
    if not sorted_values:
        raise EmptySamplesError("no samples")
    rank = max(1, math.ceil(pct / 100.0 * len(sorted_values)))
    return sorted_values[rank - 1]


@dataclass
class ModeStats:
    mode: str
    count: int
    mean_ms: float
    percentiles_ms: dict[int, float]
    failure_rate: float


@dataclass
class BenchReport:
    stats: dict[str, ModeStats] = field(default_factory=dict)
    cdf: dict[str, list[tuple[float, float]]] = field(default_factory=dict)

    def mean(self, mode: str) -> float:
        return self.stats[mode].mean_ms


def summarize(samples: list[LatencySample]) -> BenchReport:
    if not samples:
        raise EmptySamplesError("cannot summarize zero samples")
    report = BenchReport()
    modes = sorted({s.mode for s in samples})
    for mode in modes:
        rows = [s for s in samples if s.mode == mode]
        totals = sorted(s.total_ms for s in rows)
        failures = sum(1 for s in rows if not s.ok)
        report.stats[mode] = ModeStats(
            mode=mode,
            count=len(rows),
            mean_ms=sum(totals) / len(totals),
            percentiles_ms={p: nearest_rank(totals, p) for p in PERCENTILES},
            failure_rate=failures / len(rows),
        )
        n = len(totals)
        report.cdf[mode] = [(value, (i + 1) / n) for i, value in enumerate(totals)]
    return report


def _summary_text(report: BenchReport) -> str:
    lines = []
    header = f"{'mode':<16}{'count':>7}{'mean ms':>10}" + "".join(
        f"{f'P{p} ms':>10}" for p in PERCENTILES
    ) + f"{'fail %':>8}"
    lines.append(header)
    lines.append("-" * len(header))
    for mode, stats in report.stats.items():
        lines.append(
            f"{mode:<16}{stats.count:>7}{stats.mean_ms:>10.2f}"
            + "".join(f"{stats.percentiles_ms[p]:>10.2f}" for p in PERCENTILES)
            + f"{stats.failure_rate * 100:>8.2f}"
        )
    return "\n".join(lines) + "\n"


def _render_cdf_figure(report: BenchReport, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for mode, points in report.cdf.items():
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.step(xs, ys, where="post", label=mode)
    ax.set_xlabel("response time (ms)")
    ax.set_ylabel("cumulative fraction")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def emit_report(
    samples: list[LatencySample], out_dir: str, *, render_figure: bool = True
) -> dict[str, str]:
    """Write samples.csv + summary.txt + per-mode CDF tables + cdf.png.

    Returns the paths written, keyed by artifact name.
    """
    report = summarize(samples)
    os.makedirs(out_dir, exist_ok=True)
    paths: dict[str, str] = {}

    samples_path = os.path.join(out_dir, "samples.csv")
    with open(samples_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for s in samples:
            writer.writerow(
                [f"{s.timestamp:.6f}", s.mode, s.domain, f"{s.total_ms:.3f}",
                 f"{s.seal_us:.1f}", f"{s.open_us:.1f}", s.http_status]
            )
    paths["samples"] = samples_path

    summary_path = os.path.join(out_dir, "summary.txt")
    with open(summary_path, "w") as fh:
        fh.write(_summary_text(report))
    paths["summary"] = summary_path

    for mode, points in report.cdf.items():
        cdf_path = os.path.join(out_dir, f"cdf_{mode}.csv")
        with open(cdf_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["total_ms", "cum_fraction"])
            for value, fraction in points:
                writer.writerow([f"{value:.3f}", f"{fraction:.6f}"])
        paths[f"cdf_{mode}"] = cdf_path

    if render_figure:
        figure_path = os.path.join(out_dir, "cdf.png")
        _render_cdf_figure(report, figure_path)
        paths["figure"] = figure_path

    return paths
