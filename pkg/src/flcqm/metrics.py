"""Per-interval time series, run summaries and their CSV/gnuplot export."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

DMR_COLUMNS = ("source", "interval_k", "t_seconds", "dmr", "h_seconds", "e", "de", "dh")


@dataclass(frozen=True)
class IntervalRow:
    k: int
    t_end: float  # seconds
    dmr: float
    h: float  # period in force during the interval, seconds
    misses: int
    expected: int
    e: float | None = None
    de: float | None = None
    dh: float | None = None  # ms


@dataclass
class SourceTotals:
    generated: int = 0
    delivered: int = 0
    on_time: int = 0
    missed: int = 0
    transmissions: int = 0
    collisions: int = 0
    access_failures: int = 0
    queue_drops: int = 0
    flushed: int = 0


@dataclass
class MetricsLog:
    scheme: str
    seed: int
    t_flc: float = 1.0
    series: dict[str, list[IntervalRow]] = field(default_factory=dict)
    totals: dict[str, SourceTotals] = field(default_factory=dict)
    backend: str = ""
    events: int = 0
    conservation_violations: int = 0

    def rows(self, source: str) -> list[IntervalRow]:
        return self.series.get(source, [])


@dataclass
class SummaryTable:
    scheme: str
    seed: int
    bounds: list[float]
    average: dict[str, float]
    segments: dict[str, list[float]]  # NaN where a source had no interval


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values) if values else float("nan")


def summarize(log: MetricsLog, bounds: list[float]) -> SummaryTable:
    """Whole-run and per-segment means of per-interval DMR.

    A row belongs to the segment containing its interval midpoint.
    """
    average, segments = {}, {}
    for src, rows in log.series.items():
        average[src] = _mean(r.dmr for r in rows)
        segs = []
        for lo, hi in zip(bounds, bounds[1:]):
            mids = (r for r in rows if lo <= r.t_end - log.t_flc / 2 < hi)
            segs.append(_mean(r.dmr for r in mids))
        segments[src] = segs
    return SummaryTable(log.scheme, log.seed, list(bounds), average, segments)


def fmt(x) -> str:
    """Fixed 9-significant-digit rendering; blank for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, int):
        return str(x)
    return f"{x:.9g}"


def write_dmr_csv(log: MetricsLog, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DMR_COLUMNS)
        for src, rows in log.series.items():
            for r in rows:
                w.writerow([src, r.k, fmt(r.t_end), fmt(r.dmr), fmt(r.h),
                            fmt(r.e), fmt(r.de), fmt(r.dh)])


def summary_columns(bounds: list[float]) -> list[str]:
    segs = [f"avg_{lo:g}_{hi:g}" for lo, hi in zip(bounds, bounds[1:])]
    return ["source", "avg_dmr", *segs, "delivered", "on_time", "missed"]


def write_summary_csv(summary: SummaryTable, log: MetricsLog, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(summary_columns(summary.bounds))
        for src, avg in summary.average.items():
            t = log.totals[src]
            w.writerow([src, fmt(avg), *map(fmt, summary.segments[src]),
                        t.delivered, t.on_time, t.missed])


def write_surface_csv(table, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("e", "de", "dh"))
        for e, de, dh in table:
            w.writerow((fmt(float(e)), fmt(float(de)), fmt(float(dh))))


def write_plot_script(out_dir: Path, schemes, sources, surface_n: int | None = None) -> Path:
    """gnuplot script drawing DMR and period series plus the control surface."""
    lines = [
        "# gnuplot -p plot.gp",
        "set datafile separator ','",
        "set key outside right",
        "set xlabel 'time (s)'",
    ]
    for scheme in schemes:
        data = f"dmr_{scheme}.csv"
        lines += [
            "",
            "set terminal pngcairo size 900,500",
            f"set output 'dmr_{scheme}.png'",
            f"set title 'Deadline miss ratio ({scheme})'",
            "set ylabel 'DMR'",
            "set yrange [0:1.05]",
            "plot " + ", \\\n     ".join(
                f"'{data}' using (strcol(1) eq '{s}' ? $3 : 1/0):4 with lines title '{s}'"
                for s in sources
            ),
        ]
        if scheme == "flc":
            lines += [
                "",
                "set output 'period_flc.png'",
                "set title 'Sampling periods (flc)'",
                "set ylabel 'h (ms)'",
                "set autoscale y",
                "plot " + ", \\\n     ".join(
                    f"'{data}' using (strcol(1) eq '{s}' ? $3 : 1/0):($5*1000) with steps title '{s}'"
                    for s in sources
                ),
            ]
    if surface_n:
        lines += [
            "",
            "set output 'surface.png'",
            "set title 'Controller input-output surface'",
            "set xlabel 'e'",
            "set ylabel 'de'",
            "set zlabel 'dh (ms)'",
            "set autoscale",
            f"set dgrid3d {surface_n},{surface_n}",
            "splot 'surface.csv' using 1:2:3 every ::1 with lines notitle",
        ]
    path = Path(out_dir) / "plot.gp"
    path.write_text("\n".join(lines) + "\n")
    return path
