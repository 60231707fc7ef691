"""Scenario description, the reference experiment, and scheme comparison."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .fuzzy import DE_PEAKS, DEFAULT_RESOLUTION, DEFAULT_RULE_TABLE, DH_PEAKS, E_PEAKS
from .metrics import MetricsLog, SummaryTable, summarize
from .qos import (
    DEFAULT_H_MAX,
    DEFAULT_H_MIN,
    DEFAULT_PERIOD,
    DEFAULT_SETPOINT,
    DEFAULT_T_FLC,
)

NODE_KINDS = ("source", "intermediate", "actuator", "interferer")
SCHEMES = ("fixed", "flc")
FEEDBACK_MODES = ("outofband", "inband")


@dataclass(frozen=True)
class NodeSpec:
    name: str
    kind: str
    period: float | None = None  # seconds; interferers must set it


@dataclass(frozen=True)
class TimelineEvent:
    time: float
    node: str
    action: str  # "activate" | "deactivate"


@dataclass(frozen=True)
class MacConfig:
    data_rate_bps: int = 250_000
    min_be: int = 3
    max_be: int = 5
    max_csma_backoffs: int = 4
    unit_backoff: float = 0.00032
    cca_duration: float = 0.000128
    queue_capacity: int = 10
    packet_bytes: int = 45

    @property
    def airtime(self) -> float:
        return self.packet_bytes * 8 / self.data_rate_bps


@dataclass(frozen=True)
class ControllerConfig:
    setpoint: float = DEFAULT_SETPOINT
    t_flc: float = DEFAULT_T_FLC
    h_init: float = DEFAULT_PERIOD
    h_min: float = DEFAULT_H_MIN
    h_max: float = DEFAULT_H_MAX
    defuzz_resolution: int = DEFAULT_RESOLUTION
    e_peaks: tuple[float, ...] = E_PEAKS
    de_peaks: tuple[float, ...] = DE_PEAKS
    dh_peaks: tuple[float, ...] = DH_PEAKS
    rules: tuple[tuple[str, tuple[str, ...]], ...] = tuple(
        (k, tuple(v)) for k, v in DEFAULT_RULE_TABLE.items()
    )


@dataclass(frozen=True)
class ScenarioSpec:
    nodes: tuple[NodeSpec, ...]
    routes: tuple[tuple[str, ...], ...]
    mac: MacConfig = field(default_factory=MacConfig)
    timeline: tuple[TimelineEvent, ...] = ()
    scheme: str = "fixed"
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    seed: int = 1
    end_time: float = 80.0
    feedback: str = "outofband"

    def __post_init__(self):
        validate(self)

    def node(self, name: str) -> NodeSpec:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def route_of(self, name: str) -> tuple[str, ...]:
        for r in self.routes:
            if r[0] == name:
                return r
        raise KeyError(name)

    @property
    def sources(self) -> list[str]:
        return [n.name for n in self.nodes if n.kind == "source"]

    def initially_active(self, name: str) -> bool:
        """A node starts on unless its first timeline action switches it on."""
        events = sorted((e for e in self.timeline if e.node == name), key=lambda e: e.time)
        return not events or events[0].action != "activate"

    def segment_bounds(self) -> list[float]:
        times = {0.0, float(self.end_time)}
        times.update(float(e.time) for e in self.timeline)
        return sorted(times)


def validate(spec: ScenarioSpec) -> None:
    names = [n.name for n in spec.nodes]
    if len(set(names)) != len(names):
        raise ValidationError(f"node ids must be unique: {names}")
    kinds = {}
    for n in spec.nodes:
        if n.kind not in NODE_KINDS:
            raise ValidationError(f"node {n.name}: unknown kind {n.kind!r}")
        kinds[n.name] = n.kind
        if n.kind == "interferer" and (n.period is None or n.period <= 0):
            raise ValidationError(f"interferer {n.name} needs a fixed positive period")
        if n.period is not None and n.period <= 0:
            raise ValidationError(f"node {n.name}: period must be positive")
    if spec.scheme not in SCHEMES:
        raise ValidationError(f"scheme must be one of {SCHEMES}, got {spec.scheme!r}")
    if spec.feedback not in FEEDBACK_MODES:
        raise ValidationError(f"feedback must be one of {FEEDBACK_MODES}")
    if not spec.end_time > 0:
        raise ValidationError("end_time must be positive")

    origins = [r[0] if r else None for r in spec.routes]
    for r in spec.routes:
        if len(r) < 2:
            raise ValidationError(f"route {r} needs at least a sender and an actuator")
        for hop in r:
            if hop not in kinds:
                raise ValidationError(f"route {' -> '.join(r)}: unknown node {hop!r}")
        if len(set(r)) != len(r):
            raise ValidationError(f"route {' -> '.join(r)} repeats a node")
        if kinds[r[0]] not in ("source", "interferer"):
            raise ValidationError(f"route {' -> '.join(r)} must start at a source or interferer")
        if kinds[r[-1]] != "actuator":
            raise ValidationError(f"route {' -> '.join(r)} must end at an actuator")
        for hop in r[1:-1]:
            if kinds[hop] != "intermediate":
                raise ValidationError(f"route {' -> '.join(r)}: {hop} is not an intermediate node")
    for name, kind in kinds.items():
        if kind in ("source", "interferer") and origins.count(name) != 1:
            raise ValidationError(f"{kind} {name} must have exactly one route")
        if kind in ("intermediate", "actuator") and name in origins:
            raise ValidationError(f"{kind} {name} cannot originate a route")

    for ev in spec.timeline:
        if ev.node not in kinds:
            raise ValidationError(f"timeline refers to unknown node {ev.node!r}")
        if kinds[ev.node] not in ("source", "interferer"):
            raise ValidationError(f"timeline node {ev.node} does not generate traffic")
        if ev.action not in ("activate", "deactivate"):
            raise ValidationError(f"timeline action {ev.action!r}")
        if not 0 <= ev.time <= spec.end_time:
            raise ValidationError(f"timeline time {ev.time} outside [0, {spec.end_time}]")

    m = spec.mac
    if not m.min_be <= m.max_be or m.min_be < 0:
        raise ValidationError("need 0 <= min_be <= max_be")
    if m.max_be > 16:
        raise ValidationError("max_be above 16 is not supported")
    if min(m.unit_backoff, m.cca_duration, m.data_rate_bps, m.packet_bytes) <= 0:
        raise ValidationError("MAC durations, rate and packet size must be positive")
    if m.max_csma_backoffs < 1 or m.queue_capacity < 1:
        raise ValidationError("max_csma_backoffs and queue_capacity must be >= 1")

    c = spec.controller
    if not 0.0 < c.h_min <= c.h_init <= c.h_max <= c.t_flc / 2:
        raise ValidationError("controller: need 0 < h_min <= h_init <= h_max <= t_flc/2")
    if not 0.0 <= c.setpoint <= 1.0:
        raise ValidationError("controller: setpoint must lie in [0, 1]")
    if c.defuzz_resolution < 101:
        raise ValidationError("controller: defuzz_resolution must be >= 101")
    for n in spec.nodes:
        if n.kind == "source" and n.period is not None and n.period > c.t_flc / 2:
            raise ValidationError(f"source {n.name}: period exceeds t_flc/2")
    try:
        build_controller(c)
    except ValueError as exc:
        raise ValidationError(f"controller: {exc}") from exc


def build_controller(cfg: ControllerConfig):
    from .fuzzy import default_controller

    return default_controller(
        cfg.defuzz_resolution, cfg.e_peaks, cfg.de_peaks, cfg.dh_peaks, dict(cfg.rules)
    )


def build_paper_scenario(scheme: str = "flc", seed: int = 1) -> ScenarioSpec:
    """Eight nodes in one collision area; s5 interferes on [20, 40] s, s3 and s4 join at 60 s."""
    nodes = (
        NodeSpec("s1", "source"),
        NodeSpec("s2", "source"),
        NodeSpec("s3", "source"),
        NodeSpec("s4", "source"),
        NodeSpec("s5", "interferer", 0.010),
        NodeSpec("s6", "intermediate"),
        NodeSpec("a1", "actuator"),
        NodeSpec("a2", "actuator"),
    )
    routes = (
        ("s1", "s6", "a1"),
        ("s2", "a1"),
        ("s3", "s6", "a2"),
        ("s4", "a2"),
        ("s5", "a2"),
    )
    timeline = (
        TimelineEvent(20.0, "s5", "activate"),
        TimelineEvent(40.0, "s5", "deactivate"),
        TimelineEvent(60.0, "s3", "activate"),
        TimelineEvent(60.0, "s4", "activate"),
    )
    return ScenarioSpec(nodes, routes, MacConfig(), timeline, scheme, ControllerConfig(), seed, 80.0)


def run_scheme(spec: ScenarioSpec, backend: str | None = None) -> tuple[MetricsLog, SummaryTable]:
    from .simulator import Simulation

    log = Simulation(spec, backend=backend).run_until(spec.end_time)
    return log, summarize(log, spec.segment_bounds())


def _run_one(args):
    spec, backend = args
    log, summary = run_scheme(spec, backend)
    return log, summary


@dataclass
class ComparisonRow:
    source: str
    fixed_mean: float
    fixed_std: float
    flc_mean: float
    flc_std: float
    ratio: float
    fixed_segments: list[float]
    flc_segments: list[float]


@dataclass
class ComparisonReport:
    seeds: list[int]
    segments: list[tuple[float, float]]
    rows: list[ComparisonRow]
    runs: dict[tuple[str, int], tuple[MetricsLog, SummaryTable]]

    def format(self) -> str:
        seg_names = [f"[{a:g},{b:g}]" for a, b in self.segments]
        head = f"{'source':<8}{'fixed':>16}{'flc':>16}{'flc/fixed':>11}  " + " ".join(
            f"{s:>15}" for s in seg_names
        )
        lines = [f"seeds: {', '.join(map(str, self.seeds))}", head]
        for r in self.rows:
            segs = " ".join(
                f"{_pct(a):>7}/{_pct(b):<7}" for a, b in zip(r.fixed_segments, r.flc_segments)
            )
            lines.append(
                f"{r.source:<8}{_pct(r.fixed_mean):>8} ±{_pct(r.fixed_std):>6}"
                f"{_pct(r.flc_mean):>8} ±{_pct(r.flc_std):>6}{r.ratio:>11.3f}  {segs}"
            )
        lines.append("segment columns: fixed/flc mean DMR")
        return "\n".join(lines)


def _pct(x: float) -> str:
    return "-" if x is None or math.isnan(x) else f"{100 * x:.1f}%"


def compare(
    seeds: Sequence[int],
    base: ScenarioSpec | None = None,
    workers: int | None = None,
    backend: str | None = None,
) -> ComparisonReport:
    """Run both schemes for every seed and tabulate per-source DMR statistics."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("compare needs at least one seed")
    base = base or build_paper_scenario()
    jobs = [(replace(base, scheme=s, seed=seed), backend) for seed in seeds for s in SCHEMES]
    if workers is None:
        workers = min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    runs = {(spec.scheme, spec.seed): res for (spec, _), res in zip(jobs, results)}

    bounds = base.segment_bounds()
    segments = list(zip(bounds, bounds[1:]))
    rows = []
    for src in base.sources:
        per = {}
        for scheme in SCHEMES:
            tables = [runs[(scheme, s)][1] for s in seeds]
            avgs = np.array([t.average[src] for t in tables], dtype=float)
            segs = np.array([t.segments[src] for t in tables], dtype=float)
            with np.errstate(all="ignore"):
                seg_means = [
                    float(np.nanmean(col)) if np.any(~np.isnan(col)) else float("nan")
                    for col in segs.T
                ]
            per[scheme] = (float(np.nanmean(avgs)), float(np.nanstd(avgs)), seg_means)
        fixed, flc = per["fixed"], per["flc"]
        ratio = flc[0] / fixed[0] if fixed[0] > 0 else float("nan")
        rows.append(ComparisonRow(src, fixed[0], fixed[1], flc[0], flc[1], ratio, fixed[2], flc[2]))
    return ComparisonReport(seeds, segments, rows, runs)
