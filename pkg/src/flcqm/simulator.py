"""Binds a scenario to the simulation kernel and the per-source QoS managers."""

from __future__ import annotations

from dataclasses import replace
from typing import Callable, TextIO

from .engine import airtime_ns, engine_class
from .errors import ConservationError
from .metrics import IntervalRow, MetricsLog, SourceTotals
from .qos import DmrSample, QosManagerState, on_interval_end, to_ns
from .scenario import ScenarioSpec, build_controller
from ._engine_py import ACTUATOR, INTERFERER, INTERMEDIATE, SOURCE, STAT_FIELDS

KIND_CODES = {"source": SOURCE, "intermediate": INTERMEDIATE,
              "actuator": ACTUATOR, "interferer": INTERFERER}


class Simulation:
    """One run of a scenario.  Single-threaded; build a new one per run."""

    def __init__(self, spec: ScenarioSpec, backend: str | None = None,
                 trace: TextIO | Callable[[str], None] | None = None):
        self.spec = spec
        self.names = [n.name for n in spec.nodes]
        self.index = {name: i for i, name in enumerate(self.names)}
        self.engine_cls = engine_class(backend)
        if trace is not None and not callable(trace):
            stream = trace
            trace = lambda line: stream.write(line + "\n")  # noqa: E731
        self._trace = trace

        c = spec.controller
        self.t_flc_ns = to_ns(c.t_flc)
        self.controller = build_controller(c) if spec.scheme == "flc" else None
        self.managers: dict[int, QosManagerState] = {}
        if self.controller is not None:
            for n in spec.nodes:
                if n.kind == "source":
                    h = n.period if n.period is not None else c.h_init
                    self.managers[self.index[n.name]] = QosManagerState(
                        n.name, h, c.h_min, c.h_max, c.setpoint, c.t_flc)
        self.log = MetricsLog(spec.scheme, spec.seed, c.t_flc,
                              series={s: [] for s in spec.sources})
        self._pending: dict[int, dict[int, tuple[DmrSample, int]]] = {}

    def _engine_args(self, end_ns: int):
        spec = self.spec
        kinds = [KIND_CODES[n.kind] for n in spec.nodes]
        periods = []
        for n in spec.nodes:
            if n.kind == "source":
                periods.append(to_ns(n.period if n.period is not None else spec.controller.h_init))
            elif n.kind == "interferer":
                periods.append(to_ns(n.period))
            else:
                periods.append(0)
        routes = [[] for _ in spec.nodes]
        for r in spec.routes:
            routes[self.index[r[0]]] = [self.index[h] for h in r]
        active0 = [spec.initially_active(n.name) for n in spec.nodes]
        timeline = [(to_ns(ev.time), self.index[ev.node], ev.action == "activate")
                    for ev in sorted(spec.timeline, key=lambda ev: ev.time)]
        m = spec.mac
        mac = (to_ns(m.unit_backoff), to_ns(m.cca_duration), m.min_be, m.max_be,
               m.max_csma_backoffs, m.queue_capacity, airtime_ns(m.packet_bytes, m.data_rate_bps))
        return (kinds, periods, routes, active0, timeline, mac, self.t_flc_ns, end_ns,
                spec.seed, spec.feedback == "inband" and bool(self.managers), self, self._trace)

    # -- kernel callbacks ----------------------------------------------------

    def on_interval(self, node: int, k: int, t_ns: int, misses: int, on_time: int, h_ns: int) -> int:
        expected = self.t_flc_ns // h_ns
        sample = DmrSample(k, misses, expected, min(1.0, misses / expected))
        row = IntervalRow(k, t_ns / 1e9, sample.dmr, h_ns / 1e9, misses, expected)
        series = self.log.series[self.names[node]]
        series.append(row)
        state = self.managers.get(node)
        if state is None:
            return -1
        if self.spec.feedback == "inband":
            self._pending.setdefault(node, {})[k] = (sample, len(series) - 1)
            return -1
        return self._update(state, sample, series, len(series) - 1)

    def on_feedback(self, node: int, k: int, t_ns: int) -> int:
        state = self.managers.get(node)
        pending = self._pending.get(node, {})
        if state is None or k not in pending:
            return -1
        sample, row_idx = pending.pop(k)
        for stale in [j for j in pending if j < k]:
            del pending[stale]
        # reports lost in transit are skipped, not compensated
        state.interval_index = k
        return self._update(state, sample, self.log.series[self.names[node]], row_idx)

    def _update(self, state, sample, series, row_idx) -> int:
        new_h, diag = on_interval_end(state, self.controller, sample)
        series[row_idx] = replace(series[row_idx], **diag)
        return to_ns(new_h)

    # -----------------------------------------------------------------------

    def run_until(self, end_time: float) -> MetricsLog:
        engine = self.engine_cls(*self._engine_args(to_ns(end_time)))
        stats = engine.run()
        log = self.log
        log.backend = engine.backend
        log.events = engine.events
        log.conservation_violations = engine.violations
        for name in self.spec.sources:
            i = self.index[name]
            log.totals[name] = SourceTotals(**{f: stats[f][i] for f in STAT_FIELDS})
        if engine.violations:
            raise ConservationError(
                f"{engine.violations} interval(s) where on-time + missed "
                f"!= packets whose deadline expired")
        return log
