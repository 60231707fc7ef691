"""Pure-Python simulation kernel.

Behaviour is defined event for event by this module; ``_engine_cy.pyx`` is a
typed port that must produce identical results for identical inputs.

All times are integer nanoseconds.  Events are ordered by ``(time, kind,
seq)``: the numeric kind fixes the processing phase of simultaneous events
(channel releases before deadline checks, deadline checks before interval
ends, interval ends before sample generation, carrier sensing last).
"""

import heapq
from collections import deque

from ._rng import SplitMix64
from .errors import SchedulingInPast

SOURCE, INTERMEDIATE, ACTUATOR, INTERFERER = 0, 1, 2, 3

EV_TX_END, EV_DEADLINE, EV_INTERVAL, EV_TIMELINE, EV_GEN, EV_CCA = range(6)
EVENT_NAMES = ("tx_end", "deadline", "interval", "timeline", "gen", "cca")

DATA, FEEDBACK = 0, 1

STAT_FIELDS = (
    "generated", "delivered", "on_time", "missed", "transmissions",
    "collisions", "access_failures", "queue_drops", "flushed",
)


class Engine:
    backend = "python"

    def __init__(self, kinds, periods_ns, routes, active0, timeline, mac,
                 t_flc_ns, end_ns, seed, inband=False, hooks=None, trace=None):
        n = len(kinds)
        self.n = n
        self.kinds = list(kinds)
        self.period = list(periods_ns)
        (self.unit_ns, self.cca_ns, self.min_be, self.max_be,
         self.max_backoffs, self.qcap, self.air_ns) = mac
        self.t_flc = t_flc_ns
        self.end = end_ns
        self.inband = bool(inband)
        self.hooks = hooks
        self.trace = trace
        self.rng = SplitMix64(seed)

        # route ids: node i -> its data route, n + i -> feedback route to i
        self.routes = [tuple(r) for r in routes] + [
            (r[-1], i) if len(r) >= 2 and kinds[i] == SOURCE else ()
            for i, r in enumerate(routes)
        ]

        self.now = 0
        self._heap = []
        self._seq = 0
        self.events = 0

        self.active = [False] * n
        self.epoch = [0] * n
        self.queue = [deque() for _ in range(n)]
        self.cur = [-1] * n
        self.nb = [0] * n
        self.be = [0] * n
        self.mac_tok = [0] * n

        self.airborne = []
        self.tx_start = [0] * n
        self.tx_bad = [False] * n
        self.last_busy_end = -1

        self.p_src = []
        self.p_deadline = []
        self.p_route = []
        self.p_hop = []
        self.p_delivered = []
        self.p_epoch = []
        self.p_kind = []
        self.p_aux = []

        self.ival_k = [0] * n
        self.ival_end = [0] * n
        self.miss = [0] * n
        self.ontime = [0] * n
        self.exp_cur = [0] * n
        self.exp_next = [0] * n
        self.violations = 0

        self.stats = {f: [0] * n for f in STAT_FIELDS}

        for i in range(n):
            if active0[i] and kinds[i] in (SOURCE, INTERFERER):
                self._push(0, EV_TIMELINE, i, 1)
        for t, node, on in timeline:
            if t <= end_ns:
                self._push(t, EV_TIMELINE, node, 1 if on else 0)

    # -- event queue -------------------------------------------------------

    def _push(self, t, kind, a, b=0):
        if t < self.now:
            raise SchedulingInPast(f"event at {t} ns scheduled at {self.now} ns")
        self._seq += 1
        heapq.heappush(self._heap, (t, kind, self._seq, a, b))

    def run(self):
        heap = self._heap
        end = self.end
        handlers = (self._on_tx_end, self._on_deadline, self._on_interval,
                    self._on_timeline, self._on_gen, self._on_cca)
        trace = self.trace
        while heap and heap[0][0] <= end:
            t, kind, _, a, b = heapq.heappop(heap)
            self.now = t
            self.events += 1
            if trace is not None:
                trace(f"{t} {EVENT_NAMES[kind]} {a} {b}")
            handlers[kind](a, b)
        return self.stats

    # -- node activity -----------------------------------------------------

    def _on_timeline(self, node, on):
        if on:
            if self.active[node]:
                return
            self.active[node] = True
            self.epoch[node] += 1
            if self.kinds[node] == SOURCE:
                self.ival_end[node] = self.now + self.t_flc
                self.miss[node] = self.ontime[node] = 0
                self.exp_cur[node] = self.exp_next[node] = 0
                if self.ival_end[node] <= self.end:
                    self._push(self.ival_end[node], EV_INTERVAL, node, self.epoch[node])
            self._push(self.now, EV_GEN, node, self.epoch[node])
        else:
            if not self.active[node]:
                return
            self.active[node] = False
            self.epoch[node] += 1
            q = self.queue[node]
            self.stats["flushed"][node] += len(q)
            q.clear()
            if self.cur[node] >= 0 and node not in self.airborne:
                self.stats["flushed"][node] += 1
                self.cur[node] = -1
                self.mac_tok[node] += 1

    def _on_gen(self, node, ep):
        if ep != self.epoch[node] or not self.active[node]:
            return
        now = self.now
        h = self.period[node]
        pkt = self._new_packet(node, node, now + h, DATA, 0)
        self.stats["generated"][node] += 1
        if self.kinds[node] == SOURCE:
            deadline = now + h
            if deadline <= self.ival_end[node]:
                self.exp_cur[node] += 1
            else:
                self.exp_next[node] += 1
            if deadline <= self.end:
                self._push(deadline, EV_DEADLINE, pkt)
        self._enqueue(node, pkt)
        if now + h <= self.end:
            self._push(now + h, EV_GEN, node, ep)

    def _new_packet(self, src, route, deadline, kind, aux):
        self.p_src.append(src)
        self.p_deadline.append(deadline)
        self.p_route.append(route)
        self.p_hop.append(0)
        self.p_delivered.append(-1)
        self.p_epoch.append(self.epoch[src])
        self.p_kind.append(kind)
        self.p_aux.append(aux)
        return len(self.p_src) - 1

    # -- MAC ---------------------------------------------------------------

    def _enqueue(self, node, pkt):
        if self.cur[node] < 0:
            self.cur[node] = pkt
            self._begin_csma(node)
            return
        q = self.queue[node]
        if len(q) >= self.qcap:
            q.popleft()
            self.stats["queue_drops"][node] += 1
        q.append(pkt)

    def _begin_csma(self, node):
        self.nb[node] = 0
        self.be[node] = self.min_be
        self._backoff(node)

    def _backoff(self, node):
        slots = self.rng.bits(self.be[node])
        t = self.now + slots * self.unit_ns + self.cca_ns
        self._push(t, EV_CCA, node, self.mac_tok[node])

    def _channel_busy(self, a, b):
        """Whether any transmission occupied the channel inside (a, b)."""
        if self.last_busy_end > a:
            return True
        for other in self.airborne:
            if self.tx_start[other] < b:
                return True
        return False

    def _on_cca(self, node, tok):
        if tok != self.mac_tok[node]:
            return
        if not self._channel_busy(self.now - self.cca_ns, self.now):
            self._transmit(node)
            return
        self.nb[node] += 1
        if self.nb[node] >= self.max_backoffs:
            self.stats["access_failures"][node] += 1
            self._next_frame(node)
            return
        self.be[node] = min(self.be[node] + 1, self.max_be)
        self._backoff(node)

    def _transmit(self, node):
        bad = False
        for other in self.airborne:
            self.tx_bad[other] = True
            bad = True
        self.tx_bad[node] = bad
        self.tx_start[node] = self.now
        self.airborne.append(node)
        self.stats["transmissions"][node] += 1
        self._push(self.now + self.air_ns, EV_TX_END, node)

    def _on_tx_end(self, node, _):
        self.airborne.remove(node)
        if self.now > self.last_busy_end:
            self.last_busy_end = self.now
        pkt = self.cur[node]
        if self.tx_bad[node]:
            self.stats["collisions"][node] += 1
        else:
            self._deliver(pkt)
        self._next_frame(node)

    def _next_frame(self, node):
        q = self.queue[node]
        if q:
            self.cur[node] = q.popleft()
            self._begin_csma(node)
        else:
            self.cur[node] = -1

    def _deliver(self, pkt):
        route = self.routes[self.p_route[pkt]]
        hop = self.p_hop[pkt] + 1
        self.p_hop[pkt] = hop
        dest = route[hop]
        if hop < len(route) - 1:
            self._enqueue(dest, pkt)
            return
        if self.p_kind[pkt] == FEEDBACK:
            src = self.p_src[pkt]
            if self.hooks is not None and self.active[src]:
                new_h = self.hooks.on_feedback(src, self.p_aux[pkt], self.now)
                if new_h > 0:
                    self.period[src] = new_h
            return
        self.p_delivered[pkt] = self.now
        self.stats["delivered"][self.p_src[pkt]] += 1

    # -- deadline and interval bookkeeping ---------------------------------

    def _on_deadline(self, pkt, _):
        src = self.p_src[pkt]
        if self.p_epoch[pkt] != self.epoch[src] or not self.active[src]:
            return
        delivered = self.p_delivered[pkt]
        if 0 <= delivered <= self.p_deadline[pkt]:
            self.ontime[src] += 1
            self.stats["on_time"][src] += 1
        else:
            self.miss[src] += 1
            self.stats["missed"][src] += 1

    def _on_interval(self, node, ep):
        if ep != self.epoch[node]:
            return
        k = self.ival_k[node]
        if self.miss[node] + self.ontime[node] != self.exp_cur[node]:
            self.violations += 1
        if self.hooks is not None:
            new_h = self.hooks.on_interval(
                node, k, self.now, self.miss[node], self.ontime[node], self.period[node])
            if self.inband:
                route_id = self.n + node
                act = self.routes[route_id][0]
                pkt = self._new_packet(node, route_id, -1, FEEDBACK, k)
                self._enqueue(act, pkt)
            elif new_h > 0:
                self.period[node] = new_h
        self.miss[node] = self.ontime[node] = 0
        self.exp_cur[node] = self.exp_next[node]
        self.exp_next[node] = 0
        self.ival_k[node] = k + 1
        self.ival_end[node] += self.t_flc
        if self.ival_end[node] <= self.end:
            self._push(self.ival_end[node], EV_INTERVAL, node, ep)
