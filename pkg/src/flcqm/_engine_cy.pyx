# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernel; a typed port of ``_engine_py``.

Must stay event-for-event identical to the Python kernel: same event keys,
same RNG draws in the same order.  ``tests/test_backends.py`` enforces it.
"""

from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport free, malloc, realloc

from .errors import SchedulingInPast

cdef enum:
    SOURCE = 0
    INTERMEDIATE = 1
    ACTUATOR = 2
    INTERFERER = 3

cdef enum:
    EV_TX_END = 0
    EV_DEADLINE = 1
    EV_INTERVAL = 2
    EV_TIMELINE = 3
    EV_GEN = 4
    EV_CCA = 5

cdef enum:
    DATA = 0
    FEEDBACK = 1

EVENT_NAMES = ("tx_end", "deadline", "interval", "timeline", "gen", "cca")

STAT_FIELDS = (
    "generated", "delivered", "on_time", "missed", "transmissions",
    "collisions", "access_failures", "queue_drops", "flushed",
)
cdef enum:
    ST_GENERATED = 0
    ST_DELIVERED = 1
    ST_ON_TIME = 2
    ST_MISSED = 3
    ST_TRANSMISSIONS = 4
    ST_COLLISIONS = 5
    ST_ACCESS_FAILURES = 6
    ST_QUEUE_DROPS = 7
    ST_FLUSHED = 8
    N_STATS = 9

cdef struct Event:
    int64_t t
    int64_t kind
    int64_t seq
    int64_t a
    int64_t b

cdef struct Packet:
    int64_t src
    int64_t deadline
    int64_t route
    int64_t hop
    int64_t delivered
    int64_t epoch
    int64_t kind
    int64_t aux


cdef inline bint ev_less(Event* x, Event* y) nogil:
    if x.t != y.t:
        return x.t < y.t
    if x.kind != y.kind:
        return x.kind < y.kind
    return x.seq < y.seq


cdef void* _grow(void* ptr, Py_ssize_t nbytes) except NULL:
    cdef void* out = realloc(ptr, nbytes)
    if out == NULL:
        raise MemoryError()
    return out


cdef int64_t* _zeros(Py_ssize_t n) except NULL:
    cdef int64_t* p = <int64_t*>malloc((n if n > 0 else 1) * sizeof(int64_t))
    if p == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    for i in range(n):
        p[i] = 0
    return p


cdef class Engine:
    backend = "cython"
    cdef public int64_t events
    cdef public int64_t violations
    cdef public int64_t now

    cdef int n
    cdef int64_t unit_ns, cca_ns, air_ns, t_flc, end
    cdef int min_be, max_be, max_backoffs, qcap
    cdef bint inband
    cdef object hooks
    cdef object trace
    cdef uint64_t rng

    cdef Event* heap
    cdef Py_ssize_t heap_len, heap_cap
    cdef int64_t seq

    cdef int64_t* kinds
    cdef int64_t* period
    cdef int64_t* active
    cdef int64_t* epoch
    cdef int64_t* qbuf
    cdef int64_t* qhead
    cdef int64_t* qlen
    cdef int64_t* cur
    cdef int64_t* nb
    cdef int64_t* be
    cdef int64_t* mac_tok

    cdef int64_t* airborne
    cdef int n_air
    cdef int64_t* tx_start
    cdef int64_t* tx_bad
    cdef int64_t last_busy_end

    cdef int64_t* route_off
    cdef int64_t* route_len
    cdef int64_t* route_nodes

    cdef Packet* pk
    cdef Py_ssize_t n_pk, pk_cap

    cdef int64_t* ival_k
    cdef int64_t* ival_end
    cdef int64_t* miss
    cdef int64_t* ontime
    cdef int64_t* exp_cur
    cdef int64_t* exp_next

    cdef int64_t* stats

    def __cinit__(self, *args, **kwargs):
        self.heap = NULL
        self.pk = NULL

    def __init__(self, kinds, periods_ns, routes, active0, timeline, mac,
                 t_flc_ns, end_ns, seed, inband=False, hooks=None, trace=None):
        cdef int n = len(kinds)
        cdef int i, j
        self.n = n
        self.events = 0
        self.violations = 0
        self.now = 0
        (self.unit_ns, self.cca_ns, self.min_be, self.max_be,
         self.max_backoffs, self.qcap, self.air_ns) = mac
        self.t_flc = t_flc_ns
        self.end = end_ns
        self.inband = bool(inband)
        self.hooks = hooks
        self.trace = trace
        self.rng = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)

        self.heap_cap = 1024
        self.heap = <Event*>_grow(NULL, self.heap_cap * sizeof(Event))
        self.heap_len = 0
        self.seq = 0

        self.kinds = _zeros(n)
        self.period = _zeros(n)
        self.active = _zeros(n)
        self.epoch = _zeros(n)
        self.qbuf = _zeros(n * self.qcap)
        self.qhead = _zeros(n)
        self.qlen = _zeros(n)
        self.cur = _zeros(n)
        self.nb = _zeros(n)
        self.be = _zeros(n)
        self.mac_tok = _zeros(n)
        self.airborne = _zeros(n)
        self.n_air = 0
        self.tx_start = _zeros(n)
        self.tx_bad = _zeros(n)
        self.last_busy_end = -1
        self.ival_k = _zeros(n)
        self.ival_end = _zeros(n)
        self.miss = _zeros(n)
        self.ontime = _zeros(n)
        self.exp_cur = _zeros(n)
        self.exp_next = _zeros(n)
        self.stats = _zeros(n * N_STATS)
        for i in range(n):
            self.kinds[i] = kinds[i]
            self.period[i] = periods_ns[i]
            self.cur[i] = -1

        # route ids: node i -> its data route, n + i -> feedback route to i
        all_routes = [list(r) for r in routes] + [
            [r[len(r) - 1], i] if len(r) >= 2 and kinds[i] == SOURCE else []
            for i, r in enumerate(routes)
        ]
        total = sum(len(r) for r in all_routes)
        self.route_off = _zeros(2 * n)
        self.route_len = _zeros(2 * n)
        self.route_nodes = _zeros(total)
        j = 0
        for i, r in enumerate(all_routes):
            self.route_off[i] = j
            self.route_len[i] = len(r)
            for hop in r:
                self.route_nodes[j] = hop
                j += 1

        self.pk_cap = 4096
        self.pk = <Packet*>_grow(NULL, self.pk_cap * sizeof(Packet))
        self.n_pk = 0

        for i in range(n):
            if active0[i] and (kinds[i] == SOURCE or kinds[i] == INTERFERER):
                self._push(0, EV_TIMELINE, i, 1)
        for t, node, on in timeline:
            if t <= end_ns:
                self._push(t, EV_TIMELINE, node, 1 if on else 0)

    def __dealloc__(self):
        free(self.heap)
        free(self.pk)
        free(self.kinds); free(self.period); free(self.active); free(self.epoch)
        free(self.qbuf); free(self.qhead); free(self.qlen); free(self.cur)
        free(self.nb); free(self.be); free(self.mac_tok); free(self.airborne)
        free(self.tx_start); free(self.tx_bad); free(self.route_off)
        free(self.route_len); free(self.route_nodes); free(self.ival_k)
        free(self.ival_end); free(self.miss); free(self.ontime)
        free(self.exp_cur); free(self.exp_next); free(self.stats)

    # -- rng -----------------------------------------------------------------

    cdef inline uint64_t _next_u64(self):
        cdef uint64_t z
        self.rng += <uint64_t>0x9E3779B97F4A7C15
        z = self.rng
        z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
        return z ^ (z >> 31)

    cdef inline int64_t _bits(self, int k):
        cdef uint64_t r = self._next_u64()
        if k == 0:
            return 0
        return <int64_t>(r >> (64 - k))

    # -- event heap ----------------------------------------------------------

    cdef int _push(self, int64_t t, int64_t kind, int64_t a, int64_t b) except -1:
        cdef Py_ssize_t i, parent
        cdef Event ev
        if t < self.now:
            raise SchedulingInPast(f"event at {t} ns scheduled at {self.now} ns")
        if self.heap_len == self.heap_cap:
            self.heap_cap *= 2
            self.heap = <Event*>_grow(self.heap, self.heap_cap * sizeof(Event))
        self.seq += 1
        ev.t = t
        ev.kind = kind
        ev.seq = self.seq
        ev.a = a
        ev.b = b
        i = self.heap_len
        self.heap_len += 1
        while i > 0:
            parent = (i - 1) >> 1
            if ev_less(&ev, &self.heap[parent]):
                self.heap[i] = self.heap[parent]
                i = parent
            else:
                break
        self.heap[i] = ev
        return 0

    cdef Event _pop(self):
        cdef Event top = self.heap[0]
        cdef Event last
        cdef Py_ssize_t i = 0, child, n
        self.heap_len -= 1
        n = self.heap_len
        if n > 0:
            last = self.heap[n]
            while True:
                child = 2 * i + 1
                if child >= n:
                    break
                if child + 1 < n and ev_less(&self.heap[child + 1], &self.heap[child]):
                    child += 1
                if ev_less(&self.heap[child], &last):
                    self.heap[i] = self.heap[child]
                    i = child
                else:
                    break
            self.heap[i] = last
        return top

    def run(self):
        cdef Event ev
        cdef int i, f
        trace = self.trace
        while self.heap_len > 0 and self.heap[0].t <= self.end:
            ev = self._pop()
            self.now = ev.t
            self.events += 1
            if trace is not None:
                trace(f"{ev.t} {EVENT_NAMES[ev.kind]} {ev.a} {ev.b}")
            if ev.kind == EV_TX_END:
                self._on_tx_end(ev.a)
            elif ev.kind == EV_DEADLINE:
                self._on_deadline(ev.a)
            elif ev.kind == EV_INTERVAL:
                self._on_interval(ev.a, ev.b)
            elif ev.kind == EV_TIMELINE:
                self._on_timeline(ev.a, ev.b)
            elif ev.kind == EV_GEN:
                self._on_gen(ev.a, ev.b)
            else:
                self._on_cca(ev.a, ev.b)
        return {name: [self.stats[i * N_STATS + f] for i in range(self.n)]
                for f, name in enumerate(STAT_FIELDS)}

    # -- node activity -------------------------------------------------------

    cdef inline bint _is_airborne(self, int64_t node):
        cdef int i
        for i in range(self.n_air):
            if self.airborne[i] == node:
                return True
        return False

    cdef int _on_timeline(self, int64_t node, int64_t on) except -1:
        if on:
            if self.active[node]:
                return 0
            self.active[node] = 1
            self.epoch[node] += 1
            if self.kinds[node] == SOURCE:
                self.ival_end[node] = self.now + self.t_flc
                self.miss[node] = 0
                self.ontime[node] = 0
                self.exp_cur[node] = 0
                self.exp_next[node] = 0
                if self.ival_end[node] <= self.end:
                    self._push(self.ival_end[node], EV_INTERVAL, node, self.epoch[node])
            self._push(self.now, EV_GEN, node, self.epoch[node])
        else:
            if not self.active[node]:
                return 0
            self.active[node] = 0
            self.epoch[node] += 1
            self.stats[node * N_STATS + ST_FLUSHED] += self.qlen[node]
            self.qlen[node] = 0
            self.qhead[node] = 0
            if self.cur[node] >= 0 and not self._is_airborne(node):
                self.stats[node * N_STATS + ST_FLUSHED] += 1
                self.cur[node] = -1
                self.mac_tok[node] += 1
        return 0

    cdef int _on_gen(self, int64_t node, int64_t ep) except -1:
        cdef int64_t now, h, pkt, deadline
        if ep != self.epoch[node] or not self.active[node]:
            return 0
        now = self.now
        h = self.period[node]
        pkt = self._new_packet(node, node, now + h, DATA, 0)
        self.stats[node * N_STATS + ST_GENERATED] += 1
        if self.kinds[node] == SOURCE:
            deadline = now + h
            if deadline <= self.ival_end[node]:
                self.exp_cur[node] += 1
            else:
                self.exp_next[node] += 1
            if deadline <= self.end:
                self._push(deadline, EV_DEADLINE, pkt, 0)
        self._enqueue(node, pkt)
        if now + h <= self.end:
            self._push(now + h, EV_GEN, node, ep)
        return 0

    cdef int64_t _new_packet(self, int64_t src, int64_t route, int64_t deadline,
                             int64_t kind, int64_t aux) except -1:
        cdef Packet* p
        if self.n_pk == self.pk_cap:
            self.pk_cap *= 2
            self.pk = <Packet*>_grow(self.pk, self.pk_cap * sizeof(Packet))
        p = &self.pk[self.n_pk]
        p.src = src
        p.deadline = deadline
        p.route = route
        p.hop = 0
        p.delivered = -1
        p.epoch = self.epoch[src]
        p.kind = kind
        p.aux = aux
        self.n_pk += 1
        return self.n_pk - 1

    # -- MAC -----------------------------------------------------------------

    cdef int _enqueue(self, int64_t node, int64_t pkt) except -1:
        cdef int64_t base = node * self.qcap
        if self.cur[node] < 0:
            self.cur[node] = pkt
            self._begin_csma(node)
            return 0
        if self.qlen[node] >= self.qcap:
            self.qhead[node] = (self.qhead[node] + 1) % self.qcap
            self.qlen[node] -= 1
            self.stats[node * N_STATS + ST_QUEUE_DROPS] += 1
        self.qbuf[base + (self.qhead[node] + self.qlen[node]) % self.qcap] = pkt
        self.qlen[node] += 1
        return 0

    cdef int _begin_csma(self, int64_t node) except -1:
        self.nb[node] = 0
        self.be[node] = self.min_be
        return self._backoff(node)

    cdef int _backoff(self, int64_t node) except -1:
        cdef int64_t slots = self._bits(<int>self.be[node])
        cdef int64_t t = self.now + slots * self.unit_ns + self.cca_ns
        return self._push(t, EV_CCA, node, self.mac_tok[node])

    cdef bint _channel_busy(self, int64_t a, int64_t b):
        cdef int i
        if self.last_busy_end > a:
            return True
        for i in range(self.n_air):
            if self.tx_start[self.airborne[i]] < b:
                return True
        return False

    cdef int _on_cca(self, int64_t node, int64_t tok) except -1:
        if tok != self.mac_tok[node]:
            return 0
        if not self._channel_busy(self.now - self.cca_ns, self.now):
            return self._transmit(node)
        self.nb[node] += 1
        if self.nb[node] >= self.max_backoffs:
            self.stats[node * N_STATS + ST_ACCESS_FAILURES] += 1
            return self._next_frame(node)
        self.be[node] = min(self.be[node] + 1, self.max_be)
        return self._backoff(node)

    cdef int _transmit(self, int64_t node) except -1:
        cdef int i
        cdef bint bad = False
        for i in range(self.n_air):
            self.tx_bad[self.airborne[i]] = 1
            bad = True
        self.tx_bad[node] = bad
        self.tx_start[node] = self.now
        self.airborne[self.n_air] = node
        self.n_air += 1
        self.stats[node * N_STATS + ST_TRANSMISSIONS] += 1
        return self._push(self.now + self.air_ns, EV_TX_END, node, 0)

    cdef int _on_tx_end(self, int64_t node) except -1:
        cdef int i, j = 0
        for i in range(self.n_air):
            if self.airborne[i] != node:
                self.airborne[j] = self.airborne[i]
                j += 1
        self.n_air = j
        if self.now > self.last_busy_end:
            self.last_busy_end = self.now
        if self.tx_bad[node]:
            self.stats[node * N_STATS + ST_COLLISIONS] += 1
        else:
            self._deliver(self.cur[node])
        return self._next_frame(node)

    cdef int _next_frame(self, int64_t node) except -1:
        if self.qlen[node] > 0:
            self.cur[node] = self.qbuf[node * self.qcap + self.qhead[node]]
            self.qhead[node] = (self.qhead[node] + 1) % self.qcap
            self.qlen[node] -= 1
            return self._begin_csma(node)
        self.cur[node] = -1
        return 0

    cdef int _deliver(self, int64_t pkt) except -1:
        cdef Packet* p = &self.pk[pkt]
        cdef int64_t rid = p.route
        cdef int64_t hop = p.hop + 1
        cdef int64_t dest, src, new_h
        p.hop = hop
        dest = self.route_nodes[self.route_off[rid] + hop]
        if hop < self.route_len[rid] - 1:
            return self._enqueue(dest, pkt)
        src = p.src
        if p.kind == FEEDBACK:
            if self.hooks is not None and self.active[src]:
                new_h = self.hooks.on_feedback(src, p.aux, self.now)
                if new_h > 0:
                    self.period[src] = new_h
            return 0
        p.delivered = self.now
        self.stats[src * N_STATS + ST_DELIVERED] += 1
        return 0

    # -- deadline and interval bookkeeping -----------------------------------

    cdef int _on_deadline(self, int64_t pkt) except -1:
        cdef Packet* p = &self.pk[pkt]
        cdef int64_t src = p.src
        if p.epoch != self.epoch[src] or not self.active[src]:
            return 0
        if 0 <= p.delivered <= p.deadline:
            self.ontime[src] += 1
            self.stats[src * N_STATS + ST_ON_TIME] += 1
        else:
            self.miss[src] += 1
            self.stats[src * N_STATS + ST_MISSED] += 1
        return 0

    cdef int _on_interval(self, int64_t node, int64_t ep) except -1:
        cdef int64_t k, new_h, rid, act, pkt
        if ep != self.epoch[node]:
            return 0
        k = self.ival_k[node]
        if self.miss[node] + self.ontime[node] != self.exp_cur[node]:
            self.violations += 1
        if self.hooks is not None:
            new_h = self.hooks.on_interval(
                node, k, self.now, self.miss[node], self.ontime[node], self.period[node])
            if self.inband:
                rid = self.n + node
                act = self.route_nodes[self.route_off[rid]]
                pkt = self._new_packet(node, rid, -1, FEEDBACK, k)
                self._enqueue(act, pkt)
            elif new_h > 0:
                self.period[node] = new_h
        self.miss[node] = 0
        self.ontime[node] = 0
        self.exp_cur[node] = self.exp_next[node]
        self.exp_next[node] = 0
        self.ival_k[node] = k + 1
        self.ival_end[node] += self.t_flc
        if self.ival_end[node] <= self.end:
            self._push(self.ival_end[node], EV_INTERVAL, node, ep)
        return 0
