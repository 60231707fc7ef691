import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flcqm._engine_py import ACTUATOR, INTERFERER, INTERMEDIATE, SOURCE
from flcqm._rng import SplitMix64
from flcqm.engine import EventQueue, airtime_ns, available_backends, engine_class
from flcqm.errors import SchedulingInPast
from flcqm.scenario import MacConfig, NodeSpec, ScenarioSpec, TimelineEvent
from flcqm.simulator import Simulation

AIR = 1_440_000
UNIT, CCA = 320_000, 128_000
MAC = (UNIT, CCA, 3, 5, 4, 10, AIR)
BACKENDS = available_backends()


def run(kinds, periods, routes, end_ns, seed=1, backend="python", active0=None,
        timeline=(), t_flc=10**12, before_run=None):
    lines = []
    eng = engine_class(backend)(kinds, periods, routes, active0 or [True] * len(kinds),
                                list(timeline), MAC, t_flc, end_ns, seed, False, None,
                                lines.append)
    if before_run:
        before_run(eng)
    stats = eng.run()
    events = [(int(t), name, int(a), int(b)) for t, name, a, b in (ln.split() for ln in lines)]
    return eng, stats, events


def first_seed(pred):
    return next(s for s in range(1, 10_000) if pred(SplitMix64(s)))


# -- event queue -------------------------------------------------------------

def test_queue_orders_by_time():
    q = EventQueue()
    q.schedule(5, "A")
    q.schedule(3, "B")
    assert q.pop_next() == (3, "B")
    assert q.pop_next() == (5, "A")


def test_queue_ties_break_by_insertion():
    q = EventQueue()
    q.schedule(3, "A")
    q.schedule(3, "B")
    assert [q.pop_next()[1], q.pop_next()[1]] == ["A", "B"]


def test_queue_empty_and_past():
    q = EventQueue()
    assert q.pop_next() is None
    q.schedule(10, "x")
    q.pop_next()
    with pytest.raises(SchedulingInPast):
        q.schedule(9, "y")
    q.schedule(10, "same instant is fine")


# -- primitives --------------------------------------------------------------

def test_airtime():
    assert airtime_ns(45, 250_000) == AIR
    assert MacConfig().airtime == pytest.approx(0.00144)


def test_splitmix_reference_vector():
    r = SplitMix64(1234567)
    assert [r.next_u64() for _ in range(3)] == [
        6457827717110365317, 3203168211198807973, 9817491932198370423]


def test_rng_bits_range():
    r = SplitMix64(5)
    draws = [r.bits(3) for _ in range(4000)]
    assert set(draws) == set(range(8))


# -- single node -------------------------------------------------------------

@pytest.mark.parametrize("backend", BACKENDS)
def test_idle_channel_backoff_and_delivery(backend):
    _, stats, events = run([SOURCE, ACTUATOR], [10_000_000, 0], [[0, 1], []],
                           2_000_000_000, seed=4, backend=backend)
    gens = [t for t, name, a, _ in events if name == "gen" and a == 0]
    ccas = [t for t, name, a, _ in events if name == "cca" and a == 0]
    ends = [t for t, name, a, _ in events if name == "tx_end" and a == 0]
    # the sample generated at the horizon never reaches its CCA
    assert len(gens) == 201 and len(ccas) == len(ends) == 200
    waits = {c - g for g, c in zip(gens, ccas)}
    assert waits <= {CCA + k * UNIT for k in range(8)}
    assert CCA in waits  # a zero draw transmits right after the CCA
    assert all(e - c == AIR for c, e in zip(ccas, ends))
    assert stats["collisions"][0] == 0
    assert stats["missed"][0] == 0
    assert stats["on_time"][0] == 200  # the final packet's deadline lies past the end
    assert all(e - g < 10_000_000 for g, e in zip(gens, ends))


@pytest.mark.parametrize("backend", BACKENDS)
def test_two_hops_means_two_contentions(backend):
    _, stats, _ = run([SOURCE, INTERMEDIATE, ACTUATOR], [10_000_000, 0, 0],
                      [[0, 1, 2], [], []], 1_000_000_000, backend=backend)
    assert stats["generated"][0] == 101
    assert stats["transmissions"][0] == stats["transmissions"][1] == stats["delivered"][0] == 100
    assert stats["collisions"] == [0, 0, 0]


# -- deadline boundary -------------------------------------------------------

ZERO_DRAW = first_seed(lambda r: r.bits(3) == 0)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("period, on_time", [
    (CCA + AIR + 1, 1),   # delivered 1 ns before the deadline
    (CCA + AIR, 1),       # delivered exactly at the deadline
    (CCA + AIR - 1, 0),   # still in flight at the deadline
])
def test_deadline_boundary(backend, period, on_time):
    _, stats, _ = run([SOURCE, ACTUATOR], [period, 0], [[0, 1], []], max(period, CCA + AIR),
                      seed=ZERO_DRAW, backend=backend)
    assert stats["delivered"][0] == 1
    assert stats["on_time"][0] == on_time
    assert stats["missed"][0] == 1 - on_time


# -- collisions --------------------------------------------------------------

SAME_DRAW = first_seed(lambda r: r.bits(3) == r.bits(3))


@pytest.mark.parametrize("backend", BACKENDS)
def test_simultaneous_transmissions_collide(backend):
    _, stats, events = run([SOURCE, SOURCE, ACTUATOR], [10_000_000, 10_000_000, 0],
                           [[0, 2], [1, 2], []], 5_000_000, seed=SAME_DRAW, backend=backend)
    assert stats["transmissions"][:2] == [1, 1]
    assert stats["collisions"][:2] == [1, 1]
    assert stats["delivered"][:2] == [0, 0]
    assert stats["missed"][:2] == [0, 0]  # deadlines lie beyond the horizon


def test_busy_channel_defers_instead_of_colliding():
    # different first draws: the later CCA sees the earlier frame and backs off
    seeds = [s for s in range(1, 80) if (lambda r: r.bits(3) != r.bits(3))(SplitMix64(s))]
    both = 0
    for seed in seeds:
        _, stats, _ = run([SOURCE, SOURCE, ACTUATOR], [100_000_000, 100_000_000, 0],
                          [[0, 2], [1, 2], []], 99_000_000, seed=seed)
        assert stats["collisions"][:2] == [0, 0]
        assert sum(stats["delivered"][:2]) + sum(stats["access_failures"][:2]) == 2
        both += stats["delivered"][:2] == [1, 1]
    assert both > len(seeds) // 2


def test_access_failure_after_four_busy_ccas():
    def jam(eng):
        eng.last_busy_end = 10**15

    _, stats, events = run([SOURCE, ACTUATOR], [100_000_000, 0], [[0, 1], []], 100_000_000,
                           before_run=jam)
    ccas = [t for t, name, a, _ in events if name == "cca" and t < 100_000_000]
    assert len(ccas) == 4
    gaps = [b - a for a, b in zip([0] + ccas, ccas)]
    for gap, be in zip(gaps, (3, 4, 5, 5)):
        assert CCA <= gap <= CCA + (2 ** be - 1) * UNIT
    assert stats["access_failures"][0] == 1
    assert stats["transmissions"][0] == 0
    assert stats["missed"][0] == 1


# -- queueing ----------------------------------------------------------------

def test_queue_overflow_drops_oldest():
    eng, stats, _ = run([SOURCE, ACTUATOR], [100_000, 0], [[0, 1], []], 5_000_000)
    assert stats["queue_drops"][0] > 0
    newest = len(eng.p_src) - 1
    assert list(eng.queue[0]) == list(range(newest - 9, newest + 1))


@pytest.mark.parametrize("backend", BACKENDS)
def test_overflowed_frames_count_as_misses(backend):
    eng, stats, _ = run([SOURCE, ACTUATOR], [1_000_000, 0], [[0, 1], []], 200_000_000,
                        backend=backend, t_flc=20_000_000)
    assert stats["queue_drops"][0] > 0
    assert stats["missed"][0] >= stats["queue_drops"][0]
    assert eng.violations == 0


# -- activity ----------------------------------------------------------------

@pytest.mark.parametrize("backend", BACKENDS)
def test_deactivation_stops_generation(backend):
    timeline = [(50_000_000, 1, True), (150_000_000, 1, False)]
    _, stats, events = run([SOURCE, INTERFERER, ACTUATOR], [10_000_000, 5_000_000, 0],
                           [[0, 2], [1, 2], []], 300_000_000, backend=backend,
                           active0=[True, False, True], timeline=timeline)
    gens = [t for t, name, a, _ in events if name == "gen" and a == 1]
    assert gens[0] == 50_000_000
    # the generation event pending at switch-off is popped but ignored
    assert max(gens) == 150_000_000
    assert stats["generated"][1] == 20


# -- whole-simulation properties ---------------------------------------------

@st.composite
def small_scenarios(draw):
    n_src = draw(st.integers(1, 3))
    relay = draw(st.booleans())
    nodes = [NodeSpec(f"s{i}", "source", draw(st.sampled_from([0.004, 0.006, 0.010, 0.025])))
             for i in range(n_src)]
    nodes.append(NodeSpec("x", "interferer", draw(st.sampled_from([0.003, 0.010]))))
    if relay:
        nodes.append(NodeSpec("r", "intermediate"))
    nodes.append(NodeSpec("a", "actuator"))
    routes = []
    for n in nodes:
        if n.kind in ("source", "interferer"):
            via = relay and draw(st.booleans())
            routes.append((n.name, "r", "a") if via else (n.name, "a"))
    on = draw(st.floats(0.0, 3.0))
    off = on + draw(st.floats(0.5, 3.0))
    timeline = (TimelineEvent(round(on, 3), "x", "activate"),
                TimelineEvent(round(off, 3), "x", "deactivate"))
    return ScenarioSpec(nodes=tuple(nodes), routes=tuple(routes), timeline=timeline,
                        scheme=draw(st.sampled_from(["fixed", "flc"])),
                        feedback=draw(st.sampled_from(["outofband", "inband"])),
                        seed=draw(st.integers(0, 2**32)), end_time=8.0)


@settings(max_examples=25, deadline=None)
@given(small_scenarios())
def test_simulation_invariants(spec):
    lines = []
    log = Simulation(spec, backend="python", trace=lines.append).run_until(spec.end_time)
    assert log.conservation_violations == 0
    events = [ln.split() for ln in lines]
    times = [int(e[0]) for e in events]
    assert times == sorted(times)  # causality
    cca_at = {(int(t), a) for t, name, a, _ in events if name == "cca"}
    for t, name, a, _ in events:
        if name == "tx_end":
            assert (int(t) - AIR, a) in cca_at  # every frame occupies exactly one airtime
    for name in spec.sources:
        rows = log.series[name]
        assert [r.k for r in rows] == list(range(len(rows)))
        assert all(0.0 <= r.dmr <= 1.0 for r in rows)


def test_single_source_never_collides_and_flc_speeds_up():
    spec = ScenarioSpec(nodes=(NodeSpec("s1", "source"), NodeSpec("a1", "actuator")),
                        routes=(("s1", "a1"),), scheme="flc", end_time=20.0)
    log = Simulation(spec).run_until(spec.end_time)
    assert log.totals["s1"].collisions == 0
    hs = [r.h for r in log.series["s1"]]
    assert hs[-1] < hs[0] == 0.010
    assert min(hs) >= 0.002


def test_empty_scenario_gives_empty_log():
    spec = ScenarioSpec(nodes=(), routes=())
    log = Simulation(spec).run_until(spec.end_time)
    assert log.series == {} and log.totals == {}
