"""Acceptance criteria 1-11, one test each.

Every test prints a single ``[PASS]``/``[FAIL]`` line (visible without
``-s``) before asserting.  Run just this gate with::

    pytest tests/test_acceptance.py -v
"""

import dataclasses
import time
from fractions import Fraction

import numpy as np
import pytest

import oracles
from conftest import SEEDS
from flcqm.cli import main as cli_main
from flcqm.fuzzy import DE_UNIVERSE, E_UNIVERSE, controller_step, default_controller
from flcqm.qos import compute_dmr
from flcqm.scenario import build_paper_scenario, run_scheme

SOURCES = ("s1", "s2", "s3", "s4")


@pytest.fixture
def verdict(capsys):
    def report(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail}")
        assert ok, detail
    return report


@pytest.fixture(scope="module")
def runs(reference_run):
    """All 20 reference runs plus the wall time they took."""
    t0 = time.perf_counter()
    out = {(scheme, s): reference_run(scheme, s) for scheme in ("fixed", "flc") for s in SEEDS}
    return out, time.perf_counter() - t0


def _dmr(log, src):
    return [r.dmr for r in log.series[src]]


def test_01_dmr_exact(verdict):
    a = compute_dmr(50, 1.0, 0.010)
    b = compute_dmr(10, 1.0, 0.012)
    ok = (a.ratio == Fraction(1, 2) and a.dmr == 0.5
          and b.expected == 83 and b.ratio == Fraction(10, 83) and b.dmr == 10 / 83)
    verdict(1, "DMR exactness", ok, f"{a.ratio} and {b.ratio} (expected 1/2 and 10/83)")


def test_02_equilibrium(verdict):
    dh = controller_step(default_controller(), 0.0, 0.0)
    verdict(2, "controller equilibrium", abs(dh) <= 1e-9, f"step(0, 0) = {dh:.3e} ms")


def test_03_centroid_oracle(verdict):
    ctrl = default_controller()
    rng = np.random.default_rng(2024)
    pairs = np.column_stack([rng.uniform(*E_UNIVERSE, 1000), rng.uniform(*DE_UNIVERSE, 1000)])
    t0 = time.perf_counter()
    ours = [ctrl.step(e, de) for e, de in pairs]
    elapsed = time.perf_counter() - t0
    ref = [oracles.centroid(e, de) for e, de in pairs]
    worst = float(np.max(np.abs(np.subtract(ours, ref))))
    ok = worst <= 1e-6 and elapsed < 10
    verdict(3, "centroid oracle", ok,
            f"max |error| {worst:.2e} ms over 1000 pairs, {elapsed:.2f} s")


def test_04_surface_monotone(verdict):
    ctrl = default_controller()
    grid = np.array([[ctrl.step(e, de) for de in ctrl.de_var.peaks] for e in ctrl.e_var.peaks])
    along_e = float(np.max(np.diff(grid, axis=0)))
    along_de = float(np.max(np.diff(grid, axis=1)))
    ok = along_e <= 1e-9 and along_de <= 1e-9
    verdict(4, "surface monotonicity", ok,
            f"largest increase along E {along_e:.2e}, along DE {along_de:.2e}")


def test_05_baseline_degradation(verdict, runs):
    data, elapsed = runs
    avg = {s: np.mean([data[("fixed", k)][1].average[s] for k in SEEDS]) for s in SOURCES}
    seg = {s: np.mean([data[("fixed", k)][1].segments[s][0] for k in SEEDS]) for s in ("s1", "s2")}
    ok = all(v >= 0.30 for v in avg.values()) and seg["s1"] > seg["s2"] and elapsed < 60
    detail = ", ".join(f"{s} {v:.3f}" for s, v in avg.items())
    verdict(5, "baseline degradation", ok,
            f"fixed averages {detail}; [0,20] s1 {seg['s1']:.3f} > s2 {seg['s2']:.3f}")


def test_06_flc_improvement(verdict, runs):
    data, elapsed = runs
    ratios = {}
    for s in SOURCES:
        fixed = np.mean([data[("fixed", k)][1].average[s] for k in SEEDS])
        flc = np.mean([data[("flc", k)][1].average[s] for k in SEEDS])
        ratios[s] = flc / fixed
    ok = all(r <= 0.5 for r in ratios.values()) and elapsed < 120
    detail = ", ".join(f"{s} {r:.3f}" for s, r in ratios.items())
    verdict(6, "FLC improvement", ok, f"flc/fixed {detail} (bar 0.5)")


def test_07_setpoint_tracking(verdict, runs):
    data, _ = runs
    means = {}
    for s in ("s1", "s2"):
        per_seed = [np.mean([r.dmr for r in data[("flc", k)][0].series[s] if 8 < r.t_end <= 20])
                    for k in SEEDS]
        means[s] = float(np.mean(per_seed))
    ok = all(0.0 <= m <= 0.20 for m in means.values())
    verdict(7, "setpoint tracking", ok,
            f"mean DMR on [8,20] s: s1 {means['s1']:.3f}, s2 {means['s2']:.3f}")


def _recovers(d):
    # d[j] is the interval ending at j + 1 s; look for 5 good intervals that
    # start within 10 intervals of 20 s and finish by 40 s
    return any(all(x <= 0.20 for x in d[j:j + 5]) for j in range(20, 30) if j + 5 <= 40)


def test_08_transient_recovery(verdict, runs):
    data, _ = runs
    hits = sum(_recovers(_dmr(data[("flc", k)][0], "s1")) for k in SEEDS)
    verdict(8, "transient recovery", hits >= 8, f"{hits}/10 seeds recover (need 8)")


def test_09_period_direction(verdict, runs):
    data, _ = runs
    hits = 0
    for k in SEEDS:
        rows = data[("flc", k)][0].series["s1"]
        before = np.mean([r.h for r in rows if 10 < r.t_end <= 20])
        during = np.mean([r.h for r in rows if 25 < r.t_end <= 40])
        hits += during > before
    verdict(9, "period adaptation direction", hits >= 8,
            f"{hits}/10 seeds raise s1's mean period on [25,40] s above [10,20] s")


def test_10_determinism(verdict, tmp_path):
    t0 = time.perf_counter()
    for d in ("first", "second"):
        code = cli_main(["run", "--scheme", "both", "--seed", "7", "--out", str(tmp_path / d)])
        assert code == 0
    names = ["dmr_fixed.csv", "dmr_flc.csv", "summary_fixed.csv", "summary_flc.csv"]
    same = [(tmp_path / "first" / n).read_bytes() == (tmp_path / "second" / n).read_bytes()
            for n in names]
    elapsed = time.perf_counter() - t0
    verdict(10, "determinism", all(same) and elapsed < 60,
            f"{sum(same)}/{len(names)} CSVs byte-identical, {elapsed:.1f} s")


def test_11_conservation(verdict, runs):
    data, _ = runs
    logs = [log for log, _ in data.values()]
    for seed in (1, 2):
        spec = dataclasses.replace(build_paper_scenario("flc", seed), feedback="inband")
        logs.append(run_scheme(spec)[0])
    violations = sum(log.conservation_violations for log in logs)
    intervals = sum(len(rows) for log in logs for rows in log.series.values())
    verdict(11, "conservation", violations == 0,
            f"{violations} violations over {len(logs)} runs, {intervals} source-intervals "
            f"(the simulator also raises on any violation in every other test)")
