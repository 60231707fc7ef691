"""Mamdani fuzzy inference: max-min composition, centre-of-gravity output.

The controller maps the deadline-miss-ratio error ``e`` and its change
``de`` to a change of sampling period ``dh`` in milliseconds.  Membership
functions, the rule table and the defuzzification grid are plain data so
that several differently tuned controllers can coexist.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import FuzzyConfigError, ZeroMass

INPUT_LABELS = ("NB", "NS", "ZE", "PS", "PB")
OUTPUT_LABELS = ("NB", "NM", "NS", "ZE", "PS", "PM", "PB")

E_UNIVERSE = (-0.2, 0.1)
DE_UNIVERSE = (-0.2, 0.2)
DH_UNIVERSE = (-1.5, 3.0)  # ms

E_PEAKS = (-0.2, -0.1, 0.0, 0.05, 0.1)
DE_PEAKS = (-0.2, -0.1, 0.0, 0.1, 0.2)
# ZE must be symmetric about 0 so that (ZE, ZE) -> ZE defuzzifies to exactly 0.
DH_PEAKS = (-1.5, -1.0, -0.5, 0.0, 0.5, 1.75, 3.0)

# Rows: E label, columns: DE label, both in INPUT_LABELS order.
DEFAULT_RULE_TABLE = {
    "NB": ("PB", "PB", "PB", "PM", "PS"),
    "NS": ("PM", "PS", "PS", "ZE", "ZE"),
    "ZE": ("PS", "ZE", "ZE", "ZE", "NS"),
    "PS": ("ZE", "ZE", "NS", "NS", "NM"),
    "PB": ("NS", "NS", "NM", "NB", "NB"),
}

DEFAULT_RESOLUTION = 4501


@dataclass(frozen=True)
class UniverseInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise FuzzyConfigError(f"empty universe [{self.lo}, {self.hi}]")

    def clamp(self, x: float) -> float:
        return min(max(x, self.lo), self.hi)


@dataclass(frozen=True)
class FuzzySet:
    """Triangular set; a shoulder holds membership at 1 beyond the peak."""

    label: str
    left: float
    peak: float
    right: float
    left_shoulder: bool = False
    right_shoulder: bool = False

    def __post_init__(self):
        if not self.left <= self.peak <= self.right:
            raise FuzzyConfigError(
                f"set {self.label}: breakpoints out of order "
                f"({self.left}, {self.peak}, {self.right})"
            )

    def __call__(self, x: float) -> float:
        return membership_eval(self, x)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted({self.left, self.peak, self.right}))

    def evaluate(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if self.left_shoulder:
            rising = np.ones_like(xs)
        elif self.peak > self.left:
            rising = (xs - self.left) / (self.peak - self.left)
        else:
            rising = np.where(xs < self.peak, 0.0, 1.0)
        if self.right_shoulder:
            falling = np.ones_like(xs)
        elif self.right > self.peak:
            falling = (self.right - xs) / (self.right - self.peak)
        else:
            falling = np.where(xs > self.peak, 0.0, 1.0)
        mu = np.where(xs <= self.peak, rising, falling)
        return np.clip(mu, 0.0, 1.0)


def membership_eval(fs: FuzzySet, x: float) -> float:
    if x == fs.peak:
        return 1.0
    if x < fs.peak:
        if fs.left_shoulder:
            return 1.0
        if x <= fs.left:
            return 0.0
        return (x - fs.left) / (fs.peak - fs.left)
    if fs.right_shoulder:
        return 1.0
    if x >= fs.right:
        return 0.0
    return (fs.right - x) / (fs.right - fs.peak)


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    universe: UniverseInterval
    sets: tuple[FuzzySet, ...]

    def __post_init__(self):
        labels = [s.label for s in self.sets]
        if len(set(labels)) != len(labels):
            raise FuzzyConfigError(f"{self.name}: duplicate labels {labels}")

    @classmethod
    def from_peaks(
        cls,
        name: str,
        universe: tuple[float, float] | UniverseInterval,
        labels: Sequence[str],
        peaks: Sequence[float],
    ) -> "LinguisticVariable":
        """Triangles with feet at the neighbouring peaks, shoulders outermost."""
        if not isinstance(universe, UniverseInterval):
            universe = UniverseInterval(*universe)
        if len(labels) != len(peaks) or len(peaks) < 2:
            raise FuzzyConfigError(
                f"{name}: need one peak per label, got {len(peaks)} for {len(labels)}"
            )
        peaks = [float(p) for p in peaks]
        if any(b <= a for a, b in zip(peaks, peaks[1:])):
            raise FuzzyConfigError(f"{name}: peaks must be strictly increasing")
        if peaks[0] < universe.lo or peaks[-1] > universe.hi:
            raise FuzzyConfigError(f"{name}: peaks outside the universe")
        last = len(peaks) - 1
        sets = []
        for i, (label, p) in enumerate(zip(labels, peaks)):
            left = peaks[i - 1] if i > 0 else p
            right = peaks[i + 1] if i < last else p
            sets.append(FuzzySet(label, left, p, right, i == 0, i == last))
        return cls(name, universe, tuple(sets))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.sets)

    @property
    def peaks(self) -> tuple[float, ...]:
        return tuple(s.peak for s in self.sets)

    def __getitem__(self, label: str) -> FuzzySet:
        for s in self.sets:
            if s.label == label:
                return s
        raise KeyError(label)


def fuzzify(var: LinguisticVariable, x: float) -> dict[str, float]:
    x = var.universe.clamp(float(x))
    return {s.label: membership_eval(s, x) for s in var.sets}


@dataclass(frozen=True)
class Rule:
    e: str
    de: str
    dh: str


@dataclass(frozen=True)
class RuleBase:
    rules: tuple[Rule, ...]

    @classmethod
    def from_table(
        cls,
        table: Mapping[str, Sequence[str]],
        e_labels: Sequence[str] = INPUT_LABELS,
        de_labels: Sequence[str] = INPUT_LABELS,
    ) -> "RuleBase":
        rules = []
        for e_label, row in table.items():
            if len(row) != len(de_labels):
                raise FuzzyConfigError(
                    f"rule row {e_label}: expected {len(de_labels)} entries, got {len(row)}"
                )
            rules.extend(Rule(e_label, d, out) for d, out in zip(de_labels, row))
        return cls(tuple(rules))

    def validate(self, e_labels, de_labels, dh_labels) -> None:
        seen = {}
        for r in self.rules:
            if r.e not in e_labels or r.de not in de_labels:
                raise FuzzyConfigError(f"rule antecedent ({r.e}, {r.de}) has an unknown label")
            if r.dh not in dh_labels:
                raise FuzzyConfigError(f"rule consequent {r.dh} is not an output label")
            if (r.e, r.de) in seen:
                raise FuzzyConfigError(f"duplicate rule for ({r.e}, {r.de})")
            seen[(r.e, r.de)] = r.dh
        missing = [(a, b) for a in e_labels for b in de_labels if (a, b) not in seen]
        if missing:
            raise FuzzyConfigError(
                f"rule base is not total: {len(self.rules)} rules, missing {missing}"
            )

    def lookup(self, e_label: str, de_label: str) -> str:
        for r in self.rules:
            if r.e == e_label and r.de == de_label:
                return r.dh
        raise KeyError((e_label, de_label))


@dataclass(frozen=True)
class Aggregate:
    """Aggregated output membership sampled at sorted points of the DH universe.

    The points are the uniform defuzzification grid plus every breakpoint of
    the piecewise-linear aggregate, so linear interpolation between
    consecutive samples reproduces the function exactly.
    """

    x: np.ndarray
    mu: np.ndarray
    strengths: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class FuzzyController:
    e_var: LinguisticVariable
    de_var: LinguisticVariable
    dh_var: LinguisticVariable
    rule_base: RuleBase
    defuzz_resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        if len(self.e_var.labels) != 5 or set(self.e_var.labels) != set(INPUT_LABELS):
            raise FuzzyConfigError(f"E must carry labels {INPUT_LABELS}")
        if len(self.de_var.labels) != 5 or set(self.de_var.labels) != set(INPUT_LABELS):
            raise FuzzyConfigError(f"DE must carry labels {INPUT_LABELS}")
        if len(self.dh_var.labels) != 7 or set(self.dh_var.labels) != set(OUTPUT_LABELS):
            raise FuzzyConfigError(f"DH must carry labels {OUTPUT_LABELS}")
        if int(self.defuzz_resolution) < 101:
            raise FuzzyConfigError("defuzz_resolution must be at least 101")
        self.rule_base.validate(self.e_var.labels, self.de_var.labels, self.dh_var.labels)

    @cached_property
    def grid(self) -> np.ndarray:
        u = self.dh_var.universe
        return np.linspace(u.lo, u.hi, int(self.defuzz_resolution))

    @cached_property
    def _knots(self) -> np.ndarray:
        u = self.dh_var.universe
        pts = {u.lo, u.hi}
        for s in self.dh_var.sets:
            pts.update(b for b in s.breakpoints if u.lo <= b <= u.hi)
        return np.array(sorted(pts))

    @cached_property
    def _knot_values(self) -> dict[str, np.ndarray]:
        return {s.label: s.evaluate(self._knots) for s in self.dh_var.sets}

    def step(self, e: float, de: float) -> float:
        return controller_step(self, e, de)


def default_controller(
    defuzz_resolution: int = DEFAULT_RESOLUTION,
    e_peaks: Sequence[float] = E_PEAKS,
    de_peaks: Sequence[float] = DE_PEAKS,
    dh_peaks: Sequence[float] = DH_PEAKS,
    rule_table: Mapping[str, Sequence[str]] | None = None,
) -> FuzzyController:
    return FuzzyController(
        LinguisticVariable.from_peaks("E", E_UNIVERSE, INPUT_LABELS, e_peaks),
        LinguisticVariable.from_peaks("DE", DE_UNIVERSE, INPUT_LABELS, de_peaks),
        LinguisticVariable.from_peaks("DH", DH_UNIVERSE, OUTPUT_LABELS, dh_peaks),
        RuleBase.from_table(DEFAULT_RULE_TABLE if rule_table is None else rule_table),
        defuzz_resolution,
    )


def _firing_strengths(controller, e_memb, de_memb) -> dict[str, float]:
    """Max over rules sharing a consequent of min(antecedent memberships)."""
    strengths: dict[str, float] = {}
    for r in controller.rule_base.rules:
        w = min(e_memb.get(r.e, 0.0), de_memb.get(r.de, 0.0))
        if w > 0.0 and w > strengths.get(r.dh, 0.0):
            strengths[r.dh] = w
    return strengths


def _kinks(controller, strengths) -> list[float]:
    # Between consecutive knots every output set is linear, so the aggregate
    # can only bend where a set meets a clip level or two sets cross.
    knots = controller._knots
    kv = controller._knot_values
    active = list(strengths)
    levels = sorted(set(strengths.values()))
    out = []
    for i in range(len(knots) - 1):
        k0, k1 = knots[i], knots[i + 1]
        width = k1 - k0
        for a_idx, a in enumerate(active):
            a0, a1 = kv[a][i], kv[a][i + 1]
            if a0 != a1:
                for level in levels:
                    t = (level - a0) / (a1 - a0)
                    if 0.0 < t < 1.0:
                        out.append(k0 + t * width)
            for b in active[a_idx + 1:]:
                d0 = a0 - kv[b][i]
                d1 = a1 - kv[b][i + 1]
                if d0 * d1 < 0.0:
                    out.append(k0 + d0 / (d0 - d1) * width)
    return out


def infer(
    controller: FuzzyController,
    e_memb: Mapping[str, float],
    de_memb: Mapping[str, float],
) -> Aggregate:
    strengths = _firing_strengths(controller, e_memb, de_memb)
    x = np.unique(np.concatenate([
        controller.grid,
        controller._knots,
        np.asarray(_kinks(controller, strengths), dtype=float),
    ]))
    mu = np.zeros_like(x)
    for label, w in strengths.items():
        np.maximum(mu, np.minimum(w, controller.dh_var[label].evaluate(x)), out=mu)
    return Aggregate(x, mu, strengths)


def defuzzify_centroid(controller: FuzzyController, aggregate: Aggregate) -> float:
    """Centre of gravity of the piecewise-linear aggregate, integrated exactly."""
    x, mu = aggregate.x, aggregate.mu
    x0, x1 = x[:-1], x[1:]
    m0, m1 = mu[:-1], mu[1:]
    dx = x1 - x0
    mass = float(np.sum(dx * (m0 + m1)) / 2.0)
    if mass <= 0.0:
        raise ZeroMass("aggregated output membership is identically zero")
    moment = float(np.sum(dx * (x0 * (2.0 * m0 + m1) + x1 * (m0 + 2.0 * m1))) / 6.0)
    u = controller.dh_var.universe
    return min(max(moment / mass, u.lo), u.hi)


def controller_step(controller: FuzzyController, e: float, de: float) -> float:
    agg = infer(controller, fuzzify(controller.e_var, e), fuzzify(controller.de_var, de))
    return defuzzify_centroid(controller, agg)


def surface_sample(controller: FuzzyController, e_grid_n: int, de_grid_n: int) -> np.ndarray:
    """Rows of (e, de, dh) over uniform input grids, ``e`` varying slowest."""
    if e_grid_n < 2 or de_grid_n < 2:
        raise ValueError("surface grid sizes must be at least 2")
    eu, du = controller.e_var.universe, controller.de_var.universe
    rows = []
    for e in np.linspace(eu.lo, eu.hi, e_grid_n):
        for de in np.linspace(du.lo, du.hi, de_grid_n):
            rows.append((e, de, controller_step(controller, e, de)))
    return np.array(rows)
