"""Per-source closed loop: deadline miss ratio -> fuzzy controller -> period."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import InvalidConfig, InvalidPeriod
from .fuzzy import FuzzyController, controller_step

NS_PER_S = 1_000_000_000

DEFAULT_PERIOD = 0.010
DEFAULT_SETPOINT = 0.10
DEFAULT_T_FLC = 1.0
DEFAULT_H_MIN = 0.002
DEFAULT_H_MAX = 0.100


def to_ns(seconds: float) -> int:
    return int(round(seconds * NS_PER_S))


@dataclass(frozen=True)
class DmrSample:
    interval_index: int
    misses: int
    expected: int
    dmr: float

    @property
    def ratio(self) -> Fraction:
        """The miss ratio as an exact fraction (clamped to 1)."""
        return min(Fraction(self.misses, self.expected), Fraction(1))


def compute_dmr(misses: int, t_flc: float, h: float, interval_index: int = 0) -> DmrSample:
    """Misses over the number of samples one interval is expected to hold.

    Both durations are quantised to integer nanoseconds, so the floor of
    ``t_flc / h`` is exact.
    """
    t_ns, h_ns = to_ns(t_flc), to_ns(h)
    if h_ns <= 0 or t_ns < 2 * h_ns or misses < 0:
        raise InvalidPeriod(f"need h > 0, t_flc >= 2h, misses >= 0 (got {misses}, {t_flc}, {h})")
    expected = t_ns // h_ns
    return DmrSample(interval_index, misses, expected, min(1.0, misses / expected))


@dataclass
class QosManagerState:
    source_id: str
    h: float = DEFAULT_PERIOD
    h_min: float = DEFAULT_H_MIN
    h_max: float = DEFAULT_H_MAX
    dmr_setpoint: float = DEFAULT_SETPOINT
    t_flc: float = DEFAULT_T_FLC
    prev_error: float = 0.0
    interval_index: int = 0

    def __post_init__(self):
        if not 0.0 < self.h_min <= self.h <= self.h_max <= self.t_flc / 2:
            raise InvalidConfig(
                f"{self.source_id}: need 0 < h_min <= h <= h_max <= t_flc/2, got "
                f"h_min={self.h_min}, h={self.h}, h_max={self.h_max}, t_flc={self.t_flc}"
            )
        if not 0.0 <= self.dmr_setpoint <= 1.0:
            raise InvalidConfig(f"{self.source_id}: setpoint {self.dmr_setpoint} outside [0, 1]")


def initial_state(source_id: str, **config) -> QosManagerState:
    """Cold-start state; keyword overrides follow the field names."""
    unknown = set(config) - {"h", "h_min", "h_max", "dmr_setpoint", "t_flc"}
    if unknown:
        raise InvalidConfig(f"unknown QoS manager settings: {sorted(unknown)}")
    return QosManagerState(source_id, **config)


def on_interval_end(
    state: QosManagerState, controller: FuzzyController, sample: DmrSample
) -> tuple[float, dict]:
    if sample.interval_index != state.interval_index:
        raise InvalidConfig(
            f"{state.source_id}: sample for interval {sample.interval_index}, "
            f"manager is at {state.interval_index}"
        )
    e = state.dmr_setpoint - sample.dmr
    de = e - state.prev_error
    dh_ms = controller_step(controller, e, de)
    h = min(max(state.h + dh_ms / 1000.0, state.h_min), state.h_max)
    # keep the period on the simulator's nanosecond clock
    h = to_ns(h) / NS_PER_S
    state.prev_error = e
    state.interval_index += 1
    state.h = h
    return h, {"e": e, "de": de, "dh": dh_ms}
