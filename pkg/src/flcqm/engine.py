"""Simulation kernel selection and the generic event-ordering primitive.

The compiled kernel (``_engine_cy``) is used when it has been built; the
pure-Python kernel is the fallback.  ``FLCQM_BACKEND=python`` (or
``cython``) forces a choice.
"""

from __future__ import annotations

import heapq
import os

from . import _engine_py
from .errors import SchedulingInPast

try:
    from . import _engine_cy
except ImportError:  # extension not built
    _engine_cy = None

BACKENDS = ("cython", "python")


def available_backends() -> list[str]:
    return [b for b in BACKENDS if b == "python" or _engine_cy is not None]


def engine_class(backend: str | None = None):
    backend = backend or os.environ.get("FLCQM_BACKEND") or "auto"
    if backend == "auto":
        return _engine_cy.Engine if _engine_cy is not None else _engine_py.Engine
    if backend == "python":
        return _engine_py.Engine
    if backend == "cython":
        if _engine_cy is None:
            raise ImportError("compiled kernel not built; run `pip install -e .` with Cython")
        return _engine_cy.Engine
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


DEFAULT_BACKEND = engine_class().backend


def airtime_ns(size_bytes: int, data_rate_bps: int) -> int:
    return round(size_bytes * 8 * 1_000_000_000 / data_rate_bps)


class EventQueue:
    """Min-queue of (time, payload) popped in (time, insertion order)."""

    def __init__(self):
        self._heap = []
        self._seq = 0
        self.now = 0

    def __len__(self):
        return len(self._heap)

    def schedule(self, time: int, payload) -> None:
        if time < self.now:
            raise SchedulingInPast(f"cannot schedule at {time}, clock is at {self.now}")
        heapq.heappush(self._heap, (time, self._seq, payload))
        self._seq += 1

    def pop_next(self):
        """Next ``(time, payload)``, or ``None`` once the queue is exhausted."""
        if not self._heap:
            return None
        time, _, payload = heapq.heappop(self._heap)
        self.now = time
        return time, payload
