import functools

import pytest

from flcqm.scenario import build_paper_scenario, run_scheme

SEEDS = tuple(range(1, 11))


@functools.lru_cache(maxsize=None)
def _reference_run(scheme, seed, backend=None):
    return run_scheme(build_paper_scenario(scheme, seed), backend)


@pytest.fixture(scope="session")
def reference_run():
    """``reference_run(scheme, seed)`` -> (MetricsLog, SummaryTable), cached per session."""
    return _reference_run
