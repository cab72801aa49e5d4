from __future__ import annotations

import math

import pytest
from hypothesis import HealthCheck, settings

from equasi.bifunc import ErrorBifunction
from equasi.funcspec import Box, ScalarFunc

settings.register_profile("equasi", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("equasi")

# sources shared by several test modules
PLATEAU = "min(max(abs(abs(x) - 1), x^2 - 3), 6)"
SLM = "2*abs(abs(x - 1) - 1) - abs(x)"
PIECEWISE = "min(abs(x + 2), sqrt(abs(x)), 1)"
SIN_SQRT = "sin(sqrt(abs(x)))"


def F(src: str, arity: int = 1, domain: Box | None = None) -> ScalarFunc:
    return ScalarFunc.from_source(src, arity, domain)


dist = ErrorBifunction.scaled_distance
square = ErrorBifunction.scaled_square
zero = ErrorBifunction.zero


@pytest.fixture
def plateau():
    return F(PLATEAU)


@pytest.fixture
def kkt_box():
    return Box.interval(-math.pi, math.pi, open=True)


@pytest.fixture(scope="session")
def corpus_run():
    """One default run of the bundled corpus: ``{stem: (report, timings)}`` plus the wall time."""
    import time

    from equasi.cli.main import run_corpus

    t0 = time.perf_counter()
    results = run_corpus(None)
    return {name: (rep, tim) for name, rep, tim in results}, time.perf_counter() - t0
