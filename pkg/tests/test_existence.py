from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PLATEAU, SLM, F, dist, square, zero
from equasi.asympt import FeasibleSet
from equasi.certificate import Status
from equasi.errors import PreconditionFailed
from equasi.existence import (
    LOCAL,
    NOT_LOCAL,
    STRICT_LOCAL,
    certify_constrained,
    certify_unconstrained,
    local_min_probe,
    oracle_minimize,
)
from equasi.funcspec import Box
from oracles import brute_min_1d

HALF_LINE = Box.interval(0, math.inf)


@pytest.fixture(scope="module")
def plateau_report():
    return certify_unconstrained(F(PLATEAU), dist(2))


def test_plateau_certified(plateau_report):
    r = plateau_report
    assert r.status is Status.CERTIFIED
    assert r.margin >= 3.8 - 1e-3
    got = sorted(p[0] for p in r.oracle.minimizers)
    assert got == pytest.approx([-1.0, 1.0], abs=1e-3)
    assert r.oracle.min_value == pytest.approx(0.0, abs=1e-6) and r.oracle.bounded


def test_plateau_report_records_preconditions(plateau_report):
    d = plateau_report.to_dict()
    assert d["preconditions"]["lsc"] == "assumed"
    assert d["preconditions"]["homogeneity"]["status"] == "CERTIFIED"
    assert d["preconditions"]["e_qcx"]["status"] == "CERTIFIED"
    assert set(d) >= {"status", "margin", "worst_direction", "preconditions", "oracle"}


def test_unconstrained_examples():
    r = certify_unconstrained(F("x^2"), zero())
    assert r.status is Status.CERTIFIED and r.oracle.minimizers == [[0.0]]
    r = certify_unconstrained(F("x"), zero())
    assert r.status is Status.REFUTED and r.certificate.witness["u"] == [-1.0]
    assert not r.oracle.bounded


def test_homogeneity_precondition_enforced():
    with pytest.raises(PreconditionFailed) as info:
        certify_unconstrained(F("-x^2"), square(1))
    assert "homogeneity" in info.value.assumption


def test_e_quasiconvexity_precondition_enforced():
    with pytest.raises(PreconditionFailed) as info:
        certify_unconstrained(F("-x^2"), zero())
    assert info.value.assumption == "f is e-quasiconvex"


def test_constrained_examples():
    r = certify_constrained(F("sqrt(abs(x))"), zero(), FeasibleSet.from_box(HALF_LINE))
    assert r.status is Status.CERTIFIED and r.oracle.minimizers == [[0.0]]
    r = certify_constrained(F("-x"), zero(), FeasibleSet.ball([0.0], 5.0))
    assert r.status is Status.CERTIFIED and r.oracle.minimizers[0] == pytest.approx([5.0], abs=1e-6)
    r = certify_constrained(F("x"), zero(), FeasibleSet.from_box(Box.interval(-math.inf, 0)))
    assert r.status is Status.REFUTED and r.certificate.witness["u"] == [-1.0]


def test_constrained_on_whole_space_reduces_to_unconstrained(plateau_report):
    r = certify_constrained(F(PLATEAU), dist(2), FeasibleSet.whole(1))
    assert r.status is plateau_report.status
    assert r.margin == pytest.approx(plateau_report.margin, abs=1e-9)


def test_constrained_oracle_against_grid():
    S = FeasibleSet.polyhedron([[-1.0]], [-2.0])  # x >= 2
    got = oracle_minimize(F("abs(x - 1)"), S)
    x, v = brute_min_1d(F("abs(x - 1)"), -50, 50, mask=lambda xs: xs >= 2)
    assert got.minimizers[0][0] == pytest.approx(x, abs=1e-3) and got.min_value == pytest.approx(v, abs=1e-6)


# ------------------------------------------------------------------ oracle


def test_oracle_examples():
    r = oracle_minimize(F(PLATEAU))
    assert sorted(p[0] for p in r.minimizers) == pytest.approx([-1.0, 1.0], abs=1e-3)
    assert r.min_value == pytest.approx(0.0, abs=1e-6)
    r = oracle_minimize(F("x^2"))
    assert r.minimizers == [[0.0]] and r.min_value == 0.0


def test_oracle_strict_local_min_example():
    r = oracle_minimize(F(SLM))
    assert r.minimizers == [[pytest.approx(2.0, abs=1e-6)]] and r.min_value == pytest.approx(-2.0)
    basins = oracle_minimize(F(SLM), local=True).local_minima
    xs = sorted(b["x"][0] for b in basins)
    assert xs == pytest.approx([0.0, 2.0], abs=1e-6)


@pytest.mark.parametrize("src", [PLATEAU, SLM, "x^2", "(x - 0.3)^2 + sin(5*x)", "abs(x + 7) - 3"])
def test_oracle_matches_dense_grid(src):
    f = F(src)
    r = oracle_minimize(f)
    x, v = brute_min_1d(f, -50, 50)
    assert r.min_value <= v + 1e-9
    assert any(abs(p[0] - x) <= 1e-3 for p in r.minimizers)
    for p in r.minimizers:
        assert f(p) == pytest.approx(r.min_value, abs=1e-6)


def test_oracle_two_dimensional():
    r = oracle_minimize(F("(x1 - 1)^2 + abs(x2 + 2)", 2))
    assert r.minimizers[0] == pytest.approx([1.0, -2.0], abs=1e-3) and r.bounded


def test_oracle_unbounded_flag():
    assert not oracle_minimize(F("x")).bounded


# ------------------------------------------------------------------ local probe


def test_local_min_probe_examples():
    assert local_min_probe(F(SLM), [0.0], 0.5) == STRICT_LOCAL
    assert local_min_probe(F("x^2"), [0.0], 0.5) == STRICT_LOCAL
    assert local_min_probe(F("x^2"), [1.0], 0.5) == NOT_LOCAL
    assert local_min_probe(F("max(abs(x) - 1, 0)"), [0.0], 0.5) == LOCAL


def test_local_min_probe_rejects_bad_radius():
    with pytest.raises(ValueError):
        local_min_probe(F("x^2"), [0.0], 0.0)


# ------------------------------------------------------------------ properties


@settings(max_examples=6)
@given(st.sampled_from([("x^2", 0.0), ("abs(x - 2)", 1.0), (PLATEAU, 2.0), ("sqrt(abs(x))", 0.0)]))
def test_certified_implies_bounded_oracle(case):
    src, c = case
    r = certify_unconstrained(F(src), dist(c) if c else zero())
    if r.status is Status.CERTIFIED:
        assert r.oracle.minimizers and r.oracle.bounded


def test_determinism():
    a = certify_unconstrained(F("abs(x - 2)"), dist(0.5)).to_dict()
    b = certify_unconstrained(F("abs(x - 2)"), dist(0.5)).to_dict()
    assert a == b
