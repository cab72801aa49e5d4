from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PLATEAU, F, dist, zero
from equasi.asympt import (
    Direction,
    FeasibleSet,
    asymptotic_cone_membership,
    coercivity_check,
    direction_sweep,
    estimate_f_inf,
    estimate_f_inf_convex,
    estimate_f_q_inf,
    kq_membership,
)
from equasi.certificate import Status
from equasi.funcspec import PLUS_INFINITY, Box, VectorFunc
from oracles import brute_f_inf_1d, brute_f_q_inf_1d

# frozen grid oracle: steepest secant of the plateau function is 6 (slope of x^2 - 3 at x = 3)
ORACLE_FQ_EX42 = 6.0


def test_oracle_reproduces_frozen_value():
    # the function is constant beyond |x| = 3, so [-5, 5] holds every steep secant
    for u in (1.0, -1.0):
        assert brute_f_q_inf_1d(F(PLATEAU), u, -5.0, 5.0, nx=20001) == pytest.approx(ORACLE_FQ_EX42, abs=2e-3)


def test_direction_validation():
    assert Direction.of([3.0, 4.0]).u == (0.6, 0.8)
    with pytest.raises(ValueError):
        Direction((1.0, 1.0))


# ------------------------------------------------------------------ f^inf


def test_f_inf_examples():
    f = F("sqrt(abs(x))")
    assert estimate_f_inf(f, [1]).value == pytest.approx(0.0, abs=1e-6)
    assert estimate_f_inf(f, [-1]).value == pytest.approx(0.0, abs=1e-6)
    r = estimate_f_inf(F("x^2"), [1])
    assert r.diverged and r.value == PLUS_INFINITY
    assert estimate_f_inf(F("-x"), [1]).value == pytest.approx(-1.0, abs=1e-9)


def test_f_inf_overflowing_function():
    assert estimate_f_inf(F("exp(x)"), [1]).value == PLUS_INFINITY
    assert estimate_f_inf(F("exp(x)"), [-1]).value == pytest.approx(0.0, abs=1e-9)


def test_f_inf_minus_infinity():
    r = estimate_f_inf(F("-x^2"), [1])
    assert r.value == -math.inf and r.details["limit"] == "-inf"


@pytest.mark.parametrize("src,u", [("abs(x)", 1), ("-x", 1), ("2*x + 3", -1), ("max(x, 0)", 1), ("sqrt(abs(x))", 1)])
def test_f_inf_matches_ray_oracle(src, u):
    assert estimate_f_inf(F(src), [u]).value == pytest.approx(brute_f_inf_1d(F(src), u), abs=1e-5)


def test_f_inf_convex_examples():
    assert estimate_f_inf_convex(F("x^2"), [1], [0]).value == PLUS_INFINITY
    assert estimate_f_inf_convex(F("abs(x)"), [1]).value == pytest.approx(1.0)
    assert estimate_f_inf_convex(F("max(x, 0)"), [-1], [0]).value == pytest.approx(0.0, abs=1e-12)


def test_f_inf_convex_oracle_max():
    # secant slopes of max(x, 0) from 0 along -1 are identically 0
    ts = np.geomspace(1e-3, 1e6, 200)
    f = F("max(x, 0)")
    assert np.all(f.values((-ts)[:, None]) / ts == 0.0)


# ------------------------------------------------------------------ f_q^inf


def test_f_q_inf_examples():
    assert estimate_f_q_inf(F(PLATEAU), [1]).value >= 5.8
    assert estimate_f_q_inf(F("x"), [1]).value == pytest.approx(1.0, abs=1e-9)
    r = estimate_f_q_inf(F("sqrt(abs(x))"), [1])
    assert r.diverged and r.value == PLUS_INFINITY


def test_f_q_inf_matches_grid_oracle():
    got = estimate_f_q_inf(F(PLATEAU), [-1]).value
    assert got <= ORACLE_FQ_EX42 + 1e-6
    assert got >= ORACLE_FQ_EX42 - 1e-3


def test_f_q_inf_flags_truncation_growth():
    r = estimate_f_q_inf(F("x^2"), [1])
    assert r.details["sensitive"]
    rounds = r.details["rounds"]
    assert all(b > a for a, b in zip(rounds, rounds[1:]))


@pytest.mark.parametrize("slope", [(1.0, 2.0), (-3.0, 0.5), (0.0, -1.0)])
def test_f_q_inf_linear_exact(slope):
    f = F(f"{slope[0]}*x1 + {slope[1]}*x2", 2)
    for ang in np.linspace(0, 2 * np.pi, 5, endpoint=False):
        u = np.array([np.cos(ang), np.sin(ang)])
        assert estimate_f_q_inf(f, u).value == pytest.approx(float(np.dot(slope, u)), abs=1e-9)


# ------------------------------------------------------------------ coercivity


def test_coercivity_examples():
    assert coercivity_check(F("x^2")).status is Status.CERTIFIED
    c = coercivity_check(F("sqrt(abs(x))"))
    assert c.status is Status.INCONCLUSIVE and c.details["note"] == "coercive but not via f^inf"
    assert coercivity_check(F("-x")).status is Status.REFUTED
    assert coercivity_check(F(PLATEAU)).status is Status.REFUTED


def test_coercivity_two_dimensional():
    assert coercivity_check(F("x1^2 + abs(x2)", 2)).certified
    assert coercivity_check(F("x1^2", 2)).refuted


# ------------------------------------------------------------------ cones and K_q


def test_asymptotic_cone_examples():
    assert asymptotic_cone_membership(FeasibleSet.polyhedron([[1.0]], [0.0]), [-1])
    for u in ([1.0], [-1.0]):
        assert not asymptotic_cone_membership(FeasibleSet.ball([0.0], 5.0), u)
    half = FeasibleSet.from_box(Box.interval(0, math.inf))
    assert asymptotic_cone_membership(half, [1]) and not asymptotic_cone_membership(half, [-1])


def test_asymptotic_cone_constraint_system_ray_test():
    bounded = FeasibleSet.system(VectorFunc((F("x^2 - 1"),)), None, Box.real(1))
    assert not asymptotic_cone_membership(bounded, [1])
    half = FeasibleSet.system(VectorFunc((F("-x"),)), None, Box.real(1))
    assert asymptotic_cone_membership(half, [1]) and not asymptotic_cone_membership(half, [-1])


def test_feasible_set_indicator_tolerance():
    S = FeasibleSet.polyhedron([[1.0, 1.0]], [1.0])
    X = np.array([[0.5, 0.5 + 5e-10], [0.5, 0.5 + 1e-6]])
    assert S.contains(X).tolist() == [True, False]
    assert S.indicator(X).tolist() == [0.0, math.inf]


def test_kq_examples():
    r = kq_membership(F(PLATEAU), dist(2), [1])
    assert not r and r.margin >= 3.8
    assert kq_membership(F("x"), zero(), [-1])
    assert not kq_membership(F("sqrt(abs(x))"), zero(), [1])


def test_direction_sweep_rows():
    rows = direction_sweep(F(PLATEAU), dist(2))
    assert [r.u for r in rows] == [[-1.0], [1.0]] or [r.u for r in rows] == [[1.0], [-1.0]]
    for r in rows:
        assert r.e_u0 == 2.0 and r.f_q_inf >= 5.8 and not r.in_kq
        assert r.f_q_inf >= r.f_inf


# ------------------------------------------------------------------ properties


@settings(max_examples=10)
@given(st.sampled_from([PLATEAU, "abs(x)", "x^2", "sqrt(abs(x))", "-x", "max(x, 0)", "sin(x)"]),
       st.sampled_from([-1.0, 1.0]))
def test_f_q_dominates_f_inf(src, u):
    f = F(src)
    fq = estimate_f_q_inf(f, [u])
    # a truncation-sensitive estimate is only a lower bound of the global supremum
    if not fq.details.get("sensitive"):
        assert fq.value >= estimate_f_inf(f, [u]).value - 1e-6


@settings(max_examples=8)
@given(st.sampled_from(["abs(x)", "-x", "2*x + 1", "max(x, 0)", "abs(x - 3)"]), st.sampled_from([-1.0, 1.0]))
def test_f_q_equals_f_inf_for_convex(src, u):
    f = F(src)
    assert estimate_f_q_inf(f, [u]).value == pytest.approx(estimate_f_inf(f, [u]).value, abs=1e-4)


@settings(max_examples=8)
@given(st.sampled_from(["x", "abs(x)", PLATEAU, "abs(x + 1)", "2*x"]),
       st.sampled_from([(0.0, math.inf), (-math.inf, 0.0), (-3.0, math.inf), (-1.0, 4.0)]),
       st.sampled_from([-1.0, 1.0]))
def test_indicator_identity_on_boxes(src, bounds, u):
    box = Box.interval(*bounds)
    restricted = F(src, 1, box)
    fq_restricted = estimate_f_q_inf(restricted, [u]).value
    if asymptotic_cone_membership(FeasibleSet.from_box(box), [u]):
        assert fq_restricted == pytest.approx(estimate_f_q_inf(F(src), [u]).value, abs=1e-6)
    else:
        assert fq_restricted == PLUS_INFINITY
