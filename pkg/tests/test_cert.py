from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PLATEAU, F, PIECEWISE, SIN_SQRT, SLM, dist, square, zero
from equasi.cert import (
    check_convex,
    check_e_convex,
    check_e_quasiconvex,
    check_pseudoconvex,
    check_quasiconvex,
    combine_sum,
    combine_sup,
    divergence_test,
    estimate_e_f,
    estimate_tilde_e_f,
    first_order_check,
    linear_shift_check,
    witness_reverifies,
)
from equasi.certificate import SampleConfig, Status
from equasi.errors import RootsNotVerified, TooManyKinks
from equasi.funcspec import PLUS_INFINITY, Box
from oracles import brute_quotient_sup, brute_triple_violation

LOWER_BOUND, NO_E_EXISTS = "LOWER_BOUND", "NO_E_EXISTS"

SMALL = SampleConfig(pairs=384, t_count=129)

# frozen oracle values (dense 1e5-point t-grid, see oracles.brute_quotient_sup)
ORACLE_E_F_NEG_SQ_2_0 = 4.0
ORACLE_TILDE_NEG_SQ_1_M1 = 4.0
ORACLE_TILDE_NEG_SQ_2_0 = 0.0


# ------------------------------------------------------------ minimal bifunctions


def test_oracles_reproduce_frozen_values():
    f = F("-x^2")
    assert brute_quotient_sup(f, 2, 0, quasi=False) == pytest.approx(ORACLE_E_F_NEG_SQ_2_0, abs=1e-8)
    assert brute_quotient_sup(f, 1, -1, quasi=True) == pytest.approx(ORACLE_TILDE_NEG_SQ_1_M1, abs=1e-8)
    assert brute_quotient_sup(f, 2, 0, quasi=True) == ORACLE_TILDE_NEG_SQ_2_0


def test_estimate_e_f_examples():
    assert estimate_e_f(F("x^2"), [1.5], [-4.0]).value == 0.0
    assert estimate_e_f(F("-x^2"), [2.0], [0.0]).value == pytest.approx(ORACLE_E_F_NEG_SQ_2_0, abs=1e-6)
    r = estimate_e_f(F("sqrt(abs(x))"), [1.0], [0.0])
    assert r.diverged and r.value == PLUS_INFINITY


def test_estimate_tilde_e_f_examples():
    f = F("-x^2")
    assert estimate_tilde_e_f(f, [1.0], [-1.0]).value == pytest.approx(ORACLE_TILDE_NEG_SQ_1_M1, abs=1e-6)
    assert estimate_tilde_e_f(f, [2.0], [0.0]).value == ORACLE_TILDE_NEG_SQ_2_0
    assert estimate_tilde_e_f(F("sqrt(abs(x))"), [1.0], [0.0]).value == 0.0


def test_sup_estimate_is_lower_bound_and_monotone():
    f = F(SLM)
    for x, y in [(-3.0, 4.0), (0.5, 2.5), (-1.0, 1.5)]:
        est = estimate_e_f(f, [x], [y])
        assert est.value == pytest.approx(brute_quotient_sup(f, x, y, quasi=False), rel=1e-3, abs=1e-3)
        vals = [v for _, v in est.trace]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("src", [PLATEAU, SLM, "-x^2", "sin(x)", "x^3"])
def test_estimates_agree_with_dense_grid(src):
    f = F(src)
    rng = np.random.default_rng(1)
    for x, y in rng.uniform(-4, 4, (5, 2)):
        for quasi, est in ((False, estimate_e_f), (True, estimate_tilde_e_f)):
            oracle = brute_quotient_sup(f, x, y, quasi)
            got = est(f, [x], [y]).value
            # golden refinement may land between grid nodes, so agreement is two-sided
            assert got == pytest.approx(oracle, rel=1e-3, abs=1e-3)


# ------------------------------------------------------------ triple certificates


def test_e_quasiconvex_examples():
    f = F("-x^2")
    assert check_e_quasiconvex(f, square(1)).status is Status.CERTIFIED
    c = check_e_quasiconvex(f, zero())
    assert c.status is Status.REFUTED
    assert witness_reverifies(f, zero(), c.witness, quasi=True)
    assert check_e_quasiconvex(F(PLATEAU), dist(2)).status is Status.CERTIFIED


def test_e_convex_examples():
    assert check_e_convex(F(SLM), dist(6)).status is Status.CERTIFIED
    assert check_e_convex(F("x^2"), zero()).certified
    f, e = F("sqrt(abs(x))"), dist(10)
    c = check_e_convex(f, e, Box.interval(-1, 1))
    assert c.status is Status.REFUTED
    assert witness_reverifies(f, e, c.witness, quasi=False)
    assert min(abs(c.witness["x"][0]), abs(c.witness["y"][0])) < 0.1
    excess, _ = brute_triple_violation(f, e, -1, 1, quasi=False)
    assert excess > 0


def test_quasiconvex_examples():
    assert check_quasiconvex(F("sqrt(abs(x))")).certified
    assert check_quasiconvex(F("min(abs(x), 1)")).certified
    c = check_quasiconvex(F(SIN_SQRT), Box.interval(-20, 20))
    assert c.refuted and witness_reverifies(F(SIN_SQRT), zero(), c.witness, True)


def test_convex_refutes_neg_square():
    assert check_convex(F("-x^2"), cfg=SMALL).refuted


def test_boundary_equality_is_inconclusive_not_refuted():
    # e_f = (x - y)^2 exactly, so every slack of the e-convex check is zero up to rounding
    c = check_e_convex(F("-x^2"), square(1), cfg=SMALL)
    assert c.status is not Status.REFUTED


def test_certificate_records_samples_and_seed():
    c = check_e_quasiconvex(F("-x^2"), square(1), cfg=SampleConfig(pairs=64, t_count=33, seed=5))
    assert c.samples_used > 0 and c.seed == 5 and c.margin > 0


def test_seed_determinism():
    cfg = SampleConfig(pairs=200, t_count=65, seed=9)
    a = check_e_quasiconvex(F(SIN_SQRT), zero(), Box.interval(-20, 20), cfg).to_dict()
    b = check_e_quasiconvex(F(SIN_SQRT), zero(), Box.interval(-20, 20), cfg).to_dict()
    assert a == b


# ------------------------------------------------------------ divergence test


def test_divergence_examples():
    assert divergence_test(F(SIN_SQRT), [0.0], [math.pi**2]).kind == NO_E_EXISTS
    assert divergence_test(F(PIECEWISE), [-2.0], [0.0]).kind == NO_E_EXISTS
    r = divergence_test(F("-x^2 + 1"), [1.0], [-1.0])
    assert r.kind == LOWER_BOUND
    assert r.value == pytest.approx(4.0, abs=1e-6)


def test_divergence_lower_bound_matches_shrinking_t():
    f = F("-x^2 + 1")
    ts = 2.0 ** -np.arange(10, 30)
    q = f.values((ts * 1 + (1 - ts) * -1)[:, None]) / ts
    assert q[-1] == pytest.approx(4.0, abs=1e-6)


def test_divergence_requires_roots():
    with pytest.raises(RootsNotVerified):
        divergence_test(F("x^2 + 1"), [0.0], [1.0])


def test_lower_bound_consistency_with_witness_triple():
    # LOWER_BOUND 4 at (1, -1): any e with e(1, -1) < 4 fails at the witness triple
    f = F("-x^2 + 1")
    r = divergence_test(f, [1.0], [-1.0])
    e = dist(1.5)  # e(1, -1) = 3 < 4
    t = 1e-3
    c = check_e_quasiconvex(f, e, cfg=SMALL, extra=[([1.0], [-1.0], t)])
    assert c.refuted and r.value > e([1.0], [-1.0])
    assert witness_reverifies(f, e, {"x": [1.0], "y": [-1.0], "t": t}, True)


# ------------------------------------------------------------ gradient checks


def test_first_order_examples():
    c = first_order_check(F("-x^2"), square(1))
    assert c.certified and c.details["e_vanishing_diagonal"]
    assert first_order_check(F("x^2"), zero()).certified
    assert first_order_check(F(SIN_SQRT), zero(), Box.interval(-20, 20)).refuted


def test_first_order_equality_pair():
    # f(y) = f(x) at x = 1, y = -1 and <grad f(1), y - x> = 4 = e(1, -1)
    f, e = F("-x^2"), square(1)
    g = -2.0 * 1.0
    assert g * (-1.0 - 1.0) == pytest.approx(e([1.0], [-1.0]))


def test_first_order_too_many_kinks():
    with pytest.raises(TooManyKinks):
        # every sample of this tiny box sits on the kink of abs
        first_order_check(F("abs(x)"), zero(), Box.interval(-1e-12, 1e-12), SampleConfig(pairs=64, t_count=9))


def test_pseudoconvex_examples():
    assert check_pseudoconvex(F("-x")).certified
    assert check_pseudoconvex(F("x^3 + x")).certified
    c = check_pseudoconvex(F("-x^2"))
    assert c.refuted


def test_pseudoconvex_oracle_cube_plus_linear():
    # brute-force pair grid: strictly increasing so the implication holds everywhere
    xs = np.linspace(-10, 10, 401)
    X, Y = np.meshgrid(xs, xs)
    grad = 3 * X**2 + 1
    prem = grad * (Y - X) >= 0
    assert np.all((Y**3 + Y)[prem] >= (X**3 + X)[prem])


def test_linear_shift_examples():
    assert linear_shift_check(F("-x^2"), square(1), np.arange(-3, 4)[:, None], cfg=SMALL).certified
    assert linear_shift_check(F("x^2"), zero(), [[-2.0], [5.0]], cfg=SMALL).certified
    c = linear_shift_check(F("sqrt(abs(x))"), dist(5), [[0.0], [1.0], [-1.0]], cfg=SMALL)
    assert c.refuted and "slope" in c.witness


def test_combinators():
    g = combine_sup([F("abs(abs(x) - 1)"), F("x^2 - 3")])
    assert g([0.0]) == 1.0
    h, cert = combine_sum(F("x^2"), F("0"))
    assert h([3.0]) == 9.0 and cert is None
    h, _ = combine_sum(F("2*abs(abs(x - 1) - 1)"), F("-abs(x)"))
    assert h([2.0]) == pytest.approx(F(SLM)([2.0])) and h([0.0]) == 0.0
    _, cert = combine_sum(F("x"), F("x^3"), comonotone_check=True)
    assert cert.certified
    _, cert = combine_sum(F("x"), F("-x"), comonotone_check=True)
    assert cert.refuted


# ------------------------------------------------------------ properties


@settings(max_examples=25)
@given(st.sampled_from([PLATEAU, SLM, PIECEWISE, "-x^2", "sqrt(abs(x))", "sin(x)"]),
       st.floats(-5, 5), st.floats(-5, 5))
def test_tilde_below_e_f(src, x, y):
    f = F(src)
    te, ee = estimate_tilde_e_f(f, [x], [y]).value, estimate_e_f(f, [x], [y]).value
    assert te <= ee + 1e-9 * (1 + abs(ee))


@settings(max_examples=25)
@given(st.sampled_from(["sqrt(abs(x))", "min(abs(x), 1)", "x^3", "exp(x)"]), st.floats(-5, 5), st.floats(-5, 5))
def test_quasiconvex_gives_zero_tilde(src, x, y):
    assert estimate_tilde_e_f(F(src), [x], [y]).value == 0.0


@settings(max_examples=8)
@given(st.floats(0, 5))
def test_ordering_in_e(extra):
    f = F(PLATEAU)
    cfg = SampleConfig(pairs=256, t_count=65, seed=2)
    assert check_e_quasiconvex(f, dist(2), cfg=cfg).certified
    assert check_e_quasiconvex(f, dist(2 + extra), cfg=cfg).certified


@settings(max_examples=10)
@given(st.sampled_from([SIN_SQRT, "-x^2", "x^3 - 3*x", SLM]), st.integers(0, 1000))
def test_refuted_witnesses_reverify(src, seed):
    f = F(src)
    c = check_quasiconvex(f, Box.interval(-12, 12), SampleConfig(pairs=128, t_count=33, seed=seed))
    if c.refuted:
        assert witness_reverifies(f, zero(), c.witness, True)
