"""Free moments nu_k, the deflated c/b recursions, varrho, and the two
routes to the evaluation map pi_s."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freesb.tracepoly import TracePoly, parse
from freesb.moments import (b_poly, c_poly, catalan, nu, pi_eval,
                            pi_via_semigroup, varrho, varrho_coeffs)
from freesb.transform import biane


# ---------------------------------------------------------------- catalan


def test_catalan_small_values():
    assert [catalan(k) for k in range(6)] == [1, 1, 2, 5, 14, 42]


def test_catalan_segner_recursion():
    for k in range(32):
        assert catalan(k + 1) == sum(catalan(i) * catalan(k - i) for i in range(k + 1))


def test_catalan_range_guard():
    assert catalan(33) == 212336130412243110
    for bad in (-1, 34):
        with pytest.raises(ValueError):
            catalan(bad)


# ---------------------------------------------------------------- nu


def test_nu_closed_forms():
    for s in (0.0, 0.5, 1.0, 2.0, -1.5):
        assert nu(0, s) == 1.0
        assert abs(nu(1, s) - math.exp(-s / 2)) < 1e-14
        assert abs(nu(2, s) - math.exp(-s) * (1 - s)) < 1e-13
        assert abs(nu(3, s) - math.exp(-1.5 * s) * (1 - 3 * s + 1.5 * s * s)) < 1e-13


def test_nu_at_zero_time_and_symmetry():
    for k in range(1, 20):
        assert abs(nu(k, 0.0) - 1.0) < 1e-14
        assert nu(-k, 1.3) == nu(k, 1.3)


def test_nu_range_guard():
    nu(64, 1.0)
    with pytest.raises(ValueError):
        nu(65, 1.0)


def test_nu_catalan_bound():
    # |nu_k(t)| <= C_{k-1} (1+|t|)^{k-1} e^{-kt/2}
    for k in range(1, 13):
        for t in np.linspace(-2.0, 2.0, 9):
            bound = catalan(k - 1) * (1 + abs(t)) ** (k - 1) * math.exp(-k * t / 2)
            assert abs(nu(k, t)) <= bound * (1 + 1e-12), (k, t)


# ---------------------------------------------------------------- pi routes


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 2.0]))
@settings(max_examples=20, deadline=None)
def test_pi_routes_agree(seed, s):
    rng = np.random.default_rng(seed)
    terms = {}
    for _ in range(3):
        budget = 5
        k0 = int(rng.integers(-2, 3))
        budget -= abs(k0)
        ve = {}
        while budget > 0 and rng.random() < 0.6:
            j = int(rng.integers(-budget, budget + 1))
            if j != 0:
                ve[j] = ve.get(j, 0) + 1
                budget -= abs(j)
        terms[(k0, tuple(sorted(ve.items())))] = complex(rng.normal(), rng.normal())
    p = TracePoly(terms)
    direct = pi_eval(p, s)
    semi = pi_via_semigroup(p, s)
    assert (direct - semi).coeff_max() < 1e-10 * max(1.0, direct.coeff_max())


def test_pi_eval_example():
    # pi harvests every v_j at nu_j(s) and leaves u alone
    p = parse("u^2 v1 + v2")
    s = 0.9
    q = pi_eval(p, s)
    assert abs(q.coeff((2, ())) - nu(1, s)) < 1e-14
    assert abs(q.coeff((0, ())) - nu(2, s)) < 1e-14


# ---------------------------------------------------------------- c and b


def test_c_matches_closed_form():
    for k in range(1, 11):
        for s in (0.5, 1.0, 2.0):
            for t in (0.2, 0.9, 1.8):
                got = c_poly(k, s).eval(t)
                want = math.exp(-k * t / 2) * nu(k, s - t)
                assert abs(got - want) <= 1e-9 * max(1.0, abs(want)), (k, s, t)


def test_c_catalan_bound():
    # |c_k(s,t)| <= C_{k-1} (1+|s-t|)^{k-1} e^{-ks/2}
    for k in range(1, 13):
        for s in (0.5, 1.5, 3.0):
            for t in np.linspace(s - 2.0, s + 2.0, 7):
                bound = (catalan(k - 1) * (1 + abs(s - t)) ** (k - 1)
                         * math.exp(-k * s / 2))
                assert abs(c_poly(k, s).eval(t)) <= bound * (1 + 1e-12)


def test_b_initial_condition():
    for k in range(1, 8):
        assert b_poly(k, 1.3).eval(0.0) == TracePoly.u(k)


def test_b_biane_link():
    # e^{kt/2} b_k(s,t) is the Biane polynomial p_k^{s,t}
    for k in (1, 2, 3, 5):
        for s, t in ((1.0, 1.0), (1.5, 0.8)):
            lhs = math.exp(k * t / 2) * b_poly(k, s).eval(t)
            rhs = biane(k, s, t)
            assert (lhs - rhs).coeff_max() < 1e-9 * max(1.0, rhs.coeff_max())


def _eval_laurent(p: TracePoly, u0: complex) -> complex:
    return sum(c * u0 ** m[0] for m, c in p.terms.items())


def test_b_growth_bound():
    # |b_k(s,t,u)| <= [5 (1+|s|) (1+|t|)]^{k-1} |u|^k at sampled points
    for u0 in (0.7 + 0.3j, 1.1 - 0.4j):
        for k in range(1, 9):
            for s, t in ((1.0, 0.5), (2.0, 1.8)):
                val = abs(_eval_laurent(b_poly(k, s).eval(t), u0))
                bound = (5 * (1 + s) * (1 + t)) ** (k - 1) * abs(u0) ** k
                assert val <= bound, (k, s, t, u0)


# ---------------------------------------------------------------- varrho


def test_varrho_examples():
    for t in (-1.0, 0.3, 2.0):
        assert varrho(1, t) == 1.0
        assert abs(varrho(2, t) - (1 - t)) < 1e-14
    for k in range(1, 11):
        assert varrho(k, 0.0) == 1.0


def test_varrho_closed_form():
    # varrho_k(t) = e^{kt/2} nu_k(t)
    for k in range(1, 11):
        for t in np.linspace(-2.0, 2.0, 9):
            want = math.exp(k * t / 2) * nu(k, t)
            assert abs(varrho(k, t) - want) <= 1e-9 * max(1.0, abs(want)), (k, t)


def test_varrho_coeffs_exact():
    from fractions import Fraction
    assert varrho_coeffs(1) == (Fraction(1),)
    assert varrho_coeffs(2) == (Fraction(1), Fraction(-1))
    with pytest.raises(ValueError):
        varrho_coeffs(0)
