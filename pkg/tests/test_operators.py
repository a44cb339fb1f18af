"""Intertwining operators: closed-form oracles, the product rule, the
semigroup engine, and the finite-dimensional matrix representation."""

import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from freesb.tracepoly import TracePoly, mono, parse
from freesb.operators import (GeneratorSpec, apply_D, apply_DN, apply_named,
                              exp_apply, exp_series, monomial_basis,
                              operator_matrix)

u = TracePoly.u
v = TracePoly.v


def _rand_poly(rng, deg, nterms=3, u_free=False):
    terms = {}
    for _ in range(nterms):
        budget = deg
        k0 = 0 if u_free else int(rng.integers(-deg, deg + 1))
        budget -= abs(k0)
        ve = {}
        while budget > 0 and rng.random() < 0.65:
            j = int(rng.integers(-budget, budget + 1))
            if j != 0:
                ve[j] = ve.get(j, 0) + 1
                budget -= abs(j)
        terms[(k0, tuple(sorted(ve.items())))] = complex(rng.normal(), rng.normal())
    return TracePoly(terms)


# ---------------------------------------------------------------- hand oracles


def test_diagonal_operators():
    p = parse("u^2 v1 + u^-1 v-2")
    # N0 counts traced powers (the v-part), N1 the bare matrix power
    assert apply_named("N0", p) == parse("u^2 v1 + 2 u^-1 v-2")
    assert apply_named("N1", p) == parse("2 u^2 v1 + u^-1 v-2")
    mixed = parse("u^2 + u^-1 + v1")
    assert apply_named("Aplus", mixed) == parse("u^2 + v1")
    assert apply_named("Aminus", mixed) == parse("u^-1")
    assert apply_named("sgn", mixed) == parse("u^2 - u^-1 + v1")
    assert apply_named("Mu", parse("u + v1"), aux=-2) == parse("u^-1 + u^-2 v1")
    with pytest.raises(ValueError):
        apply_named("Mu", p)
    with pytest.raises(ValueError):
        apply_named("Q", p)


def test_Y_closed_forms():
    assert apply_named("Y", u(4)) == parse("3 v1 u^3 + 2 v2 u^2 + v3 u")
    assert apply_named("Y", u(2)) == parse("v1 u")
    assert apply_named("Y", u(-3)) == parse("v-2 u^-1 + 2 v-1 u^-2")
    # u^-1, 1, u are annihilated
    for k in (-1, 0, 1):
        assert apply_named("Y", u(k)).is_zero
    # multiplicative over v-factors: Y(u^2 v3) = Y(u^2) v3
    assert apply_named("Y", parse("u^2 v3")) == parse("v1 u v3")


def test_Z_derivation_values():
    assert apply_named("Z", v(1)).is_zero
    assert apply_named("Z", v(-1)).is_zero
    assert apply_named("Z", v(2)) == parse("v1^2")
    assert apply_named("Z", v(3)) == parse("3 v1 v2")
    assert apply_named("Z", v(-3)) == parse("3 v-1 v-2")
    # derivation over products of v's
    assert apply_named("Z", parse("v2 v1")) == parse("v1^3")
    assert apply_named("Z", parse("v2^2")) == parse("2 v1^2 v2")


def test_L_hand_oracles():
    assert apply_named("L", parse("u v1")) == parse("2 u^2")
    assert apply_named("L", parse("v1 v-1")) == parse("-2")
    assert apply_named("L", parse("v1^2")) == parse("2 v2")
    assert apply_named("L", u(2)).is_zero
    assert apply_named("L", parse("v1")).is_zero


def test_D_closed_forms():
    assert apply_D(u(1)) == parse("-u")
    assert apply_D(u(2)) == parse("-2 u^2 - 2 u v1")
    assert apply_D(parse("u v1")) == parse("-2 u v1")
    assert apply_D(u(-3)) == parse("-3 u^-3 - 4 v-1 u^-2 - 2 v-2 u^-1")


def test_DN_combines_D_and_L():
    p = parse("u v1")
    lhs = apply_DN(p, 5)
    assert lhs.allclose(apply_D(p) - (1.0 / 25.0) * apply_named("L", p))


# ---------------------------------------------------------------- product rule


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_partial_product_rule(seed):
    rng = np.random.default_rng(seed)
    P = _rand_poly(rng, 4)
    Q = _rand_poly(rng, 3, u_free=True)
    resid = apply_D(P * Q) - apply_D(P) * Q - P * apply_D(Q)
    assert resid.coeff_max() < 1e-12 * max(1.0, (P * Q).coeff_max())


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_exp_homomorphism_on_scalar_factors(seed):
    rng = np.random.default_rng(seed)
    P = _rand_poly(rng, 3, nterms=2)
    Q = _rand_poly(rng, 2, nterms=2, u_free=True)
    theta = 0.3
    lhs = exp_apply(GeneratorSpec.D(), theta, P * Q)
    rhs = exp_apply(GeneratorSpec.D(), theta, P) * exp_apply(GeneratorSpec.D(), theta, Q)
    assert (lhs - rhs).coeff_max() < 1e-9 * max(1.0, rhs.coeff_max())


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_tracing_map_commutes_with_D_and_L(seed):
    rng = np.random.default_rng(seed)
    p = _rand_poly(rng, 4)
    for apply_fn in (apply_D, lambda q: apply_named("L", q)):
        lhs = apply_fn(p.tracing_map())
        rhs = apply_fn(p).tracing_map()
        assert (lhs - rhs).coeff_max() < 1e-12 * max(1.0, lhs.coeff_max())


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_degree_preservation(seed):
    rng = np.random.default_rng(seed)
    p = _rand_poly(rng, 5)
    d = p.trace_degree()
    for name in ("N0", "N1", "Y", "Z", "L", "Aplus", "Aminus", "sgn"):
        q = apply_named(name, p)
        if not q.is_zero:
            assert q.trace_degree() <= d, name


# ---------------------------------------------------------------- semigroups


def test_heat_on_u2_closed_form():
    # e^{(t/2)D_N} u^2 = e^{-t} cosh(t/N) u^2 - N e^{-t} sinh(t/N) u v1
    for t, N in ((0.7, 4), (1.3, 9)):
        got = exp_apply(GeneratorSpec.DN(N), t / 2.0, u(2))
        want = TracePoly({
            mono(2): math.exp(-t) * math.cosh(t / N),
            mono(1, [(1, 1)]): -N * math.exp(-t) * math.sinh(t / N),
        })
        assert got.allclose(want, rel=1e-10), (t, N)


def test_exp_apply_inverse():
    p = parse("u^2 v1 - 2 u^-1 + v2")
    fwd = exp_apply(GeneratorSpec.D(), 0.45, p)
    back = exp_apply(GeneratorSpec.D(), -0.45, fwd)
    assert (back - p).coeff_max() < 1e-9


def test_exp_semigroup_composition():
    p = parse("u^2 + v1 v-1")
    one = exp_apply(GeneratorSpec.DN(3), 0.6, p)
    two = exp_apply(GeneratorSpec.DN(3), 0.35,
                    exp_apply(GeneratorSpec.DN(3), 0.25, p))
    assert (one - two).coeff_max() < 1e-9


def test_triangular_diagonal_action():
    # the u^k coefficient of e^{±(t/2)D} u^k is exactly e^{∓kt/2}
    t = 0.8
    for k in (1, 3, -2):
        for sign in (+1.0, -1.0):
            q = exp_apply(GeneratorSpec.D(), sign * t / 2.0, u(k))
            diag = q.coeff(mono(k))
            want = math.exp(-sign * abs(k) * t / 2.0)
            assert abs(diag - want) < 1e-10, (k, sign)


def test_exp_series_rejects_runaway():
    # an operator that doubles the coefficient of a fixed monomial never
    # converges termwise if we forbid enough terms
    p = TracePoly.one()
    with pytest.raises(RuntimeError):
        exp_series(lambda q: 40.0 * q, p, max_terms=5)


# ---------------------------------------------------------------- matrices


def test_monomial_basis_degree_2():
    basis = monomial_basis(2)
    assert len(basis) == 16
    assert mono(0) in basis and mono(2) in basis and mono(0, [(1, 2)]) in basis
    assert all(len(b) == 2 for b in basis)


def test_operator_matrix_DN_span_example():
    N = 4
    M = operator_matrix(GeneratorSpec.DN(N), 2)
    i_u2, i_uv1 = M.index(mono(2)), M.index(mono(1, [(1, 1)]))
    sub = np.array([
        [M.entries[i_u2, i_u2], M.entries[i_u2, i_uv1]],
        [M.entries[i_uv1, i_u2], M.entries[i_uv1, i_uv1]],
    ])
    want = np.array([[-2.0, -2.0 / N**2], [-2.0, -2.0]])
    assert np.abs(sub - want).max() < 1e-14


def test_operator_matrix_number_operator_diagonal():
    gen = GeneratorSpec((("N0", 1.0), ("N1", 1.0)))
    M = operator_matrix(gen, 3)
    D = np.asarray(M.entries)
    assert np.abs(D - np.diag(np.diag(D))).max() == 0.0
    for i, m in enumerate(M.basis):
        assert D[i, i] == abs(m[0]) + sum(abs(j) * e for j, e in m[1])


def test_operator_matrix_commutes_with_apply():
    rng = np.random.default_rng(11)
    gen = GeneratorSpec.DN(3)
    M = operator_matrix(gen, 3)
    p = _rand_poly(rng, 3)
    lhs = np.asarray(M.entries) @ M.coords(p)
    rhs = M.coords(gen.apply(p))
    assert np.abs(lhs - rhs).max() < 1e-12


def test_findim_perturbation_bound():
    # ||e^{M_D + eps M_L} - e^{M_D}|| / eps stays within a factor 4
    # across three decades of eps
    MD = np.asarray(operator_matrix(GeneratorSpec((("D", 1.0),)), 3).entries)
    ML = np.asarray(operator_matrix(GeneratorSpec((("L", 1.0),)), 3).entries)
    base = scipy.linalg.expm(MD)
    quotients = []
    for eps in (1e-2, 1e-3, 1e-4):
        gap = np.linalg.norm(scipy.linalg.expm(MD + eps * ML) - base, 2)
        quotients.append(gap / eps)
    assert max(quotients) < 4.0 * min(quotients)
    assert min(quotients) > 0.0
