import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import harmonic_dimension, spherical_harmonic_count
from crspectra.polynomials import (
    BidegreeLabel,
    PolynomialParseError,
    RealPolynomial,
    bidegree_multiplicity,
    monomial_basis,
    monomial_exponents,
    parse_polynomial,
    random_polynomial,
    reeb_derivative,
    round_laplacian_consistency,
    spectrum_table,
    subelliptic_eigenvalue,
    variable_index,
    variable_name,
)
from crspectra.geometry import random_sphere_points
from crspectra.quadrature import product_rule_s3

seeds = st.integers(0, 2**32 - 1)


def var(i, dim=4):
    return RealPolynomial.variable(i, dim)


def polys(n=1, max_degree=3, integer=False):
    def build(t):
        r = np.random.default_rng(t[0])
        if not integer:
            return random_polynomial(n, t[1], r)
        exps = monomial_exponents(n, t[1]) if t[1] else [(0,) * (2 * n + 2)]
        return RealPolynomial(dict(zip(exps, r.integers(-3, 4, len(exps)).astype(float))), 2 * n + 2)

    return st.tuples(seeds, st.integers(0, max_degree)).map(build)


def test_evaluation_examples(rng):
    z = random_sphere_points(1, 5, rng)
    assert np.all(RealPolynomial.constant(1.0, 4)(z) == 1.0)
    r2 = sum((var(i) ** 2 for i in range(4)), RealPolynomial.constant(0.0, 4))
    assert np.allclose(r2(z), 1.0, atol=1e-15)
    u = var(0) * var(3)
    pt = np.array([0.5, 0.25, 0.125, 2.0])
    assert u(pt) == 0.5 * 2.0


def test_partial_derivative_examples():
    x1 = var(0)
    assert (x1 ** 2).partial_derivative(0) == 2 * x1
    assert RealPolynomial.constant(7.0, 4).partial_derivative(1).is_zero()


def test_partial_derivative_finite_differences(rng):
    u = random_polynomial(1, 4, rng)
    h = 1e-6
    for z in rng.standard_normal((20, 4)):
        for i in range(4):
            e = np.zeros(4)
            e[i] = h
            fd = (u(z + e) - u(z - e)) / (2 * h)
            assert abs(u.partial_derivative(i)(z) - fd) <= 1e-7 * max(1.0, abs(fd))


def test_gradient_matches_partials(rng):
    u = random_polynomial(2, 3, rng)
    z = rng.standard_normal((7, 6))
    g = u.gradient(z)
    for i in range(6):
        assert np.allclose(g[:, i], u.partial_derivative(i)(z))


@given(polys(integer=True), polys(integer=True), st.integers(0, 3))
def test_leibniz_and_linearity(u, v, i):
    # integer coefficients keep every product exact, so equality is exact too
    assert (u * v).partial_derivative(i) == u.partial_derivative(i) * v + u * v.partial_derivative(i)
    assert reeb_derivative(u * v) == reeb_derivative(u) * v + u * reeb_derivative(v)
    assert reeb_derivative(u + 3 * v) == reeb_derivative(u) + 3 * reeb_derivative(v)


def _close(a, b, tol=1e-12):
    return (a - b).is_zero() or max(abs(c) for c in (a - b).terms.values()) <= tol


def test_reeb_examples():
    x1, y1, x2, y2 = (var(i) for i in range(4))
    assert reeb_derivative(x1) == -y1
    assert reeb_derivative(x1**2 + y1**2).is_zero()
    u = x1 * x2 + y1 * y2
    assert reeb_derivative(reeb_derivative(u)).is_zero()


@given(st.lists(st.integers(0, 3), min_size=2, max_size=2), st.sampled_from([1, 2]))
def test_reeb_kills_moduli(powers, n):
    dim = 2 * n + 2
    u = RealPolynomial.constant(1.0, dim)
    for j, k in enumerate(powers[: n + 1]):
        r = RealPolynomial.variable(2 * j, dim) ** 2 + RealPolynomial.variable(2 * j + 1, dim) ** 2
        u = u * r**k
    assert reeb_derivative(u).is_zero()


def test_reeb_squared_on_bidegree():
    """Re(zeta_1^p conj(zeta_2)^q) is an eigenvector of xi^2 with eigenvalue -(p - q)^2."""
    x1, y1, x2, y2 = (var(i) for i in range(4))
    for p in range(4):
        for q in range(4):
            re, im = RealPolynomial.constant(1.0, 4), RealPolynomial.constant(0.0, 4)
            for _ in range(p):
                re, im = re * x1 - im * y1, re * y1 + im * x1
            for _ in range(q):
                re, im = re * x2 + im * y2, im * x2 - re * y2
            assert _close(reeb_derivative(reeb_derivative(re)), -((p - q) ** 2) * re)


def test_eigenvalue_examples():
    assert subelliptic_eigenvalue(BidegreeLabel(1, 0), 1) == 2
    assert subelliptic_eigenvalue((0, 0), 3) == 0
    assert subelliptic_eigenvalue((1, 1), 1) == 8
    assert round_laplacian_consistency((1, 0), 1) == 2
    assert round_laplacian_consistency((1, 1), 1) == 8
    assert round_laplacian_consistency((2, 0), 1) == 4


def test_eigenvalue_formulas_agree():
    for n in range(1, 4):
        for p in range(11):
            for q in range(11 - p):
                assert subelliptic_eigenvalue((p, q), n) == round_laplacian_consistency((p, q), n)


def test_multiplicity_examples():
    assert bidegree_multiplicity((1, 0), 1) == 2
    assert bidegree_multiplicity((1, 1), 1) == 3
    for n in (1, 2, 3):
        assert bidegree_multiplicity((0, 0), n) == 1


def test_multiplicity_matches_harmonic_kernel_rank():
    for n in (1, 2):
        for p in range(7):
            for q in range(7 - p):
                assert bidegree_multiplicity((p, q), n) == harmonic_dimension(p, q, n), (n, p, q)


def test_spectrum_table_totals():
    for n, D in [(1, 4), (2, 3)]:
        assert sum(m for _, m in spectrum_table(n, D)) == spherical_harmonic_count(n, D)


def test_monomial_basis_counts():
    basis = monomial_basis(1, 1)
    assert len(basis) == 5
    assert {str(b) for b in basis} == {"1", "x1", "y1", "x2", "y2"}
    for n, D in [(1, 3), (2, 2)]:
        assert len(monomial_exponents(n, D)) == math.comb(D + 2 * n + 2, 2 * n + 2)
    with pytest.raises(ValueError):
        monomial_basis(1, 0)


def _restricted_rank(n, D, m):
    rule = product_rule_s3(m)
    vals = np.stack([b(rule.nodes) for b in monomial_basis(n, D)], axis=1)
    G = vals.T @ (rule.weights[:, None] * vals)
    e = np.linalg.eigvalsh(G)
    return int(np.sum(e > 1e-10 * e.max()))


def test_restricted_rank_oracle():
    assert _restricted_rank(1, 2, 8) == 14 == spherical_harmonic_count(1, 2)
    assert _restricted_rank(1, 4, 12) == 55 == spherical_harmonic_count(1, 4)


def test_variable_names():
    assert variable_name(0) == "x1" and variable_name(3) == "y2"
    assert variable_index("y2") == 3


@given(polys(n=1, max_degree=4))
def test_string_roundtrip(u):
    assert parse_polynomial(str(u), 4) == u


def test_parse_examples():
    u = parse_polynomial("2 * x1^2 * y2 - 0.5 x2 + 3", 4)
    z = np.array([0.3, -0.1, 0.7, 0.2])
    assert u(z) == pytest.approx(2 * 0.09 * 0.2 - 0.35 + 3)
    assert parse_polynomial("-x1 + 1e-3", 4) == -var(0) + 1e-3
    assert parse_polynomial("x1 y1^2", 4) == var(0) * var(1) ** 2


@pytest.mark.parametrize(
    "text",
    ["abc * x1", "x1^-2", "x1^1.5", "2 * * x1", "x1 +", "", "x3", "x1 ++ - x2", "* x1", "x1 *", "x1 * + x2", "2 x1^"],
)
def test_parse_rejects(text):
    with pytest.raises(PolynomialParseError):
        parse_polynomial(text, 4)


def test_large_basis_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        monomial_exponents(3, 10)
    assert any("monomial" in str(w.message).lower() for w in caught)
