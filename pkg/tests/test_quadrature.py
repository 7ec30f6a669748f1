import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import extremal_factor
from crspectra.geometry import random_sphere_points
from crspectra.polynomials import RealPolynomial, monomial_exponents, monomial_values
from crspectra.quadrature import (
    IntegrationError,
    QuadratureRule,
    gauss_legendre,
    integrate,
    monte_carlo_rule,
    product_rule_s3,
    sphere_volume,
    write_rule_csv,
)


def _monomial_integral(e):
    """Closed form of int x^e over S^{N-1}: 2 prod Gamma((e_i+1)/2) / Gamma((|e|+N)/2), zero for odd e_i."""
    if any(k % 2 for k in e):
        return 0.0
    num = math.prod(math.gamma((k + 1) / 2) for k in e)
    return 2 * num / math.gamma((sum(e) + len(e)) / 2)


@pytest.mark.parametrize("m", [1, 2, 5, 17, 40])
def test_gauss_legendre_matches_numpy(m):
    x, w = gauss_legendre(m)
    xr, wr = np.polynomial.legendre.leggauss(m)
    assert np.max(np.abs(x - xr)) <= 1e-14
    assert np.max(np.abs(w - wr)) <= 1e-14


def test_volume_examples():
    rule = product_rule_s3(6)
    assert integrate(1.0, rule) == pytest.approx(2 * math.pi**2, abs=1e-10)
    assert abs(integrate(lambda z: z[:, 0], rule)) <= 1e-12
    assert integrate(lambda z: z[:, 0] ** 2 + z[:, 1] ** 2, rule) == pytest.approx(math.pi**2, abs=1e-10)
    assert sphere_volume(1) == pytest.approx(2 * math.pi**2)
    assert sphere_volume(2) == pytest.approx(math.pi**3)


def test_constant_field():
    rule = product_rule_s3(4)
    assert integrate(2.5, rule) == pytest.approx(2.5 * 2 * math.pi**2, rel=1e-14)


@pytest.mark.parametrize("m", [3, 6, 9])
def test_exactness_against_closed_form(m):
    rule = product_rule_s3(m)
    exps = monomial_exponents(1, 2 * m - 1)
    vals = monomial_values(exps, rule.nodes)
    got = rule.weights @ vals
    want = np.array([_monomial_integral(e) for e in exps])
    assert np.max(np.abs(got - want)) <= 1e-12 * (1 + np.abs(want)).max()


def test_exactness_across_m():
    for m in (4, 8):
        a, b = product_rule_s3(m), product_rule_s3(m + 2)
        exps = monomial_exponents(1, 2 * m - 1)
        ia = a.weights @ monomial_values(exps, a.nodes)
        ib = b.weights @ monomial_values(exps, b.nodes)
        assert np.max(np.abs(ia - ib) / np.maximum(1.0, np.abs(ib))) <= 1e-11


def test_exact_degree_is_sharp():
    m = 4
    rule = product_rule_s3(m)
    # x1^(2m+1) carries the angular frequency 2m+1, which the trapezoid rule aliases to zero
    e = (2 * m + 1, 0, 0, 0)
    assert abs(rule.weights @ monomial_values([e], rule.nodes)[:, 0] - _monomial_integral(e)) > 1e-8


def test_weights_positive_and_on_sphere():
    rule = product_rule_s3(7)
    assert np.all(rule.weights > 0)
    assert np.max(np.abs(np.linalg.norm(rule.nodes, axis=1) - 1)) <= 1e-15
    assert len(rule) == 7 * 15 * 15
    assert rule.exact_degree == 13
    with pytest.raises(ValueError):
        QuadratureRule(rule.nodes, -rule.weights, 0, "bad")


def test_volume_law_converges():
    """Non-polynomial field f_{p,t}^2 at t = 0.5: rules m and 2m agree."""
    p = random_sphere_points(1, 1, np.random.default_rng(3))[0]
    f = lambda z: extremal_factor(p, 0.5, z) ** 2
    for m in (24, 30):
        assert abs(integrate(f, product_rule_s3(m)) - integrate(f, product_rule_s3(2 * m))) <= 1e-8


def test_volume_law_fine_rule():
    """int f_{p,t}^{2} = V(theta_0) holds to 1e-8 up to t = 1 once the angular grid resolves the factor."""
    rng = np.random.default_rng(11)
    rule = product_rule_s3(48)
    for t in (0.3, 0.7, 1.0):
        p = random_sphere_points(1, 1, rng)[0]
        v = integrate(lambda z: extremal_factor(p, t, z) ** 2, rule)
        assert abs(v - sphere_volume(1)) <= 1e-8


def test_monte_carlo_rule():
    N = 20000
    r1, r2 = monte_carlo_rule(2, N, 5), monte_carlo_rule(2, N, 5)
    assert np.array_equal(r1.nodes, r2.nodes)
    assert not np.array_equal(r1.nodes, monte_carlo_rule(2, N, 6).nodes)
    V = sphere_volume(2)
    assert integrate(1.0, r1) == pytest.approx(V, rel=1e-14)
    assert abs(integrate(lambda z: z[:, 0], r1)) <= 5 * V / math.sqrt(N)
    assert r1.exact_degree == 0
    with pytest.raises(ValueError):
        monte_carlo_rule(1, 999, 0)


@given(st.integers(0, 10_000))
def test_monte_carlo_five_sigma(seed):
    N = 4000
    rule = monte_carlo_rule(1, N, seed)
    V = sphere_volume(1)
    assert abs(integrate(lambda z: z[:, 1], rule)) <= 5 * V / math.sqrt(N)


def test_monte_carlo_volume_matches_exact_rule():
    assert monte_carlo_rule(1, 1000, 0).volume == pytest.approx(product_rule_s3(3).volume, rel=1e-14)


def test_integrate_rejects_non_finite():
    rule = product_rule_s3(3)
    vals = np.ones(len(rule))
    vals[7] = np.nan
    with pytest.raises(IntegrationError, match="node 7"):
        integrate(vals, rule)


def test_integrate_deterministic():
    rule = product_rule_s3(12)
    u = RealPolynomial.parse("x1^3 * y2 + 0.3 * x2^2 - y1", 4)
    assert integrate(u, rule) == integrate(u, rule)


def test_rule_csv(tmp_path):
    rule = product_rule_s3(2)
    path = tmp_path / "rule.csv"
    write_rule_csv(rule, path)
    rows = path.read_text(encoding="utf-8").splitlines()
    assert rows[0] == "x1,y1,x2,y2,weight"
    assert len(rows) == 1 + len(rule)
    back = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    assert np.array_equal(back[:, :4], rule.nodes)
    assert np.array_equal(back[:, 4], rule.weights)
