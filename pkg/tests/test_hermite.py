import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrfield.errors import ConfigError, DomainError
from lrfield.hermite import hermite_coeffs, hermite_poly, hermite_table, parseval_gap, resolve_g
from lrfield.special import gauss_hermite_rule


@settings(max_examples=50)
@given(st.floats(-10, 10))
def test_low_degree_polynomials(x):
    assert hermite_poly(0, x) == 1.0
    assert hermite_poly(1, x) == x
    assert hermite_poly(2, x) == pytest.approx(x * x - 1, abs=1e-12 * (1 + x * x))
    assert hermite_poly(3, x) == pytest.approx(x**3 - 3 * x, abs=1e-12 * (1 + abs(x) ** 3))


def test_hermite_poly_guards():
    with pytest.raises(ConfigError):
        hermite_poly(31, 0.5)
    with pytest.raises(DomainError):
        hermite_poly(-1, 0.5)
    hermite_poly(30, 0.5)


def test_table_matches_poly():
    x = np.linspace(-4, 4, 17)
    t = hermite_table(8, x)
    for k in range(9):
        np.testing.assert_allclose(t[k], hermite_poly(k, x), rtol=1e-13, atol=1e-12)


def test_orthogonality():
    rule = gauss_hermite_rule(64)
    t = hermite_table(10, rule.nodes)
    gram = (t * rule.weights) @ t.T
    expected = np.diag([math.factorial(k) for k in range(11)]).astype(float)
    scale = np.sqrt(np.outer(np.diag(expected), np.diag(expected)))
    assert np.max(np.abs(gram - expected) / scale) < 1e-9


def test_coeffs_H2():
    spec = hermite_coeffs("H2")
    expected = np.zeros(11)
    expected[2] = 2.0
    np.testing.assert_allclose(spec.coeffs, expected, atol=1e-10)
    assert spec.rank == 2 and spec.c_rank == pytest.approx(2.0)
    assert abs(parseval_gap(spec)) < 1e-10


def test_coeffs_square():
    spec = hermite_coeffs("square")
    expected = np.zeros(11)
    expected[[0, 2]] = [1.0, 2.0]
    np.testing.assert_allclose(spec.coeffs, expected, atol=1e-10)
    assert spec.rank == 2
    assert abs(parseval_gap(spec)) < 1e-10


def test_coeffs_abs():
    spec = hermite_coeffs("abs", jmax=6, rule_order=256)
    assert spec.coeffs[1] == 0.0
    assert spec.coeffs[0] == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)
    assert spec.rank == 2
    assert parseval_gap(spec) > -1e-8


def test_indicator_gap_decreasing():
    gaps = [parseval_gap(hermite_coeffs("indicator", jmax=j, rule_order=256)) for j in (2, 4, 6, 8, 10)]
    assert all(g > 0 for g in gaps)
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    spec = hermite_coeffs("indicator", jmax=10, rule_order=256)
    assert spec.rank == 1
    assert spec.coeffs[0] == pytest.approx(0.5, abs=1e-12)
    assert spec.coeffs[1] == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-3)


@pytest.mark.parametrize("g,rank", [("H1", 1), ("H2", 2), ("H3", 3), ("H4", 4), ("H5", 5), ("H6", 6),
                                    ("power:1", 1), ("power:3", 1), ("power:2", 2), ("power:4", 2)])
def test_ranks(g, rank):
    assert hermite_coeffs(g).rank == rank


def test_cube_coefficient():
    assert hermite_coeffs("power:3").coeffs[1] == pytest.approx(3.0, rel=1e-12)


def test_callable_g():
    spec = hermite_coeffs(lambda w: w**2 - 1)
    assert spec.rank == 2 and spec.c_rank == pytest.approx(2.0)


def test_coeff_errors():
    with pytest.raises(ConfigError):
        hermite_coeffs("H2", jmax=10, rule_order=11)
    with pytest.raises(ConfigError):
        hermite_coeffs("H2", jmax=21)
    with pytest.raises(ConfigError):
        hermite_coeffs("H0")
    for bad in ("H7", "cosh", "power:9", "indicator:x"):
        with pytest.raises(ConfigError):
            resolve_g(bad)


def test_indicator_threshold():
    f = resolve_g("indicator:1.5")
    np.testing.assert_array_equal(f(np.array([1.0, 2.0])), [0.0, 1.0])


@pytest.mark.parametrize("rho", [0.3, 0.9])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_product_moment_monte_carlo(rho, k):
    rng = np.random.default_rng(1000 + k + int(10 * rho))
    n = 1_000_000
    a = rng.standard_normal(n)
    b = rho * a + math.sqrt(1 - rho * rho) * rng.standard_normal(n)
    prod = hermite_poly(k, a) * hermite_poly(k, b)
    se = prod.std() / math.sqrt(n)
    assert abs(prod.mean() - math.factorial(k) * rho**k) < 4 * se


def _phi(x):
    return math.exp(-x * x / 2) / math.sqrt(2 * math.pi)


@pytest.mark.parametrize("c", [0.0, 0.7, -2.0])
def test_indicator_closed_form(c):
    # d/dw(-H_{j-1} phi) = H_j phi gives C_j = phi(c) H_{j-1}(c)
    spec = hermite_coeffs(f"indicator:{c}", jmax=12)
    assert spec.coeffs[0] == pytest.approx(0.5 * math.erfc(c / math.sqrt(2)), abs=1e-12)
    for j in range(1, 13):
        expected = _phi(c) * hermite_poly(j - 1, c)
        assert spec.coeffs[j] == pytest.approx(expected, abs=1e-9 * math.sqrt(math.factorial(j)))


def test_abs_closed_form():
    spec = hermite_coeffs("abs", jmax=20)
    assert np.all(spec.coeffs[1::2] == 0.0)
    for j in range(2, 21, 2):
        expected = 2 * _phi(0) * (hermite_poly(j, 0.0) + j * hermite_poly(j - 2, 0.0))
        assert spec.coeffs[j] == pytest.approx(expected, abs=1e-9 * math.sqrt(math.factorial(j)))
    assert 0 < parseval_gap(spec) < parseval_gap(hermite_coeffs("abs", jmax=10))
