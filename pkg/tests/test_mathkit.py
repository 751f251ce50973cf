import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate, stats

from rhwxva.exceptions import (
    DomainError,
    DuplicateNodes,
    GridMismatch,
    MaxIterations,
    NoBracket,
    NoSolution,
    NotPositiveDefinite,
    RankDeficient,
)
from rhwxva.mathkit import (
    CALL,
    PUT,
    Polynomial,
    QuadratureSet,
    black_price,
    find_root,
    gauss_quadrature_normal,
    golub_welsch,
    implied_vol_shifted_black,
    lagrange_interp,
    norm_cdf,
    normal_moments,
    polyfit,
    shifted_black_price,
    trapezoid,
)


def lognormal_oracle(F, K, vol, T, phi):
    """Payoff integrated against the lognormal density of F_T."""
    s = vol * math.sqrt(T)
    mu = math.log(F) - 0.5 * s * s

    def integrand(z):
        return max(phi * (math.exp(mu + s * z) - K), 0.0) * stats.norm.pdf(z)

    val, _ = integrate.quad(integrand, -12, 12, points=[(math.log(K) - mu) / s], epsabs=1e-14,
                            epsrel=1e-13, limit=200)
    return val


# --- normal distribution -----------------------------------------------------


def test_norm_cdf_symmetry_and_saturation():
    assert norm_cdf(0.0) == 0.5
    assert norm_cdf(40.0) == 1.0
    assert norm_cdf(-40.0) == 0.0


def test_norm_cdf_against_high_precision_erf():
    mpmath.mp.dps = 40
    for x in (-7.5, -1.3, 1.0, 2.2, 5.0):
        ref = float(0.5 * (1 + mpmath.erf(mpmath.mpf(x) / mpmath.sqrt(2))))
        assert abs(norm_cdf(x) - ref) < 1e-12
    assert norm_cdf(1.0) == pytest.approx(0.8413447460685429, abs=1e-15)


@given(st.floats(-30, 30), st.floats(0, 5))
def test_norm_cdf_monotone(x, dx):
    assert 0.0 <= norm_cdf(x) <= norm_cdf(x + dx) <= 1.0


# --- Black formulas ------------------------------------------------------------


def test_black_zero_vol_is_intrinsic():
    assert black_price(100, 100, 0.0, 1, CALL) == 0.0
    assert black_price(100, 80, 0.0, 1, CALL) == 20.0
    assert black_price(100, 80, 0.3, 0.0, PUT) == 0.0


def test_black_atm_call_matches_integration():
    oracle = lognormal_oracle(100, 100, 0.2, 1, 1)
    assert oracle == pytest.approx(7.96557, abs=1e-5)
    assert black_price(100, 100, 0.2, 1, CALL) == pytest.approx(oracle, abs=1e-9)


def test_black_put_call_parity():
    c = black_price(100, 80, 0.2, 1, CALL)
    p = black_price(100, 80, 0.2, 1, PUT)
    assert c - p == pytest.approx(20.0, abs=1e-12)


def test_black_domain_errors():
    with pytest.raises(DomainError):
        black_price(-1.0, 1.0, 0.2, 1, CALL)
    with pytest.raises(DomainError):
        black_price(1.0, 0.0, 0.2, 1, CALL)
    with pytest.raises(DomainError):
        black_price(1.0, 1.0, 0.2, 1, 0)


def test_shifted_black_delegates():
    assert shifted_black_price(-0.01, -0.01, 0.03, 0.3, 1, CALL) == black_price(0.02, 0.02, 0.3, 1, CALL)
    assert shifted_black_price(0.02, 0.015, 0.0, 0.3, 2, PUT) == black_price(0.02, 0.015, 0.3, 2, PUT)
    with pytest.raises(DomainError):
        shifted_black_price(-0.02, 0.01, 0.01, 0.2, 1, CALL)


def test_shifted_black_put_matches_displaced_lognormal_integration():
    # displaced ATM: value = (F + shift) (2 N(s/2) - 1)
    oracle = lognormal_oracle(0.03, 0.03, 0.25, 5, -1)
    closed = 0.03 * (2 * stats.norm.cdf(0.25 * math.sqrt(5) / 2) - 1)
    assert oracle == pytest.approx(closed, abs=1e-12)
    assert oracle == pytest.approx(0.0066044, abs=1e-7)
    assert shifted_black_price(0.02, 0.02, 0.01, 0.25, 5, PUT) == pytest.approx(oracle, abs=1e-12)


@settings(max_examples=60)
@given(st.floats(0.05, 3.0), st.floats(0.2, 5.0), st.floats(0.5, 2.0))
def test_black_monotone_in_vol(vol, T, k):
    lo = black_price(1.0, k, vol, T, CALL)
    hi = black_price(1.0, k, vol * 1.05, T, CALL)
    assert hi >= lo


def test_black_convex_in_strike():
    ks = np.linspace(0.3, 3.0, 200)
    c = black_price(1.0, ks, 0.4, 2.0, CALL)
    assert np.all(np.diff(c, 2) >= -1e-14)


# --- implied volatility --------------------------------------------------------


def test_implied_vol_round_trip():
    p = shifted_black_price(0.02, 0.02, 0.01, 0.25, 5, PUT)
    assert implied_vol_shifted_black(p, 0.02, 0.02, 0.01, 5, PUT) == pytest.approx(0.25, abs=1e-8)


def test_implied_vol_deep_itm_intrinsic_hits_lower_bracket():
    intrinsic = 0.05 - 0.01
    v = implied_vol_shifted_black(intrinsic, 0.05, 0.01, 0.0, 1.0, CALL)
    assert v == pytest.approx(1e-6)


def test_implied_vol_outside_bounds():
    with pytest.raises(NoSolution) as err:
        implied_vol_shifted_black(0.5, 0.02, 0.02, 0.01, 1, CALL)
    assert err.value.upper == pytest.approx(0.03)
    with pytest.raises(NoSolution):
        implied_vol_shifted_black(0.001, 0.05, 0.01, 0.0, 1.0, CALL)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-0.004, 0.06),
    st.floats(0.3, 2.0),
    st.floats(0.005, 0.03),
    st.floats(0.02, 1.5),
    st.floats(0.25, 20),
    st.sampled_from([CALL, PUT]),
)
def test_implied_vol_inverts_price(fwd, k_ratio, shift, vol, T, opt):
    strike = (fwd + shift) * k_ratio - shift
    p = float(shifted_black_price(fwd, strike, shift, vol, T, opt))
    intrinsic = max(opt * (fwd - strike), 0.0)
    if p - intrinsic < 1e-12 * (fwd + shift):
        return  # numerically at intrinsic: vol not identifiable
    v = implied_vol_shifted_black(p, fwd, strike, shift, T, opt)
    assert abs(shifted_black_price(fwd, strike, shift, v, T, opt) - p) < 1e-10
    assert 1e-6 <= v <= 5.0


# --- quadrature ---------------------------------------------------------------


def test_quadrature_set_validation():
    QuadratureSet(np.array([0.1, 0.2]), np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        QuadratureSet(np.array([0.1, 0.2]), np.array([0.6, 0.5]))
    with pytest.raises(DomainError):
        QuadratureSet(np.array([0.1, 0.2]), np.array([1.1, -0.1]))
    with pytest.raises(DomainError):
        QuadratureSet(np.array([0.3, 0.2]), np.array([0.5, 0.5]))


def test_gauss_three_point_standard_normal():
    q = gauss_quadrature_normal(0.0, 1.0, 3)
    np.testing.assert_allclose(q.nodes, [-math.sqrt(3), 0.0, math.sqrt(3)], atol=1e-12)
    np.testing.assert_allclose(q.weights, [1 / 6, 2 / 3, 1 / 6], atol=1e-12)


def test_gauss_zero_spread_collapses():
    q = gauss_quadrature_normal(0.1, 0.0, 3)
    np.testing.assert_allclose(q.nodes, 0.1, atol=0)
    assert q.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_gauss_usd_parameters_centered():
    q = gauss_quadrature_normal(0.181711, 0.064055, 5)
    assert len(q) == 5
    np.testing.assert_allclose(q.nodes + q.nodes[::-1], 2 * 0.181711, atol=1e-14)
    assert np.dot(q.weights, q.nodes) == pytest.approx(0.181711, abs=1e-14)


@pytest.mark.parametrize("n", [1, 2, 4, 7, 12, 20])
def test_gauss_normal_matches_hermite_rule(n):
    x, w = hermegauss(n)
    q = gauss_quadrature_normal(0.0, 1.0, n)
    np.testing.assert_allclose(q.nodes, x, atol=5e-9)
    np.testing.assert_allclose(q.weights, w / w.sum(), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.floats(-1, 1), st.floats(0.01, 1))
def test_gauss_exactness_and_weights(n, a, b):
    q = gauss_quadrature_normal(a, b, n)
    assert np.all(q.weights >= 0)
    assert abs(q.weights.sum() - 1.0) < 1e-12
    mom = normal_moments(2 * n + 1)
    for k in range(2 * n):
        # E[(a + b Z)^k] by binomial expansion
        exact = sum(math.comb(k, j) * a ** (k - j) * b**j * mom[j] for j in range(k + 1))
        approx = float(np.dot(q.weights, q.nodes**k))
        scale = (abs(a) + b) ** k * mom[2 * ((k + 1) // 2)]
        assert approx == pytest.approx(exact, rel=1e-9, abs=1e-9 * scale)


def test_golub_welsch_examples():
    nodes, weights = golub_welsch([1.0, 0.7])
    assert nodes == pytest.approx([0.7]) and weights == pytest.approx([1.0])
    nodes, weights = golub_welsch([1, 1 / 2, 1 / 3, 1 / 4])
    np.testing.assert_allclose(nodes, [(3 - math.sqrt(3)) / 6, (3 + math.sqrt(3)) / 6], atol=1e-13)
    np.testing.assert_allclose(weights, [0.5, 0.5], atol=1e-13)
    nodes, weights = golub_welsch([1, 0, 1, 0])
    np.testing.assert_allclose(nodes, [-1, 1], atol=1e-13)
    np.testing.assert_allclose(weights, [0.5, 0.5], atol=1e-13)


def test_golub_welsch_exactness_beta_measure():
    # Beta(2, 3) moments m_k = prod_{j<k} (2+j)/(5+j)
    m = [1.0]
    for j in range(9):
        m.append(m[-1] * (2 + j) / (5 + j))
    nodes, weights = golub_welsch(m[:10])
    for k in range(10):
        assert np.dot(weights, nodes**k) == pytest.approx(m[k], rel=1e-9)


def test_golub_welsch_not_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        golub_welsch([1.0, 0.0, -1.0, 0.0])


# --- regression and interpolation --------------------------------------------


def test_polynomial_basics():
    p = Polynomial(np.array([1.5, -2.0, 3.0]))
    assert p.degree == 2
    assert p(0.0) == 1.5
    assert p(2.0) == pytest.approx(1.5 - 4 + 12)


def test_polyfit_exact_line_and_constant():
    np.testing.assert_allclose(polyfit([0, 1, 2], [1, 3, 5], 1).coefficients, [1, 2], atol=1e-12)
    c = polyfit(np.linspace(0, 1, 20), np.full(20, 3.3), 3).coefficients
    assert c[0] == pytest.approx(3.3, abs=1e-10)
    np.testing.assert_allclose(c[1:], 0, atol=1e-10)


def test_polyfit_rank_deficient():
    with pytest.raises(RankDeficient):
        polyfit(np.ones(10), np.arange(10.0), 2)


def test_polyfit_noisy_quadratic_within_standard_errors():
    rng = np.random.default_rng(7)
    x = rng.uniform(-1, 1, 10_000)
    truth = np.array([0.5, -1.0, 2.0])
    y = truth[0] + truth[1] * x + truth[2] * x**2 + rng.normal(0, 0.1, x.size)
    c = polyfit(x, y, 2).coefficients
    X = np.vander(x, 3, increasing=True)
    se = 0.1 * np.sqrt(np.diag(np.linalg.inv(X.T @ X)))
    assert np.all(np.abs(c - truth) < 3 * se)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 4), st.integers(0, 2**31 - 1))
def test_polyfit_residuals_orthogonal(degree, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(0.03, 0.01, 200)
    y = np.exp(-5 * x) + rng.normal(0, 0.01, x.size)
    p = polyfit(x, y, degree)
    res = y - p(x)
    for k in range(degree + 1):
        assert abs(np.sum(res * x**k)) < 1e-6 * np.linalg.norm(y)


def test_lagrange_examples():
    nodes = np.array([-1.0, -0.3, 0.2, 0.9, 1.4])
    vals = nodes**2
    assert lagrange_interp(nodes, vals, 0.5) == pytest.approx(0.25, abs=1e-14)
    for k in range(5):
        assert lagrange_interp(nodes, vals, nodes[k]) == vals[k]
    assert lagrange_interp([0.0, 2.0], [1.0, 5.0], 0.5) == pytest.approx(2.0)
    with pytest.raises(DuplicateNodes):
        lagrange_interp([0.0, 0.0], [1.0, 2.0], 0.5)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=4), st.floats(-2, 2))
def test_lagrange_reproduces_polynomials(coefs, x):
    nodes = np.linspace(-2, 2, len(coefs))
    p = Polynomial(np.array(coefs))
    assert lagrange_interp(nodes, p(nodes), x) == pytest.approx(p(x), abs=1e-9)


# --- roots and integration ----------------------------------------------------


def test_find_root_examples():
    assert find_root(lambda x: x - 2, bracket=(0, 5)) == pytest.approx(2.0, abs=1e-12)
    assert find_root(lambda x: x * x - 2, bracket=(0, 2)) == pytest.approx(math.sqrt(2), abs=1e-10)
    assert find_root(lambda x: x * x - 2, x0=1.0) == pytest.approx(math.sqrt(2), abs=1e-10)
    assert find_root(lambda x: math.exp(x) - 3, x0=5.0, bracket=(-1, 10)) == pytest.approx(math.log(3), abs=1e-11)


def test_find_root_errors():
    with pytest.raises(NoBracket):
        find_root(lambda x: x * x + 1, bracket=(-1, 1))
    with pytest.raises(MaxIterations):
        find_root(lambda x: math.atan(x) + 2, x0=0.1, maxiter=20)


def test_trapezoid_examples():
    assert trapezoid([0.0, 1.0, 2.5], [3.0, 3.0, 3.0]) == pytest.approx(7.5, abs=0)
    assert trapezoid([0.0, 0.5, 1.0], [0.0, 0.5, 1.0]) == pytest.approx(0.5)
    with pytest.raises(GridMismatch):
        trapezoid([0.0, 1.0], [1.0])
    with pytest.raises(GridMismatch):
        trapezoid([0.0, 0.0, 1.0], [1.0, 1.0, 1.0])


def test_trapezoid_second_order():
    def err(n):
        t = np.linspace(0, 1, n + 1)
        return abs(trapezoid(t, t**2) - 1 / 3)

    assert err(20) / err(40) == pytest.approx(4.0, rel=1e-9)
