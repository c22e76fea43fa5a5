import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate
from scipy import stats

from polarmem.noise import (BivariateGaussianNoise, BivariateStudentNoise,
                            GilbertElliottNoise, noise_pair_mi)
from polarmem.quadrature import QuadratureSpec, integrate

GE_P = [[0.9, 0.1], [0.1, 0.9]]
GE_E = [0.02, 0.25]


# ---------------------------------------------------------------------------
# Gaussian
# ---------------------------------------------------------------------------

def test_gaussian_from_rho_conditional_variance():
    g = BivariateGaussianNoise.from_rho(0.6, var=2.0)
    assert g.cond_var == pytest.approx(2.0 * (1 - 0.36))


def test_gaussian_rejects_bad_sigma():
    with pytest.raises(ValueError):
        BivariateGaussianNoise([[1.0, 1.5], [1.5, 1.0]])   # not PSD


def test_gaussian_conditional_matches_scipy():
    g = BivariateGaussianNoise.from_rho(0.3, var=1.5)
    n0, n1 = 0.7, -0.4
    loc = 0.3 * n0
    sd = np.sqrt(1.5 * (1 - 0.09))
    assert g.conditional_pdf(n1, n0) == pytest.approx(
        stats.norm.pdf(n1, loc=loc, scale=sd))
    assert g.marginal_pdf(n0) == pytest.approx(
        stats.norm.pdf(n0, scale=np.sqrt(1.5)))


def test_gaussian_path_autocorrelation():
    g = BivariateGaussianNoise.from_rho(0.6)
    n = g.sample_path(200_000, seed=0)
    assert np.var(n) == pytest.approx(1.0, abs=0.02)
    r1 = np.mean(n[1:] * n[:-1])
    assert r1 == pytest.approx(0.6, abs=0.02)


def test_gaussian_path_deterministic_in_seed():
    g = BivariateGaussianNoise.from_rho(0.3)
    a = g.sample_path(100, seed=7, stream=1)
    b = g.sample_path(100, seed=7, stream=1)
    c = g.sample_path(100, seed=7, stream=2)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@settings(max_examples=20, deadline=None)
@given(rho=st.floats(-0.85, 0.85))
def test_gaussian_pair_mi_closed_form(rho):
    # independent oracle: bivariate normal MI = -0.5*log2(1 - rho^2)
    g = BivariateGaussianNoise.from_rho(rho)
    est = noise_pair_mi(g)
    assert est.value == pytest.approx(-0.5 * np.log2(1 - rho ** 2), abs=2e-6)


# ---------------------------------------------------------------------------
# Student
# ---------------------------------------------------------------------------

def test_student_marginal_is_scaled_t():
    s = BivariateStudentNoise.from_first_row([1.0, 0.6], 2.0)
    x = np.linspace(-4, 4, 9)
    np.testing.assert_allclose(
        s.marginal_pdf(x), stats.t.pdf(x, df=2.0, scale=1.0), rtol=1e-12)


def test_student_joint_normalizes():
    s = BivariateStudentNoise.from_first_row([1.0, 0.6], 2.0)
    val, err = sp_integrate.dblquad(
        lambda n1, n0: s.joint_pdf(n0, n1), -60, 60, -60, 60)
    assert val == pytest.approx(1.0, abs=5e-3)   # heavy tails truncated


def test_student_conditional_normalizes_and_factorizes():
    s = BivariateStudentNoise.from_first_row([1.0, 0.6], 2.0)
    for n0 in (-2.0, 0.0, 1.5):
        spec = QuadratureSpec(lo=-1e6, hi=1e6, nodes=4001, center=0.6 * n0,
                              scale=2.0, tail_power=3.0)
        val, _ = integrate(lambda n1: s.conditional_pdf(n1, n0), spec)
        assert val == pytest.approx(1.0, abs=1e-6)
        # joint = marginal * conditional
        n1 = 0.3
        assert s.joint_pdf(n0, n1) == pytest.approx(
            s.marginal_pdf(n0) * s.conditional_pdf(n1, n0), rel=1e-10)


def test_student_path_marginal_moments():
    s = BivariateStudentNoise.from_first_row([4.0, 1.0], 5.0)
    n = s.sample_path(100_000, seed=3)
    # t_5 with scale^2 = 4 has variance 4 * 5/3
    assert np.var(n) == pytest.approx(4 * 5 / 3, rel=0.1)


# ---------------------------------------------------------------------------
# Gilbert-Elliott
# ---------------------------------------------------------------------------

def test_ge_validation():
    with pytest.raises(ValueError):
        GilbertElliottNoise([[0.5, 0.6], [0.1, 0.9]], GE_E)
    with pytest.raises(ValueError):
        GilbertElliottNoise(GE_P, [0.02, 1.5])


def test_ge_stationary_and_error_rate():
    ge = GilbertElliottNoise(GE_P, GE_E)
    np.testing.assert_allclose(ge.stationary, [0.5, 0.5], atol=1e-12)
    assert ge.error_rate == pytest.approx(0.135)
    asym = GilbertElliottNoise([[0.95, 0.05], [0.2, 0.8]], GE_E)
    pi = asym.stationary
    np.testing.assert_allclose(pi @ asym.transition, pi, atol=1e-12)
    assert pi[0] == pytest.approx(0.8, abs=1e-12)


def test_ge_pair_joint_consistency():
    ge = GilbertElliottNoise(GE_P, GE_E)
    j = ge.pair_joint()
    assert j.shape == (2, 2)
    assert j.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(j.sum(axis=1), [1 - 0.135, 0.135], atol=1e-12)
    # symmetric chain, symmetric pair law
    np.testing.assert_allclose(j, j.T, atol=1e-12)


def test_ge_pair_mi_against_direct_formula():
    ge = GilbertElliottNoise(GE_P, GE_E)
    est = noise_pair_mi(ge)
    j = ge.pair_joint()
    m = j.sum(axis=1)
    direct = sum(j[a, b] * np.log2(j[a, b] / (m[a] * m[b]))
                 for a in range(2) for b in range(2))
    assert est.value == pytest.approx(direct, abs=1e-12)
    assert est.stderr == 0.0


def test_ge_sample_path_error_rate():
    ge = GilbertElliottNoise(GE_P, GE_E)
    n = ge.sample_path(200_000, seed=5)
    assert set(np.unique(n)) <= {0, 1}
    assert n.mean() == pytest.approx(0.135, abs=0.01)


def test_ge_state_dwell_time():
    ge = GilbertElliottNoise(GE_P, GE_E)
    s = ge.sample_states(200_000, seed=9)
    # expected dwell 1/0.1 = 10 in each state
    switches = np.mean(s[1:] != s[:-1])
    assert switches == pytest.approx(0.1, abs=0.01)
