import numpy as np
import pytest
from scipy import integrate as sp_integrate

from polarmem import metrics
from polarmem.channel import (FiniteStateChannel, MemoryChannel,
                              ModulationMap)
from polarmem.noise import (BivariateGaussianNoise, BivariateStudentNoise,
                            GilbertElliottNoise, noise_pair_mi)

GE_P = [[0.9, 0.1], [0.1, 0.9]]
GE_E = [0.02, 0.25]


def gauss_channel(rho, a=1.0, var=1.0):
    return MemoryChannel(BivariateGaussianNoise.from_rho(rho, var),
                         ModulationMap.antipodal(a))


def ge_fsc():
    return FiniteStateChannel.from_gilbert_elliott(
        GilbertElliottNoise(GE_P, GE_E))


def binary_entropy(p):
    return -p * np.log2(p) - (1 - p) * np.log2(1 - p)


# ---------------------------------------------------------------------------
# continuous-channel metrics against closed forms
# ---------------------------------------------------------------------------

def test_z_w_gaussian_closed_form():
    for a, var in ((1.0, 1.0), (0.5, 2.0), (2.0, 0.7)):
        ch = gauss_channel(0.3, a, var)
        est = metrics.z_w(ch)
        assert est.value == pytest.approx(np.exp(-a ** 2 / (2 * var)),
                                          abs=1e-9)
        assert est.converged


def test_mi_w_gaussian_against_scipy():
    ch = gauss_channel(0.0, a=1.0)

    def integrand(y):
        p0 = ch.likelihood(y, 0)
        p1 = ch.likelihood(y, 1)
        m = 0.5 * (p0 + p1)
        out = 0.0
        for p in (p0, p1):
            if p > 0:
                out += 0.5 * p * np.log2(p / m)
        return out

    ref, _ = sp_integrate.quad(integrand, -30, 30, limit=400)
    assert metrics.mi_w(ch).value == pytest.approx(ref, abs=1e-8)


def test_zg_conditional_constant_for_gaussian():
    # the genie channel's conditional Z does not depend on the conditioning
    # value when the noise is Gaussian: the conditional variance is constant
    ch = gauss_channel(0.6, a=1.0)
    vals = np.array([metrics.zg_conditional(ch, n0).value
                     for n0 in np.linspace(-3, 3, 9)])
    assert np.ptp(vals) / vals.mean() < 1e-9


def test_zg_w_gaussian_closed_form():
    for rho in (0.3, 0.6):
        ch = gauss_channel(rho, a=1.0)
        cond_var = 1.0 - rho ** 2      # det(Sigma)/Sigma_11 with unit var
        est = metrics.zg_w(ch)
        assert est.value == pytest.approx(np.exp(-1.0 / (2 * cond_var)),
                                          abs=1e-6)


def test_zg_below_z_jensen():
    for ch in (gauss_channel(0.6), gauss_channel(0.3, a=0.5),
               MemoryChannel(BivariateStudentNoise.from_first_row(
                   [1.0, 0.6], 2.0), ModulationMap.antipodal(1.0))):
        assert metrics.zg_w(ch).value <= metrics.z_w(ch).value + 1e-9


def test_single_layer_mi_conservation_and_order():
    ch = gauss_channel(0.0, a=1.0)
    e1, e2 = metrics.single_layer_mi(ch)
    iw = metrics.mi_w(ch).value
    # memoryless case: the layer conserves MI and the even index improves
    assert e1.value + e2.value == pytest.approx(2 * iw, abs=1e-6)
    assert e2.value >= iw >= e1.value


def test_lemma1_residual_small_gaussian():
    for rho in (0.0, 0.3, 0.6):
        assert abs(metrics.lemma1_residual(gauss_channel(rho))) < 1e-6


def test_output_pair_mi_memoryless_is_zero():
    ch = gauss_channel(0.0, a=1.0)
    assert metrics.output_pair_mi(ch).value == pytest.approx(0.0, abs=1e-9)


def test_mc_cross_checks_agree_with_quadrature():
    ch = gauss_channel(0.6, a=1.0)
    iw = metrics.mi_w(ch)
    im = metrics.mi_w_mc(ch, samples=40_000, seed=2)
    assert abs(im.value - iw.value) < 4 * im.stderr
    z = metrics.z_w(ch)
    zm = metrics.z_w_mc(ch, samples=40_000, seed=2)
    assert abs(zm.value - z.value) < 4 * zm.stderr


# ---------------------------------------------------------------------------
# finite-state metrics against independent small computations
# ---------------------------------------------------------------------------

def test_fsc_mi_w_is_bsc_capacity_of_average():
    est = metrics.fsc_mi_w(ge_fsc())
    assert est.value == pytest.approx(1.0 - binary_entropy(0.135), abs=1e-12)


def test_fsc_z_w_is_bsc_bhattacharyya_of_average():
    est = metrics.fsc_z_w(ge_fsc())
    assert est.value == pytest.approx(2 * np.sqrt(0.135 * 0.865), abs=1e-12)


def test_fsc_zg_w_direct():
    fsc = ge_fsc()
    prior = fsc.boundary_prior()
    post = fsc.state_posterior()
    # conditional crossover after one transition from the posterior state
    e_states = np.array(GE_E)
    acc = 0.0
    for o in range(2):
        p_next = post[:, o] @ np.asarray(GE_P)
        e_cond = p_next @ e_states
        acc += prior[o] * 2 * np.sqrt(e_cond * (1 - e_cond))
    assert metrics.fsc_zg_w(fsc).value == pytest.approx(acc, abs=1e-12)


def test_fsc_zg_conditional_within_extremes():
    fsc = ge_fsc()
    cond = metrics.fsc_zg_conditional(fsc)
    z = metrics.fsc_z_w(fsc).value
    assert cond.shape == (2,)
    assert np.min(cond) <= z <= 1.0


def test_gf2_outputs_are_pairwise_independent():
    # uniform input XOR makes Y iid uniform: all output MIs vanish
    fsc = ge_fsc()
    assert metrics.fsc_output_pair_mi(fsc).value == pytest.approx(0, abs=1e-12)
    assert metrics.fsc_y0_noise_mi(fsc) == pytest.approx(0.0, abs=1e-12)


def test_i_dagger_ge_gf2_equals_noise_pair_mi():
    fsc = ge_fsc()
    idag = metrics.i_dagger(fsc)
    nci = noise_pair_mi(GilbertElliottNoise(GE_P, GE_E))
    assert idag.value == pytest.approx(nci.value, abs=1e-9)
    assert idag.method == "enumeration"


def test_i_dagger_memoryless_is_zero():
    fsc = FiniteStateChannel.memoryless([[0.9, 0.1], [0.1, 0.9]])
    assert metrics.i_dagger(fsc).value == pytest.approx(0.0, abs=1e-12)


def test_truncated_tail_mi_nonnegative_increments():
    ge = GilbertElliottNoise(GE_P, GE_E)
    fsc = FiniteStateChannel.from_gilbert_elliott(
        ge, mod=ModulationMap(0.0, 1.0))
    seq = metrics.truncated_tail_mi(fsc, 5)
    assert np.all(np.diff(seq) >= -1e-12)
    assert np.all(seq >= 0)


def test_block_mi_identity_additive_map():
    ge = GilbertElliottNoise(GE_P, GE_E)
    fsc = FiniteStateChannel.from_gilbert_elliott(
        ge, mod=ModulationMap(0.0, 1.0))
    for l in (2, 3):
        lhs, rhs = metrics.block_mi_identity(fsc, l)
        assert lhs == pytest.approx(rhs, abs=1e-9)
        assert lhs > 0


def test_i_z_bounds_check():
    assert metrics.i_z_bounds_check(0.5, np.sqrt(1 - 0.25))
    assert not metrics.i_z_bounds_check(0.9, 0.9)       # I^2 + Z^2 > 1
    assert not metrics.i_z_bounds_check(0.0, 0.0)       # I too small for Z
    assert metrics.i_z_bounds_check(1.0, 0.0)
    assert metrics.i_z_bounds_check(0.0, 1.0)
