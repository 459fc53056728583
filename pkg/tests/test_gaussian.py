"""Closed-form Gaussian sensitivities and their internal consistency."""

import math

import numpy as np
import pytest

from kerrsense import gaussian
from kerrsense.gaussian import GaussianState, from_free_squeezing


def random_states(count: int, seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield GaussianState(
            r=rng.uniform(0.0, 2.0),
            zeta=rng.uniform(0.0, 2.0 * math.pi),
            n_thermal=rng.uniform(0.0, 3.0),
        )


def test_vacuum_covariance():
    np.testing.assert_allclose(
        gaussian.covariance(GaussianState()), np.eye(2) / 2.0, atol=1e-15
    )


def test_squeezed_vacuum_covariance_principal_axes():
    # zeta = 0 squeezes X directly: diag(e^{-2r}, e^{2r})/2
    g = GaussianState(r=0.7, zeta=0.0)
    expected = np.diag([math.exp(-1.4), math.exp(1.4)]) / 2.0
    np.testing.assert_allclose(gaussian.covariance(g), expected, atol=1e-14)


def test_covariance_determinant_invariant():
    # det = ((1+2n_T)/2)^2 regardless of squeezing
    for g in random_states(20, seed=3):
        det = float(np.linalg.det(gaussian.covariance(g)))
        expected = ((1.0 + 2.0 * g.n_thermal) / 2.0) ** 2
        assert abs(det - expected) < 1e-10 * expected


def test_variance_matches_covariance_quadratic_form():
    for g in random_states(10, seed=4):
        cov = gaussian.covariance(g)
        for theta in (0.0, 0.9, 2.4):
            m = np.array([math.cos(theta), math.sin(theta)])
            assert abs(gaussian.variance(g, theta) - m @ cov @ m) < 1e-12


def test_variance_extrema():
    g = GaussianState(r=0.5, zeta=math.pi / 2.0)
    # minimum at theta = zeta/2, maximum a quarter turn away
    assert abs(gaussian.variance(g, math.pi / 4.0) - math.exp(-1.0) / 2.0) < 1e-14
    assert abs(gaussian.variance(g, 3.0 * math.pi / 4.0) - math.exp(1.0) / 2.0) < 1e-14


def test_purity():
    assert gaussian.purity(GaussianState(r=1.3)) == 1.0
    assert abs(gaussian.purity(GaussianState(n_thermal=1.0)) - 1.0 / 3.0) < 1e-15


def test_from_free_squeezing_mapping():
    g = from_free_squeezing(2.0, 0.25)
    assert g.r == 1.0
    assert g.zeta == math.pi / 2.0
    assert g.n_thermal == 0.0
    with pytest.raises(ValueError):
        from_free_squeezing(2.0, -0.1)


def test_qfi_displacement_profile():
    g = GaussianState(r=1.0, zeta=0.0)
    # generator along the anti-squeezed direction sees the squeezed variance
    assert abs(gaussian.qfi_displacement(g, 0.0) - 2.0 * math.exp(-2.0)) < 1e-14
    assert abs(gaussian.qfi_displacement(g, math.pi / 2.0) - 2.0 * math.exp(2.0)) < 1e-13
    assert abs(gaussian.qfi_max(g) - 2.0 * math.exp(2.0)) < 1e-13


def test_qfi_max_dominates_profile():
    for g in random_states(10, seed=5):
        best = max(
            gaussian.qfi_displacement(g, phi) for phi in np.linspace(0.0, math.pi, 721)
        )
        assert best <= gaussian.qfi_max(g) + 1e-12
        assert gaussian.qfi_max(g) - best < 1e-4 * gaussian.qfi_max(g)


def test_thermal_qfi_reduction():
    g = GaussianState(n_thermal=2.0)
    assert abs(gaussian.qfi_max(g) - 2.0 / 5.0) < 1e-15


def test_chi_linear_max_saturates_qfi():
    # homodyne at the squeezed angle reaches the Cramer-Rao bound exactly;
    # cosh 2r - sinh 2r costs ~ e^{4r} ulp of cancellation
    for g in random_states(50, seed=6):
        bound = gaussian.qfi_max(g)
        assert abs(gaussian.chi_linear_max(g) - bound) < 1e-11 * bound


def test_chi_linear_never_exceeds_qfi():
    rng = np.random.default_rng(7)
    for g in random_states(10, seed=8):
        for _ in range(20):
            theta = rng.uniform(0.0, math.pi)
            phi = rng.uniform(0.0, math.pi)
            assert gaussian.chi_linear(g, theta, phi) <= gaussian.qfi_max(g) + 1e-12


def test_mai_equals_linear_optimum_without_noise():
    # Gaussian dynamics: the echo buys nothing at sigma^2 = 0
    for g in random_states(10, seed=9):
        assert abs(gaussian.mai_gaussian(g) - gaussian.chi_linear_max(g)) < 1e-12


def test_noisy_sensitivities_closed_form():
    g = GaussianState(r=0.5)
    for sigma2 in (0.0, 0.1, 1.0, 10.0):
        got = gaussian.noisy_sensitivities(g, sigma2)
        assert abs(got.chi - 1.0 / (math.exp(-1.0) / 2.0 + sigma2)) < 1e-12
        assert abs(got.chi_mai - math.exp(1.0) / (0.5 + sigma2)) < 1e-12
        expected_ratio = (1.0 + 2.0 * math.exp(1.0) * sigma2) / (1.0 + 2.0 * sigma2)
        assert abs(got.ratio - expected_ratio) < 1e-10


def test_noisy_ratio_limits():
    g = GaussianState(r=0.8)
    assert abs(gaussian.noisy_sensitivities(g, 0.0).ratio - 1.0) < 1e-14
    # strong readout noise: the echo retains the full e^{2r} gain
    big = gaussian.noisy_sensitivities(g, 1e8).ratio
    assert abs(big - math.exp(1.6)) < 1e-6 * math.exp(1.6)
    with pytest.raises(ValueError):
        gaussian.noisy_sensitivities(g, -0.1)


def test_noisy_ratio_monotone_in_noise():
    g = GaussianState(r=1.0)
    ratios = [gaussian.noisy_sensitivities(g, s).ratio for s in (0.0, 0.1, 1.0, 10.0)]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_qfi_vs_excitations():
    assert abs(gaussian.qfi_vs_excitations(0.0) - 2.0) < 1e-15
    # N = sinh^2 r reproduces 2 e^{2r}
    r = 1.0
    n = math.sinh(r) ** 2
    assert abs(gaussian.qfi_vs_excitations(n) - 2.0 * math.exp(2.0 * r)) < 1e-12
    # asymptote 4 + 8N
    assert abs(gaussian.qfi_vs_excitations(100.0) - (4.0 + 800.0)) < 1e-2 * 804.0
    with pytest.raises(ValueError):
        gaussian.qfi_vs_excitations(-1.0)


def test_state_validation():
    with pytest.raises(ValueError):
        GaussianState(r=-0.1)
    with pytest.raises(ValueError):
        GaussianState(n_thermal=-1.0)
    with pytest.raises(ValueError):
        GaussianState(zeta=math.inf)
