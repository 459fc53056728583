"""Closed and open evolution, squeezing figures, and their analytic oracles."""

import math

import numpy as np
import pytest
import scipy.linalg

from kerrsense import dynamics, fock, gaussian
from kerrsense.dynamics import (
    HamiltonianParams,
    LossParams,
    NoInteriorMinimumError,
    eigensystem,
    evolve_lindblad,
    evolve_unitary,
    hamiltonian,
    liouvillian,
    min_variance,
    optimal_squeezing,
    propagator,
    squeezing_trace,
)
from kerrsense.fock import QuantumState, TruncationError, ladder_moments


def test_params_validation():
    with pytest.raises(ValueError):
        HamiltonianParams(delta=math.nan)
    with pytest.raises(ValueError):
        HamiltonianParams(epsilon=math.inf)
    with pytest.raises(ValueError):
        LossParams(gamma=-0.1)
    # frozen dataclasses: no in-place edits
    p = HamiltonianParams(delta=1.0)
    with pytest.raises(Exception):
        p.delta = 2.0


def test_hamiltonian_matrix_structure():
    dim = 12
    p = HamiltonianParams(delta=0.7, epsilon=1.3, kerr=0.4)
    a = fock.annihilation(dim).matrix
    ad = a.conj().T
    expected = (
        p.delta * ad @ a
        + p.epsilon * (ad @ ad + a @ a)
        - p.kerr * ad @ ad @ a @ a
    )
    np.testing.assert_allclose(hamiltonian(dim, p).matrix, expected, atol=1e-12)
    assert hamiltonian(dim, p).is_hermitian


def test_propagator_matches_expm():
    dim = 36
    p = HamiltonianParams(delta=1.0, epsilon=2.0, kerr=1.0)
    u = propagator(dim, p, 0.3).matrix
    ref = scipy.linalg.expm(-1j * hamiltonian(dim, p).matrix * 0.3)
    np.testing.assert_allclose(u, ref, atol=1e-10)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(dim), atol=1e-10)


def test_eigensystem_is_cached():
    p = HamiltonianParams(delta=0.5, epsilon=1.0, kerr=0.2)
    first = eigensystem(40, p)
    second = eigensystem(40, p)
    assert first[0] is second[0] and first[1] is second[1]


def test_ideal_squeezing_law():
    # kerr = 0: V_min(t) = e^{-4 eps t}/2 at theta = pi/4, V_max = e^{+4 eps t}/2
    dim, eps, t = 80, 1.0, 0.2
    state = evolve_unitary(QuantumState.vacuum(dim), HamiltonianParams(epsilon=eps), t)
    v_min, theta = min_variance(state)
    assert abs(v_min - math.exp(-4.0 * eps * t) / 2.0) < 1e-10
    assert abs(theta - math.pi / 4.0) < 1e-8
    v_max = fock.variance(state, fock.quadrature(dim, theta + math.pi / 2.0))
    assert abs(v_max - math.exp(4.0 * eps * t) / 2.0) < 1e-8
    # minimum-uncertainty state: det of the covariance stays 1/4
    assert abs(v_min * v_max - 0.25) < 1e-10


def test_free_evolution_matches_gaussian_covariance():
    dim, eps, t = 100, 1.5, 0.25
    state = evolve_unitary(QuantumState.vacuum(dim), HamiltonianParams(epsilon=eps), t)
    expected = gaussian.covariance(gaussian.from_free_squeezing(eps, t))
    np.testing.assert_allclose(
        fock.quadrature_covariance(state), expected, rtol=1e-8, atol=1e-10
    )


def test_kerr_rotation_closed_form():
    # pure Kerr keeps populations and rotates coherences:
    # <a>(t) = alpha exp(|alpha|^2 (e^{2iKt} - 1)) for a coherent state
    dim, alpha, kerr, t = 60, 1.2, 0.7, 0.3
    p = HamiltonianParams(kerr=kerr)
    state = evolve_unitary(QuantumState.coherent(dim, alpha), p, t)
    got = ladder_moments(state)[0]
    expected = alpha * np.exp(abs(alpha) ** 2 * (np.exp(2j * kerr * t) - 1.0))
    assert abs(got - expected) < 1e-10
    np.testing.assert_allclose(
        state.populations(), QuantumState.coherent(dim, alpha).populations(), atol=1e-12
    )


def test_evolve_unitary_time_reversal():
    dim = 60
    p = HamiltonianParams(delta=0.5, epsilon=2.0, kerr=1.0)
    vac = QuantumState.vacuum(dim)
    there = evolve_unitary(vac, p, 0.4)
    back = evolve_unitary(there, p, -0.4)
    assert fock.state_fidelity(back, vac) > 1.0 - 1e-12


@pytest.mark.filterwarnings("ignore::kerrsense.fock.TruncationWarning")
def test_evolution_truncation_error():
    # free squeezing at r = 3.2 floods the top levels of a 32-level space
    with pytest.raises(TruncationError):
        evolve_unitary(QuantumState.vacuum(32), HamiltonianParams(epsilon=2.0), 0.8)


# ---------------------------------------------------------------------------
# Lindblad channel


def random_density(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rho = np.zeros((dim, dim), dtype=complex)
    for k in range(3):
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        v *= np.exp(-((np.arange(dim) / (dim / 4.0)) ** 2))
        v /= np.linalg.norm(v)
        rho += np.outer(v, v.conj()) / 3.0
    return rho


def test_liouvillian_matches_dense_generator():
    dim = 16
    p = HamiltonianParams(delta=0.3, epsilon=0.8, kerr=0.5)
    gamma = 0.25
    h = hamiltonian(dim, p).matrix
    a = fock.annihilation(dim).matrix
    n_op = a.conj().T @ a
    rho = random_density(dim, seed=12)
    expected = -1j * (h @ rho - rho @ h) + gamma * (
        a @ rho @ a.conj().T - 0.5 * (n_op @ rho + rho @ n_op)
    )
    lv = liouvillian(dim, p, LossParams(gamma))
    got = (lv @ rho.reshape(-1)).reshape(dim, dim)
    np.testing.assert_allclose(got, expected, atol=1e-12)
    # reverse flips the Hamiltonian only, never the dissipator
    lv_rev = liouvillian(dim, p, LossParams(gamma), reverse=True)
    expected_rev = 1j * (h @ rho - rho @ h) + gamma * (
        a @ rho @ a.conj().T - 0.5 * (n_op @ rho + rho @ n_op)
    )
    got_rev = (lv_rev @ rho.reshape(-1)).reshape(dim, dim)
    np.testing.assert_allclose(got_rev, expected_rev, atol=1e-12)


def test_lindblad_free_decay():
    # H = 0: a coherent state decays as alpha e^{-gamma t / 2}
    dim, alpha, gamma, t = 40, 1.5, 0.4, 0.8
    state = evolve_lindblad(
        QuantumState.coherent(dim, alpha), HamiltonianParams(), LossParams(gamma), t
    )
    mean_a, _, n_mean = ladder_moments(state)
    assert abs(mean_a - alpha * math.exp(-gamma * t / 2.0)) < 1e-9
    assert abs(n_mean - abs(alpha) ** 2 * math.exp(-gamma * t)) < 1e-9


def test_lindblad_preserves_trace_and_positivity():
    dim = 48
    p = HamiltonianParams(epsilon=2.0, kerr=1.0)
    loss = LossParams(0.1)
    state = QuantumState.vacuum(dim)
    for t in (0.1, 0.3, 0.5):
        rho = evolve_lindblad(state, p, loss, t).density_matrix()
        assert abs(np.trace(rho).real - 1.0) < 1e-11
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-11
        assert np.linalg.eigvalsh(rho)[0] > -1e-11


def test_lindblad_zero_loss_matches_unitary():
    dim = 48
    p = HamiltonianParams(delta=1.0, epsilon=2.0, kerr=1.0)
    t = 0.3
    unitary = evolve_unitary(QuantumState.vacuum(dim), p, t)
    lindblad = evolve_lindblad(QuantumState.vacuum(dim), p, LossParams(0.0), t)
    np.testing.assert_allclose(
        lindblad.density_matrix(), unitary.density_matrix(), atol=1e-9
    )


def test_lindblad_rk45_agrees_with_expm():
    dim = 40
    p = HamiltonianParams(epsilon=2.0, kerr=1.0)
    loss = LossParams(0.1)
    vac = QuantumState.vacuum(dim)
    via_expm = evolve_lindblad(vac, p, loss, 0.25, method="expm")
    via_rk45 = evolve_lindblad(vac, p, loss, 0.25, method="rk45")
    np.testing.assert_allclose(
        via_rk45.density_matrix(), via_expm.density_matrix(), atol=1e-6
    )


def test_lindblad_zero_time_is_identity():
    dim = 30
    th = QuantumState.thermal(dim, 0.4)
    out = evolve_lindblad(th, HamiltonianParams(epsilon=1.0), LossParams(0.2), 0.0)
    np.testing.assert_allclose(out.density_matrix(), th.density_matrix(), atol=1e-14)


def test_lindblad_reverse_is_negated_hamiltonian():
    dim = 40
    p = HamiltonianParams(delta=0.5, epsilon=1.5, kerr=0.8)
    neg = HamiltonianParams(delta=-0.5, epsilon=-1.5, kerr=-0.8)
    t = 0.3
    state = evolve_unitary(QuantumState.vacuum(dim), p, 0.2)
    via_reverse = evolve_lindblad(state, p, LossParams(0.0), t, reverse=True)
    via_negation = evolve_unitary(state, neg, t)
    np.testing.assert_allclose(
        via_reverse.density_matrix(), via_negation.density_matrix(), atol=1e-9
    )


def test_lindblad_lossless_echo_returns_start():
    dim = 60
    p = HamiltonianParams(epsilon=2.0, kerr=1.0)
    vac = QuantumState.vacuum(dim)
    forward = evolve_lindblad(vac, p, LossParams(0.0), 0.4)
    echoed = evolve_lindblad(forward, p, LossParams(0.0), 0.4, reverse=True)
    assert fock.state_fidelity(echoed, vac) > 1.0 - 1e-9


def test_lindblad_rejects_negative_time():
    with pytest.raises(ValueError):
        evolve_lindblad(
            QuantumState.vacuum(16), HamiltonianParams(), LossParams(0.1), -0.1
        )


# ---------------------------------------------------------------------------
# squeezing figures


def test_min_variance_angle_range():
    dim = 60
    for eps, t in ((1.0, 0.1), (2.0, 0.2)):
        state = evolve_unitary(QuantumState.vacuum(dim), HamiltonianParams(epsilon=eps), t)
        v_min, theta = min_variance(state)
        assert 0.0 <= theta < math.pi
        assert v_min < 0.5


def test_min_variance_vacuum_degenerate():
    v_min, theta = min_variance(QuantumState.vacuum(20))
    assert abs(v_min - 0.5) < 1e-12
    assert 0.0 <= theta < math.pi


def test_squeezing_trace_matches_pointwise_evolution():
    p = HamiltonianParams(delta=0.0, epsilon=2.0, kerr=1.0)
    t_grid = np.linspace(0.0, 0.4, 9)
    trace = squeezing_trace(p, t_grid, dim=80)
    assert trace.dim == 80
    assert trace.v_min[0] == pytest.approx(0.5, abs=1e-12)
    for i, t in enumerate(t_grid):
        state = evolve_unitary(QuantumState.vacuum(80), p, float(t))
        v_ref, theta_ref = min_variance(state)
        assert abs(trace.v_min[i] - v_ref) < 1e-10
        assert abs(trace.theta_opt[i] - theta_ref) < 1e-8


def test_squeezing_trace_auto_dim_converges():
    p = HamiltonianParams(epsilon=2.0, kerr=1.0)
    trace = squeezing_trace(p, np.linspace(0.0, 0.3, 4))
    assert trace.dim >= 80
    ref = squeezing_trace(p, np.linspace(0.0, 0.3, 4), dim=2 * trace.dim)
    np.testing.assert_allclose(trace.v_min, ref.v_min, rtol=1e-7)


def test_squeezing_trace_rejects_bad_grid():
    p = HamiltonianParams(epsilon=1.0)
    with pytest.raises(ValueError):
        squeezing_trace(p, np.array([]), dim=40)
    with pytest.raises(ValueError):
        squeezing_trace(p, np.zeros((2, 2)), dim=40)


def test_optimal_squeezing_interior_minimum():
    p = HamiltonianParams(delta=0.0, epsilon=2.0, kerr=1.0)
    chi, t_opt = optimal_squeezing(p, dim=100)
    # the optimum must beat every point of a fine independent scan
    scan = squeezing_trace(p, np.linspace(0.01, 0.99, 99), dim=100)
    assert 1.0 / chi <= float(np.min(scan.v_min)) + 1e-10
    assert 0.0 < t_opt < 1.0
    # Kerr wrap-around caps the squeezing well above the ideal law
    assert chi > 4.0


def test_optimal_squeezing_requires_kerr():
    with pytest.raises(NoInteriorMinimumError):
        optimal_squeezing(HamiltonianParams(epsilon=2.0), dim=60)
    # monotone window: no interior minimum inside a tiny scan either
    with pytest.raises(NoInteriorMinimumError):
        optimal_squeezing(
            HamiltonianParams(epsilon=2.0, kerr=1.0), t_max=0.01, dim=60
        )
