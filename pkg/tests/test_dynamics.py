import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad, solve_ivp

from xxzdm import dynamics
from xxzdm.dynamics import (
    IntegrationError,
    UnsupportedSectorError,
    build_propagator_block,
    decay_exponent,
    evolve_closed_form,
    evolve_closed_form_trajectory,
    evolve_ode,
    evolve_ode_trajectory,
    liouvillian_rhs,
    propagator_blocks,
    rate,
    thermal_spectrum,
)
from xxzdm.model import ModelParams, build_hamiltonian, gibbs_state, validate_density

from conftest import random_density, random_params

P = ModelParams(1.3, 0.4, 0.7, 0.3, 0.8)


def scipy_reference(rho0, params, t, rtol=1e-12, atol=1e-13):
    """Independent oracle: scipy DOP853 on the flattened generator."""
    def f(s, y):
        return liouvillian_rhs(s, y.reshape(4, 4), params).ravel()

    sol = solve_ivp(f, (0.0, t), np.asarray(rho0, complex).ravel(), method="DOP853", rtol=rtol, atol=atol)
    return sol.y[:, -1].reshape(4, 4)


# -- rate and decay exponent -----------------------------------------------------


def test_rate_values():
    p = ModelParams(gamma0=0.2, gamma=1.0)
    assert rate(0.0, p) == 0.0
    assert rate(1.0, p) == pytest.approx(0.1 * (1 - math.exp(-1)), rel=1e-15)
    assert rate(1e6 / p.gamma, p) == pytest.approx(p.gamma0 / 2, abs=1e-12)
    np.testing.assert_allclose(rate(np.array([0.0, 1.0]), p), [0.0, 0.1 * (1 - math.exp(-1))])
    with pytest.raises(ValueError):
        rate(-1.0, p)


@given(st.floats(0, 1e3), st.floats(1e-3, 1e3))
def test_rate_monotone_and_bounded(t, gamma):
    p = ModelParams(gamma0=0.7, gamma=gamma)
    r = rate(t, p)
    assert 0.0 <= r <= p.gamma0 / 2
    assert rate(t * 1.1 + 1e-3, p) >= r


def test_decay_exponent_basics():
    assert decay_exponent(0.0, P) == 0.0
    with pytest.raises(ValueError):
        decay_exponent(-0.5, P)
    p = ModelParams(gamma0=0.3, gamma=1e8)
    assert decay_exponent(2.0, p) == pytest.approx(0.3, rel=1e-7)


def test_decay_exponent_quadrature(rng):
    for _ in range(50):
        p = random_params(rng)
        t = rng.uniform(0, 40)
        ref, _ = quad(lambda s: rate(s, p), 0.0, t, epsabs=1e-13, epsrel=1e-13, limit=400)
        assert abs(decay_exponent(t, p) - ref) <= 1e-10


def test_decay_exponent_small_times_smooth():
    # series / expm1 branches must join without a visible seam
    p = ModelParams(gamma0=0.5, gamma=2.0)
    t = np.linspace(0, 1e-3, 2001)
    B = decay_exponent(t, p)
    exact = 0.5 * p.gamma0 * (t - (1 - np.exp(-p.gamma * t)) / p.gamma)
    np.testing.assert_allclose(B[t > 1e-5], exact[t > 1e-5], rtol=1e-6)
    assert np.all(np.diff(B) >= 0)


def test_decay_exponent_derivative_is_rate():
    t = np.linspace(0.1, 10, 50)
    h = 1e-5
    fd = (decay_exponent(t + h, P) - decay_exponent(t - h, P)) / (2 * h)
    np.testing.assert_allclose(fd, rate(t, P), atol=1e-9)


# -- generator -----------------------------------------------------------------


def componentwise_dissipator(rho, params, t):
    """Dissipative parts of the component equations, written block by block."""
    r = params.gamma0 * (1 - math.exp(-params.gamma * t))
    d = np.zeros((4, 4), complex)
    # rho14, rho41
    d[0, 3] = -r * rho[0, 3]
    d[3, 0] = -r * rho[3, 0]
    # (rho12, rho13, rho24, rho34) and their conjugate partners
    for (i, j) in ((0, 1), (0, 2)):
        d[i, j] = -1.5 * r * rho[i, j]
        d[j, i] = -1.5 * r * rho[j, i]
    d[1, 3] = r * rho[0, 2] - 0.5 * r * rho[1, 3]
    d[2, 3] = r * rho[0, 1] - 0.5 * r * rho[2, 3]
    d[3, 1] = r * rho[2, 0] - 0.5 * r * rho[3, 1]
    d[3, 2] = r * rho[1, 0] - 0.5 * r * rho[3, 2]
    # populations and the |10>,|01> coherence
    d[0, 0] = -2 * r * rho[0, 0]
    d[1, 1] = r * rho[0, 0] - r * rho[1, 1]
    d[2, 2] = r * rho[0, 0] - r * rho[2, 2]
    d[3, 3] = r * (rho[1, 1] + rho[2, 2])
    d[1, 2] = -r * rho[1, 2]
    d[2, 1] = -r * rho[2, 1]
    return d


def test_rhs_componentwise(rng):
    for _ in range(20):
        p = random_params(rng)
        rho = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        t = rng.uniform(0, 10)
        H = build_hamiltonian(p)
        expected = -1j * (H @ rho - rho @ H) + componentwise_dissipator(rho, p, t)
        np.testing.assert_allclose(liouvillian_rhs(t, rho, p), expected, atol=1e-13)


def test_rhs_steady_state_column():
    rho = np.zeros((4, 4), complex)
    rho[3, 3] = 1.0
    for t in (0.0, 0.5, 30.0):
        out = liouvillian_rhs(t, rho, P)
        assert np.max(np.abs(out[3, :])) <= 1e-12
        assert np.max(np.abs(out[:, 3])) <= 1e-12


def test_rhs_unitary_when_uncoupled(rng):
    p = P.replace(gamma0=0.0)
    H = build_hamiltonian(p)
    rho = random_density(rng)
    np.testing.assert_array_equal(liouvillian_rhs(3.0, rho, p), -1j * (H @ rho - rho @ H))


def test_rhs_trace_free_and_linear(rng):
    for _ in range(100):
        p = random_params(rng)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        t = rng.uniform(0, 5)
        fa = liouvillian_rhs(t, a, p)
        assert abs(np.trace(fa)) <= 1e-12
        z = complex(*rng.normal(size=2))
        np.testing.assert_allclose(liouvillian_rhs(t, a + z * b, p), fa + z * liouvillian_rhs(t, b, p), atol=1e-12)


def test_rhs_rejects_negative_time():
    with pytest.raises(ValueError):
        liouvillian_rhs(-1.0, np.eye(4) / 4, P)


# -- ODE path ---------------------------------------------------------------------


def test_ode_zero_time_identity(rng):
    rho0 = random_density(rng)
    res = evolve_ode(rho0, P, 0.0)
    np.testing.assert_array_equal(res.rho_t, rho0)
    assert res.method == "ode" and res.steps == 0


def test_ode_matches_independent_integrator(rng):
    for _ in range(3):
        p = random_params(rng, 2.0)
        rho0 = random_density(rng)
        t = rng.uniform(1, 10)
        ours = evolve_ode(rho0, p, t, tol=1e-11).rho_t
        np.testing.assert_allclose(ours, scipy_reference(rho0, p, t), atol=1e-8)


def test_ode_unitary_limit_preserves_spectrum(rng):
    p = P.replace(gamma0=0.0)
    rho0 = random_density(rng)
    ev0 = np.linalg.eigvalsh(rho0)
    states, _ = evolve_ode_trajectory(rho0, p, np.linspace(0, 20, 11))
    for rho in states:
        np.testing.assert_allclose(np.linalg.eigvalsh(rho), ev0, atol=1e-8)


def test_ode_relaxes_to_ground(rng):
    rho0 = random_density(rng)
    res = evolve_ode(rho0, P, 50 / P.gamma0)
    assert res.rho_t[3, 3].real >= 1 - 1e-6


def test_ode_deterministic(rng):
    rho0 = random_density(rng)
    a = evolve_ode(rho0, P, 7.5).rho_t
    b = evolve_ode(rho0, P, 7.5).rho_t
    np.testing.assert_array_equal(a, b)


def test_ode_restart_needs_absolute_time(rng):
    rho0 = random_density(rng)
    t1, t2 = 2.0, 3.0
    direct = evolve_ode(rho0, P, t1 + t2, tol=1e-11).rho_t
    mid = evolve_ode(rho0, P, t1, tol=1e-11).rho_t
    mid = 0.5 * (mid + mid.conj().T)
    restarted = evolve_ode(mid, P, t1 + t2, tol=1e-11, t0=t1).rho_t
    np.testing.assert_allclose(restarted, direct, atol=1e-9)
    # restarting the clock at zero is a different (time-inhomogeneous) evolution
    naive = evolve_ode(mid, P, t2, tol=1e-11).rho_t
    assert np.max(np.abs(naive - direct)) > 1e-4


def test_ode_trajectory_equals_pointwise(rng):
    rho0 = gibbs_state(P, 0.8)
    times = np.array([0.0, 1.0, 4.0, 9.0])
    states, _ = evolve_ode_trajectory(rho0, P, times, tol=1e-11)
    for t, rho in zip(times, states):
        np.testing.assert_allclose(rho, evolve_ode(rho0, P, t, tol=1e-11).rho_t, atol=1e-9)


def test_ode_argument_errors(rng):
    with pytest.raises(ValueError, match="tol"):
        evolve_ode(np.eye(4) / 4, P, 1.0, tol=1e-2)
    with pytest.raises(ValueError, match="density"):
        evolve_ode(np.eye(4), P, 1.0)
    with pytest.raises(ValueError):
        evolve_ode(np.eye(4) / 4, P, -1.0)
    with pytest.raises(ValueError, match="sorted"):
        evolve_ode_trajectory(np.eye(4) / 4, P, [2.0, 1.0])


def test_ode_reports_time_reached(monkeypatch, rng):
    monkeypatch.setattr(dynamics, "MAX_STEPS", 5)
    with pytest.raises(IntegrationError) as err:
        evolve_ode(random_density(rng), P, 100.0)
    assert 0 < err.value.t_reached < 100.0


# -- closed form -------------------------------------------------------------------


def test_propagator_identity_at_zero(rng):
    for _ in range(10):
        M = build_propagator_block(0.0, random_params(rng))
        assert np.max(np.abs(M - np.eye(6))) <= 1e-12


def test_propagator_long_time_limit():
    M = build_propagator_block(1e4, P)
    expected = np.zeros((6, 6))
    expected[3, :4] = 1.0
    np.testing.assert_allclose(M, expected, atol=1e-12)


def test_propagator_structure(rng):
    for _ in range(10):
        p = random_params(rng)
        for M in propagator_blocks(rng.uniform(0, 30, 5), p):
            # trace preservation: population rows sum to one over population columns
            np.testing.assert_allclose(M[:4, :4].sum(axis=0), np.ones(4), atol=1e-13)
            np.testing.assert_allclose(M[:4, 4:].sum(axis=0), np.zeros(2), atol=1e-13)
            # rho32 row is the conjugate of the rho23 row with populations fixed
            # and the two coherence columns swapped
            np.testing.assert_allclose(M[5, :4], M[4, :4].conj(), atol=1e-15)
            np.testing.assert_allclose(M[5, 4:], M[4, 4:][::-1].conj(), atol=1e-15)


def test_propagator_matches_ode_grid(rng):
    for _ in range(3):
        p = random_params(rng, 2.0)
        rho0 = gibbs_state(p, rng.uniform(0.1, 5))
        times = np.linspace(0, 20, 20)
        states, _ = evolve_ode_trajectory(rho0, p, times)
        vec0 = dynamics.sector_vector(rho0)
        for M, rho in zip(propagator_blocks(times, p), states):
            np.testing.assert_allclose(M @ vec0, dynamics.sector_vector(rho), atol=1e-6)


def test_propagator_general_sector_state_matches_ode(rng):
    # coherence not aligned with the Hamiltonian exercises the Rabi terms
    rho0 = np.diag([0.1, 0.5, 0.2, 0.2]).astype(complex)
    rho0[1, 2] = 0.1 + 0.2j
    rho0[2, 1] = rho0[1, 2].conjugate()
    for t in (0.3, 2.0, 7.7):
        ref = scipy_reference(rho0, P, t)
        np.testing.assert_allclose(evolve_closed_form(rho0, P, t).rho_t, ref, atol=1e-10)


def test_propagator_degenerate_eta():
    p = ModelParams(0.0, 0.8, 0.0, 0.2, 1.0)
    M = build_propagator_block(3.0, p)
    assert np.all(np.isfinite(M))
    rho0 = np.diag([0.1, 0.5, 0.2, 0.2]).astype(complex)
    rho0[1, 2] = rho0[2, 1] = 0.05
    np.testing.assert_allclose(evolve_closed_form(rho0, p, 3.0).rho_t, scipy_reference(rho0, p, 3.0), atol=1e-10)


def test_closed_form_zero_time_and_sector_error(rng):
    rho0 = gibbs_state(P, 1.0)
    np.testing.assert_allclose(evolve_closed_form(rho0, P, 0.0).rho_t, rho0, atol=1e-15)
    with pytest.raises(UnsupportedSectorError, match="evolve_ode"):
        evolve_closed_form(random_density(rng), P, 1.0)
    bell = np.zeros((4, 4), complex)
    bell[0, 0] = bell[3, 3] = bell[0, 3] = bell[3, 0] = 0.5
    with pytest.raises(UnsupportedSectorError):
        evolve_closed_form(bell, P, 1.0)


def test_closed_form_infinite_temperature_relaxes():
    res = evolve_closed_form(np.eye(4) / 4, P, 50 / P.gamma0)
    expected = np.zeros((4, 4))
    expected[3, 3] = 1
    np.testing.assert_allclose(res.rho_t, expected, atol=1e-9)
    np.testing.assert_allclose(res.rho_t, evolve_ode(np.eye(4) / 4, P, 50 / P.gamma0).rho_t, atol=1e-6)


def test_closed_form_vs_ode_gibbs_t3(rng):
    for _ in range(5):
        p = random_params(rng)
        rho0 = gibbs_state(p, rng.uniform(0.05, 10))
        np.testing.assert_allclose(evolve_closed_form(rho0, p, 3.0).rho_t, evolve_ode(rho0, p, 3.0).rho_t, atol=1e-6)


def test_trajectory_helpers_agree():
    rho0 = gibbs_state(P, 2.0)
    times = np.linspace(0, 15, 7)
    traj = evolve_closed_form_trajectory(rho0, P, times)
    for t, rho in zip(times, traj):
        np.testing.assert_allclose(rho, evolve_closed_form(rho0, P, t).rho_t, atol=1e-15)


def test_conservation_along_trajectories(rng):
    for _ in range(5):
        p = random_params(rng)
        rho0 = gibbs_state(p, rng.uniform(0.05, 20))
        times = np.linspace(0, 20, 21)
        states, _ = evolve_ode_trajectory(rho0, p, times)
        for rho in list(states) + list(evolve_closed_form_trajectory(rho0, p, times)):
            rep = validate_density(rho)
            assert rep.trace_residual <= 1e-9
            assert rep.hermiticity_residual <= 1e-9
            assert rep.min_eigenvalue >= -1e-7


# -- exact thermal spectrum --------------------------------------------------------


def test_thermal_spectrum_matches_eigensolver(rng):
    for _ in range(30):
        p = random_params(rng, 2.0)
        beta = rng.uniform(0.05, 2)
        t = rng.uniform(0, 20)
        rho = evolve_closed_form(gibbs_state(p, beta), p, t).rho_t
        np.testing.assert_allclose(thermal_spectrum(p, beta, t), np.linalg.eigvalsh(rho)[::-1], atol=1e-13)


def test_thermal_spectrum_resolves_tiny_weights():
    p = ModelParams(1.0, 0.5, 0.5)
    lam = thermal_spectrum(p, 20.0, 0.0)
    eta = p.eta
    Z_rel = 1 + 2 * math.exp(-20 * (2 * p.Jz + 2 * eta)) + math.exp(-20 * 4 * eta)
    assert lam[-1] == pytest.approx(math.exp(-20 * 4 * eta) / Z_rel, rel=1e-12)
    assert lam.sum() == pytest.approx(1.0, abs=1e-15)
