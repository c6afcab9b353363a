import numpy as np
import pytest

from qarrival import ModelParams, gaussian_packet, make_grid, step_indicator
from qarrival.dynamics import crank_nicolson
from qarrival.errors import ConfigurationError, ResourceCapError
from qarrival.grid import PotentialProfile
from qarrival.lindblad import solve_blocks
from qarrival.povm import (
    audit_povm,
    build_U,
    build_U_trotter,
    build_omega_bar,
    build_omega_integral,
    build_povm_pair,
    derivative_check,
    expectation,
    trotter_factor,
)

GRID = make_grid(-20.0, 20.0, 64)
STEP = step_indicator(GRID)
METHOD = crank_nicolson(1e-3)


def params_with(gamma, tau=5.0, dt=1e-3):
    return ModelParams(gamma=gamma, tau=tau, dt=dt)


class TestBuildU:
    def test_gamma_zero_is_identity(self):
        u = build_U(GRID, STEP, params_with(0.0), METHOD)
        assert np.max(np.abs(u - np.eye(GRID.n))) < 1e-8

    def test_contraction(self):
        u = build_U(GRID, STEP, params_with(2.0), METHOD)
        assert np.linalg.norm(u, 2) <= 1.0 + 1e-8

    def test_strongly_absorbs_incoming_states(self):
        # moderate coupling: large gamma would reflect instead of absorb
        u = build_U(GRID, STEP, params_with(2.0), METHOD)
        psi = gaussian_packet(GRID, 3.0, -2.0, 1.0)
        out_norm2 = float(np.linalg.norm(u @ psi.psi) ** 2 * GRID.dx)
        assert out_norm2 < 0.1

    def test_cap(self):
        g = make_grid(-20.0, 20.0, 1024)
        with pytest.raises(ResourceCapError):
            build_U(g, step_indicator(g), params_with(1.0), METHOD)

    def test_rejects_complex_profile(self):
        v = PotentialProfile(GRID, np.where(GRID.x < 0, 1.0 + 0.5j, 0.0))
        with pytest.raises(ConfigurationError):
            build_U(GRID, v, params_with(1.0), METHOD)


class TestOmegaBar:
    def test_gamma_zero_is_identity(self):
        u = build_U(GRID, STEP, params_with(0.0), METHOD)
        ob = build_omega_bar(u)
        assert np.max(np.abs(ob - np.eye(GRID.n))) < 1e-8

    def test_gram_form_psd(self):
        u = build_U(GRID, STEP, params_with(1.5), METHOD)
        ob = build_omega_bar(u)
        assert np.min(np.linalg.eigvalsh(ob)) >= -1e-10

    def test_expectation_matches_block_solution(self):
        g = make_grid(-25.0, 25.0, 128)
        v = step_indicator(g)
        params = ModelParams(gamma=1.0, tau=5.0, dt=1e-3)
        psi0 = gaussian_packet(g, 5.0, -2.0, 1.0)
        method = crank_nicolson(1e-4)
        ob = build_omega_bar(build_U(g, v, params, method))
        p_nd_operator = expectation(ob, psi0.psi, g.dx)
        sol = solve_blocks(psi0, v, params, method=method, record_every=10 ** 6)
        assert abs(p_nd_operator - sol.p_nd_final) < 1e-6
        assert 0.0 < p_nd_operator < 1.0


class TestOmegaIntegral:
    def test_gamma_zero_is_zero(self):
        om = build_omega_integral(GRID, STEP, params_with(0.0), METHOD)
        assert np.max(np.abs(om)) < 1e-12

    def test_completeness_against_gram_form(self):
        params = params_with(1.0)
        pair = build_povm_pair(GRID, STEP, params, METHOD, route="via_integral")
        residual = np.max(np.abs(pair.omega + pair.omega_bar - np.eye(GRID.n)))
        assert residual < 1e-6

    def test_expectation_matches_detection_probability(self):
        g = make_grid(-25.0, 25.0, 128)
        v = step_indicator(g)
        params = ModelParams(gamma=1.0, tau=5.0, dt=1e-3)
        psi0 = gaussian_packet(g, 5.0, -2.0, 1.0)
        method = crank_nicolson(1e-4)
        om = build_omega_integral(g, v, params, method)
        p_d_operator = expectation(om, psi0.psi, g.dx)
        sol = solve_blocks(psi0, v, params, method=method, record_every=10 ** 6)
        assert abs(p_d_operator - sol.p_d_final) < 1e-6


class TestPovmPairAudit:
    def test_integral_route_properties(self):
        pair = build_povm_pair(GRID, STEP, params_with(1.0), METHOD, route="via_integral")
        report = audit_povm(pair)
        assert report.completeness_residual < 1e-6
        assert report.hermiticity_defect < 1e-10
        assert report.min_eig_omega > -1e-8
        assert report.min_eig_omega_bar > -1e-8
        assert report.max_eig_omega < 1.0 + 1e-8
        assert report.max_eig_omega_bar < 1.0 + 1e-8
        assert report.nonprojector_witness > 1e-3

    def test_complement_route_completeness(self):
        pair = build_povm_pair(GRID, STEP, params_with(1.0), METHOD, route="via_U")
        report = audit_povm(pair)
        assert report.completeness_residual < 1e-8

    @pytest.mark.parametrize("seed", range(3))
    def test_probability_consistency_random_states(self, seed):
        rng = np.random.default_rng(seed)
        pair = build_povm_pair(GRID, STEP, params_with(1.0), METHOD, route="via_integral")
        psi = rng.normal(size=GRID.n) + 1j * rng.normal(size=GRID.n)
        psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * GRID.dx)
        p_d = expectation(pair.omega, psi, GRID.dx)
        p_nd = expectation(pair.omega_bar, psi, GRID.dx)
        assert abs(p_d + p_nd - 1.0) < 1e-6
        for p in (p_d, p_nd):
            assert -1e-8 < p < 1.0 + 1e-8

    def test_detection_weight_monotone_in_tau(self):
        psi = gaussian_packet(GRID, 5.0, -2.0, 1.0)
        values = []
        for tau in (1.0, 2.0, 3.0, 4.0):
            pair = build_povm_pair(GRID, STEP, params_with(1.0, tau=tau), METHOD,
                                   route="via_U")
            values.append(expectation(pair.omega, psi.psi, GRID.dx))
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_trotter_route_approximates_exact_pair(self):
        params = params_with(1.0, tau=2.0)
        exact = build_povm_pair(GRID, STEP, params, METHOD, route="via_U")
        trot = build_povm_pair(GRID, STEP, params, METHOD, route="via_trotter",
                               trotter_steps=2000)
        report = audit_povm(trot)
        assert report.completeness_residual < 1e-8  # complement construction
        assert report.min_eig_omega_bar > -1e-8
        assert np.max(np.abs(trot.omega_bar - exact.omega_bar)) < 1e-3

    def test_unknown_route_rejected(self):
        with pytest.raises(ConfigurationError):
            build_povm_pair(GRID, STEP, params_with(1.0), METHOD, route="via_magic")


class TestDerivativeIdentity:
    def test_residual_second_order_in_h(self):
        params = params_with(1.0)
        residuals = [derivative_check(GRID, STEP, params, tau=3.0, h=h, method=METHOD)
                     for h in (4e-3, 2e-3, 1e-3)]
        for a, b in zip(residuals, residuals[1:]):
            order = np.log2(a / b)
            assert 1.7 <= order <= 2.3

    def test_gamma_zero_both_sides_vanish(self):
        res = derivative_check(GRID, STEP, params_with(0.0), tau=3.0, h=1e-3, method=METHOD)
        assert res < 1e-10

    def test_residual_small_at_standard_h(self):
        res = derivative_check(GRID, STEP, params_with(1.0), tau=5.0, h=1e-3, method=METHOD)
        assert res < 1e-4

    def test_h_validation(self):
        with pytest.raises(ConfigurationError):
            derivative_check(GRID, STEP, params_with(1.0), tau=1.0, h=2.0, method=METHOD)


class TestTrotter:
    def test_factor_small_coupling_limit(self):
        f = trotter_factor(GRID, STEP, gamma=1.0, dt=1e-12)
        assert np.max(np.abs(f - 1.0)) < 1e-10

    def test_factor_large_coupling_is_projector(self):
        f = trotter_factor(GRID, STEP, gamma=1.0, dt=1e4)
        np.testing.assert_allclose(f, np.where(GRID.x > 0, 1.0, 0.0), atol=1e-300)

    def test_factor_matches_exponential_nodewise(self):
        gamma, dt = 1.7, 0.3
        f = trotter_factor(GRID, STEP, gamma, dt)
        np.testing.assert_array_equal(f, np.exp(-0.5 * gamma * dt * STEP.values.real))

    def test_factor_requires_projector(self):
        soft = PotentialProfile(GRID, np.exp(-GRID.x ** 2))
        with pytest.raises(ConfigurationError):
            trotter_factor(GRID, soft, 1.0, 0.1)

    def test_single_step_gamma_zero_identity(self):
        u = build_U_trotter(GRID, STEP, params_with(0.0, tau=2.0), 1, method=METHOD)
        assert np.max(np.abs(u - np.eye(GRID.n))) < 1e-10

    def test_gamma_zero_identity_any_steps(self):
        for steps in (1, 7, 32):
            u = build_U_trotter(GRID, STEP, params_with(0.0, tau=2.0), steps, method=METHOD)
            assert np.max(np.abs(u - np.eye(GRID.n))) < 1e-10

    def test_first_order_convergence(self):
        params = params_with(1.0, tau=2.0)
        u_exact = build_U(GRID, STEP, params, METHOD)
        errors = [np.linalg.norm(build_U_trotter(GRID, STEP, params, k, method=METHOD)
                                 - u_exact, 2)
                  for k in (16, 32, 64)]
        for a, b in zip(errors, errors[1:]):
            assert 0.4 <= b / a <= 0.6
