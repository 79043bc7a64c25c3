import numpy as np
import pytest

from holeflow import thermo as th
from holeflow.errors import ThermoDomainError

IDEAL = th.ThermoParams(a_rad=0.0)
RAD = th.ThermoParams(a_rad=1e-3)


def central(f, x, h=None):
    h = h or 1e-6 * max(1.0, abs(x))
    return (f(x + h) - f(x - h)) / (2.0 * h)


class TestStructureFunction:
    def test_vanishes_at_zero(self):
        P, dP, _, _ = th.eval_P(0.0, with_S=False)
        assert P == 0.0
        assert dP == 1.0

    def test_unit_values(self):
        P, dP, S, dS = th.eval_P(1.0)
        assert P == 2.0
        assert dP == pytest.approx(8.0 / 3.0, abs=1e-15)
        assert S == 0.0
        assert dS == -1.0

    def test_large_argument_ratio(self):
        P, _, _, _ = th.eval_P(8.0, with_S=False)
        assert P == pytest.approx(40.0, abs=1e-12)
        assert P / 8.0 ** (5.0 / 3.0) == pytest.approx(1.25, abs=1e-12)

    def test_ratio_identity_on_log_grid(self):
        Z = np.logspace(-3, 3, 400)
        P, dP, _, _ = th.eval_P(Z, with_S=False)
        ratio = (5.0 / 3.0 * P - dP * Z) / Z
        assert np.max(np.abs(ratio - 2.0 / 3.0)) < 1e-12

    def test_pressure_ratio_decreasing_to_limit(self):
        Z = np.logspace(-2, 8, 300)
        P, _, _, _ = th.eval_P(Z, with_S=False)
        ratio = P / Z ** (5.0 / 3.0)
        assert np.all(np.diff(ratio) < 0)
        assert abs(ratio[-1] - IDEAL.p_inf) < 1e-4

    def test_derivative_positive(self):
        Z = np.logspace(-3, 3, 100)
        _, dP, _, _ = th.eval_P(Z, with_S=False)
        assert np.all(dP > 0)

    def test_entropy_ode_consistency(self):
        # S'(Z) must equal -(3/2)(5/3 P - P' Z)/Z^2 for the family to be admissible
        Z = np.logspace(-2, 2, 50)
        P, dP, _, dS = th.eval_P(Z)
        rhs = -1.5 * (5.0 / 3.0 * P - dP * Z) / Z ** 2
        assert np.max(np.abs(dS - rhs)) < 1e-12

    def test_domain_errors(self):
        with pytest.raises(ThermoDomainError):
            th.eval_P(-0.1)
        with pytest.raises(ThermoDomainError):
            th.eval_P(0.0)  # S singular


class TestStateFunctions:
    def test_pressure_example(self):
        assert th.pressure(2.0, 1.0, IDEAL) == pytest.approx(2.0 + 2.0 ** (5.0 / 3.0),
                                                             rel=1e-14)

    def test_radiation_dominates_dilute_limit(self):
        params = th.ThermoParams(a_rad=0.3)
        p = th.pressure(1e-12, 2.0, params)
        assert p == pytest.approx(0.3 / 3.0 * 16.0, rel=1e-9)

    def test_energy_and_entropy_examples(self):
        assert th.internal_energy(1.0, 1.0, IDEAL) == pytest.approx(3.0, abs=1e-14)
        assert th.entropy(1.0, 1.0, IDEAL) == pytest.approx(0.0, abs=1e-14)

    def test_reduction_to_closed_form(self):
        # the scaling form theta^{5/2} P(rho/theta^{3/2}) must collapse to
        # rho theta + rho^{5/3} (+ radiation) for this family
        rng = np.random.default_rng(3)
        rho = rng.uniform(0.1, 10.0, size=200)
        theta = rng.uniform(0.1, 10.0, size=200)
        a = RAD.a_rad
        p_closed = rho * theta + rho ** (5.0 / 3.0) + a / 3.0 * theta ** 4
        e_closed = 1.5 * (theta + rho ** (2.0 / 3.0)) + a * theta ** 4 / rho
        s_closed = np.log(theta ** 1.5 / rho) + 4.0 * a / 3.0 * theta ** 3 / rho
        assert np.allclose(th.pressure(rho, theta, RAD), p_closed, rtol=1e-12)
        assert np.allclose(th.internal_energy(rho, theta, RAD), e_closed, rtol=1e-12)
        assert np.allclose(th.entropy(rho, theta, RAD), s_closed, rtol=1e-12, atol=1e-12)

    def test_domain_errors(self):
        for bad in [(-1.0, 1.0), (0.0, 1.0), (1.0, -2.0)]:
            with pytest.raises(ThermoDomainError):
                th.pressure(*bad, IDEAL)

    def test_gibbs_relation_finite_differences(self):
        # theta ds = de + p d(1/rho), componentwise in rho and theta
        grid = np.linspace(0.1, 10.0, 32)
        for params in (IDEAL, RAD):
            for rho in grid[::4]:
                for theta in grid[::4]:
                    ds_dt = central(lambda t: float(th.entropy(rho, t, params)), theta)
                    de_dt = central(lambda t: float(th.internal_energy(rho, t, params)), theta)
                    lhs = theta * ds_dt
                    assert abs(lhs - de_dt) < 1e-8 * max(1.0, abs(de_dt))

                    ds_dr = central(lambda r: float(th.entropy(r, theta, params)), rho)
                    de_dr = central(lambda r: float(th.internal_energy(r, theta, params)), rho)
                    p = float(th.pressure(rho, theta, params))
                    rhs = de_dr - p / rho ** 2
                    assert abs(theta * ds_dr - rhs) < 1e-8 * max(1.0, abs(rhs))


class TestTransportAndStress:
    def test_bound_saturation_at_zero(self):
        mu, eta, kappa = th.transport(0.0, th.ThermoParams(mu0=1.0, kappa0=2.0))
        assert mu == 1.0 and eta == 0.0 and kappa == 2.0

    def test_conductivity_example(self):
        _, _, kappa = th.transport(1.0, th.ThermoParams(kappa0=2.0))
        assert kappa == 4.0

    def test_two_sided_bounds_on_grid(self):
        theta = np.linspace(0.0, 10.0, 101)
        params = th.ThermoParams(mu0=0.7, eta0=0.3, kappa0=1.1)
        mu, eta, kappa = th.transport(theta, params)
        assert np.all(params.mu0 * (1 + theta) <= mu + 1e-15)
        assert np.all(mu <= params.mu0 * (1 + theta) + 1e-15)
        assert np.all(eta <= params.eta0 * (1 + theta) + 1e-15)
        assert np.all(params.kappa0 * (1 + theta ** 3) <= kappa + 1e-15)

    def test_negative_temperature_rejected(self):
        with pytest.raises(ThermoDomainError):
            th.transport(-0.5, IDEAL)

    def test_zero_gradient_zero_stress(self):
        S = th.viscous_stress(1.0, np.zeros((3, 3)), IDEAL)
        assert np.all(S == 0.0)

    def test_pure_dilation_killed_by_deviator(self):
        params = th.ThermoParams(mu0=1.0, eta0=0.0)
        S = th.viscous_stress(0.0, np.eye(3), params)  # mu(0) = mu0 = 1
        assert np.max(np.abs(S)) < 1e-14

    def test_rigid_rotation_dissipationless(self):
        params = th.ThermoParams(mu0=1.0, eta0=0.0)
        W = np.array([[0.0, 1.0, -2.0], [-1.0, 0.0, 0.5], [2.0, -0.5, 0.0]])
        S = th.viscous_stress(1.7, W, params)
        assert np.max(np.abs(S)) < 1e-14
        assert abs(float(th.viscous_dissipation(1.7, W, params))) < 1e-14

    @pytest.mark.parametrize("d", [2, 3])
    def test_dissipation_nonnegative_random(self, d):
        rng = np.random.default_rng(11)
        grads = rng.normal(size=(1000, d, d))
        theta = rng.uniform(0.0, 5.0, size=1000)
        params = th.ThermoParams(mu0=0.8, eta0=0.4, kappa0=1.0)
        diss = th.viscous_dissipation(theta, grads, params)
        assert np.min(diss) >= 0.0
        S = th.viscous_stress(theta, grads, params)
        assert np.max(np.abs(S - np.swapaxes(S, -1, -2))) == 0.0
        # dissipation formula agrees with the contraction S : grad u
        contr = np.sum(S * grads, axis=(-2, -1))
        assert np.allclose(diss, contr, rtol=1e-12, atol=1e-12)

    def test_heat_flux_direction(self):
        q = th.heat_flux(1.0, np.array([1.0, 0.0, -2.0]), th.ThermoParams(kappa0=2.0))
        assert np.allclose(q, [-4.0, 0.0, 8.0])


class TestHelmholtz:
    def test_zero_at_reference(self):
        assert th.helmholtz_coercivity(1.0, 1.0, RAD) == 0.0

    def test_positive_off_reference(self):
        val = th.helmholtz_coercivity(1.5, 1.0, RAD)
        assert val > 0.0
        # convexity in rho at fixed theta_bar: finite-difference second derivative
        f = lambda r: float(th.helmholtz(r, 1.0, RAD))
        second = (f(1.5 + 1e-4) - 2 * f(1.5) + f(1.5 - 1e-4)) / 1e-8
        assert second > 0.0

    def test_nonnegative_on_essential_box(self):
        rho = np.linspace(0.5, 2.0, 32, endpoint=False)[1:]
        theta = np.linspace(0.5, 2.0, 32, endpoint=False)[1:]
        R, T = np.meshgrid(rho, theta, indexing="ij")
        vals = th.helmholtz_coercivity(R, T, RAD)
        assert float(np.min(vals)) >= 0.0


class TestLinearization:
    def test_reference_example(self):
        co = th.linearization(IDEAL)
        assert co.dp_drho == pytest.approx(8.0 / 3.0, abs=1e-14)
        assert co.dp_dtheta == pytest.approx(1.0, abs=1e-14)
        assert co.a_th == pytest.approx(3.0 / 8.0, abs=1e-14)
        assert co.A == pytest.approx(0.375, abs=1e-14)
        assert co.de_dtheta == pytest.approx(1.5, abs=1e-14)
        assert co.c_p == pytest.approx(1.875, abs=1e-14)

    def test_gibbs_identity_at_reference(self):
        co = th.linearization(IDEAL)
        # theta d_theta s = d_theta e, both 3/2 at (1, 1)
        assert co.ds_dtheta * 1.0 == pytest.approx(co.de_dtheta, abs=1e-14)
        assert co.de_dtheta == pytest.approx(1.5, abs=1e-14)

    def test_entropy_pressure_consistency(self):
        for params in (IDEAL, RAD, th.ThermoParams(rho_bar=1.7, theta_bar=0.8, a_rad=0.02)):
            co = th.linearization(params)
            assert co.ds_drho == pytest.approx(
                -co.dp_dtheta / params.rho_bar ** 2, rel=1e-10)

    def test_radiation_continuity(self):
        A0 = th.linearization(IDEAL).A
        drift = [abs(th.linearization(th.ThermoParams(a_rad=a)).A - A0)
                 for a in (1e-2, 1e-4, 1e-6)]
        assert drift[0] > drift[1] > drift[2]
        assert drift[2] < 1e-5

    def test_finite_difference_crosscheck_runs(self):
        # the constructor itself raises if closed forms drift from FD by > 1e-7
        th.linearization(th.ThermoParams(rho_bar=2.3, theta_bar=0.6, a_rad=0.05))
