import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from igflow.diffcalc import PotentialModel
from igflow.dually_flat import ETA, THETA, DuallyFlatModel, metric_at
from igflow.errors import ChartError, ConstraintError, FlowError
from igflow.flows import (
    MIN_STEPS,
    FlowSpec,
    GaugeField,
    conformal_factor,
    conserved_products,
    constraint_rhs,
    constraint_value,
    flow_momentum,
    flow_rhs,
    integrate,
    integrate_constraint,
    linear_rhs_check,
    reparametrize,
    rf_line_element,
    zero_gauge,
)
from igflow.models import C_STAR, C_STAR_DEFORMED, gaussian_gauge, gaussian_model

from .conftest import eta_point, point, theta_point

GAUSSIAN = gaussian_model()
PLAIN = FlowSpec(GAUSSIAN, ETA)
DEFORMED = FlowSpec(GAUSSIAN, ETA, gaussian_gauge())


def param_velocity(x, v):
    return GAUSSIAN.params.jacobian(x.coords) @ v


class TestFlowSpec:
    def test_directions(self):
        assert FlowSpec(GAUSSIAN, THETA).direction == 1
        assert PLAIN.direction == -1
        assert PLAIN.partner().chart == THETA

    def test_gauge_chart_must_match(self):
        with pytest.raises(ChartError):
            FlowSpec(GAUSSIAN, THETA, gaussian_gauge())

    def test_gauge_dimension_checked(self):
        with pytest.raises(ValueError):
            FlowSpec(GAUSSIAN, ETA, zero_gauge(3, ETA))

    def test_gauge_jacobian(self):
        jac = gaussian_gauge().jacobian(eta_point(GAUSSIAN, 1.0, 1.0))
        # A*^1 = (eta2 - eta1^2)^(-1/2), so dA*^1/deta1 = eta1 (eta2 - eta1^2)^(-3/2)
        np.testing.assert_allclose(jac, [[1.0, -0.5], [0.0, 0.0]], atol=1e-14)

    def test_point_chart_checked(self):
        with pytest.raises(ChartError):
            flow_rhs(PLAIN, theta_point(GAUSSIAN, 1.0, 1.0))


class TestFlowRhs:
    def test_quadratic(self, quadratic):
        np.testing.assert_array_equal(flow_rhs(FlowSpec(quadratic, THETA), point([1.0, 0.0])), [1.0, 0.0])

    def test_gaussian_descent(self):
        x = eta_point(GAUSSIAN, 2.0, 1.0)
        np.testing.assert_allclose(param_velocity(x, flow_rhs(PLAIN, x)), [0.0, 0.5], atol=1e-14)

    def test_gaussian_descent_in_lambda(self):
        # d lambda = C^2 dt turns d sigma/dt = sigma/2 into d sigma/d lambda = sigma
        x = eta_point(GAUSSIAN, 2.0, 1.7)
        v = param_velocity(x, flow_rhs(PLAIN, x)) / conformal_factor(PLAIN, x) ** 2
        np.testing.assert_allclose(v, [0.0, 1.7], atol=1e-14)

    def test_gaussian_deformed(self):
        x = eta_point(GAUSSIAN, 2.0, 1.5)
        np.testing.assert_allclose(param_velocity(x, flow_rhs(DEFORMED, x)), [-1.5, 0.75], atol=1e-14)


class TestLinearLaw:
    def test_quadratic(self, quadratic):
        assert linear_rhs_check(FlowSpec(quadratic, THETA), point([0.4, -2.0])) == 0.0

    @pytest.mark.parametrize("spec", [PLAIN, DEFORMED, FlowSpec(GAUSSIAN, THETA)], ids=["eta", "deformed", "theta"])
    def test_gaussian_random(self, spec, rng):
        for _ in range(50):
            x = GAUSSIAN.from_params([rng.uniform(-2, 2), rng.uniform(0.2, 3)], spec.chart)
            assert linear_rhs_check(spec, x) <= 1e-8

    def test_deformed_dual_velocity(self):
        x = eta_point(GAUSSIAN, 1.0, 1.0)
        dtheta = metric_at(GAUSSIAN, x) @ flow_rhs(DEFORMED, x)
        assert dtheta[0] == pytest.approx(-2.0, abs=1e-14)

    def test_undeformed_dual_velocity(self):
        x = eta_point(GAUSSIAN, 1.0, 1.0)
        dtheta = metric_at(GAUSSIAN, x) @ flow_rhs(PLAIN, x)
        np.testing.assert_allclose(dtheta, [-1.0, 0.5], atol=1e-14)


class TestConformalFactor:
    def test_gaussian_constant(self, rng):
        for _ in range(20):
            x = GAUSSIAN.from_params([rng.uniform(-2, 2), rng.uniform(0.2, 3)], ETA)
            assert conformal_factor(PLAIN, x) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
            assert conformal_factor(DEFORMED, x) == pytest.approx(math.sqrt(1.5), abs=1e-12)

    def test_reference_constants(self):
        assert C_STAR == pytest.approx(1 / math.sqrt(2))
        assert C_STAR_DEFORMED == pytest.approx(math.sqrt(1.5))

    def test_quadratic(self, quadratic):
        assert conformal_factor(FlowSpec(quadratic, THETA), point([1.0, 0.0])) == 1.0

    def test_negative_norm_rejected(self):
        # psi = (x1^2 - x2^2)/2 is self-dual with an indefinite Hessian
        def split(x):
            return 0.5 * (x[0] * x[0] - x[1] * x[1])

        m = DuallyFlatModel(
            "split", 2,
            psi=PotentialModel(split, ("t1", "t2"), THETA),
            psi_star=PotentialModel(split, ("e1", "e2"), ETA),
        )
        spec = FlowSpec(m, THETA)
        assert conformal_factor(spec, point([1.0, 0.0])) == 1.0
        with pytest.raises(FlowError, match="negative squared flow norm"):
            conformal_factor(spec, point([0.0, 1.0]))


class TestConstraint:
    def test_gaussian_on_shell(self):
        x = eta_point(GAUSSIAN, 1.0, 1.0)
        assert constraint_value(PLAIN, x, flow_momentum(PLAIN, x)) == pytest.approx(1.0, abs=1e-14)
        assert constraint_value(PLAIN, x, 2 * flow_momentum(PLAIN, x)) == pytest.approx(2.0, abs=1e-14)

    def test_deformed_on_shell(self):
        x = eta_point(GAUSSIAN, 1.0, 1.0)
        assert constraint_value(DEFORMED, x, flow_momentum(DEFORMED, x)) == pytest.approx(1.0, abs=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(
        st.floats(-2, 2), st.floats(0.3, 3), st.floats(0.01, 50),
        st.floats(-3, 3), st.floats(-3, 3),
    )
    def test_degree_one_homogeneity(self, mu, sigma, c, p1, p2):
        x = GAUSSIAN.from_params([mu, sigma], ETA)
        p = np.array([p1, p2])
        if np.allclose(p, 0):
            p = np.array([1.0, 0.0])
        for spec in (PLAIN, DEFORMED):
            g = spec.gauge(x) if spec.gauge is not None else 0.0
            base = constraint_value(spec, x, g + p)
            assert constraint_value(spec, x, g + c * p) == pytest.approx(c * base, rel=1e-12)

    def test_gaussian_equations(self):
        x = eta_point(GAUSSIAN, 1.0, 1.0)
        dx, _ = constraint_rhs(PLAIN, x, flow_momentum(PLAIN, x))
        np.testing.assert_allclose(dx, [0.0, 2.0], atol=1e-13)
        np.testing.assert_allclose(param_velocity(x, dx), [0.0, 1.0], atol=1e-13)

    def test_deformed_equations(self):
        x = eta_point(GAUSSIAN, 1.0, 1.0)
        dx, _ = constraint_rhs(DEFORMED, x, flow_momentum(DEFORMED, x))
        assert param_velocity(x, dx)[0] == pytest.approx(-2.0 / 3.0, abs=1e-13)

    def test_on_shell_momentum_follows_linear_law(self):
        # dp/dlambda on shell is the linear law divided by C^2
        x = eta_point(GAUSSIAN, 0.4, 1.3)
        _, dp = constraint_rhs(PLAIN, x, flow_momentum(PLAIN, x))
        theta = flow_momentum(PLAIN, x) * -1
        np.testing.assert_allclose(dp, theta / C_STAR**2, atol=1e-12)

    def test_quadratic_direct_partials(self, quadratic):
        # Phi = |p| / |x| here; the flow norm is not constant, so dp/dlambda = x |p| / |x|^3
        spec = FlowSpec(quadratic, THETA)
        x = np.array([0.6, 0.8])
        dx, dp = constraint_rhs(spec, x, x)
        np.testing.assert_allclose(dx, x / np.linalg.norm(x), atol=1e-13)
        np.testing.assert_allclose(dp, x, atol=1e-13)

    def test_off_shell_rejected(self):
        x = eta_point(GAUSSIAN, 1.0, 1.0)
        with pytest.raises(ConstraintError):
            constraint_rhs(PLAIN, x, 1.5 * flow_momentum(PLAIN, x))


class TestIntegrate:
    def test_gaussian_descent_run(self):
        traj = integrate(PLAIN, eta_point(GAUSSIAN, 1.0, 1.0), 2.0, 200)
        assert traj.complete and len(traj) == 201
        params = np.array([GAUSSIAN.params.params(e) for e in traj.eta])
        assert params[-1, 1] == pytest.approx(math.e, abs=1e-6)
        assert np.max(np.abs(params[:, 0] - 1.0)) <= 1e-10
        expected = np.outer(np.exp(-traj.params), traj.theta[0])
        assert np.max(np.abs(traj.theta - expected)) <= 1e-6
        assert np.max(traj.linear_residuals) <= 1e-8
        np.testing.assert_allclose(traj.conformal, C_STAR, atol=1e-12)
        np.testing.assert_allclose(traj.constraint, 1.0, atol=1e-12)

    def test_deformed_run(self):
        traj = integrate(DEFORMED, eta_point(GAUSSIAN, 1.0, 1.0), 2.0, 200)
        t = traj.params
        params = np.array([GAUSSIAN.params.params(e) for e in traj.eta])
        np.testing.assert_allclose(params[:, 1], np.exp(t / 2), atol=1e-5)
        np.testing.assert_allclose(params[:, 0], 1 + 2 * (1 - np.exp(t / 2)), atol=1e-5)
        assert traj.products is None
        assert np.max(traj.linear_residuals) <= 1e-8

    def test_rk4_order(self):
        errs = []
        for steps in (20, 40):
            traj = integrate(PLAIN, eta_point(GAUSSIAN, 1.0, 1.0), 2.0, steps)
            errs.append(abs(GAUSSIAN.params.params(traj.eta[-1])[1] - math.e))
        assert 12 <= errs[0] / errs[1] <= 20

    def test_domain_exit_returns_partial_run(self):
        # the ascent flow from (1, 1) has eta = (e^t, 2 e^t), which leaves sigma > 0 at t = ln 2
        traj = integrate(FlowSpec(GAUSSIAN, THETA), theta_point(GAUSSIAN, 1.0, 1.0), 2.0, 200)
        assert not traj.complete
        assert traj.exit_step is not None and traj.exit_reason
        assert traj.params[-1] < 2.0
        np.testing.assert_allclose(traj.eta[:50], np.outer(np.exp(traj.params[:50]), [1.0, 2.0]), rtol=1e-8)

    @pytest.mark.parametrize("steps", [5, 9, 10.5])
    def test_too_few_steps(self, steps):
        with pytest.raises(ValueError):
            integrate(PLAIN, eta_point(GAUSSIAN, 1.0, 1.0), 1.0, steps)

    def test_min_steps_accepted(self):
        assert len(integrate(PLAIN, eta_point(GAUSSIAN, 1.0, 1.0), 1.0, MIN_STEPS)) == MIN_STEPS + 1

    def test_user_gauge(self, quadratic):
        gauge = GaugeField(lambda x: [0.1 * x[0], 0.0], THETA, 2, name="linear")
        spec = FlowSpec(quadratic, THETA, gauge)
        traj = integrate(spec, point([1.0, 1.0]), 1.0, 50)
        # d theta/dt = theta - A: exponential rates 0.9 and 1
        np.testing.assert_allclose(traj.theta[-1], [math.exp(0.9), math.e], rtol=1e-8)


class TestConservedProducts:
    def test_quadratic(self, quadratic):
        traj = integrate(FlowSpec(quadratic, THETA), point([1.0, 1.0]), 2.0, 200)
        drift = conserved_products(traj)
        assert drift.max_drift <= 1e-8
        assert drift.covered_until == pytest.approx(2.0)

    def test_gaussian_initial_value(self):
        traj = integrate(PLAIN, eta_point(GAUSSIAN, 1.0, 1.0), 2.0, 200)
        assert conserved_products(traj).initial[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_gaussian_drift_while_partner_exists(self):
        # the partner ascent flow blows up at t = ln 2, so only that window is covered
        traj = integrate(PLAIN, eta_point(GAUSSIAN, 1.0, 1.0), 2.0, 200)
        drift = conserved_products(traj)
        assert drift.max_drift <= 1e-6
        assert 0.5 <= drift.covered_until < math.log(2)
        assert traj.partner_exit is not None

    @pytest.mark.parametrize("start", [(0.0, 1.0), (0.2, 1.5), (-0.3, 2.0)])
    @pytest.mark.parametrize("chart", [THETA, ETA])
    def test_gaussian_full_window(self, start, chart):
        traj = integrate(FlowSpec(GAUSSIAN, chart), GAUSSIAN.from_params(start, chart), 2.0, 200)
        drift = conserved_products(traj)
        assert drift.max_drift <= 1e-6
        assert drift.covered_until == pytest.approx(2.0)

    def test_deformed_rejected(self):
        traj = integrate(DEFORMED, eta_point(GAUSSIAN, 1.0, 1.0), 1.0, 20)
        with pytest.raises(FlowError):
            conserved_products(traj)


class TestConstraintIntegration:
    @pytest.mark.parametrize("spec", [PLAIN, DEFORMED], ids=["plain", "deformed"])
    def test_phi_preserved(self, spec):
        traj = integrate_constraint(spec, eta_point(GAUSSIAN, 0.5, 1.0), 1.0, 100)
        assert traj.complete and traj.parameter == "lambda"
        assert np.max(np.abs(traj.constraint - 1.0)) <= 1e-6

    def test_matches_flow_in_lambda(self):
        # sigma(lambda) = e^lambda on the descent flow
        traj = integrate_constraint(PLAIN, eta_point(GAUSSIAN, 1.0, 1.0), 1.0, 100)
        sigma = GAUSSIAN.params.params(traj.eta[-1])[1]
        assert sigma == pytest.approx(math.e, rel=1e-8)

    def test_off_shell_start_rejected(self):
        x = eta_point(GAUSSIAN, 1.0, 1.0)
        with pytest.raises(ConstraintError):
            integrate_constraint(PLAIN, x, 1.0, 20, p0=2 * flow_momentum(PLAIN, x))


class TestReparametrize:
    def test_gaussian_half(self):
        traj = integrate(PLAIN, eta_point(GAUSSIAN, 1.0, 1.0), 2.0, 200)
        lam = reparametrize(traj, "lambda")
        np.testing.assert_allclose(lam.params, traj.params / 2, atol=1e-12)
        back = reparametrize(lam, "t")
        np.testing.assert_allclose(back.params, traj.params, atol=1e-8)

    def test_deformed_three_halves(self):
        traj = integrate(DEFORMED, eta_point(GAUSSIAN, 1.0, 1.0), 1.0, 100)
        np.testing.assert_allclose(reparametrize(traj, "lambda").params, 1.5 * traj.params, atol=1e-12)

    def test_unit_factor_is_identity(self):
        traj = integrate(PLAIN, eta_point(GAUSSIAN, 1.0, 1.0), 1.0, 20)
        unit = replace(traj, conformal=np.ones(len(traj)))
        np.testing.assert_allclose(reparametrize(unit, "lambda").params, traj.params, atol=1e-15)

    def test_same_parameter_returns_input(self):
        traj = integrate(PLAIN, eta_point(GAUSSIAN, 1.0, 1.0), 1.0, 20)
        assert reparametrize(traj, "t") is traj

    def test_vanishing_factor_rejected(self):
        traj = integrate(PLAIN, eta_point(GAUSSIAN, 1.0, 1.0), 1.0, 20)
        with pytest.raises(FlowError):
            reparametrize(replace(traj, conformal=np.zeros(len(traj))), "lambda")


class TestRFLineElement:
    DETA = np.array([1e-3, 2e-3])

    def _params_step(self, x):
        return GAUSSIAN.params.jacobian(x.coords) @ self.DETA

    def test_riemannian_reduction(self):
        x = eta_point(GAUSSIAN, 1.0, 1.0)
        dmu, ds = self._params_step(x)
        expected = math.sqrt(2.0 * (dmu**2 + 2 * ds**2))
        assert rf_line_element(PLAIN, x, self.DETA) == pytest.approx(expected, rel=1e-12)

    def test_deformed(self):
        x = eta_point(GAUSSIAN, 0.5, 1.4)
        dmu, ds = self._params_step(x)
        s = 1.4
        expected = math.sqrt(2.0 / (3 * s * s) * (dmu**2 + 2 * ds**2)) + 2.0 / (3 * s) * dmu
        assert rf_line_element(DEFORMED, x, self.DETA) == pytest.approx(expected, rel=1e-12)

    def test_zero_displacement(self):
        assert rf_line_element(DEFORMED, eta_point(GAUSSIAN, 1.0, 1.0), [0.0, 0.0]) == 0.0
