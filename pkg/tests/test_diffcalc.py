import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from igflow import diffcalc as dc
from igflow.diffcalc import Jet, Point, PotentialModel, central_differences, fd_oracle, jet2, jet3
from igflow.errors import ChartError, DomainError
from igflow.models import POTENTIALS

from .conftest import eta_point


def half_square(x):
    return 0.5 * sum(v * v for v in x)


HALF_SQUARE = PotentialModel(half_square, ("x1", "x2"), name="half_square")
CUBE = PotentialModel(lambda x: x[0] ** 3, ("x1",), name="cube")
EXP = PotentialModel(lambda x: dc.exp(x[0]), ("x1",), name="exp")


class TestJetArithmetic:
    def test_product_rule(self):
        x, y = Jet.variables([2.0, 3.0], 2)
        out = x * y
        assert out.val == 6.0
        np.testing.assert_array_equal(out.d1, [3.0, 2.0])
        np.testing.assert_array_equal(out.d2, [[0.0, 1.0], [1.0, 0.0]])

    def test_quotient_matches_closed_form(self):
        v, g, h, t = dc.taylor(lambda x: 1.0 / x[0], [2.0], 3)
        assert v == pytest.approx(0.5)
        assert g[0] == pytest.approx(-0.25)
        assert h[0, 0] == pytest.approx(0.25)
        assert t[0, 0, 0] == pytest.approx(-6.0 / 16.0)

    @pytest.mark.parametrize(
        "func, x, d1, d2, d3",
        [
            (dc.exp, 0.3, math.exp(0.3), math.exp(0.3), math.exp(0.3)),
            (dc.log, 2.0, 0.5, -0.25, 0.25),
            (dc.sqrt, 4.0, 0.25, -1.0 / 32.0, 3.0 / 256.0),
            (dc.sin, 0.7, math.cos(0.7), -math.sin(0.7), -math.cos(0.7)),
            (dc.cos, 0.7, -math.sin(0.7), -math.cos(0.7), math.sin(0.7)),
        ],
    )
    def test_elementary_rules(self, func, x, d1, d2, d3):
        _, g, h, t = dc.taylor(lambda v: func(v[0]), [x], 3)
        assert g[0] == pytest.approx(d1, rel=1e-14)
        assert h[0, 0] == pytest.approx(d2, rel=1e-14)
        assert t[0, 0, 0] == pytest.approx(d3, rel=1e-14)

    def test_real_power(self):
        _, g, h, _ = dc.taylor(lambda v: dc.power(v[0], 1.5), [4.0], 2)
        assert g[0] == pytest.approx(1.5 * 2.0)
        assert h[0, 0] == pytest.approx(0.75 / 2.0)

    def test_elementary_functions_accept_floats(self):
        assert dc.exp(0.0) == 1.0
        assert dc.log(math.e) == pytest.approx(1.0)
        assert dc.sqrt(9.0) == 3.0

    def test_constant_output_has_zero_derivatives(self):
        v, g, h, t = dc.taylor(lambda x: 4.0, [1.0, 2.0], 3)
        assert v == 4.0
        assert not g.any() and not h.any() and not t.any()


class TestJet2:
    def test_half_square(self):
        j = jet2(HALF_SQUARE, [1.0, 2.0])
        assert j.value == 2.5
        np.testing.assert_array_equal(j.grad, [1.0, 2.0])
        np.testing.assert_array_equal(j.hess, np.eye(2))

    def test_gaussian_psi_star_at_unit_sigma(self, gaussian):
        j = jet2(gaussian.psi_star, eta_point(gaussian, 0.0, 1.0))
        assert j.value == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose(j.grad, [0.0, -0.5], atol=1e-15)
        np.testing.assert_allclose(j.hess, [[1.0, 0.0], [0.0, 0.5]], atol=1e-15)

    def test_hessian_exactly_symmetric(self, gaussian):
        j = jet2(gaussian.psi_star, eta_point(gaussian, 0.7, 1.3))
        assert np.array_equal(j.hess, j.hess.T)

    def test_domain_violation_names_coordinate(self, gaussian):
        # eta2 <= eta1^2 means sigma^2 <= 0
        with pytest.raises(DomainError):
            jet2(gaussian.psi_star, Point([1.0, 0.5], "eta"))

    def test_box_violation_carries_index(self):
        pot = PotentialModel(lambda x: dc.log(x[1]), ("a", "b"), lower=(-10.0, 0.0))
        with pytest.raises(DomainError) as info:
            jet2(pot, [0.0, -1.0])
        assert info.value.index == 1

    def test_chart_mismatch(self, gaussian):
        with pytest.raises(ChartError):
            jet2(gaussian.psi_star, Point([0.0, 1.0], "theta"))


class TestJet3:
    def test_quadratic_third_vanishes(self):
        assert not jet3(HALF_SQUARE, [0.3, -1.1]).third.any()

    def test_cube(self):
        assert jet3(CUBE, [2.0]).third[0, 0, 0] == 6.0

    def test_gaussian_third_matches_oracle(self, gaussian):
        x = eta_point(gaussian, 0.0, 1.0)
        np.testing.assert_allclose(jet3(gaussian.psi_star, x).third, fd_oracle(gaussian.psi_star, x, 3), atol=1e-6)

    def test_permutation_symmetry(self, gaussian):
        t = jet3(gaussian.psi_star, eta_point(gaussian, 0.4, 0.9)).third
        for axes in [(0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]:
            assert np.array_equal(t, t.transpose(axes))


class TestFiniteDifferenceOracle:
    def test_steps_scale_with_magnitude(self):
        np.testing.assert_array_equal(dc.fd_steps([0.5, -4.0]), [1e-5, 4e-5])

    def test_exp_gradient(self):
        assert fd_oracle(EXP, [0.0], 1)[0] == pytest.approx(1.0, abs=1e-9)

    def test_half_square_hessian(self):
        np.testing.assert_allclose(fd_oracle(HALF_SQUARE, [0.2, 0.4], 2), np.eye(2), atol=1e-8)

    def test_gaussian_third_agrees_with_jet(self, gaussian):
        x = eta_point(gaussian, 0.0, 1.0)
        np.testing.assert_allclose(fd_oracle(gaussian.psi_star, x, 3), jet3(gaussian.psi_star, x).third, atol=1e-5)

    def test_rejects_point_near_boundary(self):
        pot = PotentialModel(lambda x: dc.log(x[0]), ("s",), lower=(0.0,))
        with pytest.raises(DomainError, match="too close"):
            fd_oracle(pot, [1.5e-5], 2)

    def test_float_fallback_for_numpy_only_functions(self):
        d = central_differences(lambda x: np.exp(np.float64(x[0])), [0.0], 1)
        assert d[0] == pytest.approx(1.0, abs=1e-9)

    def test_vector_valued_function(self):
        d = central_differences(lambda x: [x[0] * x[1], x[0] ** 2], [1.0, 2.0], 1)
        np.testing.assert_allclose(d, [[2.0, 1.0], [2.0, 0.0]], atol=1e-10)

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            central_differences(half_square, [0.0, 0.0], 4)


def _relative(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


class TestBuiltinPotentialsAgainstOracle:
    @pytest.mark.parametrize("name", sorted(POTENTIALS))
    def test_jets_match_fd(self, name):
        entry = POTENTIALS[name]
        pot = entry.factory()
        rng = np.random.default_rng(7)
        for _ in range(10):
            x = entry.sample(rng)
            j = jet3(pot, x)
            assert _relative(j.grad, fd_oracle(pot, x, 1)) <= 1e-6
            assert _relative(j.hess, fd_oracle(pot, x, 2)) <= 1e-6
            assert _relative(j.third, fd_oracle(pot, x, 3)) <= 1e-4


class TestPolynomialProperties:
    @settings(max_examples=30, deadline=None)
    @given(
        st.floats(-3, 3), st.floats(-3, 3),
        st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2),
    )
    def test_cubic_derivatives_exact(self, x, y, a, b, c):
        # f = a x^3 + b x^2 y + c y^2
        def f(v):
            return a * v[0] ** 3 + b * v[0] ** 2 * v[1] + c * v[1] ** 2

        _, g, h, t = dc.taylor(f, [x, y], 3)
        np.testing.assert_allclose(g, [3 * a * x**2 + 2 * b * x * y, b * x**2 + 2 * c * y], atol=1e-12)
        np.testing.assert_allclose(h, [[6 * a * x + 2 * b * y, 2 * b * x], [2 * b * x, 2 * c]], atol=1e-12)
        assert t[0, 0, 0] == pytest.approx(6 * a, abs=1e-12)
        assert t[0, 0, 1] == pytest.approx(2 * b, abs=1e-12)
        assert t[0, 1, 1] == 0.0 and t[1, 1, 1] == 0.0
