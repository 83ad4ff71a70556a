import math

import numpy as np
import pytest

from blowup.exceptions import DomainError, NotBracketedError, PreconditionError
from blowup.loaders import build_system, load_catalog
from blowup.lvmodel import (
    InteractionTerm,
    LVSystem,
    check_proposition_conditions,
    default_probe_grid,
    equilibrium,
    eval_rhs,
    eval_rhs_log,
    hopf_locate,
    jacobian,
    lyapunov_function,
    lyapunov_rate,
)


def make(term, a=1.0, b=1.0, c=1.0, d=1.0):
    return LVSystem(a=a, b=b, c=c, d=d, term=term)


@pytest.fixture
def arctan():
    return make(InteractionTerm.arctan_linear())


@pytest.fixture
def quad():
    return make(InteractionTerm.quad_logistic())


class TestVectorField:
    def test_arctan_at_unit_point(self, arctan):
        dx, dy = eval_rhs(arctan, 1.0, 1.0, 0.0)
        assert dx == 0.0
        assert dy == pytest.approx(0.7853981634, abs=1e-10)

    def test_quad_logistic(self, quad):
        assert eval_rhs(quad, 2.0, 2.0, 0.5) == pytest.approx((-2.0, 2.0), abs=1e-14)

    @pytest.mark.parametrize("x, y", [(0.0, 1.0), (1.0, -2.0)])
    def test_rejects_points_off_the_quadrant(self, arctan, x, y):
        with pytest.raises(DomainError):
            eval_rhs(arctan, x, y, 0.5)

    def test_lambda_outside_unit_interval(self, arctan):
        with pytest.raises(PreconditionError):
            eval_rhs(arctan, 1.0, 1.0, 1.5)

    def test_log_field_at_origin(self, arctan):
        du, dv = eval_rhs_log(arctan, 0.0, 0.0, 0.0)
        assert du == 0.0
        assert dv == pytest.approx(0.7853981634, abs=1e-10)

    def test_log_field_is_per_capita_rate(self, quad):
        for u, v in [(0.3, -0.2), (-1.0, 0.7), (1.2, 1.5)]:
            x, y = math.exp(u), math.exp(v)
            dx, dy = eval_rhs(quad, x, y, 0.3)
            du, dv = eval_rhs_log(quad, u, v, 0.3)
            assert du == pytest.approx(dx / x, rel=1e-14, abs=1e-14)
            assert dv == pytest.approx(dy / y, rel=1e-14, abs=1e-14)

    def test_jacobian_matches_finite_differences(self, arctan):
        x, y, lam, h = 0.7, 1.3, 0.4, 1e-6
        jac = jacobian(arctan, x, y, lam)
        fd = np.empty((2, 2))
        fd[:, 0] = (np.array(eval_rhs(arctan, x + h, y, lam)) - eval_rhs(arctan, x - h, y, lam)) / (2 * h)
        fd[:, 1] = (np.array(eval_rhs(arctan, x, y + h, lam)) - eval_rhs(arctan, x, y - h, lam)) / (2 * h)
        np.testing.assert_allclose(jac, fd, atol=1e-5)


class TestEquilibrium:
    def test_arctan_closed_form(self, arctan):
        eq = equilibrium(arctan, 0.0)
        assert eq.x_star == pytest.approx(0.2146018366, abs=1e-10)
        assert eq.y_star == 1.0

    def test_zero_trace_at_hopf_point(self, arctan):
        eq = equilibrium(arctan, 0.5)
        assert eq.trace == pytest.approx(0.0, abs=1e-15)
        assert eq.eigenvalues[0][1] == pytest.approx(math.sqrt(eq.det))

    def test_quad_with_a_two(self):
        sys = make(InteractionTerm.quad_logistic(), a=2.0)
        eq = equilibrium(sys, 1.0)
        assert eq.y_star == 2.0
        assert eq.x_star == pytest.approx(3.0)

    def test_extinction_condition(self, quad):
        # f(1; 0) = 1 = c
        with pytest.raises(PreconditionError, match="extinction"):
            equilibrium(quad, 0.0)

    def test_catalog_residual(self, configs_dir):
        for record in load_catalog(configs_dir / "lv_catalog.cfg").values():
            sys = build_system(record)
            for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
                if not sys.c > sys.term.value(sys.y_star, lam):
                    continue
                eq = equilibrium(sys, lam)
                residual = eval_rhs(sys, eq.x_star, eq.y_star, lam)
                assert np.linalg.norm(residual) <= 1e-13

    @pytest.mark.parametrize("lam", [0.1, 0.3, 0.7, 0.9])
    def test_stability_follows_derivative_sign(self, arctan, lam):
        eq = equilibrium(arctan, lam)
        assert np.sign(eq.eigvals().real.max()) == np.sign(eq.derivative)
        assert eq.stability_sign == np.sign(eq.derivative)


class TestHopfLocate:
    def test_arctan(self, arctan):
        assert hopf_locate(arctan) == pytest.approx(0.5, abs=1e-12)

    def test_quad(self, quad):
        assert hopf_locate(quad) == pytest.approx(0.5, abs=1e-12)

    def test_cubic_with_a_two(self):
        sys = make(InteractionTerm.cubic_logistic(), a=2.0)
        assert hopf_locate(sys) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_not_bracketed(self, arctan):
        with pytest.raises(NotBracketedError):
            hopf_locate(arctan, 0.6, 1.0)

    def test_polynomial_catalog_entry(self, configs_dir):
        record = load_catalog(configs_dir / "lv_catalog.cfg")["poly"]
        assert hopf_locate(build_system(record)) == pytest.approx(1.0 / 3.0, abs=1e-12)


class TestLyapunov:
    def test_vanishes_at_equilibrium(self, arctan):
        assert lyapunov_rate(arctan, 0.3, 1.0) == 0.0

    def test_arctan_values(self, arctan):
        assert lyapunov_rate(arctan, 0.0, 2.0) == pytest.approx(0.3217505544, abs=1e-10)
        assert lyapunov_rate(arctan, 1.0, 2.0) == pytest.approx(-0.6782494456, abs=1e-10)

    def test_factorised_form(self, quad):
        rng = np.random.default_rng(7)
        y = rng.uniform(0.05, 20.0, 50)
        lam = 0.37
        expected = quad.b * (y - 1.0) * (quad.term.value(y, lam) - quad.term.value(1.0, lam))
        np.testing.assert_allclose(lyapunov_rate(quad, lam, y), expected, rtol=1e-15, atol=1e-15)

    def test_rate_is_derivative_along_the_flow(self, arctan):
        lam, h = 0.2, 1e-6

        def V(x, y):
            return lyapunov_function(arctan, lam, x, y)

        for x, y in [(0.4, 1.7), (1.3, 0.6)]:
            dx, dy = eval_rhs(arctan, x, y, lam)
            v_x = (V(x + h, y) - V(x - h, y)) / (2 * h)
            v_y = (V(x, y + h) - V(x, y - h)) / (2 * h)
            assert v_x * dx + v_y * dy == pytest.approx(lyapunov_rate(arctan, lam, y), abs=1e-7)


class TestPropositionConditions:
    def test_arctan_passes(self, arctan):
        grid = default_probe_grid(arctan)
        assert len(grid) == 200
        report = check_proposition_conditions(arctan, grid)
        assert report.all_passed
        assert report.first_violation is None
        assert report.margin_4 > 0 and report.margin_5 > 0

    def test_quad_passes(self, quad):
        report = check_proposition_conditions(quad)
        assert report.cond_3a and report.cond_3b and report.cond_4

    def test_degenerate_term(self):
        zero = InteractionTerm.custom(lambda y, lam: 0.0 * y, lambda y, lam: 0.0 * y)
        report = check_proposition_conditions(make(zero))
        assert not report.cond_3a
        assert report.first_violation.condition == "3a"
        assert not report.all_passed

    def test_finite_difference_flag(self):
        term = InteractionTerm.custom(lambda y, lam: np.arctan(y) - lam * y)
        report = check_proposition_conditions(make(term))
        assert report.finite_difference_derivative
        assert report.derivative_at_0 == pytest.approx(0.5, abs=1e-8)
