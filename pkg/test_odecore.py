import math

import numpy as np
import pytest

from blowup.exceptions import BlowUpError, NoReturnError, PreconditionError
from blowup.lvmodel import (
    InteractionTerm,
    LVSystem,
    equilibrium,
    eval_rhs,
    log_vector_field,
)
from blowup.odecore import Section, _rk_step, find_cycle, integrate, poincare_return


def rotation(t, z):
    return np.array([-z[1], z[0]])


def linear_focus(mu):
    def rhs(t, z):
        return np.array([-z[1] + mu * z[0], z[0] + mu * z[1]])

    return rhs


def van_der_pol(mu):
    def rhs(t, z):
        return np.array([z[1], mu * (1 - z[0] ** 2) * z[1] - z[0]])

    return rhs


def hopf_normal_form(mu):
    def rhs(t, z):
        rho2 = z[0] ** 2 + z[1] ** 2
        return np.array(
            [mu * z[0] - z[1] - z[0] * rho2, z[0] + mu * z[1] - z[1] * rho2]
        )

    return rhs


def arctan_system():
    return LVSystem(a=1, b=1, c=1, d=1, term=InteractionTerm.arctan_linear())


class TestIntegrate:
    def test_exponential_decay(self):
        traj = integrate(lambda t, y: -y, [1.0], 5.0)
        assert traj.times[-1] == 5.0
        assert traj.final_state[0] == pytest.approx(math.exp(-5.0), rel=1e-9)

    def test_rotation_full_turn(self):
        traj = integrate(rotation, [1.0, 0.0], 2 * math.pi, rtol=1e-10)
        np.testing.assert_allclose(traj.final_state, [1.0, 0.0], atol=1e-8)

    def test_rotation_half_turn(self):
        traj = integrate(rotation, [1.0, 0.0], math.pi, rtol=1e-10)
        np.testing.assert_allclose(traj.final_state, [-1.0, 0.0], atol=1e-8)

    def test_equilibrium_stays_put(self):
        sys = arctan_system()
        eq = equilibrium(sys, 0.5)
        start = [math.log(eq.x_star), math.log(eq.y_star)]
        traj = integrate(log_vector_field(sys, 0.5), start, 20.0)
        assert np.max(np.abs(traj.states - start)) <= 1e-12

    def test_dense_output_between_steps(self):
        traj = integrate(rotation, [1.0, 0.0], 3.0)
        t = 0.5 * (traj.times[1] + traj.times[2])
        np.testing.assert_allclose(traj.interpolate(t), [math.cos(t), math.sin(t)], atol=1e-5)
        with pytest.raises(PreconditionError):
            traj.interpolate(4.0)

    def test_zero_span(self):
        traj = integrate(rotation, [1.0, 0.0], 0.0)
        assert len(traj) == 1

    def test_fifth_order_local_error(self):
        y0 = np.array([1.0])
        f0 = -y0

        def local_error(h):
            y1, _, _ = _rk_step(lambda t, y: -y, 0.0, y0, f0, h)
            return abs(y1[0] - math.exp(-h))

        assert local_error(0.2) / local_error(0.1) >= 16.0

    def test_finite_time_blow_up(self):
        with pytest.raises(BlowUpError) as info:
            integrate(lambda t, y: y * y, [1.0], 2.0)
        assert info.value.t < 1.0 + 1e-6
        assert info.value.state.shape == (1,)

    def test_rejects_backwards_span(self):
        with pytest.raises(PreconditionError):
            integrate(rotation, [1.0, 0.0], -1.0)

    def test_log_coordinates_exponentiate_to_the_original_flow(self):
        sys = arctan_system()
        lam, x0, y0 = 0.4, 0.5, 1.2
        log_rhs = log_vector_field(sys, lam)

        def rhs(t, z):
            return np.array(eval_rhs(sys, z[0], z[1], lam))

        for t_end in (0.25, 0.5, 0.75, 1.0):
            log_end = integrate(log_rhs, [math.log(x0), math.log(y0)], t_end).final_state
            end = integrate(rhs, [x0, y0], t_end).final_state
            np.testing.assert_allclose(np.exp(log_end), end, atol=1e-6)


class TestPoincare:
    def test_section_validation(self):
        with pytest.raises(PreconditionError):
            Section(index=2)
        with pytest.raises(PreconditionError):
            Section(index=0, side=0)

    def test_circular_orbit(self):
        section = Section(index=0, level=0.0, side=1)
        end, period = poincare_return(rotation, section, [0.0, 1.0], t_max=20.0)
        assert period == pytest.approx(2 * math.pi, abs=1e-8)
        np.testing.assert_allclose(end, [0.0, 1.0], atol=1e-8)
        assert end[0] == 0.0

    def test_linear_focus_contracts(self):
        section = Section(index=0, level=0.0, side=1)
        end, _ = poincare_return(linear_focus(-0.1), section, [0.0, 1.0], t_max=20.0)
        assert end[1] == pytest.approx(math.exp(-0.2 * math.pi), abs=1e-4)

    def test_start_must_lie_on_section(self):
        with pytest.raises(PreconditionError):
            poincare_return(rotation, Section(index=1), [1.0, 0.5], t_max=10.0)

    def test_no_return(self):
        def drift(t, z):
            return np.array([1.0, 0.0])

        with pytest.raises(NoReturnError):
            poincare_return(drift, Section(index=1), [0.0, 0.0], t_max=5.0)


class TestFindCycle:
    def test_center_keeps_the_guess(self):
        cycle = find_cycle(rotation, 0.0, Section(index=0), guess=0.7)
        assert cycle.offset == pytest.approx(0.7, abs=1e-8)
        assert cycle.period == pytest.approx(2 * math.pi, abs=1e-8)

    def test_van_der_pol(self):
        rhs = van_der_pol(0.5)
        cycle = find_cycle(rhs, 0.5, Section(index=1), guess=2.0)
        assert cycle.offset == pytest.approx(2.0, rel=0.05)
        closed = integrate(rhs, cycle.anchor, cycle.period).final_state
        np.testing.assert_allclose(closed, cycle.anchor, atol=1e-7)
        assert cycle.multiplier < 1.0

    def test_hopf_normal_form_cycle(self):
        mu = 0.25
        cycle = find_cycle(hopf_normal_form(mu), mu, Section(index=1), guess=0.3)
        assert cycle.offset == pytest.approx(math.sqrt(mu), abs=1e-7)
        assert cycle.period == pytest.approx(2 * math.pi, rel=1e-8)
        assert cycle.amplitude == pytest.approx(math.sqrt(mu), abs=1e-6)
        assert cycle.multiplier == pytest.approx(math.exp(-4 * math.pi * mu), abs=1e-3)

    def test_guess_must_be_positive(self):
        with pytest.raises(PreconditionError):
            find_cycle(hopf_normal_form(0.25), 0.25, Section(index=1), guess=0.0)
