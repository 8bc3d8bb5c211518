"""Tests for the rate equations and their analytic oracles (rbcc/laser.py)."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from rbcc.analysis import constant_drive
from rbcc.errors import BelowThresholdError
from rbcc.laser import (
    analytic_steady_state,
    is_underdamped,
    jacobian,
    output_power,
    pump_power_from_rate,
    pump_rate_from_power,
    pump_ratio,
    rate_equations,
    relaxation_frequency,
    rhs,
    rhs_array,
    seeded_steady_state,
    slowest_time_constant,
    small_signal_poles,
    threshold_density,
    threshold_pump_power,
)
from rbcc.ode import integrate
from rbcc.params import LaserState, SimConfig


class TestConversions:
    """Tests for density, rate and power conversions."""

    def test_threshold_density_table1(self, table1):
        assert threshold_density(table1) == pytest.approx(4.86e17, rel=1e-3)

    def test_threshold_pump_power_near_20w(self, table1):
        assert 19.0 < threshold_pump_power(table1) < 21.0

    def test_short_cavity_threshold_near_20w(self, short):
        assert 19.0 < threshold_pump_power(short) < 21.0

    def test_rate_power_inverse(self, table1):
        rate = pump_rate_from_power(30.0, table1)
        assert pump_power_from_rate(rate, table1) == pytest.approx(30.0)

    def test_output_power_linear(self, table1):
        assert output_power(2e17, table1) == pytest.approx(2 * output_power(1e17, table1))

    def test_output_power_accepts_arrays(self, table1):
        out = output_power(np.array([0.0, 1e17]), table1)
        assert out.shape == (2,)
        assert out[0] == 0.0

    def test_pump_ratio_at_threshold(self, table1):
        assert pump_ratio(threshold_pump_power(table1), table1) == pytest.approx(1.0)


class TestRightHandSide:
    """Tests for rhs and its array form."""

    def test_fixed_point_has_zero_derivative(self, table1_unseeded):
        rate = pump_rate_from_power(40.0, table1_unseeded)
        ss = analytic_steady_state(rate, table1_unseeded)
        dv1, dv2 = rhs(LaserState(v1=ss.phi_ss, v2=ss.n2_ss), rate, table1_unseeded)
        assert abs(dv1) < 1e-9 * ss.phi_ss / table1_unseeded.tau_c
        assert abs(dv2) < 1e-9 * rate

    def test_empty_cavity_grows_from_seed(self, table1):
        dv1, dv2 = rate_equations(0.0, 0.0, 1e20, table1)
        assert dv1 == table1.s_spont
        assert dv2 == 1e20

    def test_array_form_matches(self, table1):
        y = np.array([1e17, 3e17])
        assert np.allclose(rhs_array(0.0, y, 1e21, table1), rate_equations(1e17, 3e17, 1e21, table1))

    def test_unseeded_sum_balances_pump_and_decay(self, table1_unseeded):
        """d(v1+v2)/dt = pump - v1/tau_c - v2/tau_f with the stimulated terms cancelling."""
        p = table1_unseeded
        rng = np.random.default_rng(1)
        for v1, v2, rate in rng.uniform([0.0, 0.0, 0.0], [1e19, 1e19, 1e23], size=(200, 3)):
            dv1, dv2 = rate_equations(v1, v2, rate, p)
            expected = rate - v1 / p.tau_c - v2 / p.tau_f
            scale = p.c_medium * p.sigma * v1 * v2 + rate + v1 / p.tau_c + v2 / p.tau_f
            assert dv1 + dv2 == pytest.approx(expected, abs=1e-12 * scale)

    def test_steady_state_residual_over_random_pumps(self, table1_unseeded):
        p = table1_unseeded
        rate_th = threshold_density(p) / p.tau_f
        for r in np.random.default_rng(2).uniform(1.0 + 1e-9, 100.0, 1000):
            rate = r * rate_th
            ss = analytic_steady_state(rate, p)
            dv1, dv2 = rate_equations(ss.phi_ss, ss.n2_ss, rate, p)
            assert abs(dv1) < 1e-9 * ss.phi_ss / p.tau_c
            assert abs(dv2) < 1e-9 * rate

    def test_jacobian_matches_finite_difference(self, table1):
        v1, v2, rate = 1e17, 4e17, 1e21
        jac = jacobian(v1, v2, table1)
        for j, dv in enumerate((1e11, 1e11)):
            plus = np.array(rate_equations(v1 + dv * (j == 0), v2 + dv * (j == 1), rate, table1))
            minus = np.array(rate_equations(v1 - dv * (j == 0), v2 - dv * (j == 1), rate, table1))
            assert np.allclose((plus - minus) / (2 * dv), jac[:, j], rtol=1e-6)


class TestSteadyStates:
    """Tests for analytic and seeded fixed points."""

    def test_below_threshold(self, table1):
        rate = 0.5 * threshold_density(table1) / table1.tau_f
        ss = analytic_steady_state(rate, table1)
        assert ss.phi_ss == 0.0
        assert not ss.above_threshold
        assert ss.n2_ss == pytest.approx(rate * table1.tau_f)

    def test_above_threshold_clamps_population(self, table1):
        ss = analytic_steady_state(pump_rate_from_power(40.0, table1), table1)
        assert ss.above_threshold
        assert ss.n2_ss == threshold_density(table1)
        assert ss.phi_ss > 0

    def test_output_tracks_excess_pump(self, table1):
        """P_out = g*(P - P_th) without seed."""
        p_th = threshold_pump_power(table1)
        ss = analytic_steady_state(pump_rate_from_power(30.0, table1), table1)
        assert output_power(ss.phi_ss, table1) == pytest.approx(30.0 - p_th, rel=1e-9)

    def test_seeded_reduces_to_unseeded(self, table1_unseeded):
        rate = pump_rate_from_power(35.0, table1_unseeded)
        a = analytic_steady_state(rate, table1_unseeded)
        b = seeded_steady_state(rate, table1_unseeded)
        assert b.phi_ss == pytest.approx(a.phi_ss, rel=1e-12)
        assert b.n2_ss == pytest.approx(a.n2_ss, rel=1e-12)

    def test_seeded_is_fixed_point(self, short):
        rate = pump_rate_from_power(30.0, short)
        ss = seeded_steady_state(rate, short)
        dv1, dv2 = rate_equations(ss.phi_ss, ss.n2_ss, rate, short)
        assert abs(dv1) < 1e-8 * ss.phi_ss / short.tau_c
        assert abs(dv2) < 1e-8 * rate

    def test_seeded_floor_below_threshold(self, table1):
        """Sub-threshold photon density is the fluorescence floor, not zero."""
        rate = 0.5 * threshold_density(table1) / table1.tau_f
        ss = seeded_steady_state(rate, table1)
        assert ss.phi_ss == pytest.approx(table1.s_spont * table1.tau_c / (1 - 0.5), rel=1e-3)

    def test_continuous_across_threshold(self, table1):
        rate_th = threshold_density(table1) / table1.tau_f
        at = analytic_steady_state(rate_th, table1)
        assert not at.above_threshold
        assert at.phi_ss == 0.0
        assert at.n2_ss == pytest.approx(threshold_density(table1), rel=1e-12)
        for rate in (np.nextafter(rate_th, 0.0), np.nextafter(rate_th, np.inf), rate_th * (1 + 1e-9)):
            ss = analytic_steady_state(float(rate), table1)
            assert ss.n2_ss == pytest.approx(at.n2_ss, rel=1e-8)
            assert ss.phi_ss <= 1e-8 * table1.tau_c * rate_th

    @pytest.mark.parametrize("p_in", [25.0, 30.0, 60.0])
    def test_seed_only_raises_photon_density(self, table1, p_in):
        """phi(S) > phi(0) and the gap shrinks monotonically as S -> 0."""
        rate = pump_rate_from_power(p_in, table1)
        unseeded = analytic_steady_state(rate, table1).phi_ss
        gaps = [
            seeded_steady_state(rate, table1.model_copy(update={"s_spont": s})).phi_ss - unseeded
            for s in (table1.s_spont, table1.s_spont / 10, table1.s_spont / 100)
        ]
        assert gaps[0] > gaps[1] > gaps[2] > 0.0

    def test_simulated_seeded_state_converges_to_unseeded(self, short):
        rate = pump_rate_from_power(30.0, short)
        unseeded = analytic_steady_state(rate, short)
        sim = SimConfig(
            t_end=4e-5,
            sample_dt=1e-7,
            rel_tol=1e-10,
            initial_state=LaserState(v1=unseeded.phi_ss, v2=unseeded.n2_ss),
        )
        gaps = []
        for s in (short.s_spont, short.s_spont / 10, short.s_spont / 100):
            seeded = short.model_copy(update={"s_spont": s})
            ts = integrate(constant_drive(30.0), seeded, sim)
            assert ts.v1[-1] == pytest.approx(seeded_steady_state(rate, seeded).phi_ss, rel=1e-8)
            gaps.append(ts.v1[-1] - unseeded.phi_ss)
        assert gaps[0] > gaps[1] > gaps[2] > 0.0

    def test_zero_pump(self, table1):
        ss = seeded_steady_state(0.0, table1)
        assert ss.phi_ss == table1.s_spont * table1.tau_c
        assert ss.n2_ss == 0.0


class TestSmallSignal:
    """Tests for relaxation frequency and poles."""

    def test_relaxation_frequency_formula(self, short):
        assert relaxation_frequency(1.5, short) == pytest.approx(
            math.sqrt(0.5 / (short.tau_c * short.tau_f))
        )

    def test_relaxation_frequency_below_threshold(self, short):
        with pytest.raises(BelowThresholdError):
            relaxation_frequency(1.0, short)

    def test_table1_never_rings(self, table1):
        assert not any(is_underdamped(r, table1) for r in (1.1, 1.5, 3.0, 6.0, 20.0))

    def test_short_cavity_rings(self, short):
        assert all(is_underdamped(r, short) for r in (1.5, 2.0, 4.0))

    def test_poles_match_characteristic_polynomial(self, short):
        """lambda^2 + (r/tau_f) lambda + (r-1)/(tau_c tau_f) = 0."""
        r = 2.0
        p1, p2 = small_signal_poles(r, short)
        assert (p1 + p2).real == pytest.approx(-r / short.tau_f, rel=1e-9)
        assert (p1 * p2).real == pytest.approx((r - 1) / (short.tau_c * short.tau_f), rel=1e-9)

    def test_underdamped_pole_imaginary_part(self, short):
        r = 4.0
        _, p = small_signal_poles(r, short)
        gamma = r / (2 * short.tau_f)
        expected = math.sqrt(relaxation_frequency(r, short) ** 2 - gamma**2)
        assert abs(p.imag) == pytest.approx(expected, rel=1e-9)

    def test_slowest_time_constant_short_cavity(self, short):
        assert slowest_time_constant(1.5, short) == pytest.approx(2 * short.tau_f / 1.5, rel=1e-9)

    def test_small_perturbation_follows_linearization(self, short):
        """A 0.1% kick decays like expm(J t) applied to the kick."""
        unseeded = short.model_copy(update={"s_spont": 0.0})
        p_in = 2.0 * threshold_pump_power(unseeded)
        ss = analytic_steady_state(pump_rate_from_power(p_in, unseeded), unseeded)
        kick = np.array([1e-3 * ss.phi_ss, 0.0])
        sim = SimConfig(
            t_end=5e-6,
            sample_dt=1e-8,
            initial_state=LaserState(v1=ss.phi_ss + kick[0], v2=ss.n2_ss),
        )
        ts = integrate(constant_drive(p_in), unseeded, sim)
        jac = jacobian(ss.phi_ss, ss.n2_ss, unseeded)
        for i in (50, 120, 250, 400):
            expected = expm(jac * ts.t[i]) @ kick
            assert ts.v1[i] - ss.phi_ss == pytest.approx(expected[0], abs=0.02 * kick[0])
