"""Four-level laser rate equations in equivalent-circuit form.

State v1 is the cavity photon density, v2 the upper-level population density.
With C1 = C2 = 1, R1 = tau_c and R2 = tau_f the node equations read::

    dv1/dt =  c*sigma*v1*v2 - v1/tau_c + S
    dv2/dt = -c*sigma*v1*v2 - v2/tau_f + I3

The analytic steady states and the small-signal linearization here are the
oracles the integrator is tested against.
"""

from __future__ import annotations

import math

import numpy as np
from pydantic import BaseModel, ConfigDict

from rbcc.errors import BelowThresholdError
from rbcc.params import LaserParams, LaserState


class SteadyState(BaseModel):
    """Fixed point of the rate equations."""

    model_config = ConfigDict(frozen=True)

    phi_ss: float
    n2_ss: float
    above_threshold: bool


# =============================================================================
# Conversions
# =============================================================================


def photon_energy(params: LaserParams) -> float:
    return params.h_planck * params.nu_l


def threshold_density(params: LaserParams) -> float:
    """Population density at which gain balances cavity loss: 1/(c*sigma*tau_c)."""
    return 1.0 / (params.c_medium * params.sigma * params.tau_c)


def pump_rate_from_power(p_in, params: LaserParams):
    """Optical pump power (W) to pump rate I3 (m^-3 s^-1). Accepts arrays."""
    return p_in / (photon_energy(params) * params.gain_volume)


def pump_power_from_rate(pump_rate, params: LaserParams):
    return pump_rate * photon_energy(params) * params.gain_volume


def output_power(v1, params: LaserParams):
    """Photon density to output power: g * v1 * h*nu * V / tau_c. Accepts arrays."""
    return (
        params.out_power_gain
        * v1
        * photon_energy(params)
        * params.gain_volume
        / params.tau_c
    )


def threshold_pump_power(params: LaserParams) -> float:
    """Pump power whose rate equals n_th/tau_f."""
    return pump_power_from_rate(threshold_density(params) / params.tau_f, params)


def pump_ratio(p_in: float, params: LaserParams) -> float:
    """r = I3*tau_f/n_th; lasing needs r > 1."""
    return pump_rate_from_power(p_in, params) * params.tau_f / threshold_density(params)


# =============================================================================
# Dynamics
# =============================================================================


def rhs(state: LaserState, pump_rate: float, params: LaserParams) -> tuple[float, float]:
    """Time derivative (dv1/dt, dv2/dt) of the state."""
    return rate_equations(state.v1, state.v2, pump_rate, params)


def rate_equations(
    v1: float, v2: float, pump_rate: float, params: LaserParams
) -> tuple[float, float]:
    stimulated = params.c_medium * params.sigma * v1 * v2
    dv1 = stimulated - v1 / params.tau_c + params.s_spont
    dv2 = -stimulated - v2 / params.tau_f + pump_rate
    return dv1, dv2


def rhs_array(t: float, y: np.ndarray, pump_rate: float, params: LaserParams) -> np.ndarray:
    """Array form of the right-hand side, signature (t, y) as integrators expect."""
    return np.array(rate_equations(float(y[0]), float(y[1]), pump_rate, params))


def jacobian(v1: float, v2: float, params: LaserParams) -> np.ndarray:
    g = params.c_medium * params.sigma
    return np.array(
        [
            [g * v2 - 1.0 / params.tau_c, g * v1],
            [-g * v2, -g * v1 - 1.0 / params.tau_f],
        ]
    )


# =============================================================================
# Steady states
# =============================================================================


def analytic_steady_state(pump_rate: float, params: LaserParams) -> SteadyState:
    """Fixed point with the spontaneous seed switched off."""
    n_th = threshold_density(params)
    if pump_rate <= n_th / params.tau_f:
        return SteadyState(phi_ss=0.0, n2_ss=pump_rate * params.tau_f, above_threshold=False)
    return SteadyState(
        phi_ss=params.tau_c * (pump_rate - n_th / params.tau_f),
        n2_ss=n_th,
        above_threshold=True,
    )


def seeded_steady_state(pump_rate: float, params: LaserParams) -> SteadyState:
    """Fixed point including the seed S.

    With x = n2/n_th, r the pump ratio and b = S*tau_f/n_th the population
    solves x^2 - (1+b+r)x + r = 0 (smaller root), and
    phi = n_th*tau_c*(r - x)/(x*tau_f). Reduces to the unseeded state at S=0.
    """
    n_th = threshold_density(params)
    r = pump_rate * params.tau_f / n_th
    if r == 0.0:
        return SteadyState(
            phi_ss=params.s_spont * params.tau_c, n2_ss=0.0, above_threshold=False
        )
    b = params.s_spont * params.tau_f / n_th
    s = 1.0 + b + r
    x = 2.0 * r / (s + math.sqrt(max(s * s - 4.0 * r, 0.0)))
    phi = n_th * params.tau_c * (r - x) / (x * params.tau_f)
    return SteadyState(phi_ss=max(phi, 0.0), n2_ss=x * n_th, above_threshold=r > 1.0)


# =============================================================================
# Small-signal behaviour
# =============================================================================


def relaxation_frequency(pump_ratio: float, params: LaserParams) -> float:
    """Undamped relaxation angular frequency sqrt((r-1)/(tau_c*tau_f)), rad/s."""
    if pump_ratio <= 1.0:
        raise BelowThresholdError(
            f"relaxation frequency needs pump ratio > 1, got {pump_ratio:.6g}"
        )
    return math.sqrt((pump_ratio - 1.0) / (params.tau_c * params.tau_f))


def small_signal_poles(pump_ratio: float, params: LaserParams) -> tuple[complex, complex]:
    """Eigenvalues of the unseeded Jacobian at the steady state, sorted by real part."""
    n_th = threshold_density(params)
    steady = analytic_steady_state(pump_ratio * n_th / params.tau_f, params)
    eig = np.linalg.eigvals(jacobian(steady.phi_ss, steady.n2_ss, params))
    first, second = sorted((complex(e) for e in eig), key=lambda z: (z.real, z.imag))
    return first, second


def is_underdamped(pump_ratio: float, params: LaserParams) -> bool:
    """Whether relaxation towards the steady state rings."""
    if pump_ratio <= 1.0:
        return False
    return any(abs(p.imag) > 0.0 for p in small_signal_poles(pump_ratio, params))


def slowest_time_constant(pump_ratio: float, params: LaserParams) -> float:
    """1/|Re| of the slowest decaying pole."""
    poles = small_signal_poles(pump_ratio, params)
    slowest = min(abs(p.real) for p in poles)
    if slowest == 0.0:
        return math.inf
    return 1.0 / slowest
