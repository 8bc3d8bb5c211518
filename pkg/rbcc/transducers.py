"""Conversions at both ends of the link.

Pump current to optical power, the pump drive waveform, the power splitter,
the single-diode photovoltaic panel and the photodiode.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from typing import Literal

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict
from scipy.optimize import brentq, newton

from rbcc.errors import ConvergenceError, OperatingRangeError
from rbcc.params import ChannelParams, PumpDrive, PumpParams, PVParams, WaveformKind

logger = structlog.get_logger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
NEWTON_MAX_ITER = 100
RESIDUAL_TOL = 1e-12
XTOL = 1e-13
STEPS_PER_PERIOD = 8


class PVOperatingPoint(BaseModel):
    """Terminal voltage, current and electrical power of the panel."""

    model_config = ConfigDict(frozen=True)

    v_out: float
    i_out: float
    p_elec: float


# =============================================================================
# Pump
# =============================================================================


def pump_slope_efficiency(pp: PumpParams) -> float:
    """dP/dI above threshold, W/A: (h*c/(q*lambda))*eta_e."""
    return pp.h_planck * pp.c_vacuum / (pp.q_charge * pp.lambda_emission) * pp.eta_e


def pump_power_from_current(i_in: float, pp: PumpParams) -> float:
    """Optical pump power for a drive current; zero below threshold."""
    return pump_slope_efficiency(pp) * max(i_in - pp.i_th, 0.0)


def drive_power_at(drive: PumpDrive, t):
    """Pump optical power at time(s) t, W. Accepts a scalar or an array.

    OOK bits run from signal_delay at bit_rate; after the last bit the drive
    returns to the bias level.
    """
    t_arr = np.asarray(t, dtype=float)
    power = np.full(t_arr.shape, drive.bias_power)
    active = t_arr >= drive.signal_delay

    if drive.waveform_kind is WaveformKind.SINUSOID:
        power = power + np.where(
            active,
            drive.sine_amplitude * np.sin(2.0 * np.pi * drive.sine_frequency * t_arr),
            0.0,
        )
    elif drive.waveform_kind is WaveformKind.OOK_BITS and drive.bits:
        bits = np.frombuffer(drive.bits.encode("ascii"), dtype=np.uint8) - ord("0")
        index = np.floor((t_arr - drive.signal_delay) * drive.bit_rate).astype(np.int64)
        in_frame = active & (index >= 0) & (index < bits.size)
        high = np.zeros(t_arr.shape, dtype=bool)
        high[in_frame] = bits[index[in_frame]] == 1
        power = np.where(high, power + drive.signal_amplitude, power)

    if np.ndim(t) == 0:
        return float(power)
    return power


def drive_breakpoints(drive: PumpDrive, t_end: float) -> list[float]:
    """Times in [0, t_end] where the drive is discontinuous, with both ends."""
    points = {0.0, t_end}
    delay = drive.signal_delay
    if drive.waveform_kind is not WaveformKind.CONSTANT and 0.0 < delay < t_end:
        points.add(delay)

    if drive.waveform_kind is WaveformKind.OOK_BITS and drive.bits:
        previous = "0"
        for k, bit in enumerate(drive.bits + "0"):
            if bit != previous:
                edge = delay + k / drive.bit_rate
                if 0.0 < edge < t_end:
                    points.add(edge)
            previous = bit

    return sorted(points)


def drive_max_step(drive: PumpDrive) -> float:
    """Largest integration step that still resolves the drive, s.

    A sinusoid gets at least STEPS_PER_PERIOD steps per period.
    Piecewise-constant drives need no cap.
    """
    if drive.waveform_kind is WaveformKind.SINUSOID:
        return 1.0 / (STEPS_PER_PERIOD * drive.sine_frequency)
    return math.inf


def segment_pump_power(drive: PumpDrive, a: float, b: float) -> Callable[[float], float]:
    """Pump power as a function of time on the open segment (a, b).

    Piecewise-constant drives are frozen at the segment midpoint so that the
    stage evaluated exactly at b still sees the segment's own level.
    """
    mid = 0.5 * (a + b)
    if drive.waveform_kind is WaveformKind.SINUSOID and mid >= drive.signal_delay:
        omega = 2.0 * math.pi * drive.sine_frequency
        bias = drive.bias_power
        amplitude = drive.sine_amplitude
        return lambda t: bias + amplitude * math.sin(omega * t)

    level = drive_power_at(drive, mid)
    return lambda t: level


# =============================================================================
# Splitter and photodiode
# =============================================================================


def split(p_total, split_lambda: float):
    """Split received power into (charging, communication) by lambda."""
    if not 0.0 <= split_lambda <= 1.0:
        raise ValueError("split_lambda out of [0,1]")
    p_charge = split_lambda * p_total
    return p_charge, p_total - p_charge


def pd_current(p_c, ch: ChannelParams):
    """Photodiode current I_pd = rho2 * P_c."""
    return ch.rho2 * p_c


# =============================================================================
# Photovoltaic panel
# =============================================================================


def pv_photocurrent(p_e: float, pv: PVParams) -> float:
    """I_ph = rho1 * (transmission * P_E + C)."""
    return pv.rho1 * (pv.transmission * p_e + pv.offset_c)


def static_chain_photocurrent(i_in: float, pp: PumpParams, pv: PVParams) -> float:
    """Photocurrent with the pump's static line in place of the simulated beam."""
    return pv_photocurrent(pump_power_from_current(i_in, pp), pv)


def _bracketed_root(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    lo: float,
    hi: float,
    x0: float,
    what: str,
) -> float:
    """Root of a decreasing f on [lo, hi] with f(lo) >= 0 >= f(hi).

    Newton from x0 first; a result outside the bracket or with a residual
    above RESIDUAL_TOL falls back to Brent's method on [lo, hi].
    """
    x0 = min(max(x0, lo), hi)
    try:
        x = float(newton(f, x0, fprime=fprime, tol=XTOL, maxiter=NEWTON_MAX_ITER))
        if lo <= x <= hi and abs(f(x)) < RESIDUAL_TOL:
            return x
    except (RuntimeError, OverflowError, ZeroDivisionError):
        pass
    logger.debug("newton_fallback", what=what, x0=x0, lo=lo, hi=hi)

    try:
        return float(
            brentq(f, lo, hi, xtol=XTOL, rtol=4 * np.finfo(float).eps, maxiter=NEWTON_MAX_ITER)
        )
    except (RuntimeError, ValueError) as e:
        raise ConvergenceError(what, lo, hi, NEWTON_MAX_ITER) from e


def _current_residual(
    i_ph: float, pv: PVParams, v_out: float
) -> tuple[Callable[[float], float], Callable[[float], float]]:
    a = pv.diode_voltage_scale
    conductance = 1.0 / pv.r_sh

    def f(i: float) -> float:
        v_d = v_out + i * pv.r_s
        return i_ph - pv.i0 * math.expm1(v_d / a) - v_d * conductance - i

    def fprime(i: float) -> float:
        v_d = v_out + i * pv.r_s
        return -pv.i0 * math.exp(v_d / a) * pv.r_s / a - pv.r_s * conductance - 1.0

    return f, fprime


def kirchhoff_residual(point: PVOperatingPoint, i_ph: float, pv: PVParams) -> float:
    """I_ph - I_L - V_L/R_sh - I_out at the point, A."""
    v_d = point.v_out + point.i_out * pv.r_s
    return (
        i_ph
        - pv.i0 * math.expm1(v_d / pv.diode_voltage_scale)
        - v_d / pv.r_sh
        - point.i_out
    )


def open_circuit_voltage(i_ph: float, pv: PVParams) -> float:
    """Voltage at which the terminal current vanishes."""
    if i_ph < 0:
        raise OperatingRangeError(f"photocurrent must be >= 0, got {i_ph}")
    if i_ph == 0.0:
        return 0.0
    a = pv.diode_voltage_scale
    conductance = 1.0 / pv.r_sh
    # shunt leakage only lowers Voc below the ideal-diode value
    v_hi = a * math.log1p(i_ph / pv.i0)

    def f(v: float) -> float:
        return i_ph - pv.i0 * math.expm1(v / a) - v * conductance

    def fprime(v: float) -> float:
        return -pv.i0 * math.exp(v / a) / a - conductance

    return _bracketed_root(f, fprime, 0.0, v_hi, v_hi, "open-circuit voltage")


def pv_operating_point(
    i_ph: float, pv: PVParams, v_out: float, *, i_start: float | None = None
) -> PVOperatingPoint:
    """Solve the implicit single-diode equation for the current at v_out.

    Args:
        i_ph: Photocurrent, A.
        pv: Panel parameters.
        v_out: Terminal voltage in [0, Voc].
        i_start: Newton starting current (defaults to the upper bracket end).

    Raises:
        OperatingRangeError: v_out outside [0, Voc].
        ConvergenceError: neither Newton nor the bracketed fallback converged.
    """
    if v_out < 0:
        raise OperatingRangeError(f"v_out must be >= 0, got {v_out}")
    f, fprime = _current_residual(i_ph, pv, v_out)
    f_lo = f(0.0)
    if f_lo < 0.0:
        if f_lo > -1e-12:
            return PVOperatingPoint(v_out=v_out, i_out=0.0, p_elec=0.0)
        raise OperatingRangeError(
            f"v_out={v_out:.6g} V above open-circuit voltage {open_circuit_voltage(i_ph, pv):.6g} V"
        )
    hi = max(i_ph, 0.0)
    current = _bracketed_root(
        f, fprime, 0.0, hi, hi if i_start is None else i_start, f"PV current at {v_out:.6g} V"
    )
    return PVOperatingPoint(v_out=v_out, i_out=current, p_elec=v_out * current)


def pv_iv_curve(
    i_ph: float, pv: PVParams, n_points: int = 101
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Voltage, current and power arrays from short circuit to open circuit."""
    voc = open_circuit_voltage(i_ph, pv)
    v = np.linspace(0.0, voc, n_points)
    i = np.array([pv_operating_point(i_ph, pv, float(x)).i_out for x in v])
    return v, i, v * i


def pv_max_power(i_ph: float, pv: PVParams, rel_tol: float = 1e-10) -> PVOperatingPoint:
    """Maximum power point by golden-section search over [0, Voc]."""
    voc = open_circuit_voltage(i_ph, pv)
    if voc == 0.0:
        return PVOperatingPoint(v_out=0.0, i_out=max(i_ph, 0.0), p_elec=0.0)

    def power(v: float) -> float:
        return pv_operating_point(i_ph, pv, v).p_elec

    a, b = 0.0, voc
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = power(c), power(d)
    while b - a > rel_tol * voc:
        if fc < fd:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = power(d)
        else:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = power(c)

    point = pv_operating_point(i_ph, pv, 0.5 * (a + b))
    logger.debug("pv_mpp", i_ph=i_ph, v_mpp=point.v_out, p_mpp=point.p_elec, voc=voc)
    return point


def charging_power(
    p_charge: float,
    pv: PVParams,
    mode: Literal["mpp", "fixed"] = "mpp",
    v_fixed: float | None = None,
) -> PVOperatingPoint:
    """Electrical power harvested from the charging beam."""
    i_ph = pv_photocurrent(p_charge, pv)
    if mode == "mpp":
        return pv_max_power(i_ph, pv)
    if v_fixed is None:
        raise ValueError("fixed mode needs v_fixed")
    return pv_operating_point(i_ph, pv, v_fixed)
