"""The experiments: relaxation transient, pump sweep, frequency response, lambda trade-off."""

from __future__ import annotations

import functools
import math

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict

from rbcc.comms import calibrate_noise_var, link_budget
from rbcc.errors import BelowThresholdError, NotSettledError, NumericalError
from rbcc.laser import (
    analytic_steady_state,
    output_power,
    pump_rate_from_power,
    pump_ratio,
    seeded_steady_state,
    slowest_time_constant,
    threshold_pump_power,
)
from rbcc.ode import TimeSeries, integrate
from rbcc.params import ConfigBundle, LaserState, PumpDrive, SimConfig, WaveformKind
from rbcc.sweep import SweepResult, run_points
from rbcc.transducers import charging_power

logger = structlog.get_logger(__name__)

STEADY_FRACTION = 0.1
# the figure-8 bandwidth the measured one is compared against
REFERENCE_BANDWIDTH_HZ = 1e6


class RelaxationMetrics(BaseModel):
    """Peak, settling and oscillation figures of one transient."""

    model_config = ConfigDict(frozen=True)

    peak_power: float
    peak_time: float
    settling_time: float
    steady_power: float
    oscillation_freq: float
    settled: bool
    settle_band: float


# =============================================================================
# Transient characterization
# =============================================================================


def dominant_frequency(t: np.ndarray, p: np.ndarray, level: float) -> float:
    """Peak of the Hann-windowed spectrum of p, Hz; 0 unless p crosses level twice.

    Bins below 1.5 cycles per segment are ignored and the peak is refined by
    parabolic interpolation of the log magnitude.
    """
    n = p.size
    if n < 8:
        return 0.0
    above = p > level
    if np.count_nonzero(above[1:] != above[:-1]) < 2:
        return 0.0

    dt = float(t[1] - t[0])
    x = (p - p.mean()) * np.hanning(n)
    nfft = 8 * (1 << (n - 1).bit_length())
    spectrum = np.abs(np.fft.rfft(x, nfft))
    freqs = np.fft.rfftfreq(nfft, dt)
    valid = np.flatnonzero(freqs >= 1.5 / (n * dt))
    if valid.size == 0:
        return 0.0
    i = int(valid[np.argmax(spectrum[valid])])
    delta = 0.0
    if 0 < i < spectrum.size - 1 and np.all(spectrum[i - 1 : i + 2] > 0):
        a, b, c = np.log(spectrum[i - 1 : i + 2])
        denom = a - 2.0 * b + c
        if denom != 0.0:
            delta = 0.5 * (a - c) / denom
    return float((i + delta) / (nfft * dt))


def detect_relaxation(
    ts: TimeSeries, settle_band: float = 0.02, *, require_settled: bool = True
) -> RelaxationMetrics:
    """Peak, steady level, settling time and ringing frequency of ts.

    The steady level is the mean of the last 10% of samples; the trace counts
    as settled when their relative spread is below settle_band. Settling time
    is the first sample after the last excursion outside the band.

    Raises:
        NotSettledError: no steady segment and require_settled is True.
    """
    n = len(ts)
    if n == 0:
        raise ValueError("empty time series")
    p = ts.p_out
    t = ts.t
    tail = p[-max(1, math.ceil(STEADY_FRACTION * n)) :]
    steady = float(tail.mean())
    if steady > 0.0:
        spread = float(tail.max() - tail.min()) / steady
    else:
        spread = 0.0 if tail.max() == tail.min() else math.inf
    settled = spread < settle_band
    if not settled and require_settled:
        raise NotSettledError(
            f"trajectory not settled: last {STEADY_FRACTION:.0%} spread {spread:.3g} >= band {settle_band}"
        )

    i_peak = int(np.argmax(p))
    settling = math.inf
    if settled:
        outside = np.abs(p - steady) >= settle_band * steady if steady > 0 else p != steady
        idx = np.flatnonzero(outside)
        if idx.size == 0:
            settling = float(t[0])
        elif idx[-1] + 1 < n:
            settling = float(t[idx[-1] + 1])
        else:
            settled = False

    end = np.searchsorted(t, settling, side="right") if math.isfinite(settling) else n
    return RelaxationMetrics(
        peak_power=float(p[i_peak]),
        peak_time=float(t[i_peak]),
        settling_time=settling,
        steady_power=steady,
        oscillation_freq=dominant_frequency(t[:end], p[:end], steady),
        settled=settled,
        settle_band=settle_band,
    )


def constant_drive(power: float) -> PumpDrive:
    return PumpDrive(
        bias_power=power,
        signal_amplitude=0.0,
        bits="",
        signal_delay=0.0,
        waveform_kind=WaveformKind.CONSTANT,
    )


def steady_output(
    bundle: ConfigBundle, pump_power: float | None = None
) -> tuple[TimeSeries, RelaxationMetrics]:
    """Cold start under a constant pump (the bias by default)."""
    power = bundle.drive.bias_power if pump_power is None else pump_power
    ts = integrate(constant_drive(power), bundle.laser, bundle.sim)
    return ts, detect_relaxation(ts, bundle.experiment.settle_band, require_settled=False)


def relaxation_experiment(bundle: ConfigBundle) -> tuple[TimeSeries, RelaxationMetrics]:
    """Cold start under bias plus the delayed signal.

    Metrics describe the start-up transient before the signal begins; the
    returned trajectory covers the whole horizon including symbol edges.
    """
    ts = integrate(bundle.drive, bundle.laser, bundle.sim)
    start_up = ts.window(0.0, bundle.drive.signal_delay)
    if len(start_up) < 10:
        start_up = ts
    metrics = detect_relaxation(start_up, bundle.experiment.settle_band, require_settled=False)
    if not metrics.settled:
        logger.warning("transient_not_settled", signal_delay=bundle.drive.signal_delay)
    return ts, metrics


# =============================================================================
# Pump sweep
# =============================================================================


def _pump_point(bundle: ConfigBundle, power: float) -> dict[str, float]:
    laser = bundle.laser
    below = power <= threshold_pump_power(laser)
    ts, m = steady_output(bundle, power)

    out_error = float(output_power(ts.error_estimate[0], laser))
    settling = m.settling_time if (m.settled and not below) else math.inf
    if math.isfinite(settling):
        drift = ts.error_estimate[0] / max(float(ts.v1.max()), bundle.sim.abs_tol)
        settling_error = bundle.sim.sample_dt + settling * drift
    else:
        settling_error = math.inf
    if not below and not m.settled:
        logger.warning("pump_point_not_settled", pump_w=power, t_end=bundle.sim.t_end)

    return {
        "pump_power": power,
        "output_power": m.steady_power,
        "efficiency": m.steady_power / power if power > 0 else 0.0,
        "settling_time": settling,
        "peak_power": m.peak_power,
        "below_threshold": float(below),
        "settled": float(m.settled),
        "output_error": out_error,
        "efficiency_error": out_error / power if power > 0 else 0.0,
        "settling_error": settling_error,
    }


PUMP_SWEEP_UNITS = {
    "pump_power": "W",
    "output_power": "W",
    "efficiency": "-",
    "settling_time": "s",
    "peak_power": "W",
    "below_threshold": "flag",
    "settled": "flag",
    "output_error": "W",
    "efficiency_error": "-",
    "settling_error": "s",
}


def sweep_pump(
    powers: tuple[float, ...] | list[float] | None, bundle: ConfigBundle, jobs: int = 1
) -> SweepResult:
    """Steady output, efficiency and settling time per pump power.

    Points at or below the threshold pump power carry below_threshold=1 and
    an infinite settling time.
    """
    powers = list(bundle.experiment.pump_powers if powers is None else powers)
    rows = run_points(functools.partial(_pump_point, bundle), powers, jobs, "sweep-pump")
    columns = {name: np.array([row[name] for row in rows]) for name in PUMP_SWEEP_UNITS}
    return SweepResult(
        name="pump_sweep",
        axis="pump_power",
        columns=columns,
        units=PUMP_SWEEP_UNITS,
        meta={"threshold_pump_power_w": threshold_pump_power(bundle.laser)},
    )


# =============================================================================
# Frequency response
# =============================================================================


def _frequency_point(bundle: ConfigBundle, amplitude: float, tau_slow: float, f: float) -> tuple[float, float]:
    exp = bundle.experiment
    discard = max(12.0 * tau_slow, 2.0 / f)
    sample_dt = 1.0 / (f * exp.freq_samples_per_period)
    n_measure = exp.freq_periods * exp.freq_samples_per_period
    start = math.ceil(discard / sample_dt)
    t_end = (start + n_measure) * sample_dt

    bias = bundle.drive.bias_power
    steady = seeded_steady_state(pump_rate_from_power(bias, bundle.laser), bundle.laser)
    drive = PumpDrive(
        bias_power=bias,
        signal_amplitude=0.0,
        bits="",
        signal_delay=0.0,
        waveform_kind=WaveformKind.SINUSOID,
        sine_frequency=f,
        sine_amplitude=amplitude,
    )
    sim = SimConfig(
        t_end=t_end,
        sample_dt=sample_dt,
        rel_tol=bundle.sim.rel_tol,
        abs_tol=bundle.sim.abs_tol,
        initial_state=LaserState(v1=steady.phi_ss, v2=steady.n2_ss),
        rng_seed=bundle.sim.rng_seed,
        max_steps=bundle.sim.max_steps,
    )
    ts = integrate(drive, bundle.laser, sim)

    t = ts.t[start : start + n_measure]
    p = ts.p_out[start : start + n_measure]
    omega = 2.0 * math.pi * f
    design = np.column_stack([np.sin(omega * t), np.cos(omega * t), np.ones_like(t)])
    (a, b, _), *_ = np.linalg.lstsq(design, p, rcond=None)
    return math.hypot(a, b) / amplitude, math.degrees(math.atan2(b, a))


def frequency_response(
    freqs: list[float] | np.ndarray | None,
    amplitude: float | None,
    bundle: ConfigBundle,
    jobs: int = 1,
) -> SweepResult:
    """Small-signal gain |dP_out/dP_pump| and phase versus modulation frequency.

    Each point starts on the seeded steady state under the bias, discards
    twelve slow time constants (at least two periods) and fits a sinusoid
    over whole periods.
    """
    exp = bundle.experiment
    if freqs is None:
        freqs = np.geomspace(exp.freq_min, exp.freq_max, exp.n_freqs)
    freqs = np.asarray(freqs, dtype=float)
    amplitude = exp.freq_amplitude if amplitude is None else amplitude
    if np.any(freqs <= 0):
        raise ValueError("frequencies must be positive")

    bias = bundle.drive.bias_power
    if amplitude >= bias:
        raise ValueError("modulation amplitude must be below the bias")
    r = pump_ratio(bias, bundle.laser)
    if r == 1.0:
        raise BelowThresholdError("bias sits exactly at threshold; no finite relaxation time")
    tau_slow = slowest_time_constant(r, bundle.laser)

    rows = run_points(
        functools.partial(_frequency_point, bundle, amplitude, tau_slow),
        freqs.tolist(),
        jobs,
        "freq-response",
    )
    result = SweepResult(
        name="freq_response",
        axis="frequency",
        columns={
            "frequency": freqs,
            "gain": np.array([g for g, _ in rows]),
            "phase": np.array([ph for _, ph in rows]),
        },
        units={"frequency": "Hz", "gain": "W/W", "phase": "deg"},
        meta={
            "dc_gain": bundle.laser.out_power_gain if r > 1.0 else 0.0,
            "amplitude_w": amplitude,
            "bias_w": bias,
        },
    )
    half = half_gain_frequency(result)
    result.meta["half_gain_hz"] = half
    result.meta["reference_bandwidth_hz"] = REFERENCE_BANDWIDTH_HZ
    result.meta["bandwidth_discrepancy"] = half is None or not (
        0.1 <= half / REFERENCE_BANDWIDTH_HZ <= 10.0
    )
    if result.meta["bandwidth_discrepancy"]:
        logger.warning("bandwidth_discrepancy", half_gain_hz=half, reference_hz=REFERENCE_BANDWIDTH_HZ)
    return result


def half_gain_frequency(result: SweepResult) -> float | None:
    """First frequency above the gain maximum where the gain falls to half of it.

    Interpolated linearly in log-frequency; None if the grid never gets there.
    """
    f = result["frequency"]
    g = result["gain"]
    i_max = int(np.argmax(g))
    half = 0.5 * g[i_max]
    for j in range(i_max + 1, g.size):
        if g[j] <= half:
            frac = (half - g[j - 1]) / (g[j] - g[j - 1])
            return float(math.exp(math.log(f[j - 1]) + frac * (math.log(f[j]) - math.log(f[j - 1]))))
    return None


# =============================================================================
# Power splitting
# =============================================================================


def _zero_db_crossing(lambdas: np.ndarray, snr_db: np.ndarray) -> float | None:
    for i in range(lambdas.size - 1):
        a, b = snr_db[i], snr_db[i + 1]
        if a >= 0.0 > b:
            if not math.isfinite(b):
                return float(lambdas[i + 1]) if a == 0.0 else None
            return float(lambdas[i] + (lambdas[i + 1] - lambdas[i]) * a / (a - b))
    return None


def sweep_lambda(lambdas: list[float] | np.ndarray | None, bundle: ConfigBundle) -> SweepResult:
    """SNR, capacity and harvested power versus the splitting ratio.

    The received power is the simulated steady output under the bias. With
    channel.calibrate_snr_db set, the noise variance is fixed so that lambda=0
    reaches that SNR.
    """
    if lambdas is None:
        lambdas = np.linspace(0.0, 1.0, bundle.experiment.lambda_points)
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any((lambdas < 0) | (lambdas > 1)):
        raise ValueError("split_lambda out of [0,1]")

    _, metrics = steady_output(bundle)
    p_total = metrics.steady_power
    ch = bundle.channel
    noise_var = (
        calibrate_noise_var(p_total, ch, ch.calibrate_snr_db)
        if ch.calibrate_snr_db is not None
        else ch.noise_var
    )

    budgets = [link_budget(p_total, ch, float(lam), noise_var) for lam in lambdas]
    harvest = [charging_power(b.p_charge, bundle.pv) for b in budgets]
    snr_db = np.array([b.snr_db for b in budgets])
    reference_db = snr_db[0] if lambdas[0] == 0.0 else None

    result = SweepResult(
        name="lambda",
        axis="lambda",
        columns={
            "lambda": lambdas,
            "p_charge": np.array([b.p_charge for b in budgets]),
            "p_comm": np.array([b.p_comm for b in budgets]),
            "i_pd": np.array([b.i_pd for b in budgets]),
            "snr": snr_db,
            "capacity": np.array([b.capacity for b in budgets]),
            "pv_power": np.array([h.p_elec for h in harvest]),
            "pv_voltage": np.array([h.v_out for h in harvest]),
        },
        units={
            "lambda": "-",
            "p_charge": "W",
            "p_comm": "W",
            "i_pd": "A",
            "snr": "dB",
            "capacity": "bit/s",
            "pv_power": "W",
            "pv_voltage": "V",
        },
        meta={
            "p_total_w": p_total,
            "noise_var_a2": noise_var,
            "zero_db_lambda": _zero_db_crossing(lambdas, snr_db),
        },
    )
    if reference_db is not None and math.isfinite(reference_db):
        result.meta["analytic_zero_db_lambda"] = 1.0 - 10.0 ** (-reference_db / 20.0)
    return result


# =============================================================================
# Seed calibration
# =============================================================================


def calibrate_seed_rate(
    bundle: ConfigBundle,
    pump_power: float = 30.0,
    deadline: float = 5e-3,
    onset_fraction: float = 0.01,
    s_bounds: tuple[float, float] = (1e10, 1e24),
    rel_tol: float = 0.05,
) -> float:
    """Smallest seed rate S whose cold start reaches onset_fraction of the
    unseeded steady output before deadline, by bisection in log S.
    """
    laser = bundle.laser
    steady = analytic_steady_state(pump_rate_from_power(pump_power, laser), laser)
    if not steady.above_threshold:
        raise BelowThresholdError(f"{pump_power} W is below the lasing threshold")
    target = onset_fraction * float(output_power(steady.phi_ss, laser))
    sim = bundle.sim.model_copy(
        update={
            "t_end": deadline,
            "sample_dt": min(bundle.sim.sample_dt, deadline / 100.0),
            "initial_state": LaserState(),
        }
    )
    drive = constant_drive(pump_power)

    def lases(s: float) -> bool:
        ts = integrate(drive, laser.model_copy(update={"s_spont": s}), sim)
        return bool(ts.p_out.max() >= target)

    lo, hi = s_bounds
    if not lases(hi):
        raise NumericalError(f"no seed rate up to {hi:.3g} lases within {deadline} s")
    if lases(lo):
        return lo
    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        if lases(mid):
            hi = mid
        else:
            lo = mid
    logger.info("seed_rate_calibrated", s_spont=hi, pump_w=pump_power, deadline=deadline)
    return hi
