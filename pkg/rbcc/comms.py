"""Information path: OOK over AWGN, SNR, Shannon capacity and BER.

Noise batches draw from ``SeedSequence.spawn`` children of the run seed, so
points that share a seed share their random numbers. Changing only the noise
variance rescales the same draws, which makes BER curves monotone in SNR.
"""

from __future__ import annotations

import functools
import math

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.special import erfc

from rbcc.errors import ConfigValidationError
from rbcc.events import BER_POINT_DONE, event_bus
from rbcc.laser import pump_rate_from_power, seeded_steady_state
from rbcc.ode import integrate
from rbcc.params import (
    MIN_MONTE_CARLO_BITS,
    ChannelParams,
    ConfigBundle,
    LaserState,
    PumpDrive,
    SimConfig,
    WaveformKind,
)
from rbcc.sweep import SweepResult, run_points
from rbcc.transducers import pd_current, split

logger = structlog.get_logger(__name__)

MIN_SYMBOL_SAMPLES = 8
Z_95 = 1.959963984540054


class BitStream(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bits: np.ndarray
    rate: float = 1.0

    @field_validator("rate")
    @classmethod
    def _rate_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("rate must be positive")
        return v

    def __len__(self) -> int:
        return int(self.bits.size)


class LinkBudget(BaseModel):
    """Split powers, photodiode current, SNR and capacity at one lambda."""

    model_config = ConfigDict(frozen=True)

    split_lambda: float
    p_total: float
    p_charge: float
    p_comm: float
    i_pd: float
    snr_linear: float
    snr_db: float
    capacity: float


class BerPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    snr_db: float
    rate: float
    n_bits: int
    errors: int
    ber: float
    ci95: float


# =============================================================================
# SNR and capacity
# =============================================================================


def to_db(ratio: float) -> float:
    """10*log10(ratio), -inf for zero."""
    if ratio == 0.0:
        return -math.inf
    return 10.0 * math.log10(ratio)


def snr(i_pd: float, ch: ChannelParams, noise_var: float | None = None) -> float:
    """Linear SNR I_pd^2 / sigma_noise."""
    return i_pd * i_pd / (ch.noise_var if noise_var is None else noise_var)


def capacity(snr_linear: float, bandwidth: float) -> float:
    """Shannon capacity B*log2(1+SNR), bit/s."""
    if snr_linear < 0:
        raise ValueError("snr_linear must be >= 0")
    return bandwidth * math.log2(1.0 + snr_linear)


def link_budget(
    p_total: float, ch: ChannelParams, split_lambda: float | None = None, noise_var: float | None = None
) -> LinkBudget:
    lam = ch.split_lambda if split_lambda is None else split_lambda
    p_charge, p_comm = split(p_total, lam)
    i_pd = pd_current(p_comm, ch)
    snr_linear = snr(i_pd, ch, noise_var)
    return LinkBudget(
        split_lambda=lam,
        p_total=p_total,
        p_charge=p_charge,
        p_comm=p_comm,
        i_pd=i_pd,
        snr_linear=snr_linear,
        snr_db=to_db(snr_linear),
        capacity=capacity(snr_linear, ch.bandwidth),
    )


def calibrate_noise_var(p_total: float, ch: ChannelParams, target_snr_db: float) -> float:
    """Noise variance (A^2) that puts the all-communication link at target_snr_db."""
    if p_total <= 0:
        raise ValueError("noise calibration needs a positive received power")
    i_pd = pd_current(p_total, ch)
    noise_var = i_pd * i_pd / 10.0 ** (target_snr_db / 10.0)
    logger.info("noise_calibrated", p_total=p_total, target_snr_db=target_snr_db, noise_var=noise_var)
    return noise_var


# =============================================================================
# Modulation and noise
# =============================================================================


def q_function(x):
    """Gaussian tail probability Q(x)."""
    return 0.5 * erfc(np.asarray(x) / math.sqrt(2.0))


def analytic_ook_ber(delta: float, noise_var: float, symbol_samples: int) -> float:
    """Matched-filter OOK error probability Q(delta / (2*sigma/sqrt(N)))."""
    if noise_var == 0.0:
        return 0.0
    sigma_eff = math.sqrt(noise_var / symbol_samples)
    return float(q_function(delta / (2.0 * sigma_eff)))


def binomial_ci95(errors: int, n_bits: int) -> float:
    """Normal-approximation 95% half-width of an error fraction."""
    p = errors / n_bits
    return Z_95 * math.sqrt(p * (1.0 - p) / n_bits)


def add_awgn(samples: np.ndarray, noise_var: float, seed) -> np.ndarray:
    """Add zero-mean Gaussian noise of variance noise_var.

    ``seed`` is anything ``numpy.random.default_rng`` accepts.
    """
    if noise_var < 0:
        raise ValueError("noise_var must be >= 0")
    samples = np.asarray(samples, dtype=float)
    if noise_var == 0.0:
        return samples.copy()
    rng = np.random.default_rng(seed)
    return samples + rng.normal(0.0, math.sqrt(noise_var), samples.shape)


def ook_modulate(bits, symbol_samples: int, low: float, high: float) -> np.ndarray:
    """Rectangular OOK: each bit held for symbol_samples samples."""
    levels = np.where(np.asarray(bits, dtype=bool), high, low)
    return np.repeat(levels, symbol_samples)


def ook_demodulate(noisy, symbol_samples: int, threshold: float, rate: float = 1.0) -> BitStream:
    """Per-symbol mean against threshold; a mean at or above it decodes as 1."""
    noisy = np.asarray(noisy, dtype=float)
    if symbol_samples < 1 or noisy.size % symbol_samples:
        raise ValueError(
            f"{noisy.size} samples do not split into symbols of {symbol_samples}"
        )
    means = noisy.reshape(-1, symbol_samples).mean(axis=1)
    return BitStream(bits=(means >= threshold).astype(np.uint8), rate=rate)


def _bypass_batch(
    low: float, high: float, noise_var: float, symbol_samples: int, job: tuple[np.random.SeedSequence, int]
) -> int:
    seed, n = job
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, n)
    clean = ook_modulate(bits, symbol_samples, low, high)
    noisy = clean + rng.normal(0.0, math.sqrt(noise_var), clean.shape)
    decoded = ook_demodulate(noisy, symbol_samples, 0.5 * (low + high)).bits
    return int(np.count_nonzero(decoded != bits))


def ber_bypass(
    low: float,
    high: float,
    noise_var: float,
    symbol_samples: int,
    n_bits: int,
    seed: int,
    *,
    batch_bits: int = 50_000,
    jobs: int = 1,
) -> BerPoint:
    """Monte-Carlo BER of ideal rectangular OOK with the cavity bypassed."""
    n_batches = math.ceil(n_bits / batch_bits)
    children = np.random.SeedSequence(seed).spawn(n_batches)
    sizes = [min(batch_bits, n_bits - i * batch_bits) for i in range(n_batches)]
    fn = functools.partial(_bypass_batch, low, high, noise_var, symbol_samples)
    errors = sum(run_points(fn, list(zip(children, sizes, strict=True)), jobs, "ber-bypass"))
    mean = 0.5 * (low + high)
    return BerPoint(
        snr_db=to_db(mean * mean / noise_var) if noise_var > 0 else math.inf,
        rate=1.0,
        n_bits=n_bits,
        errors=errors,
        ber=errors / n_bits,
        ci95=binomial_ci95(errors, n_bits),
    )


# =============================================================================
# Cavity in the loop
# =============================================================================


class CavityWaveform(BaseModel):
    """Noiseless photodiode current of a training preamble plus a data pattern.

    The preamble is ``preamble_symbols`` ones followed by as many zeros; the
    receiver takes its decision threshold from their settled halves.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    current: np.ndarray
    bits: np.ndarray
    symbol_samples: int
    preamble_symbols: int
    rate: float

    @property
    def data_offset(self) -> int:
        return 2 * self.preamble_symbols * self.symbol_samples

    @property
    def mean_data_current(self) -> float:
        return float(self.current[self.data_offset :].mean())


def symbol_samples_for(rate: float, sample_dt: float) -> int:
    """Samples per symbol; the symbol period must be a whole number of samples."""
    exact = 1.0 / (rate * sample_dt)
    n = round(exact)
    if abs(exact - n) > 1e-6 * exact:
        raise ConfigValidationError(
            [f"experiment.ber_sample_dt: {sample_dt} s does not divide the symbol period at {rate} bit/s"]
        )
    if n < MIN_SYMBOL_SAMPLES:
        raise ConfigValidationError(
            [f"experiment.ber_sample_dt: {n} samples per symbol at {rate} bit/s, need >= {MIN_SYMBOL_SAMPLES}"]
        )
    return n


def cavity_waveform(bundle: ConfigBundle, rate: float) -> CavityWaveform:
    """Integrate the cavity once for the pattern at this rate.

    The cavity starts at its seeded steady state under the bias so the
    preamble begins on a settled beam.
    """
    exp = bundle.experiment
    if bundle.channel.split_lambda == 1.0:
        raise ConfigValidationError(["channel.split_lambda: 1 leaves no power for the photodiode"])

    n_sym_per_level = exp.ber_preamble_symbols
    symbol_samples = symbol_samples_for(rate, exp.ber_sample_dt)
    pattern = np.random.default_rng(bundle.sim.rng_seed).integers(0, 2, exp.ber_pattern_bits)
    bits = "1" * n_sym_per_level + "0" * n_sym_per_level + "".join(map(str, pattern))

    drive = PumpDrive(
        bias_power=bundle.drive.bias_power,
        signal_amplitude=bundle.drive.signal_amplitude,
        bit_rate=rate,
        bits=bits,
        signal_delay=0.0,
        waveform_kind=WaveformKind.OOK_BITS,
    )
    steady = seeded_steady_state(pump_rate_from_power(drive.bias_power, bundle.laser), bundle.laser)
    n_samples = len(bits) * symbol_samples
    sim = SimConfig(
        t_end=len(bits) / rate,
        sample_dt=exp.ber_sample_dt,
        rel_tol=bundle.sim.rel_tol,
        abs_tol=bundle.sim.abs_tol,
        initial_state=LaserState(v1=steady.phi_ss, v2=steady.n2_ss),
        rng_seed=bundle.sim.rng_seed,
        max_steps=bundle.sim.max_steps,
    )
    ts = integrate(drive, bundle.laser, sim)
    _, p_comm = split(ts.p_out[:n_samples], bundle.channel.split_lambda)
    current = pd_current(p_comm, bundle.channel)
    logger.debug("cavity_waveform", rate=rate, symbols=len(bits), steps=ts.n_steps)
    return CavityWaveform(
        current=current,
        bits=pattern.astype(np.uint8),
        symbol_samples=symbol_samples,
        preamble_symbols=n_sym_per_level,
        rate=rate,
    )


def decision_threshold(wf: CavityWaveform, received: np.ndarray) -> float:
    """Midpoint of the settled training levels (second half of each run)."""
    n = wf.symbol_samples
    p = wf.preamble_symbols
    symbols = received[: wf.data_offset].reshape(-1, n).mean(axis=1)
    high = symbols[p - p // 2 : p].mean()
    low = symbols[2 * p - p // 2 : 2 * p].mean()
    return float(0.5 * (high + low))


def _cavity_batch(wf: CavityWaveform, noise_var: float, seeds: list[np.random.SeedSequence]) -> int:
    errors = 0
    for seed in seeds:
        received = add_awgn(wf.current, noise_var, seed)
        threshold = decision_threshold(wf, received)
        decoded = ook_demodulate(received[wf.data_offset :], wf.symbol_samples, threshold, wf.rate)
        errors += int(np.count_nonzero(decoded.bits != wf.bits))
    return errors


def count_errors(
    wf: CavityWaveform, noise_var: float, n_bits: int, seed: int, jobs: int = 1
) -> tuple[int, int]:
    """Bit errors over enough pattern repeats to cover n_bits; returns (errors, bits)."""
    n_batches = math.ceil(n_bits / wf.bits.size)
    children = np.random.SeedSequence(seed).spawn(n_batches)
    n_chunks = max(1, min(jobs, n_batches))
    chunks = [list(c) for c in np.array_split(np.array(children, dtype=object), n_chunks)]
    fn = functools.partial(_cavity_batch, wf, noise_var)
    errors = sum(run_points(fn, chunks, jobs, "ber"))
    return errors, n_batches * wf.bits.size


def ber_monte_carlo(
    bundle: ConfigBundle,
    n_bits: int,
    seed: int | None = None,
    *,
    rate: float | None = None,
    snr_db: float | None = None,
    noise_var: float | None = None,
    waveform: CavityWaveform | None = None,
    jobs: int = 1,
) -> BerPoint:
    """BER of the full chain: cavity, splitter, photodiode, AWGN, OOK receiver.

    The noise variance is, in order of precedence, ``noise_var``, the value
    giving ``snr_db`` against the mean data current, or channel.noise_var.
    """
    if n_bits < MIN_MONTE_CARLO_BITS:
        raise ValueError(f"n_bits must be >= {MIN_MONTE_CARLO_BITS}")
    seed = bundle.sim.rng_seed if seed is None else seed
    rate = bundle.experiment.ber_rates[0] if rate is None else rate
    wf = waveform if waveform is not None else cavity_waveform(bundle, rate)

    mean_sq = wf.mean_data_current**2
    if noise_var is None:
        noise_var = mean_sq / 10.0 ** (snr_db / 10.0) if snr_db is not None else bundle.channel.noise_var
    errors, total = count_errors(wf, noise_var, n_bits, seed, jobs)
    point = BerPoint(
        snr_db=to_db(mean_sq / noise_var) if noise_var > 0 else math.inf,
        rate=wf.rate,
        n_bits=total,
        errors=errors,
        ber=errors / total,
        ci95=binomial_ci95(errors, total),
    )
    logger.info("ber_point", rate=point.rate, snr_db=point.snr_db, errors=errors, ber=point.ber)
    return point


def ber_sweep(
    bundle: ConfigBundle,
    rates: tuple[float, ...] | None = None,
    snr_db_grid: tuple[float, ...] | None = None,
    n_bits: int | None = None,
    seed: int | None = None,
    jobs: int = 1,
) -> SweepResult:
    """BER over rates and an SNR ladder; each rate's waveform is integrated once."""
    exp = bundle.experiment
    rates = exp.ber_rates if rates is None else rates
    grid = tuple(sorted(exp.ber_snr_db if snr_db_grid is None else snr_db_grid))
    n_bits = exp.ber_n_bits if n_bits is None else n_bits
    seed = bundle.sim.rng_seed if seed is None else seed

    points: list[BerPoint] = []
    total = len(rates) * len(grid)
    for rate in rates:
        wf = cavity_waveform(bundle, rate)
        for snr_point in grid:
            points.append(
                ber_monte_carlo(bundle, n_bits, seed, snr_db=snr_point, waveform=wf, jobs=jobs)
            )
            event_bus.emit(BER_POINT_DONE, index=len(points), total=total, rate=rate, snr_db=snr_point)

    return SweepResult(
        name="ber",
        axis="snr_db",
        group="rate",
        columns={
            "snr_db": np.array([p.snr_db for p in points]),
            "rate": np.array([p.rate for p in points]),
            "n_bits": np.array([p.n_bits for p in points]),
            "errors": np.array([p.errors for p in points]),
            "ber": np.array([p.ber for p in points]),
            "ci95": np.array([p.ci95 for p in points]),
        },
        units={"snr_db": "dB", "rate": "bit/s", "n_bits": "bit", "errors": "bit", "ber": "-", "ci95": "-"},
        meta={"seed": seed, "split_lambda": bundle.channel.split_lambda},
    )
