"""Physical parameters and scenario configuration.

Scenarios are flat ``key = value`` text files with ``#`` comments::

    # reference Nd:YVO4 cavity
    laser.tau_c = 4.4e-4
    laser.sigma_cm2 = 2.8e-19
    channel.split_lambda = 0.5
    sim.initial_state.v1 = 0

Keys are dotted by section (``laser``, ``pump``, ``pv``, ``channel``,
``sim``, ``drive``, ``experiment``). A key whose last segment ends in one of
the unit suffixes below is converted to SI once, here, and stored under the
bare name. Everything past this module works in SI units only.
"""

from __future__ import annotations

import re
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Any

import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from rbcc.errors import ConfigError, ConfigParseError, ConfigValidationError

logger = structlog.get_logger(__name__)

# Calibration defaults for the entries the reference cavity leaves open
DEFAULT_GAIN_VOLUME = 5.0e-2  # m^3, puts the threshold near 20 W of pump
DEFAULT_SEED_RATE = 1.0e17  # m^-3 s^-1
# smallest Monte-Carlo BER run, bits
MIN_MONTE_CARLO_BITS = 10_000

UNIT_SUFFIXES: dict[str, Decimal] = {
    "_cm2": Decimal("1e-4"),
    "_mw": Decimal("1e-3"),
    "_nm": Decimal("1e-9"),
    "_ms": Decimal("1e-3"),
    "_us": Decimal("1e-6"),
    "_khz": Decimal("1e3"),
    "_mhz": Decimal("1e6"),
}

SECTIONS = ("laser", "pump", "pv", "channel", "sim", "drive", "experiment")

_KEY_RE = re.compile(r"^[a-z_][a-z0-9_]*(\.[a-z_][a-z0-9_]*)+$")


def _split_csv(value: Any) -> Any:
    if isinstance(value, str):
        return tuple(part.strip() for part in value.split(",") if part.strip())
    return value


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# =============================================================================
# Parameter models
# =============================================================================


class LaserParams(_Frozen):
    """Cavity and gain-medium parameters (reference cavity plus calibration defaults)."""

    tau_c: float = Field(4.4e-4, gt=0)
    tau_f: float = Field(2.3e-4, gt=0)
    c_medium: float = Field(1.67e8, gt=0)
    sigma: float = Field(2.8e-23, gt=0)
    s_spont: float = Field(DEFAULT_SEED_RATE, ge=0)
    nu_l: float = Field(2.82e14, gt=0)
    h_planck: float = Field(6.63e-34, gt=0)
    gain_volume: float = Field(DEFAULT_GAIN_VOLUME, gt=0)
    out_power_gain: float = Field(1.0, gt=0)

    @field_validator("sigma")
    @classmethod
    def _sigma_in_range(cls, v: float) -> float:
        if not 1e-25 < v < 1e-20:
            raise ValueError(f"sigma out of (1e-25, 1e-20) m^2: {v!r}")
        return v


class PumpParams(_Frozen):
    """Electrical-to-optical pump conversion."""

    eta_e: float = Field(0.8)
    i_th: float = Field(0.5, ge=0)
    lambda_emission: float = Field(808e-9, gt=0)
    q_charge: float = Field(1.602e-19, gt=0)
    c_vacuum: float = Field(3.0e8, gt=0)
    h_planck: float = Field(6.63e-34, gt=0)

    @field_validator("eta_e")
    @classmethod
    def _eta_in_range(cls, v: float) -> float:
        if not 0 < v <= 1:
            raise ValueError("eta_e out of (0,1]")
        return v


class PVParams(_Frozen):
    """Single-diode photovoltaic panel."""

    rho1: float = Field(0.5, ge=0)
    i0: float = Field(1e-9, gt=0)
    n_ideality: float = Field(1.3, gt=0)
    n_s: int = Field(1, ge=1)
    v_t: float = Field(0.025852, gt=0)
    r_s: float = Field(0.01, ge=0)
    r_sh: float = Field(100.0, gt=0)
    transmission: float = Field(1.0)
    offset_c: float = Field(0.0, ge=0)

    @field_validator("transmission")
    @classmethod
    def _transmission_in_range(cls, v: float) -> float:
        if not 0 < v <= 1:
            raise ValueError("transmission out of (0,1]")
        return v

    @property
    def diode_voltage_scale(self) -> float:
        """n_s * n * V_T, the exponent denominator of the diode law."""
        return self.n_s * self.n_ideality * self.v_t


class ChannelParams(_Frozen):
    """Photodiode and AWGN channel."""

    rho2: float = Field(0.6, gt=0)
    noise_var: float = Field(1e-3, gt=0)
    bandwidth: float = Field(1e6, gt=0)
    split_lambda: float = 0.5
    # When set, experiments recompute noise_var so that lambda=0 hits this SNR
    calibrate_snr_db: float | None = 23.54

    @field_validator("split_lambda")
    @classmethod
    def _lambda_in_range(cls, v: float) -> float:
        if not 0 <= v <= 1:
            raise ValueError("split_lambda out of [0,1]")
        return v


class LaserState(_Frozen):
    """Photon density v1 and upper-level population density v2, m^-3."""

    v1: float = 0.0
    v2: float = 0.0


class SimConfig(_Frozen):
    """Integrator horizon, sampling and tolerances."""

    t_end: float = Field(0.05, gt=0)
    sample_dt: float = Field(1e-5, gt=0)
    rel_tol: float = Field(1e-6, gt=0)
    abs_tol: float = Field(1e6, gt=0)
    initial_state: LaserState = LaserState()
    rng_seed: int = Field(0, ge=0)
    max_steps: int = Field(5_000_000, ge=1)

    @field_validator("initial_state")
    @classmethod
    def _state_non_negative(cls, v: LaserState) -> LaserState:
        if v.v1 < 0 or v.v2 < 0:
            raise ValueError("initial_state densities must be >= 0")
        return v

    @model_validator(mode="after")
    def _sampling_within_horizon(self) -> SimConfig:
        if self.sample_dt > self.t_end:
            raise ValueError("sample_dt larger than t_end")
        return self


class WaveformKind(str, Enum):
    """Shape of the modulated part of the pump drive."""

    OOK_BITS = "ook_bits"
    SINUSOID = "sinusoid"
    CONSTANT = "constant"


class PumpDrive(_Frozen):
    """Pump optical power versus time: bias plus a delayed modulated term."""

    bias_power: float = Field(30.0, ge=0)
    signal_amplitude: float = Field(0.3, ge=0)
    bit_rate: float = Field(1e3, gt=0)
    bits: str = "1010101010101010"
    signal_delay: float = Field(0.03, ge=0)
    waveform_kind: WaveformKind = WaveformKind.OOK_BITS
    sine_frequency: float = Field(1e3, gt=0)
    sine_amplitude: float = Field(0.3, ge=0)

    @field_validator("bits")
    @classmethod
    def _bits_binary(cls, v: str) -> str:
        v = v.strip()
        if v and set(v) - {"0", "1"}:
            raise ValueError("bits must contain only 0 and 1")
        return v

    @model_validator(mode="after")
    def _sine_below_bias(self) -> PumpDrive:
        if self.waveform_kind is WaveformKind.SINUSOID and self.sine_amplitude > self.bias_power:
            raise ValueError("sine_amplitude larger than bias_power drives negative pump power")
        return self


class ExperimentConfig(_Frozen):
    """Grids and knobs of the packaged experiments."""

    pump_powers: tuple[float, ...] = (10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0)
    settle_band: float = Field(0.02, gt=0, lt=1)

    freq_min: float = Field(10.0, gt=0)
    freq_max: float = Field(1e5, gt=0)
    n_freqs: int = Field(16, ge=2)
    freq_amplitude: float = Field(0.3, gt=0)
    freq_periods: int = Field(8, ge=1)
    freq_samples_per_period: int = Field(64, ge=8)

    lambda_points: int = Field(21, ge=2)

    ber_rates: tuple[float, ...] = (1e5, 2e5)
    ber_snr_db: tuple[float, ...] = (0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 23.54)
    ber_n_bits: int = Field(100_000, ge=MIN_MONTE_CARLO_BITS)
    ber_pattern_bits: int = Field(256, ge=8)
    ber_preamble_symbols: int = Field(8, ge=2)
    ber_sample_dt: float = Field(1e-7, gt=0)

    @field_validator("pump_powers", "ber_rates", "ber_snr_db", mode="before")
    @classmethod
    def _comma_separated(cls, v: Any) -> Any:
        return _split_csv(v)

    @field_validator("pump_powers")
    @classmethod
    def _powers_increasing(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if not v:
            raise ValueError("pump_powers is empty")
        if any(p < 0 for p in v):
            raise ValueError("pump_powers must be >= 0")
        if any(b <= a for a, b in zip(v, v[1:], strict=False)):
            raise ValueError("pump_powers not strictly increasing")
        return v

    @field_validator("ber_rates")
    @classmethod
    def _rates_positive(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if not v or any(r <= 0 for r in v):
            raise ValueError("ber_rates must be positive")
        return v

    @model_validator(mode="after")
    def _freq_range(self) -> ExperimentConfig:
        if self.freq_max <= self.freq_min:
            raise ValueError("freq_max must exceed freq_min")
        return self


class ConfigBundle(_Frozen):
    """Everything a run needs. Immutable, safe to hand to worker processes."""

    laser: LaserParams = LaserParams()
    pump: PumpParams = PumpParams()
    pv: PVParams = PVParams()
    channel: ChannelParams = ChannelParams()
    sim: SimConfig = SimConfig()
    drive: PumpDrive = PumpDrive()
    experiment: ExperimentConfig = ExperimentConfig()

    @model_validator(mode="after")
    def _modulation_below_bias(self) -> ConfigBundle:
        if self.experiment.freq_amplitude >= self.drive.bias_power:
            raise ValueError(
                f"experiment.freq_amplitude {self.experiment.freq_amplitude!r} W must be below "
                f"drive.bias_power {self.drive.bias_power!r} W"
            )
        return self

    def with_seed(self, seed: int) -> ConfigBundle:
        return self.model_copy(update={"sim": self.sim.model_copy(update={"rng_seed": seed})})

    def with_sim(self, **updates: Any) -> ConfigBundle:
        return self.model_copy(update={"sim": SimConfig(**{**self.sim.model_dump(), **updates})})

    def with_drive(self, **updates: Any) -> ConfigBundle:
        return self.model_copy(update={"drive": PumpDrive(**{**self.drive.model_dump(), **updates})})


# =============================================================================
# Presets
# =============================================================================


def default_table1() -> LaserParams:
    """Reference Nd:YVO4 cavity with the calibration defaults for S and V."""
    return LaserParams()


def short_cavity() -> LaserParams:
    """Underdamped cavity (tau_c << tau_f) with a threshold near 20 W.

    The reference cavity's tau_c > tau_f never rings; this preset shows relaxation
    oscillations in the hundreds of kHz and a MHz-scale modulation bandwidth.
    """
    return LaserParams(tau_c=2e-8, tau_f=2e-6, gain_volume=2e-8, s_spont=1e22)


def default_bundle() -> ConfigBundle:
    return ConfigBundle()


def short_cavity_bundle() -> ConfigBundle:
    """Short-cavity scenario with horizons and drive sized for its time scales."""
    return ConfigBundle(
        laser=short_cavity(),
        sim=SimConfig(t_end=2.2e-4, sample_dt=1e-8),
        drive=PumpDrive(bit_rate=1e5, signal_delay=4e-5),
        experiment=ExperimentConfig(
            pump_powers=(30.0, 40.0, 50.0, 60.0),
            freq_min=1e4,
            freq_max=1e7,
        ),
    )


# =============================================================================
# Parsing
# =============================================================================


def _convert_units(key: str, value: str, source: str, line_no: int) -> tuple[str, Any]:
    head, _, last = key.rpartition(".")
    for suffix, factor in UNIT_SUFFIXES.items():
        if last.endswith(suffix) and len(last) > len(suffix):
            try:
                # Decimal keeps power-of-ten scaling exact before the single rounding
                converted = float(Decimal(value) * factor)
            except InvalidOperation:
                raise ConfigParseError(source, line_no, f"{key}: not a number: {value!r}")
            return f"{head}.{last[: -len(suffix)]}", converted
    return key, value


def parse_config_text(text: str, source: str = "<string>") -> dict[str, Any]:
    """Parse config text into a nested dict of raw (string or SI float) values."""
    flat: dict[str, Any] = {}
    origin: dict[str, int] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(source, line_no, f"expected 'key = value', got {raw.strip()!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if not _KEY_RE.match(key):
            raise ConfigParseError(source, line_no, f"malformed key {key!r}")
        if key.split(".", 1)[0] not in SECTIONS:
            raise ConfigParseError(source, line_no, f"unknown section in {key!r}")
        if not value:
            raise ConfigParseError(source, line_no, f"{key}: missing value")

        key, converted = _convert_units(key, value, source, line_no)
        if isinstance(converted, str) and converted.lower() == "none":
            converted = None
        if key in flat:
            raise ConfigParseError(
                source, line_no, f"{key} already set on line {origin[key]}"
            )
        flat[key] = converted
        origin[key] = line_no

    nested: dict[str, Any] = {}
    for key, value in flat.items():
        node = nested
        *parents, leaf = key.split(".")
        for part in parents:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigParseError(source, origin[key], f"{key} conflicts with a scalar key")
            node = child
        if isinstance(node.get(leaf), dict):
            raise ConfigParseError(source, origin[key], f"{key} conflicts with a section")
        node[leaf] = value
    return nested


def _validation_messages(exc: ValidationError) -> list[str]:
    messages = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"] if not isinstance(p, int))
        msg = err["msg"].removeprefix("Value error, ")
        messages.append(f"{loc}: {msg}" if loc else msg)
    return messages


def build_bundle(data: dict[str, Any]) -> ConfigBundle:
    """Validate a nested dict into a bundle, raising ConfigValidationError."""
    try:
        return ConfigBundle.model_validate(data)
    except ValidationError as e:
        raise ConfigValidationError(_validation_messages(e))


def parse_config(text: str, source: str = "<string>") -> ConfigBundle:
    return build_bundle(parse_config_text(text, source))


def load_config(path: str | Path) -> ConfigBundle:
    """Load and validate a scenario file.

    Raises:
        ConfigError: file missing or unreadable.
        ConfigParseError: malformed line (carries the line number).
        ConfigValidationError: a value violates a parameter invariant.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")

    bundle = parse_config(text, source=str(path))
    logger.debug("config_loaded", path=str(path), defaults=defaulted_keys(bundle))
    return bundle


# =============================================================================
# Serialization
# =============================================================================


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, tuple | list):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def _flatten(prefix: str, model: BaseModel) -> list[tuple[str, str]]:
    items: list[tuple[str, str]] = []
    for name in type(model).model_fields:
        value = getattr(model, name)
        key = f"{prefix}.{name}"
        if isinstance(value, BaseModel):
            items.extend(_flatten(key, value))
        else:
            items.append((key, _format_value(value)))
    return items


def config_items(bundle: ConfigBundle) -> list[tuple[str, str]]:
    """Flat (key, value-text) pairs in SI units, in declaration order."""
    items: list[tuple[str, str]] = []
    for section in SECTIONS:
        items.extend(_flatten(section, getattr(bundle, section)))
    return items


def serialize_config(bundle: ConfigBundle) -> str:
    """Render a bundle as config text that reparses to an identical bundle."""
    return "".join(f"{key} = {value}\n" for key, value in config_items(bundle))


def defaulted_keys(bundle: ConfigBundle) -> list[str]:
    """Laser keys that fell back to defaults (the calibration choices among them)."""
    return [
        f"laser.{name}"
        for name in type(bundle.laser).model_fields
        if name not in bundle.laser.model_fields_set
    ]


def apply_seed_override(bundle: ConfigBundle, cli_seed: int | None, env_seed: int | None) -> ConfigBundle:
    """Resolve the RNG seed: CLI flag, then environment, then the file."""
    seed = cli_seed if cli_seed is not None else env_seed
    if seed is None:
        return bundle
    if seed < 0:
        raise ConfigValidationError([f"sim.rng_seed: must be >= 0, got {seed}"])
    return bundle.with_seed(seed)
