"""Tests for scenario parsing, validation and serialization (rbcc/params.py)."""

from pathlib import Path

import pytest

from rbcc.errors import ConfigError, ConfigParseError, ConfigValidationError
from rbcc.params import (
    DEFAULT_GAIN_VOLUME,
    DEFAULT_SEED_RATE,
    ConfigBundle,
    LaserParams,
    PumpDrive,
    SimConfig,
    WaveformKind,
    apply_seed_override,
    config_items,
    default_bundle,
    defaulted_keys,
    load_config,
    parse_config,
    parse_config_text,
    serialize_config,
    short_cavity_bundle,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


class TestParseConfigText:
    """Tests for the key = value reader."""

    def test_comments_and_blank_lines_ignored(self):
        data = parse_config_text("# header\n\nlaser.tau_c = 1e-3  # trailing\n")
        assert data == {"laser": {"tau_c": "1e-3"}}

    def test_nested_keys(self):
        data = parse_config_text("sim.initial_state.v1 = 5\nsim.initial_state.v2 = 7\n")
        assert data["sim"]["initial_state"] == {"v1": "5", "v2": "7"}

    def test_unit_suffix_converted_exactly(self):
        data = parse_config_text("laser.sigma_cm2 = 2.8e-19\nlaser.tau_c_us = 440\n")
        assert data["laser"]["sigma"] == 2.8e-23
        assert data["laser"]["tau_c"] == 4.4e-4

    def test_frequency_suffixes(self):
        data = parse_config_text("channel.bandwidth_mhz = 1\ndrive.bit_rate_khz = 100\n")
        assert data["channel"]["bandwidth"] == 1e6
        assert data["drive"]["bit_rate"] == 1e5

    def test_none_value(self):
        data = parse_config_text("channel.calibrate_snr_db = none\n")
        assert data["channel"]["calibrate_snr_db"] is None

    def test_missing_equals_reports_line(self):
        with pytest.raises(ConfigParseError) as exc:
            parse_config_text("laser.tau_c = 1\nlaser.tau_f 2\n", source="bad.conf")
        assert exc.value.line_no == 2
        assert str(exc.value).startswith("bad.conf:2:")

    def test_unknown_section(self):
        with pytest.raises(ConfigParseError, match="unknown section"):
            parse_config_text("cavity.tau_c = 1\n")

    def test_malformed_key(self):
        with pytest.raises(ConfigParseError, match="malformed key"):
            parse_config_text("laser..tau_c = 1\n")

    def test_duplicate_key_names_first_line(self):
        with pytest.raises(ConfigParseError, match="already set on line 1"):
            parse_config_text("laser.tau_c = 1\nlaser.tau_c_ms = 1\n")

    def test_empty_value(self):
        with pytest.raises(ConfigParseError, match="missing value"):
            parse_config_text("laser.tau_c =\n")

    def test_bad_number_with_suffix(self):
        with pytest.raises(ConfigParseError, match="not a number"):
            parse_config_text("laser.tau_c_us = fast\n")


class TestValidation:
    """Tests for parameter invariants surfaced as ConfigValidationError."""

    def test_sigma_out_of_range_named(self):
        with pytest.raises(ConfigValidationError, match="sigma out of"):
            parse_config("laser.sigma = 1e-10\n")

    def test_split_lambda_out_of_range_named(self):
        with pytest.raises(ConfigValidationError, match=r"split_lambda out of \[0,1\]"):
            parse_config("channel.split_lambda = 1.5\n")

    def test_eta_e_out_of_range(self):
        with pytest.raises(ConfigValidationError, match="eta_e"):
            parse_config("pump.eta_e = 0\n")

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigValidationError, match="laser.tau_x"):
            parse_config("laser.tau_x = 1\n")

    def test_negative_time_constant(self):
        with pytest.raises(ConfigValidationError, match="laser.tau_c"):
            parse_config("laser.tau_c = -1\n")

    def test_negative_initial_state(self):
        with pytest.raises(ConfigValidationError, match="initial_state"):
            parse_config("sim.initial_state.v1 = -1\n")

    def test_sample_dt_beyond_horizon(self):
        with pytest.raises(ConfigValidationError, match="sample_dt"):
            parse_config("sim.t_end = 1e-3\nsim.sample_dt = 1e-2\n")

    def test_bits_must_be_binary(self):
        with pytest.raises(ConfigValidationError, match="bits"):
            parse_config("drive.bits = 1012\n")

    def test_pump_powers_must_increase(self):
        with pytest.raises(ConfigValidationError, match="strictly increasing"):
            parse_config("experiment.pump_powers = 30, 20\n")

    def test_sine_amplitude_below_bias(self):
        with pytest.raises(ValueError):
            PumpDrive(bias_power=1.0, waveform_kind=WaveformKind.SINUSOID, sine_amplitude=2.0)

    def test_ber_run_needs_enough_bits(self):
        with pytest.raises(ConfigValidationError, match="experiment.ber_n_bits"):
            parse_config("experiment.ber_n_bits = 2000\n")
        assert parse_config("experiment.ber_n_bits = 10000\n").experiment.ber_n_bits == 10_000

    def test_modulation_amplitude_below_bias(self):
        with pytest.raises(ConfigValidationError, match="freq_amplitude"):
            parse_config("drive.bias_power = 25\nexperiment.freq_amplitude = 25\n")
        with pytest.raises(ConfigValidationError, match="freq_amplitude"):
            parse_config("drive.bias_power = 0\n")

    def test_messages_drop_pydantic_prefix(self):
        with pytest.raises(ConfigValidationError) as exc:
            parse_config("channel.split_lambda = 2\n")
        assert all("Value error" not in m for m in exc.value.messages)


class TestDefaults:
    """Tests for calibration defaults and presets."""

    def test_table1_defaults(self):
        laser = LaserParams()
        assert laser.tau_c == 4.4e-4
        assert laser.tau_f == 2.3e-4
        assert laser.sigma == 2.8e-23
        assert laser.gain_volume == DEFAULT_GAIN_VOLUME
        assert laser.s_spont == DEFAULT_SEED_RATE

    def test_defaulted_keys_lists_blank_entries(self):
        bundle = parse_config("laser.tau_c = 4.4e-4\n")
        keys = defaulted_keys(bundle)
        assert "laser.gain_volume" in keys
        assert "laser.s_spont" in keys
        assert "laser.tau_c" not in keys

    def test_comma_separated_grid(self):
        bundle = parse_config("experiment.pump_powers = 30, 40,50\n")
        assert bundle.experiment.pump_powers == (30.0, 40.0, 50.0)

    def test_with_sim_revalidates(self):
        with pytest.raises(ValueError):
            default_bundle().with_sim(t_end=-1.0)

    def test_bundle_is_frozen(self):
        bundle = default_bundle()
        with pytest.raises(ValueError):
            bundle.sim = SimConfig()


class TestSerialization:
    """Tests for serialize_config."""

    def test_reparse_is_identical(self):
        bundle = short_cavity_bundle().with_seed(17)
        assert parse_config(serialize_config(bundle)) == bundle

    def test_si_keys_only(self):
        text = serialize_config(default_bundle())
        assert "_cm2" not in text and "_us" not in text
        assert "laser.sigma = 2.8e-23\n" in text

    def test_items_follow_section_order(self):
        keys = [k for k, _ in config_items(default_bundle())]
        assert keys[0].startswith("laser.")
        assert keys[-1].startswith("experiment.")
        assert "sim.initial_state.v1" in keys


class TestLoadConfig:
    """Tests for load_config."""

    def test_missing_file(self, tmp_path):
        path = tmp_path / "nope.conf"
        with pytest.raises(ConfigError, match=str(path)):
            load_config(path)

    def test_parse_error_carries_path(self, config_file):
        path = config_file("laser.tau_c = 1\nbroken line\n")
        with pytest.raises(ConfigParseError) as exc:
            load_config(path)
        assert exc.value.source == str(path)
        assert exc.value.line_no == 2

    def test_shipped_table1_matches_defaults(self):
        bundle = load_config(CONFIGS / "table1.conf")
        assert bundle.laser.model_copy(update={"out_power_gain": 1.0}) == LaserParams()
        assert bundle.drive == PumpDrive()

    def test_readme_full_example_is_the_defaults(self):
        readme = (CONFIGS.parent / "README.md").read_text(encoding="utf-8")
        section = readme.split("### Full example", 1)[1]
        block = section.split("```ini\n", 1)[1].split("```", 1)[0]
        bundle = parse_config(block)
        assert bundle == ConfigBundle()
        assert {key for key, _ in config_items(bundle)} <= {
            line.split("=", 1)[0].strip() for line in block.splitlines() if "=" in line
        }

    def test_shipped_short_cavity_matches_preset(self):
        bundle = load_config(CONFIGS / "short_cavity.conf")
        preset = short_cavity_bundle()
        assert bundle.laser == preset.laser
        assert bundle.sim == preset.sim
        assert bundle.drive == preset.drive
        assert bundle.experiment == preset.experiment


class TestSeedOverride:
    """Tests for seed precedence: flag, then environment, then file."""

    def test_file_seed_kept(self):
        bundle = ConfigBundle().with_seed(3)
        assert apply_seed_override(bundle, None, None).sim.rng_seed == 3

    def test_env_over_file(self):
        bundle = ConfigBundle().with_seed(3)
        assert apply_seed_override(bundle, None, 5).sim.rng_seed == 5

    def test_flag_over_env(self):
        bundle = ConfigBundle().with_seed(3)
        assert apply_seed_override(bundle, 9, 5).sim.rng_seed == 9

    def test_negative_seed(self):
        with pytest.raises(ConfigValidationError, match="rng_seed"):
            apply_seed_override(ConfigBundle(), -1, None)
