"""Unit tests for config module."""

import pytest
from pydantic import ValidationError

from rbcc.config import Settings, get_settings
from rbcc.version import __version__


class TestSettings:
    """Tests for Settings configuration."""

    def test_default_values(self):
        settings = Settings(_env_file=None)

        assert settings.rng_seed is None
        assert settings.jobs == 1
        assert settings.json_logs is False
        assert settings.out_dir == "results"

    def test_version(self):
        assert Settings(_env_file=None).version == __version__

    def test_out_path_expands_user(self):
        settings = Settings(_env_file=None, out_dir="~/runs")
        assert "~" not in str(settings.out_path)
        assert settings.out_path.name == "runs"


class TestGetSettings:
    """Tests for get_settings function."""

    def test_returns_settings_instance(self):
        assert isinstance(get_settings(), Settings)

    def test_picks_up_environment_changes(self, monkeypatch):
        assert get_settings().jobs == 1
        monkeypatch.setenv("RBCC_JOBS", "3")
        assert get_settings().jobs == 3


class TestSettingsEnvOverride:
    """Settings should be overridable via RBCC_ env vars."""

    def test_seed(self, monkeypatch):
        monkeypatch.setenv("RBCC_RNG_SEED", "42")
        assert Settings(_env_file=None).rng_seed == 42

    def test_bool(self, monkeypatch):
        monkeypatch.setenv("RBCC_JSON_LOGS", "true")
        assert Settings(_env_file=None).json_logs is True

    def test_unknown_env_vars_are_ignored(self, monkeypatch):
        monkeypatch.setenv("RBCC_TOTALLY_UNKNOWN", "whatever")
        Settings(_env_file=None)

    def test_negative_seed_rejected(self, monkeypatch):
        monkeypatch.setenv("RBCC_RNG_SEED", "-1")
        with pytest.raises(ValidationError):
            Settings(_env_file=None)

    def test_zero_jobs_rejected(self, monkeypatch):
        monkeypatch.setenv("RBCC_JOBS", "0")
        with pytest.raises(ValidationError):
            Settings(_env_file=None)
