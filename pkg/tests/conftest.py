"""Pytest configuration and fixtures."""

import pytest

from rbcc.events import event_bus
from rbcc.params import (
    ConfigBundle,
    LaserParams,
    PVParams,
    default_bundle,
    default_table1,
    short_cavity,
    short_cavity_bundle,
)


@pytest.fixture
def table1() -> LaserParams:
    """Published cavity with the calibration defaults for S and V."""
    return default_table1()


@pytest.fixture
def table1_unseeded(table1) -> LaserParams:
    """Reference cavity with the spontaneous seed switched off."""
    return table1.model_copy(update={"s_spont": 0.0})


@pytest.fixture
def short() -> LaserParams:
    """Underdamped short cavity."""
    return short_cavity()


@pytest.fixture
def bundle() -> ConfigBundle:
    return default_bundle()


@pytest.fixture
def short_bundle() -> ConfigBundle:
    return short_cavity_bundle()


@pytest.fixture
def ideal_pv() -> PVParams:
    """Single-diode panel without series resistance and with negligible shunt leakage."""
    return PVParams(r_s=0.0, r_sh=1e12)


@pytest.fixture
def config_file(tmp_path):
    """Write config text to a file and return its path."""

    def _write(text: str, name: str = "scenario.conf"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


@pytest.fixture(autouse=True)
def _clean_event_bus():
    """No subscriber leaks between tests."""
    yield
    event_bus.clear()


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch):
    """Runtime settings come only from what a test sets."""
    for name in ("RBCC_RNG_SEED", "RBCC_JOBS", "RBCC_JSON_LOGS", "RBCC_OUT_DIR"):
        monkeypatch.delenv(name, raising=False)
