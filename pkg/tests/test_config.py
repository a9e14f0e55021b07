"""Tests for config.py — environment overrides, validation, thread caps and
the rotating log file."""

import logging
import os

import pytest

import config
from config import Settings, cap_threads, load_settings, setup_logging
from errors import ConfigError


def test_defaults_without_environment():
    settings = load_settings()
    assert settings == Settings()
    assert settings.tol == 1e-9
    assert settings.denominator == 2 ** 32
    assert settings.threads is None


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("MF_TOL", "1e-12")
    monkeypatch.setenv("MF_DENOMINATOR", "4096")
    monkeypatch.setenv("MF_CELL_CAP", "1e6")
    monkeypatch.setenv("MF_THREADS", "2")
    settings = load_settings()
    assert settings.tol == 1e-12
    assert settings.denominator == 4096
    assert settings.cell_cap == 1_000_000
    assert isinstance(settings.cell_cap, int)
    assert settings.threads == 2


def test_blank_values_fall_back_to_defaults(monkeypatch):
    monkeypatch.setenv("MF_ENUM_GUARD", "  ")
    assert load_settings().enum_guard == config.ENUM_GUARD


@pytest.mark.parametrize("var,value", [
    ("MF_TOL", "tight"),
    ("MF_TOL", "0"),
    ("MF_NORM_TOL", "-1e-9"),
    ("MF_DENOMINATOR", "0"),
    ("MF_CELL_CAP", "many"),
    ("MF_THREADS", "0"),
    ("MF_ENUM_GUARD", "0"),
])
def test_invalid_settings_raise(monkeypatch, var, value):
    monkeypatch.setenv(var, value)
    with pytest.raises(ConfigError):
        load_settings()


def test_flag_overrides_skip_none():
    settings = Settings().with_overrides(tol=1e-6, denominator=None)
    assert settings.tol == 1e-6
    assert settings.denominator == config.DENOMINATOR
    with pytest.raises(ConfigError):
        Settings().with_overrides(denominator=0)


def test_cap_threads_exports_every_variable(monkeypatch):
    # setenv first so monkeypatch restores whatever cap_threads writes
    for var in config.THREAD_ENV_VARS:
        monkeypatch.setenv(var, "1")
    cap_threads(None)
    assert all(os.environ[var] == "1" for var in config.THREAD_ENV_VARS)
    cap_threads(3)
    assert all(os.environ[var] == "3" for var in config.THREAD_ENV_VARS)


# ── Logging ──────────────────────────────────────────────────────────

def test_setup_logging_writes_mf_log(tmp_path):
    logger = setup_logging()
    logging.getLogger("mf.test").warning("hello from the test")
    for handler in logger.handlers:
        handler.flush()
    assert "hello from the test" in (tmp_path / "logs" / "mf.log").read_text()


def test_setup_logging_replaces_handlers(tmp_path):
    setup_logging(log_dir=tmp_path / "a")
    logger = setup_logging(verbose=True, log_dir=tmp_path / "b")
    assert len(logger.handlers) == 2
    console = [h for h in logger.handlers if type(h) is logging.StreamHandler]
    assert console[0].level == logging.INFO
