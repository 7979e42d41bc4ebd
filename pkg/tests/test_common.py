"""Tests for settings, logging and named random streams"""

import io
import json
import logging

import numpy as np
import pytest
from stnlab_common.config import Settings, get_settings
from stnlab_common.logging import setup_logging
from stnlab_common.seeding import stream, stream_key


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()
    logging.getLogger().handlers.clear()


def test_settings_from_environment(monkeypatch, tmp_path):
    """Test STNLAB_* variables populate Settings"""
    monkeypatch.setenv("STNLAB_DATA", str(tmp_path))
    monkeypatch.setenv("STNLAB_WORKERS", "4")
    settings = Settings()
    assert settings.data == tmp_path
    assert settings.workers == 4
    assert settings.batch_size_eval == 256


def test_json_logging_includes_extras(monkeypatch):
    """Test structured log lines carry extra fields"""
    monkeypatch.setenv("STNLAB_LOG_FORMAT", "json")
    buffer = io.StringIO()
    setup_logging("stnlab", log_level="INFO", stream=buffer)
    logging.getLogger("stnlab.test").info("Epoch complete", extra={"epoch": 3, "loss": 0.5})
    entry = json.loads(buffer.getvalue().strip().splitlines()[-1])
    assert entry["message"] == "Epoch complete"
    assert entry["service"] == "stnlab"
    assert entry["epoch"] == 3
    assert entry["loss"] == 0.5


def test_text_logging_and_level(monkeypatch):
    """Test the text format and level filtering"""
    monkeypatch.setenv("STNLAB_LOG_FORMAT", "text")
    buffer = io.StringIO()
    setup_logging("stnlab", log_level="WARNING", stream=buffer)
    logging.getLogger("stnlab.test").info("hidden")
    logging.getLogger("stnlab.test").warning("shown")
    output = buffer.getvalue()
    assert "hidden" not in output
    assert "stnlab - stnlab.test - WARNING - shown" in output


def test_streams_are_keyed_by_name():
    """Test streams depend on seed and name, not creation order"""
    first = stream(3, "shuffle").integers(0, 1 << 30, size=4)
    stream(3, "augment/train").integers(0, 10)
    second = stream(3, "shuffle").integers(0, 1 << 30, size=4)
    np.testing.assert_array_equal(first, second)
    assert not np.array_equal(first, stream(4, "shuffle").integers(0, 1 << 30, size=4))
    assert not np.array_equal(first, stream(3, "augment/test").integers(0, 1 << 30, size=4))
    assert stream_key("shuffle") == stream_key("shuffle")
