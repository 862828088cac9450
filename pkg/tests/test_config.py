"""
Tests for settings resolution: CLI > config file > environment > defaults.
"""
import json
import os
import sys
# Add root folder to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pytest

from twinchan.config import ConfigError, Settings, env_settings, read_config_file, resolve_config


def test_defaults():
    resolved = resolve_config(env={})
    assert resolved["threads"] == 1
    assert resolved["seed"] == 0
    assert resolved["log_level"] == "INFO"
    assert resolved["output_dir"] == "."


def test_layer_precedence(tmp_path):
    config_file = tmp_path / "run.json"
    config_file.write_text(json.dumps({"seed": 5, "threads": 2, "rate": 20e6}))
    env = {"TWINCHAN_SEED": "3", "TWINCHAN_THREADS": "4", "TWINCHAN_LOG_LEVEL": "debug", "OTHER": "x"}

    resolved = resolve_config({"seed": 7, "threads": None}, config_file, env=env)
    assert resolved["seed"] == 7
    assert resolved["threads"] == 2
    assert resolved["log_level"] == "DEBUG"
    assert resolved["rate"] == 20e6
    assert "other" not in resolved

    assert resolve_config(env=env)["threads"] == 4


def test_env_settings_filters_prefix():
    assert env_settings({"TWINCHAN_SEED": "1", "TWINCHAN_EMPTY": "", "PATH": "/bin"}) == {"seed": "1"}


def test_dotenv_file_is_read(tmp_path):
    dotenv = tmp_path / ".env"
    dotenv.write_text("TWINCHAN_OUTPUT_DIR=results\n")
    previous = os.environ.pop("TWINCHAN_OUTPUT_DIR", None)
    try:
        assert env_settings(dotenv_path=dotenv)["output_dir"] == "results"
    finally:
        os.environ.pop("TWINCHAN_OUTPUT_DIR", None)
        if previous is not None:
            os.environ["TWINCHAN_OUTPUT_DIR"] = previous


def test_invalid_settings_raise_config_error(tmp_path):
    with pytest.raises(ConfigError):
        resolve_config({"threads": 0}, env={})
    with pytest.raises(ConfigError):
        resolve_config({"log_level": "chatty"}, env={})

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        read_config_file(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        read_config_file(bad)


def test_settings_record():
    settings = Settings.from_resolved({"threads": "3", "log_level": "warning", "seed": None})
    assert settings.threads == 3
    assert settings.log_level == "WARNING"
    assert settings.seed == 0
