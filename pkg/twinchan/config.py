"""
config.py
---------

Run settings and their precedence: CLI flags > `--config` JSON file >
environment (a `.env` file is loaded first) > built-in defaults.
"""
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from dotenv import load_dotenv

from .errors import ValidationError
from .fields import IntegerField, TextField
from .model import BaseRecord

logger = logging.getLogger(__name__)

ENV_PREFIX = "TWINCHAN_"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class ConfigError(ValidationError):
    """Raised when a config file is unreadable or a setting is invalid."""
    pass


class Settings(BaseRecord):
    """Settings shared by every command."""
    threads = IntegerField(min_value=1, default=1)
    log_level = TextField(choices=LOG_LEVELS, default="INFO")
    seed = IntegerField(min_value=0, default=0)
    output_dir = TextField(default=".")

    @classmethod
    def from_resolved(cls, resolved: Mapping[str, Any]) -> "Settings":
        values = {k: resolved[k] for k in cls._fields if resolved.get(k) is not None}
        if "log_level" in values:
            values["log_level"] = str(values["log_level"]).upper()
        return cls(**values)


def env_settings(env: Optional[Mapping[str, str]] = None, dotenv_path=None) -> Dict[str, str]:
    """
    TWINCHAN_* variables as lower-case setting names.

    When `env` is not given, a `.env` file is loaded into the process
    environment first (existing variables win) and `os.environ` is read.
    """
    if env is None:
        load_dotenv(dotenv_path=dotenv_path, override=False)
        env = os.environ
    out = {}
    for key, value in env.items():
        if key.startswith(ENV_PREFIX) and value != "":
            out[key[len(ENV_PREFIX):].lower()] = value
    return out


def read_config_file(path) -> Dict[str, Any]:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: a config file must hold a JSON object")
    return data


def resolve_config(
    cli: Optional[Mapping[str, Any]] = None,
    config_file=None,
    env: Optional[Mapping[str, str]] = None,
    dotenv_path=None,
) -> Dict[str, Any]:
    """
    Merge the configuration layers.

    CLI values of None mean "not given" and do not override lower layers.

    Returns:
        dict: every resolved key, Settings fields included and validated.

    Raises:
        ConfigError: an unreadable config file or an invalid setting.
    """
    resolved: Dict[str, Any] = {name: f.get_default() for name, f in Settings._fields.items()}
    resolved.update(env_settings(env, dotenv_path))
    if config_file is not None:
        resolved.update(read_config_file(config_file))
    resolved.update({k: v for k, v in (cli or {}).items() if v is not None})
    try:
        settings = Settings.from_resolved(resolved)
    except ValidationError as e:
        raise ConfigError(f"invalid setting: {e}") from e
    resolved.update(settings.to_dict())
    logger.debug("Resolved config: %s", resolved)
    return resolved
