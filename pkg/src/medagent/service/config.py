"""Service configuration: one JSON file, overridable per key from the
environment with the MEDAGENT_ prefix (e.g. MEDAGENT_PORT=9000)."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

from ..errors import AgentError

ENV_PREFIX = "MEDAGENT_"
UPLOAD_LIMIT_DEFAULT = 512000  # "500kb" read as 500 * 1024 bytes
DEFAULT_TRAINING_SEED = 271828


class ConfigError(AgentError):
    code = "config_error"


def _default_model_dir() -> str:
    return str(Path(__file__).resolve().parent.parent / "assets" / "models")


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    model_dir: str = ""
    survey_log: str = "survey_log.ndjson"
    grid_cap: int = 4096
    workers: int = 2              # threads per grid-search run
    job_slots: int = 4            # concurrent training jobs
    upload_limit: int = UPLOAD_LIMIT_DEFAULT
    session_ttl_seconds: int = 1800
    training_seed: int = DEFAULT_TRAINING_SEED
    static_dir: str = ""          # optional directory of UI files served at /

    def __post_init__(self):
        if not self.model_dir:
            self.model_dir = _default_model_dir()


_INT_FIELDS = {f.name for f in fields(ServiceConfig) if f.type == "int"}


def load_config(path: str | os.PathLike | None = None,
                env: dict | None = None) -> ServiceConfig:
    """Read the JSON config file (optional), then apply env overrides."""
    env = os.environ if env is None else env
    values: dict = {}
    known = {f.name for f in fields(ServiceConfig)}

    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values.update(doc)

    for name in known:
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            values[name] = env[env_key]

    for name in list(values):
        if name in _INT_FIELDS and not isinstance(values[name], int):
            try:
                values[name] = int(values[name])
            except (TypeError, ValueError):
                raise ConfigError(f"config key {name} must be an integer, "
                                  f"got {values[name]!r}")
    try:
        return ServiceConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from e
