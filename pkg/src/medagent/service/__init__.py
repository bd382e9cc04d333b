"""HTTP service hosting the prediction and training conversations."""

from .config import ServiceConfig, load_config
from .http import create_app

__all__ = ["ServiceConfig", "load_config", "create_app"]
