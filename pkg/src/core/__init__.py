# core/__init__.py
from .config import RunConfig, settings
from .exceptions import (
    ConfigError,
    RadwaveError,
    SolverError,
    TruncationError,
    VerificationError,
)

__all__ = [
    "RunConfig",
    "settings",
    "RadwaveError",
    "ConfigError",
    "SolverError",
    "TruncationError",
    "VerificationError",
]
