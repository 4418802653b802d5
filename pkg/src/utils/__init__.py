# utils/__init__.py

from .factory import Factory
from .logging import ColorLogger, get_logger

__all__ = ["Factory", "ColorLogger", "get_logger"]
