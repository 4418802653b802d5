import logging
import sys
from typing import Optional, TextIO
from colorama import init, Fore, Style
from src.core.config import settings

init(autoreset=True)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
NAMESPACE = "radwave"


class ColorLogger:
    """colorama-coloured front for one `radwave.*` logger.

    Colour codes are only added when the stream is a terminal, so logs of
    long runs redirected to a file stay plain text.
    """

    COLORS = {
        "DEBUG": Fore.BLUE,
        "INFO": Fore.GREEN,
        "WARNING": Fore.YELLOW,
        "ERROR": Fore.RED,
        "CRITICAL": Fore.RED + Style.BRIGHT,
    }

    def __init__(self, name: str, level: Optional[str] = None, stream: Optional[TextIO] = None):
        self.logger = logging.getLogger(name)
        self.logger.setLevel(level or settings.log_level)
        stream = stream or sys.stderr
        isatty = getattr(stream, "isatty", None)
        self.color = bool(isatty and isatty())

        # one console handler per module logger
        if not self.logger.handlers:
            handler = logging.StreamHandler(stream)
            handler.setFormatter(logging.Formatter(LOG_FORMAT))
            self.logger.addHandler(handler)
            self.logger.propagate = False

    def _log(self, level: str, message: str, *args, **kwargs):
        if self.color:
            message = f"{self.COLORS.get(level, '')}{message}{Style.RESET_ALL}"
        self.logger.log(getattr(logging, level), message, *args, **kwargs)

    def debug(self, message: str, *args, **kwargs):
        self._log("DEBUG", message, *args, **kwargs)

    def info(self, message: str, *args, **kwargs):
        self._log("INFO", message, *args, **kwargs)

    def warning(self, message: str, *args, **kwargs):
        self._log("WARNING", message, *args, **kwargs)

    def error(self, message: str, *args, **kwargs):
        self._log("ERROR", message, *args, **kwargs)

    def critical(self, message: str, *args, **kwargs):
        self._log("CRITICAL", message, *args, **kwargs)


def get_logger(module: str, stream: Optional[TextIO] = None) -> ColorLogger:
    """Module logger under the shared `radwave` namespace."""
    return ColorLogger(f"{NAMESPACE}.{module}", stream=stream)


def set_global_level(level: str) -> None:
    """Apply `level` to every logger created under the `radwave` namespace."""
    for name, existing in logging.Logger.manager.loggerDict.items():
        if name.startswith(NAMESPACE) and isinstance(existing, logging.Logger):
            existing.setLevel(level.upper())
