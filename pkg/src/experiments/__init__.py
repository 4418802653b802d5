# experiments/__init__.py
from .cli import main
from .rates import RateFit, fit_decay_exponent
from .runner import run

__all__ = ["main", "run", "RateFit", "fit_decay_exponent"]
