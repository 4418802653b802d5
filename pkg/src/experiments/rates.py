"""Log-log decay fits and eps-pair scaling checks."""

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from src.core.exceptions import DegenerateSeries

# Samples below this fraction of the series peak are treated as zero
RELATIVE_FLOOR = 1e-12
MIN_SAMPLES = 5


@dataclass(frozen=True, eq=False)
class RateFit:
    times: np.ndarray
    values: np.ndarray
    slope: float
    stderr: float
    intercept: float
    window: Tuple[float, float]

    @property
    def samples(self) -> int:
        return int(self.times.size)

    def within(self, expected: float, margin: float) -> bool:
        return abs(self.slope - expected) <= margin


def fit_decay_exponent(
    times: Sequence[float],
    values: Sequence[float],
    window: Optional[Tuple[float, float]] = None,
) -> RateFit:
    """Least-squares slope of log(value) against log(1 + t) inside `window`."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape:
        raise ValueError(f"times and values differ in shape: {t.shape} vs {y.shape}")

    lo, hi = window if window is not None else (-np.inf, np.inf)
    finite = np.isfinite(y)
    peak = float(np.max(np.abs(y[finite]))) if finite.any() else 0.0
    floor = RELATIVE_FLOOR * peak
    keep = finite & (y > floor) & (y > 0.0) & (t >= lo) & (t <= hi)
    if np.count_nonzero(keep) < MIN_SAMPLES:
        raise DegenerateSeries(
            f"{np.count_nonzero(keep)} samples above {floor:g} in window {lo:g}..{hi:g}, "
            f"need {MIN_SAMPLES}"
        )

    t, y = t[keep], y[keep]
    res = linregress(np.log1p(t), np.log(y))
    return RateFit(
        times=t,
        values=y,
        slope=float(res.slope),
        stderr=float(res.stderr),
        intercept=float(res.intercept),
        window=(float(t[0]), float(t[-1])),
    )


def scaling_exponent(value: float, reference: float, eps: float, reference_eps: float) -> Optional[float]:
    """Empirical power k in value ~ eps^k between two amplitudes."""
    if value <= 0.0 or reference <= 0.0 or eps == reference_eps:
        return None
    return math.log(reference / value) / math.log(reference_eps / eps)


@dataclass(frozen=True)
class DecayCheck:
    name: str
    expected: float
    margin: float
    slope: Optional[float]
    stderr: Optional[float]
    reason: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.slope is not None and abs(self.slope - self.expected) <= self.margin

    def as_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "fitted": self.slope,
            "stderr": self.stderr,
            "expected": self.expected,
            "margin": self.margin,
            "passed": self.passed,
            "reason": self.reason,
        }


def decay_check(
    name: str,
    times: Sequence[float],
    values: Sequence[float],
    expected: float,
    window: Tuple[float, float],
    margin: float,
) -> DecayCheck:
    try:
        fit = fit_decay_exponent(times, values, window)
    except DegenerateSeries as e:
        return DecayCheck(name, expected, margin, None, None, reason=str(e))
    return DecayCheck(name, expected, margin, fit.slope, fit.stderr)


@dataclass(frozen=True)
class ScalingCheck:
    """eps vs eps/2 comparison of a quantity expected to scale like eps^power.

    A `bound` check only asks for at least that power: faster scaling passes.
    """

    name: str
    expected_power: float
    tol: float
    value: float
    reference: float
    eps: float
    reference_eps: float
    bound: bool = False

    @property
    def exponent(self) -> Optional[float]:
        return scaling_exponent(self.value, self.reference, self.eps, self.reference_eps)

    @property
    def ratio_error(self) -> Optional[float]:
        """|observed ratio / expected ratio - 1|."""
        k = self.exponent
        if k is None:
            return None
        return abs((self.eps / self.reference_eps) ** (k - self.expected_power) - 1.0)

    @property
    def passed(self) -> bool:
        err = self.ratio_error
        if err is None:
            return False
        if self.bound and self.exponent >= self.expected_power:
            return True
        return err <= self.tol

    def as_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "exponent": self.exponent,
            "expected": self.expected_power,
            "ratio_error": self.ratio_error,
            "tol": self.tol,
            "bound": self.bound,
            "passed": self.passed,
        }
