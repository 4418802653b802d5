"""Admissible weight exponents for every source the pipeline integrates."""

from enum import Enum
from typing import Optional

from src.wave.fields import WeightParams
from src.wave.params import ExponentLadder, Regime


class SourceKind(str, Enum):
    POWER_P = "power_p"            # |d_t v|^p
    POWER_Q = "power_q"            # |d_t w|^q
    DIFFERENCE_G = "difference_g"  # |d_t v|^p - |d_t v*|^p
    DIFFERENCE_H = "difference_h"  # |d_t w|^q - |d_t w*|^q


def source_weights(
    lp: ExponentLadder, kind: SourceKind, step: Optional[int] = None
) -> WeightParams:
    """Weights (alpha, beta, gamma, delta) bounding a source in M_0.

    `step` is the ladder rung: G uses a_{step+1}, H uses a_{step+2}.
    It defaults to ell, the rung of the final-value problem.
    """
    p, q = lp.p, lp.q
    k1, k2 = lp.kappas.kappa1, lp.kappas.kappa2

    if lp.regime == Regime.SHORT_RANGE:
        if kind == SourceKind.POWER_P:
            return WeightParams(0.0, p, 0.0, p * k2)
        if kind == SourceKind.POWER_Q:
            return WeightParams(0.0, q, 0.0, q * k1)
        raise ValueError(f"{kind.value} sources do not occur in the short-range regime")

    j = lp.ell if step is None else step
    if kind == SourceKind.POWER_P:
        return WeightParams(0.0, p, 0.0, p * k2)
    if kind == SourceKind.POWER_Q:
        return WeightParams(0.0, q, k2 + 1.0 - q, q)
    if kind == SourceKind.DIFFERENCE_G:
        if lp.regime == Regime.P_EQUALS_TWO:
            return WeightParams(0.0, 2.0, k2 - 1.0, 1.0 + k2)
        return WeightParams(1.0, k1, k1 * lp.a[j + 1] - k1, k1 + k2)
    return WeightParams(1.0, q - 1.0, lp.a[j + 2] + 1.0 - q, q)
