"""Exponent bookkeeping: regimes, kappa pairs and the a_j / b_k / B_k ladder."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

from src.core.exceptions import (
    ConditionViolated,
    ConfigError,
    LadderDiverged,
    SubcriticalExponents,
)
from src.utils.logging import get_logger

logger = get_logger("params")

TIE_TOL = 1e-12
KAPPA_TOL = 1e-12


class Regime(str, Enum):
    SHORT_RANGE = "ShortRange"
    LONG_RANGE_SIMPLE = "LongRangeSimple"
    LONG_RANGE_ITERATED = "LongRangeIterated"
    P_EQUALS_TWO = "PEqualsTwo"


@dataclass(frozen=True)
class Exponents:
    p: float
    q: float
    regime: Regime


@dataclass(frozen=True)
class KappaPair:
    kappa1: float
    kappa2: float


@dataclass(frozen=True)
class ExponentLadder:
    """Derived exponent sequences for one (p, q, kappa) choice.

    `a` holds a_0..a_{ell+2}; `b` and `B` hold b_k, B_k for k = 0..ell+1.
    For the short-range regime `ell` is None and the sequences are empty.
    """

    exponents: Exponents
    kappas: KappaPair
    a: Tuple[float, ...] = ()
    ell: Optional[int] = None
    b: Tuple[float, ...] = ()
    B: Tuple[float, ...] = ()
    delta_shift: Optional[float] = None
    a_prime: Optional[Tuple[float, float]] = field(default=None)

    @property
    def p(self) -> float:
        return self.exponents.p

    @property
    def q(self) -> float:
        return self.exponents.q

    @property
    def regime(self) -> Regime:
        return self.exponents.regime

    @property
    def is_trivial(self) -> bool:
        return self.ell is None

    def b_at(self, k: int) -> float:
        return self.q + k * (self.p + self.q - 2.0)

    def B_at(self, k: int) -> float:
        """B_k = 1 + (p-1) b_k, with B_{-1} = 1."""
        if k == -1:
            return 1.0
        return 1.0 + (self.p - 1.0) * self.b_at(k)

    @property
    def a_next(self) -> float:
        """a_{ell+1}, the index of the final-state metric."""
        self._require_ladder()
        return self.a[self.ell + 1]

    @property
    def a_next_effective(self) -> float:
        """a_{ell+1}, or its shifted value a'_{ell+1} in the degenerate case."""
        self._require_ladder()
        if self.a_prime is not None:
            return self.a_prime[1]
        return self.a[self.ell + 1]

    @property
    def radius_power(self) -> float:
        """Power of eps giving the radius of the contraction ball."""
        if self.regime == Regime.SHORT_RANGE:
            return 1.0
        if self.regime == Regime.P_EQUALS_TWO:
            return self.q
        return (self.p - 1.0) * self.b_at(self.ell)

    def _require_ladder(self) -> None:
        if self.ell is None:
            raise ConfigError("Short-range exponents carry no final-state ladder")


def classify_regime(p: float, q: float) -> Exponents:
    """Validate (p, q) and assign the scattering regime."""
    if not (p > 1.0 and q >= p):
        raise ConfigError(f"Exponents must satisfy 1 < p <= q, got p={p}, q={q}")
    if q * (p - 1.0) <= 2.0:
        raise SubcriticalExponents(f"q(p-1) = {q * (p - 1.0):g} <= 2 for p={p}, q={q}")

    if p > 2.0:
        return Exponents(p, q, Regime.SHORT_RANGE)

    if (p - 1.0) ** 2 * (q - 1.0) <= 1.0:
        raise ConditionViolated(
            f"(p-1)^2 (q-1) = {(p - 1.0) ** 2 * (q - 1.0):g} <= 1 for p={p}, q={q}"
        )
    if p == 2.0:
        return Exponents(p, q, Regime.P_EQUALS_TWO)

    kappa1, kappa2 = p - 1.0, q * (p - 1.0) - 1.0
    regime = Regime.LONG_RANGE_SIMPLE if kappa1 * kappa2 > 1.0 else Regime.LONG_RANGE_ITERATED
    return Exponents(p, q, regime)


def compute_kappas(
    e: Exponents, override: Optional[Tuple[float, float]] = None
) -> KappaPair:
    """Decay exponents for each component; `override` applies to p = 2 only."""
    p, q = e.p, e.q
    if e.regime == Regime.SHORT_RANGE:
        kappas = KappaPair(p - 1.0, q - 1.0)
    elif e.regime == Regime.P_EQUALS_TWO:
        kappas = KappaPair(*override) if override else KappaPair((q + 2.0) / (2.0 * q), q / 2.0)
        _check_p2_kappas(kappas, q)
    else:
        kappas = KappaPair(p - 1.0, q * (p - 1.0) - 1.0)

    if override is not None and e.regime != Regime.P_EQUALS_TWO:
        raise ConfigError(f"kappa override is only meaningful for p = 2, not {e.regime.value}")
    return kappas


def _check_p2_kappas(k: KappaPair, q: float) -> None:
    if not (0.0 < k.kappa1 < 1.0 < k.kappa2 < q - 1.0):
        raise ConditionViolated(f"p=2 kappas need 0 < k1 < 1 < k2 < q-1, got {k}")
    if abs(q * k.kappa1 - (k.kappa2 + 1.0)) > KAPPA_TOL:
        raise ConditionViolated(f"p=2 kappas need q*k1 = k2 + 1, got {k}")


def closed_form_a(kappas: KappaPair, j: int) -> float:
    k1, k2 = kappas.kappa1, kappas.kappa2
    return (k2 - k1) / (1.0 - k1) - (k2 - 1.0) * k1**j / (1.0 - k1)


def build_ladder(k: KappaPair, e: Exponents) -> ExponentLadder:
    """Compute a_j, the depth ell, b_k, B_k and the degenerate shift if needed."""
    if e.regime == Regime.SHORT_RANGE:
        return ExponentLadder(exponents=e, kappas=k)

    k1, k2 = k.kappa1, k.kappa2
    limit = (k2 - k1) / (1.0 - k1)
    if limit * k1 <= 1.0 + TIE_TOL:
        raise LadderDiverged(f"a_j saturates at {limit:g} <= 1/kappa1 = {1.0 / k1:g}")

    # smallest j+1 with kappa1 * a_{j+1} > 1, from the closed form
    gap = (limit - 1.0 / k1) * (1.0 - k1) / (k2 - 1.0)
    bound = max(0, math.ceil(math.log(gap) / math.log(k1))) + 2

    a = [1.0]
    ell = 0
    while True:
        a.append(k1 * (a[-1] - 1.0) + k2)
        if k1 * a[-1] > 1.0 + TIE_TOL:
            break
        ell += 1
        if ell > bound:
            raise LadderDiverged(f"ell search exceeded bound {bound} for kappas {k}")
    a.append(k1 * (a[-1] - 1.0) + k2)

    if e.regime == Regime.P_EQUALS_TWO and ell != 0:
        raise ConditionViolated(f"p=2 requires ell = 0, kappas {k} give ell = {ell}")

    delta = None
    a_prime = None
    if ell >= 1 and abs(k1 * a[ell] - 1.0) <= TIE_TOL:
        delta = 0.5 * min(a[ell] - a[ell - 1], (k1 * a[ell + 1] - 1.0) / k1**2)
        shifted = a[ell] - delta
        a_prime = (shifted, k1 * (shifted - 1.0) + k2)
        logger.warning(f"kappa1 * a_ell = 1 (ell={ell}); shifting by delta={delta:g}")

    b = tuple(e.q + j * (e.p + e.q - 2.0) for j in range(ell + 2))
    B = tuple(1.0 + (e.p - 1.0) * bj for bj in b)
    ladder = ExponentLadder(
        exponents=e,
        kappas=k,
        a=tuple(a),
        ell=ell,
        b=b,
        B=B,
        delta_shift=delta,
        a_prime=a_prime,
    )
    logger.debug(f"ladder for p={e.p}, q={e.q}: a={ladder.a}, ell={ell}")
    return ladder


def ladder_for(
    p: float, q: float, override: Optional[Tuple[float, float]] = None
) -> ExponentLadder:
    """Classify, pick kappas and build the ladder in one call."""
    e = classify_regime(p, q)
    return build_ladder(compute_kappas(e, override), e)
