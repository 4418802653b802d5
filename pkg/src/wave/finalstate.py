"""Iterated final states: the forward ladder from final data and the inverse-side ladder."""

import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from src.core.exceptions import MembershipViolation
from src.wave.fields import DataPair, Field, GridSpec, check_Y_membership, norm_X, norm_Z
from src.wave.params import ExponentLadder
from src.wave.waveops import (
    TruncationPolicy,
    apply_K,
    apply_L,
    apply_R,
    difference_source,
    nonlinearity,
)
from src.wave.weights import SourceKind, source_weights
from src.utils.logging import get_logger

logger = get_logger("finalstate")


@dataclass(frozen=True)
class NormRecord:
    j: int
    norm_name: str
    value: float
    eps: float
    expected_power: Optional[float] = None


@dataclass(frozen=True)
class ScalingRecord:
    j: int
    norm_name: str
    value: float
    eps: float
    reference_eps: Optional[float]
    scaling_exponent: Optional[float]
    expected_power: Optional[float]

    def ratio_error(self) -> Optional[float]:
        """Relative mismatch of the observed eps-ratio against the expected power."""
        if self.scaling_exponent is None or self.expected_power is None:
            return None
        ratio = self.eps / self.reference_eps
        return abs(ratio ** (self.scaling_exponent - self.expected_power) - 1.0)

    def within(self, tol: float) -> Optional[bool]:
        err = self.ratio_error()
        return None if err is None else err <= tol


@dataclass
class Ladder:
    w: List[Field]
    v: List[Field]
    ladder_params: ExponentLadder
    eps: float
    norm_report: List[NormRecord] = field(default_factory=list)
    # w_steps[j] = w_{j+1} - w_j as integrated, likewise for v
    w_steps: List[Field] = field(default_factory=list)
    v_steps: List[Field] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.w) - 1

    @property
    def final_w(self) -> Field:
        return self.w[-1]

    @property
    def final_v(self) -> Field:
        return self.v[-1]

    def w_step(self, j: int) -> Field:
        return self.w_steps[j] if self.w_steps else self.w[j + 1] - self.w[j]

    def v_step(self, j: int) -> Field:
        return self.v_steps[j] if self.v_steps else self.v[j + 1] - self.v[j]

    def v_offset(self, j: int) -> Field:
        """v_j - v_0 summed from the steps."""
        total = Field.zeros(self.v[0].grid)
        for k in range(j):
            total = total + self.v_step(k)
        return total


class InverseLadder(NamedTuple):
    w_star: Field
    v0_star: Field
    ladder: Ladder
    # u1 - w* and u2 - v0*, the R terms removed from the solution
    w_gap: Field
    v_gap: Field


def check_data(f1: DataPair, f2: DataPair, lp: ExponentLadder) -> float:
    """Require f_j in Y_{kappa_j}(eps) and return eps."""
    eps = max(f1.eps, f2.eps)
    for name, d, kappa in (("f1", f1, lp.kappas.kappa1), ("f2", f2, lp.kappas.kappa2)):
        ok, sup = check_Y_membership(d, kappa, eps)
        if not ok:
            raise MembershipViolation(f"{name} has Y_{kappa:g} sup {sup:.4e} > eps={eps:.4e}")
    return eps


def build_final_ladder(
    f1: DataPair,
    f2: DataPair,
    lp: ExponentLadder,
    grid: GridSpec,
    trunc: TruncationPolicy,
) -> Ladder:
    eps = check_data(f1, f2, lp)
    w = [apply_K(f1, grid)]
    v = [apply_K(f2, grid)]
    dw: List[Field] = []
    dv: List[Field] = []

    if not lp.is_trivial:
        p, q = lp.p, lp.q
        dw.append(apply_L(nonlinearity(v[0], p), grid))
        w.append(w[0] + dw[0])
        hint = source_weights(lp, SourceKind.POWER_Q)
        dv.append(apply_R(nonlinearity(w[1], q), grid, trunc.with_hint(hint)))
        v.append(v[0] + dv[0])

        for j in range(1, lp.ell + 1):
            dw.append(apply_L(difference_source(v[j], v[j - 1], p), grid))
            w.append(w[j] + dw[j])
            hint = source_weights(lp, SourceKind.DIFFERENCE_H, step=j - 1)
            dv.append(apply_R(difference_source(w[j + 1], w[j], q), grid, trunc.with_hint(hint)))
            v.append(v[j] + dv[j])

    ladder = Ladder(w=w, v=v, ladder_params=lp, eps=eps, w_steps=dw, v_steps=dv)
    ladder.norm_report = ladder_norms(ladder)
    logger.info(f"built ladder of depth {ladder.depth} at eps={eps:g}")
    return ladder


def ladder_norms(ladder: Ladder) -> List[NormRecord]:
    """Per-rung norms and step-difference norms with their expected eps-powers."""
    lp = ladder.ladder_params
    k1, k2 = lp.kappas.kappa1, lp.kappas.kappa2
    eps = ladder.eps
    records = []
    for j, (w, v) in enumerate(zip(ladder.w, ladder.v)):
        records.append(NormRecord(j, "w_Z2", norm_Z(w, 2, k1), eps, 1.0))
        records.append(NormRecord(j, "v_X2", norm_X(v, 2, k2), eps, 1.0))

    if ladder.depth >= 1:
        dw, dv = ladder.w_step(0), ladder.v_step(0)
        records.append(NormRecord(0, "w_step_Z2", norm_Z(dw, 2, k1), eps, lp.p))
        records.append(NormRecord(0, "v_step_Z2", norm_Z(dv, 2, k2), eps, lp.q))

    p, q = lp.p, lp.q
    for j in range(1, ladder.depth):
        dw, dv = ladder.w_step(j), ladder.v_step(j)
        nu_w, nu_v = k1 * lp.a[j], lp.a[j + 1]
        records += [
            NormRecord(j, "w_step_Z1", norm_Z(dw, 1, nu_w), eps, lp.b_at(j - 1) + p - 1.0),
            NormRecord(j, "w_step_Z2", norm_Z(dw, 2, nu_w), eps, lp.B_at(j - 1)),
            NormRecord(j, "v_step_Z1", norm_Z(dv, 1, nu_v), eps, lp.b_at(j)),
            NormRecord(j, "v_step_Z2", norm_Z(dv, 2, nu_v), eps, lp.B_at(j - 1) + q - 1.0),
        ]
    return records


def ladder_norm_report(ladders: Sequence[Ladder]) -> List[ScalingRecord]:
    """Empirical eps-scaling exponents between ladders built at different amplitudes."""
    if len(ladders) < 2:
        raise ValueError("Scaling report needs ladders at two or more amplitudes")
    ordered = sorted(ladders, key=lambda l: l.eps, reverse=True)

    report: List[ScalingRecord] = []
    previous: Optional[Dict[Tuple[int, str], NormRecord]] = None
    for ladder in ordered:
        current = {(rec.j, rec.norm_name): rec for rec in ladder.norm_report}
        for key, rec in current.items():
            ref = previous.get(key) if previous else None
            exponent = None
            if ref is not None and rec.value > 0.0 and ref.value > 0.0 and rec.eps != ref.eps:
                exponent = math.log(ref.value / rec.value) / math.log(ref.eps / rec.eps)
            report.append(
                ScalingRecord(
                    j=rec.j,
                    norm_name=rec.norm_name,
                    value=rec.value,
                    eps=rec.eps,
                    reference_eps=ref.eps if ref else None,
                    scaling_exponent=exponent,
                    expected_power=rec.expected_power,
                )
            )
        previous = current
    return report


def build_inverse_ladder(
    u1: Field,
    u2: Field,
    phi1: DataPair,
    lp: ExponentLadder,
    grid: GridSpec,
    trunc: TruncationPolicy,
) -> InverseLadder:
    """Final-state candidates (w*, v0*) of a solved initial-value pair.

    Short range: w = u1 - R(|d_t u2|^p), v = u2 - R(|d_t u1|^q).
    Long range: v_0* = u2 - R(|d_t u1|^q), w_j* = K[phi1] + L(|d_t v_{j-1}*|^p),
    v_j* = v_0* + R(|d_t w_j*|^q), w* = u1 - R(|d_t u2|^p - |d_t v_ell*|^p).
    """
    p, q = lp.p, lp.q
    hint_q = trunc.with_hint(source_weights(lp, SourceKind.POWER_Q))
    v_gap = apply_R(nonlinearity(u1, q), grid, hint_q)
    v0_star = u2 - v_gap

    if lp.is_trivial:
        hint_p = trunc.with_hint(source_weights(lp, SourceKind.POWER_P))
        w_gap = apply_R(nonlinearity(u2, p), grid, hint_p)
        w_star = u1 - w_gap
        ladder = Ladder([w_star], [v0_star], lp, phi1.eps)
        return InverseLadder(w_star, v0_star, ladder, w_gap, v_gap)

    w0_star = apply_K(phi1, grid)
    ws, vs = [w0_star], [v0_star]
    for j in range(1, lp.ell + 1):
        ws.append(w0_star + apply_L(nonlinearity(vs[j - 1], p), grid))
        vs.append(v0_star + apply_R(nonlinearity(ws[j], q), grid, hint_q))

    hint_g = trunc.with_hint(source_weights(lp, SourceKind.DIFFERENCE_G))
    w_gap = apply_R(difference_source(u2, vs[-1], p), grid, hint_g)
    ladder = Ladder(ws, vs, lp, phi1.eps)
    return InverseLadder(u1 - w_gap, v0_star, ladder, w_gap, v_gap)
