"""Picard solves of the final-value, generalized final-value and initial-value systems."""

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

from src.core.config import SolverConfig
from src.core.exceptions import ConfigError, LeftDomain, NoContraction, SolverError
from src.wave.fields import DataPair, Field, GridSpec, make_profile, norm_X, norm_Z
from src.wave.finalstate import Ladder, build_final_ladder, check_data
from src.wave.params import ExponentLadder, Regime
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

logger = get_logger("solver")

Pair = Tuple[Field, Field]


class MetricKind(str, Enum):
    SHORT_RANGE = "ShortRange"
    LONG_RANGE = "LongRange"
    P_EQUALS_TWO = "PEqualsTwo"


class ProblemKind(str, Enum):
    FVP_SHORT = "fvp_short"
    FVP_LONG = "fvp_long"
    IVP = "ivp"


class Termination(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class MetricSpec:
    kind: MetricKind
    ladder: ExponentLadder
    radius: float

    @property
    def indices(self) -> Tuple[float, float]:
        """Z-norm indices of the two components."""
        k1, k2 = self.ladder.kappas.kappa1, self.ladder.kappas.kappa2
        if self.kind == MetricKind.SHORT_RANGE:
            return (k1, k2)
        if self.kind == MetricKind.P_EQUALS_TWO:
            return (k2, k2)
        a = self.ladder.a_next
        return (k1 * a, a)


def metric_for(
    lp: ExponentLadder, eps: float, kind: Optional[MetricKind] = None
) -> MetricSpec:
    if kind is None:
        kind = {
            Regime.SHORT_RANGE: MetricKind.SHORT_RANGE,
            Regime.P_EQUALS_TWO: MetricKind.P_EQUALS_TWO,
        }.get(lp.regime, MetricKind.LONG_RANGE)
    power = 1.0 if kind == MetricKind.SHORT_RANGE else lp.radius_power
    return MetricSpec(kind=kind, ladder=lp, radius=eps**power)


def metric_d(a: Pair, b: Pair, m: MetricSpec) -> float:
    nu1, nu2 = m.indices
    d1 = a[0] - b[0]
    d2 = a[1] - b[1]
    value = norm_Z(d1, 2, nu1) + norm_Z(d2, 2, nu2)
    if m.kind == MetricKind.LONG_RANGE:
        power = m.ladder.p - 1.0
        value += norm_Z(d1, 1, nu1) ** power + norm_Z(d2, 1, nu2) ** power
    return value


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    distance: float
    anchor_distance: float
    ratio: Optional[float]


@dataclass
class IterationTrace:
    radius: float
    tol: float
    ratio_bound: float
    # distance of the anchor from zero; tol is relative to it
    scale: float = 1.0
    records: List[IterationRecord] = field(default_factory=list)
    reason: Optional[Termination] = None
    norms: Dict[str, float] = field(default_factory=dict)

    @property
    def threshold(self) -> float:
        return self.tol * self.scale

    @property
    def converged(self) -> bool:
        return self.reason == Termination.CONVERGED

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def final_distance(self) -> float:
        return self.records[-1].distance if self.records else 0.0

    def ratios_after_first(self) -> List[float]:
        return [rec.ratio for rec in self.records[1:] if rec.ratio is not None]

    @property
    def max_ratio(self) -> Optional[float]:
        ratios = self.ratios_after_first()
        return max(ratios) if ratios else None

    @property
    def contraction_certified(self) -> bool:
        return all(r <= self.ratio_bound for r in self.ratios_after_first())

    @property
    def is_trivial(self) -> bool:
        return all(rec.distance == 0.0 for rec in self.records)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "distance", "ratio"])
            for rec in self.records:
                ratio = "" if rec.ratio is None else repr(rec.ratio)
                writer.writerow([rec.iteration, repr(rec.distance), ratio])


def _zero_pair(anchor: Pair) -> Pair:
    return Field.zeros(anchor[0].grid), Field.zeros(anchor[1].grid)


@dataclass
class FixedPointProblem:
    """u = anchor + correction(u) in the metric of `metric`."""

    kind: ProblemKind
    anchor: Pair
    correction: Callable[[Pair], Pair]
    metric: MetricSpec
    eps: float

    def compose(self, corrections: Pair) -> Pair:
        return self.anchor[0] + corrections[0], self.anchor[1] + corrections[1]

    def step(self, pair: Pair) -> Pair:
        return self.compose(self.correction(pair))

    def defect(self, pair: Pair, corrections: Optional[Pair] = None) -> float:
        """Distance moved by one more application of the map.

        With the current corrections given, the distance is taken between
        corrections and never between the larger composed fields.
        """
        if corrections is None:
            return metric_d(self.step(pair), pair, self.metric)
        return metric_d(self.correction(pair), corrections, self.metric)


class Solution(NamedTuple):
    u1: Field
    u2: Field
    trace: IterationTrace
    problem: FixedPointProblem
    # u - anchor, accumulated without cancellation against the anchor
    corrections: Pair


class PicardResult(NamedTuple):
    pair: Pair
    corrections: Pair
    trace: IterationTrace


def picard_iterate(
    problem: FixedPointProblem, settings: SolverConfig, confine: bool = False
) -> PicardResult:
    """Iterate the corrections from zero until successive ones are within tol.

    The tolerance is relative to the anchor's distance from zero. A non-zero
    first update always gets a second sweep, so each component sees the
    other's correction at least once. With `confine`, iterates must stay
    within left_domain_factor * radius of the anchor.
    """
    m = problem.metric
    zero = _zero_pair(problem.anchor)
    trace = IterationTrace(
        radius=m.radius,
        tol=settings.tol,
        ratio_bound=settings.ratio_bound,
        scale=metric_d(problem.anchor, zero, m),
    )
    current = zero
    previous: Optional[float] = None
    streak = 0

    for k in range(1, settings.max_iters + 1):
        nxt = problem.correction(problem.compose(current))
        dist = metric_d(nxt, current, m)
        anchor_dist = metric_d(nxt, zero, m)
        ratio = dist / previous if previous else None
        trace.records.append(IterationRecord(k, dist, anchor_dist, ratio))
        logger.debug(f"{problem.kind.value} iter {k}: d={dist:.3e} anchor={anchor_dist:.3e} ratio={ratio}")

        if not math.isfinite(dist):
            trace.reason = Termination.DIVERGED
            raise NoContraction(f"non-finite distance at iteration {k}", trace=trace)
        if confine and anchor_dist > settings.left_domain_factor * m.radius:
            trace.reason = Termination.DIVERGED
            raise LeftDomain(
                f"anchor distance {anchor_dist:.3e} exceeds {settings.left_domain_factor:g} x radius "
                f"{m.radius:.3e} at iteration {k}",
                trace=trace,
            )

        current = nxt
        if dist <= trace.threshold and (k > 1 or dist == 0.0):
            trace.reason = Termination.CONVERGED
            break

        streak = streak + 1 if ratio is not None and ratio > settings.divergence_ratio else 0
        if streak >= 2:
            trace.reason = Termination.DIVERGED
            raise NoContraction(
                f"ratios above {settings.divergence_ratio:g} twice in a row at iteration {k}",
                trace=trace,
            )
        previous = dist
    else:
        trace.reason = Termination.MAX_ITERS
        logger.warning(
            f"{problem.kind.value}: no convergence in {settings.max_iters} iterations "
            f"(last distance {trace.final_distance:.3e})"
        )

    logger.info(
        f"{problem.kind.value}: {trace.reason.value} after {trace.iterations} iterations, "
        f"distance {trace.final_distance:.3e}"
    )
    return PicardResult(problem.compose(current), current, trace)


def solution_norms(u1: Field, u2: Field, lp: ExponentLadder, eps: float) -> Dict[str, float]:
    """Norms of the solution in its natural spaces, next to the 2 eps reference."""
    k1, k2 = lp.kappas.kappa1, lp.kappas.kappa2
    if lp.regime == Regime.SHORT_RANGE:
        n1 = norm_X(u1, 2, k1)
    else:
        n1 = norm_Z(u1, 2, k1)
    return {"u1": n1, "u2": norm_X(u2, 2, k2), "two_eps": 2.0 * eps}


def _finish(
    problem: FixedPointProblem, lp: ExponentLadder, settings: SolverConfig, confine: bool = False
) -> Solution:
    (u1, u2), corrections, trace = picard_iterate(problem, settings, confine=confine)
    trace.norms = solution_norms(u1, u2, lp, problem.eps)
    return Solution(u1, u2, trace, problem, corrections)


def solve_fvp_short(
    f1: DataPair,
    f2: DataPair,
    lp: ExponentLadder,
    grid: GridSpec,
    trunc: TruncationPolicy,
    settings: SolverConfig,
) -> Solution:
    """u1 = K[f1] + R(|d_t u2|^p), u2 = K[f2] + R(|d_t u1|^q) for p > 2."""
    if lp.regime != Regime.SHORT_RANGE:
        raise ConfigError(f"Final-value problem without ladder needs p > 2, got {lp.regime.value}")
    eps = check_data(f1, f2, lp)
    p, q = lp.p, lp.q
    w0, v0 = apply_K(f1, grid), apply_K(f2, grid)
    trunc_p = trunc.with_hint(source_weights(lp, SourceKind.POWER_P))
    trunc_q = trunc.with_hint(source_weights(lp, SourceKind.POWER_Q))

    def correction(pair: Pair) -> Pair:
        u1, u2 = pair
        return (
            apply_R(nonlinearity(u2, p), grid, trunc_p),
            apply_R(nonlinearity(u1, q), grid, trunc_q),
        )

    problem = FixedPointProblem(ProblemKind.FVP_SHORT, (w0, v0), correction, metric_for(lp, eps), eps)
    return _finish(problem, lp, settings)


def solve_fvp_long(
    ladder: Ladder,
    lp: ExponentLadder,
    grid: GridSpec,
    trunc: TruncationPolicy,
    settings: SolverConfig,
) -> Solution:
    """u1 = w_{l+1} + R(G(u2, v_l)), u2 = v_{l+1} + R(H(u1, w_{l+1}))."""
    if lp.is_trivial:
        raise ConfigError("Generalized final-value problem needs a long-range ladder")
    ell = lp.ell
    p, q = lp.p, lp.q
    w_top, v_top, v_ell = ladder.w[ell + 1], ladder.v[ell + 1], ladder.v[ell]
    trunc_g = trunc.with_hint(source_weights(lp, SourceKind.DIFFERENCE_G))
    trunc_h = trunc.with_hint(source_weights(lp, SourceKind.DIFFERENCE_H))

    def correction(pair: Pair) -> Pair:
        u1, u2 = pair
        return (
            apply_R(difference_source(u2, v_ell, p), grid, trunc_g),
            apply_R(difference_source(u1, w_top, q), grid, trunc_h),
        )

    eps = ladder.eps
    problem = FixedPointProblem(ProblemKind.FVP_LONG, (w_top, v_top), correction, metric_for(lp, eps), eps)
    return _finish(problem, lp, settings, confine=True)


def solve_ivp(
    phi1: DataPair,
    phi2: DataPair,
    lp: ExponentLadder,
    grid: GridSpec,
    settings: SolverConfig,
) -> Solution:
    """u1 = K[phi1] + L(|d_t u2|^p), u2 = K[phi2] + L(|d_t u1|^q)."""
    eps = check_data(phi1, phi2, lp)
    p, q = lp.p, lp.q
    a1, a2 = apply_K(phi1, grid), apply_K(phi2, grid)

    def correction(pair: Pair) -> Pair:
        u1, u2 = pair
        return apply_L(nonlinearity(u2, p), grid), apply_L(nonlinearity(u1, q), grid)

    metric = metric_for(lp, eps, MetricKind.SHORT_RANGE)
    problem = FixedPointProblem(ProblemKind.IVP, (a1, a2), correction, metric, eps)
    return _finish(problem, lp, settings)


def fixed_point_defect(solution: Solution) -> float:
    return solution.problem.defect((solution.u1, solution.u2), solution.corrections)


@dataclass(frozen=True)
class ProbeOutcome:
    eps: float
    contracted: bool
    trivial: bool
    iterations: int
    max_ratio: Optional[float]
    error: Optional[str] = None


@dataclass
class ProbeResult:
    problem: ProblemKind
    estimate: Optional[float]
    outcomes: List[ProbeOutcome]
    anomaly: bool
    unconstrained: bool


DataFactory = Callable[[float], Tuple[DataPair, DataPair]]


def solve_problem(
    kind: ProblemKind,
    f1: DataPair,
    f2: DataPair,
    lp: ExponentLadder,
    grid: GridSpec,
    trunc: TruncationPolicy,
    settings: SolverConfig,
) -> Solution:
    if kind == ProblemKind.FVP_SHORT:
        return solve_fvp_short(f1, f2, lp, grid, trunc, settings)
    if kind == ProblemKind.FVP_LONG:
        ladder = build_final_ladder(f1, f2, lp, grid, trunc)
        return solve_fvp_long(ladder, lp, grid, trunc, settings)
    return solve_ivp(f1, f2, lp, grid, settings)


def contraction_probe(
    problem: ProblemKind,
    eps_grid: Sequence[float],
    lp: ExponentLadder,
    grid: GridSpec,
    trunc: TruncationPolicy,
    settings: SolverConfig,
    family: str = "gaussian",
    data_factory: Optional[DataFactory] = None,
) -> ProbeResult:
    """Largest probed eps whose post-first contraction ratios stay within ratio_bound."""
    k1, k2 = lp.kappas.kappa1, lp.kappas.kappa2

    def default_factory(eps: float) -> Tuple[DataPair, DataPair]:
        return make_profile(family, k1, eps, grid), make_profile(family, k2, eps, grid)

    factory = data_factory or default_factory
    outcomes: List[ProbeOutcome] = []
    for eps in sorted(eps_grid, reverse=True):
        f1, f2 = factory(eps)
        try:
            trace = solve_problem(problem, f1, f2, lp, grid, trunc, settings).trace
            outcomes.append(
                ProbeOutcome(
                    eps=eps,
                    contracted=trace.converged and trace.contraction_certified,
                    trivial=trace.is_trivial,
                    iterations=trace.iterations,
                    max_ratio=trace.max_ratio,
                )
            )
        except SolverError as e:
            trace = e.trace
            outcomes.append(
                ProbeOutcome(
                    eps=eps,
                    contracted=False,
                    trivial=False,
                    iterations=trace.iterations if trace else 0,
                    max_ratio=trace.max_ratio if trace else None,
                    error=str(e),
                )
            )

    passing = [o.eps for o in outcomes if o.contracted]
    estimate = max(passing) if passing else None
    anomaly = estimate is not None and any(
        not o.contracted for o in outcomes if o.eps < estimate
    )
    if anomaly:
        logger.warning(f"{problem.value}: contraction is not monotone in eps below {estimate:g}")
    unconstrained = bool(outcomes) and all(o.trivial for o in outcomes)
    return ProbeResult(problem, estimate, outcomes, anomaly, unconstrained)
