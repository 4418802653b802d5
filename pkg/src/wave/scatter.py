"""Wave operators, their inverses and the scattering map, with weighted diagnostics."""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from src.core.config import RunConfig, SolverConfig
from src.core.exceptions import ConfigError, RangeMismatch
from src.wave.fields import (
    DataPair,
    Field,
    GridSpec,
    check_Y_membership,
    energy_series,
)
from src.wave.finalstate import build_final_ladder, build_inverse_ladder
from src.wave.params import ExponentLadder, Regime
from src.wave.solver import (
    IterationTrace,
    Solution,
    solve_fvp_long,
    solve_fvp_short,
    solve_ivp,
)
from src.wave.waveops import (
    TruncationPolicy,
    apply_K,
    apply_L,
    nonlinearity,
    tail_compensation,
)
from src.utils.logging import get_logger

logger = get_logger("scatter")


@dataclass
class OperatorConfig:
    """Everything an operator evaluation needs besides its data."""

    ladder: ExponentLadder
    grid: GridSpec
    trunc: TruncationPolicy = field(default_factory=TruncationPolicy)
    solver: SolverConfig = field(default_factory=SolverConfig)
    eps0_estimate: Optional[float] = None
    sample_start: float = 5.0
    sample_factor: float = 1.5
    sample_end_fraction: float = 0.8
    tail_compensation: bool = True

    @classmethod
    def from_run(cls, run: RunConfig) -> "OperatorConfig":
        return cls(
            ladder=run.to_ladder(),
            grid=run.to_grid(),
            trunc=run.to_truncation(),
            solver=run.to_solver(),
            eps0_estimate=run.data.eps0_estimate,
            sample_start=run.rates.sample_start,
            sample_factor=run.rates.sample_factor,
            tail_compensation=run.rates.tail_compensation,
        )

    def sample_times(self) -> np.ndarray:
        """Geometric times start * factor^k up to a fraction of t_max, snapped to grid rows."""
        end = self.sample_end_fraction * self.grid.t_max
        rows = []
        t = self.sample_start
        while t <= end + 1e-12:
            rows.append(self.grid.nearest_time_index(t))
            t *= self.sample_factor
        return self.grid.t[np.unique(np.asarray(rows, dtype=int))]

    def horizon(self) -> float:
        return self.trunc.horizon(self.grid)


@dataclass(frozen=True, eq=False)
class ShiftProfile:
    """(1 + r)^nu |||out - in||| on the field radii.

    With `bound`, expected_power is only a lower bound on the eps-power.
    """

    name: str
    r: np.ndarray
    profile: np.ndarray
    nu: float
    expected_power: float
    bound: bool = False

    @property
    def sup(self) -> float:
        return float(self.profile.max()) if self.profile.size else 0.0


@dataclass(frozen=True, eq=False)
class EnergySeries:
    """||a(t) - b(t)||_E at the sample times, with the decay exponent it should show.

    `truncated` holds the energies as integrated up to the R horizon; `values`
    adds back the tail past it when compensation is on.
    """

    name: str
    times: np.ndarray
    values: np.ndarray
    expected_exponent: float
    truncated: Optional[np.ndarray] = None

    def to_csv(self, path: Union[str, Path]) -> None:
        raw = self.values if self.truncated is None else self.truncated
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "value", "truncated"])
            for t, v, c in zip(self.times, self.values, raw):
                writer.writerow([repr(float(t)), repr(float(v)), repr(float(c))])


@dataclass
class Diagnostics:
    shifts: List[ShiftProfile] = field(default_factory=list)
    energy: List[EnergySeries] = field(default_factory=list)
    identity_defects: Dict[str, float] = field(default_factory=dict)
    membership: Dict[str, bool] = field(default_factory=dict)

    def shift(self, name: str) -> ShiftProfile:
        for s in self.shifts:
            if s.name == name:
                return s
        raise KeyError(name)

    def series(self, name: str) -> EnergySeries:
        for s in self.energy:
            if s.name == name:
                return s
        raise KeyError(name)


@dataclass
class OperatorResult:
    operator: str
    regime: Regime
    eps: float
    output: Tuple[DataPair, DataPair]
    solution: Solution
    anchors: Tuple[Field, Field]
    diagnostics: Diagnostics

    @property
    def trace(self) -> IterationTrace:
        return self.solution.trace

    def summary(self) -> Dict[str, Any]:
        d = self.diagnostics
        return {
            "operator": self.operator,
            "regime": self.regime.value,
            "eps": self.eps,
            "iterations": self.trace.iterations,
            "converged": self.trace.converged,
            "final_distance": self.trace.final_distance,
            "norms": dict(self.trace.norms),
            "shift_sups": {s.name: s.sup for s in d.shifts},
            "expected_shift_powers": {s.name: s.expected_power for s in d.shifts},
            "expected_exponents": {s.name: s.expected_exponent for s in d.energy},
            "identity_defects": dict(d.identity_defects),
            "membership_checks": dict(d.membership),
        }


class ScatteringResult(NamedTuple):
    f1_plus: DataPair
    f2_plus: DataPair
    minus: OperatorResult
    inverse: OperatorResult


class RoundTrip(NamedTuple):
    defects: Tuple[float, float]
    forward: OperatorResult
    inverse: OperatorResult


def shift_profile(
    name: str,
    out: DataPair,
    ref: DataPair,
    nu: float,
    expected_power: float,
    grid: GridSpec,
    bound: bool = False,
) -> ShiftProfile:
    n = grid.n_r
    diff = out - ref
    return ShiftProfile(name, grid.r, diff.weighted_profile(nu)[:n], nu, expected_power, bound)


def _series(
    name: str, gap: Field, expected: float, config: OperatorConfig
) -> EnergySeries:
    """Energy of `gap`, a backward Duhamel term cut at the R horizon."""
    times = config.sample_times()
    raw = energy_series(gap, times)
    if not config.tail_compensation or expected >= 0.0:
        return EnergySeries(name, times, raw, expected)
    factor = tail_compensation(times, expected, config.horizon())
    return EnergySeries(name, times, raw * factor, expected, truncated=raw)


def relative_defect(a: Field, b: Field) -> float:
    """max |a - b| / max |a| over the causal region."""
    mask = a.grid.causal_mask()
    num = float(np.max(np.abs(a.u - b.u)[mask]))
    den = float(np.max(np.abs(a.u)[mask]))
    return num / den if den > 0.0 else num


def _membership(out: Tuple[DataPair, DataPair], lp: ExponentLadder, eps: float) -> Dict[str, bool]:
    k = (lp.kappas.kappa1, lp.kappas.kappa2)
    return {
        f"out{j + 1}_in_Y_2eps": check_Y_membership(d, k[j], 2.0 * eps)[0]
        for j, d in enumerate(out)
    }


def _traces(u1: Field, u2: Field, lp: ExponentLadder) -> Tuple[DataPair, DataPair]:
    return (
        DataPair.from_trace(u1, lp.kappas.kappa1),
        DataPair.from_trace(u2, lp.kappas.kappa2),
    )


def _representation_defects(
    sol: Solution, out: Tuple[DataPair, DataPair], lp: ExponentLadder, grid: GridSpec
) -> Dict[str, float]:
    """u_j against the initial-value representation K[out_j] + L(N_j(u))."""
    rep1 = apply_K(out[0], grid) + apply_L(nonlinearity(sol.u2, lp.p), grid)
    rep2 = apply_K(out[1], grid) + apply_L(nonlinearity(sol.u1, lp.q), grid)
    return {
        "ivp_representation_1": relative_defect(sol.u1, rep1),
        "ivp_representation_2": relative_defect(sol.u2, rep2),
    }


def _component1_power(lp: ExponentLadder) -> float:
    """eps-power of the component-1 datum shift."""
    if lp.regime == Regime.SHORT_RANGE:
        return lp.p
    if lp.regime == Regime.P_EQUALS_TWO:
        return 1.0 + lp.q
    return lp.B_at(lp.ell)


def _component1_decay(lp: ExponentLadder) -> float:
    """Energy decay exponent of u1 against its anchor."""
    k1, k2 = lp.kappas.kappa1, lp.kappas.kappa2
    if lp.regime == Regime.SHORT_RANGE:
        return -(k1 - 1.0)
    if lp.regime == Regime.P_EQUALS_TWO:
        return -(k2 - 1.0)
    return -(k1 * lp.a[lp.ell + 1] - 1.0)


def _shifts(
    out: Tuple[DataPair, DataPair],
    base: Tuple[Field, Field],
    lp: ExponentLadder,
    grid: GridSpec,
) -> List[ShiftProfile]:
    """Shifts of the output data against the t = 0 traces of `base`."""
    k1, k2 = lp.kappas.kappa1, lp.kappas.kappa2
    ref = _traces(base[0], base[1], lp)
    power1 = _component1_power(lp)
    # outside the short-range regime the component-1 shift is only bounded by eps^power1
    bound = not lp.is_trivial
    shifts = [
        shift_profile("shift1", out[0], ref[0], k1, power1, grid, bound),
        shift_profile("shift2", out[1], ref[1], k2, lp.q, grid),
    ]
    if lp.regime == Regime.P_EQUALS_TWO:
        shifts.append(shift_profile("shift1_decay", out[0], ref[0], k2, power1, grid, bound))
    elif bound:
        nu = k1 * lp.a_next_effective
        shifts.append(shift_profile("shift1_decay", out[0], ref[0], nu, power1, grid, bound))
    return shifts


def wave_operator_plus(f1: DataPair, f2: DataPair, config: OperatorConfig) -> OperatorResult:
    """W+ : free final data to the t = 0 data of the solution scattering onto K[f]."""
    lp, grid = config.ladder, config.grid
    if lp.regime != Regime.SHORT_RANGE:
        raise ConfigError(
            f"W+ needs p > 2; use the generalized operator for {lp.regime.value}"
        )
    sol = solve_fvp_short(f1, f2, lp, grid, config.trunc, config.solver)
    w0, v0 = sol.problem.anchor
    out = _traces(sol.u1, sol.u2, lp)
    k1, k2 = lp.kappas.kappa1, lp.kappas.kappa2
    c1, c2 = sol.corrections

    diagnostics = Diagnostics(
        shifts=_shifts(out, (w0, v0), lp, grid),
        energy=[
            _series("u1-w0", c1, -(k1 - 1.0), config),
            _series("u2-v0", c2, -(k2 - 1.0), config),
        ],
        identity_defects=_representation_defects(sol, out, lp, grid),
        membership=_membership(out, lp, sol.problem.eps),
    )
    return OperatorResult("W+", lp.regime, sol.problem.eps, out, sol, (w0, v0), diagnostics)


def generalized_wave_operator_plus(
    f1: DataPair, f2: DataPair, config: OperatorConfig
) -> OperatorResult:
    """Modified W+ : final data to t = 0 data of the solution approaching the ladder top."""
    lp, grid = config.ladder, config.grid
    if lp.is_trivial:
        raise ConfigError("The generalized wave operator needs 1 < p <= 2")
    ladder = build_final_ladder(f1, f2, lp, grid, config.trunc)
    sol = solve_fvp_long(ladder, lp, grid, config.trunc, config.solver)
    ell = lp.ell
    w_top, v_top, v0 = ladder.w[ell + 1], ladder.v[ell + 1], ladder.v[0]
    out = _traces(sol.u1, sol.u2, lp)
    k2 = lp.kappas.kappa2
    v_decay = -(k2 - 1.0)
    c1, c2 = sol.corrections
    v_rise = ladder.v_offset(ell + 1)

    diagnostics = Diagnostics(
        shifts=_shifts(out, (ladder.w[0], v0), lp, grid),
        energy=[
            _series(f"u1-w{ell + 1}", c1, _component1_decay(lp), config),
            _series(f"u2-v{ell + 1}", c2, -(lp.a[ell + 2] - 1.0), config),
            _series(f"v{ell + 1}-v0", v_rise, v_decay, config),
            _series("u2-v0", v_rise + c2, v_decay, config),
        ],
        identity_defects=_representation_defects(sol, out, lp, grid),
        membership=_membership(out, lp, sol.problem.eps),
    )
    return OperatorResult(
        "W~+", lp.regime, sol.problem.eps, out, sol, (w_top, v_top), diagnostics
    )


def forward_operator(f1: DataPair, f2: DataPair, config: OperatorConfig) -> OperatorResult:
    """The regime's plus operator."""
    if config.ladder.regime == Regime.SHORT_RANGE:
        return wave_operator_plus(f1, f2, config)
    return generalized_wave_operator_plus(f1, f2, config)


def wave_operator_inverse(
    phi1: DataPair, phi2: DataPair, config: OperatorConfig
) -> OperatorResult:
    """Inverse of the regime's plus operator: initial data to final data."""
    lp, grid = config.ladder, config.grid
    sol = solve_ivp(phi1, phi2, lp, grid, config.solver)
    inv = build_inverse_ladder(sol.u1, sol.u2, phi1, lp, grid, config.trunc)
    out = _traces(inv.w_star, inv.v0_star, lp)
    k2 = lp.kappas.kappa2

    defects = {"homogeneous_v": relative_defect(inv.v0_star, apply_K(out[1], grid))}
    if lp.is_trivial:
        defects["homogeneous_w"] = relative_defect(inv.w_star, apply_K(out[0], grid))
    else:
        v_ell = inv.ladder.v[-1]
        rep = apply_K(out[0], grid) + apply_L(nonlinearity(v_ell, lp.p), grid)
        defects["representation_w"] = relative_defect(inv.w_star, rep)

    diagnostics = Diagnostics(
        shifts=_shifts(out, (sol.u1, sol.u2), lp, grid),
        energy=[
            _series("u1-w*", inv.w_gap, _component1_decay(lp), config),
            _series("u2-v0*", inv.v_gap, -(k2 - 1.0), config),
        ],
        identity_defects=defects,
        membership=_membership(out, lp, sol.problem.eps),
    )
    name = "W+^-1" if lp.is_trivial else "W~+^-1"
    return OperatorResult(
        name, lp.regime, sol.problem.eps, out, sol, (inv.w_star, inv.v0_star), diagnostics
    )


def wave_operator_minus(f1: DataPair, f2: DataPair, config: OperatorConfig) -> OperatorResult:
    """W- by time reflection: the system is invariant under t -> -t, so
    W-(f) = P W+(P f) with P(f, g) = (f, -g)."""
    plus = forward_operator(f1.time_reflected(), f2.time_reflected(), config)
    out = (plus.output[0].time_reflected(), plus.output[1].time_reflected())
    name = "W-" if config.ladder.is_trivial else "W~-"
    return OperatorResult(
        name, plus.regime, plus.eps, out, plus.solution, plus.anchors, plus.diagnostics
    )


def scattering_map(
    f1_minus: DataPair, f2_minus: DataPair, config: OperatorConfig
) -> ScatteringResult:
    """(W+)^-1 W- : data at t = -infinity to data at t = +infinity."""
    lp = config.ladder
    eps = max(f1_minus.eps, f2_minus.eps)
    if config.eps0_estimate is None:
        logger.warning("no eps0 estimate configured; range inclusion is not gated")
    elif eps > config.eps0_estimate / 4.0:
        raise RangeMismatch(
            f"eps={eps:g} exceeds eps0/4 = {config.eps0_estimate / 4.0:g}"
        )

    minus = wave_operator_minus(f1_minus, f2_minus, config)
    for j, (d, kappa) in enumerate(zip(minus.output, (lp.kappas.kappa1, lp.kappas.kappa2))):
        ok, sup = check_Y_membership(d, kappa, 2.0 * eps)
        if not ok:
            raise RangeMismatch(
                f"intermediate datum {j + 1} has Y_{kappa:g} sup {sup:.4e} > 2 eps = {2.0 * eps:.4e}"
            )

    inverse = wave_operator_inverse(minus.output[0], minus.output[1], config)
    logger.info(f"scattering map at eps={eps:g}: {minus.operator} then {inverse.operator}")
    return ScatteringResult(inverse.output[0], inverse.output[1], minus, inverse)


def round_trip(f1: DataPair, f2: DataPair, config: OperatorConfig) -> RoundTrip:
    """Relative Y-weighted defect of inverse(plus(f)) against f, per component.

    The reference is the grid trace of K[f], so both sides carry the same
    finite-difference second derivatives.
    """
    lp, grid = config.ladder, config.grid
    forward = forward_operator(f1, f2, config)
    inverse = wave_operator_inverse(forward.output[0], forward.output[1], config)

    defects = []
    for d, back, kappa in zip((f1, f2), inverse.output, (lp.kappas.kappa1, lp.kappas.kappa2)):
        ref = DataPair.from_trace(apply_K(d, grid), kappa)
        scale = float(ref.weighted_profile(kappa)[: grid.n_r].max())
        err = float((back - ref).weighted_profile(kappa)[: grid.n_r].max())
        defects.append(err / scale if scale > 0.0 else err)
    logger.info(f"round trip defects {defects[0]:.3e}, {defects[1]:.3e}")
    return RoundTrip((defects[0], defects[1]), forward, inverse)
