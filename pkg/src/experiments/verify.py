"""Named invariant checks behind `radwave verify`."""

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from src.core.config import VerifyConfig
from src.core.exceptions import ConditionViolated, ConfigError, RadwaveError, SubcriticalExponents
from src.utils.factory import Factory
from src.utils.logging import get_logger
from src.wave.fields import (
    DataPair,
    Field,
    GridSpec,
    SourceField,
    check_Y_membership,
    make_profile,
    norm_X,
    norm_Z,
    profile_families,
)
from src.wave.finalstate import build_final_ladder
from src.wave.params import closed_form_a, ladder_for
from src.wave.waveops import TruncationPolicy, apply_K, apply_L, apply_R, residual_max
from src.experiments.rates import ScalingCheck

logger = get_logger("verify")

# Residuals at or below this are double-precision noise, not discretisation error
ROUNDOFF_FLOOR = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    value: Optional[float] = None

    def as_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "value": self.value}


checks: Factory[CheckResult] = Factory("verify check")


def _grid(vc: VerifyConfig, n: Optional[int] = None, r_factor: float = 1.0) -> GridSpec:
    return GridSpec(r_max=r_factor * vc.t_max, t_max=vc.t_max, n=n or vc.n)


def _bump(R: np.ndarray, T: np.ndarray) -> np.ndarray:
    return np.exp(-(R**2) - (T - 2.0) ** 2)


@checks.register("operator_exactness")
def check_operator_exactness(vc: VerifyConfig) -> CheckResult:
    grid = _grid(vc, r_factor=2.0)
    R, T = grid.mesh
    causal = grid.causal_mask()

    lu = apply_L(SourceField(grid, 1.0, 0.0), grid)
    err_L = max(
        float(np.max(np.abs(lu.u - T**2 / 2.0)[causal])),
        float(np.max(np.abs(lu.u_t - T)[causal])),
    )

    ones = DataPair(grid.r_data, 1.0, 0.0, 0.0, 0.0, 0.0, nu=1.0, eps=1.0)
    err_K = float(np.max(np.abs(apply_K(ones, grid).u - 1.0)))

    t_step = grid.t[grid.nearest_time_index(1.0)]
    step = SourceField(grid, np.where(T <= t_step + 1e-12, 1.0, 0.0), 0.0)
    ru = apply_R(step, grid)
    expected = np.where(T <= t_step, (t_step - T) ** 2 / 2.0, 0.0)
    inside = R <= grid.r_max - t_step - grid.h
    err_R = float(np.max(np.abs(ru.u - expected)[inside]))

    passed = err_L <= 1e-10 and err_K <= 1e-12 and err_R <= 1e-8
    return CheckResult(
        "operator_exactness", passed, f"L {err_L:.2e}, K {err_K:.2e}, R {err_R:.2e}", max(err_L, err_K, err_R)
    )


@checks.register("initial_traces")
def check_initial_traces(vc: VerifyConfig) -> CheckResult:
    grid = _grid(vc)
    lu = apply_L(SourceField.from_function(grid, _bump), grid)
    err_L = max(float(np.max(np.abs(lu.u[0]))), float(np.max(np.abs(lu.u_t[0]))))

    datum = make_profile("gaussian", 1.0, 1.0, grid)
    ku = apply_K(datum, grid)
    err_f = float(np.max(np.abs(ku.u[0] - datum.f[: grid.n_r])))
    err_g = float(np.max(np.abs(ku.u_t[0] - datum.g[: grid.n_r])))

    passed = err_L <= 1e-12 and err_f <= 1e-10 and err_g <= 10.0 * grid.h**2
    return CheckResult(
        "initial_traces", passed, f"L {err_L:.2e}, K f {err_f:.2e}, K g {err_g:.2e}", err_f
    )


def _observed_orders(errors: Sequence[float]) -> List[float]:
    """log2 error ratios under doubling; a finer error at round-off counts as infinite order."""
    orders = []
    for coarse, fine in zip(errors, errors[1:]):
        if fine <= ROUNDOFF_FLOOR:
            orders.append(math.inf)
        elif coarse <= ROUNDOFF_FLOOR:
            orders.append(-math.inf)
        else:
            orders.append(math.log2(coarse / fine))
    return orders


def _residual_check(name: str, vc: VerifyConfig, build: Callable[[GridSpec], float]) -> CheckResult:
    errors = [build(_grid(vc, n=vc.n * k)) for k in (1, 2, 4)]
    listed = "errors " + ", ".join(f"{e:.2e}" for e in errors)
    if max(errors) <= ROUNDOFF_FLOOR:
        return CheckResult(name, True, f"{listed}; exact to round-off", None)

    orders = _observed_orders(errors)
    passed = min(orders) >= vc.min_order
    detail = f"{listed}; orders " + ", ".join(f"{o:.2f}" for o in orders)
    return CheckResult(name, passed, detail, min(orders))


@checks.register("residual_K")
def check_residual_K(vc: VerifyConfig) -> CheckResult:
    def build(grid: GridSpec) -> float:
        u = apply_K(make_profile("gaussian", 1.0, 1.0, grid), grid)
        return residual_max(u, SourceField.zeros(grid))

    return _residual_check("residual_K", vc, build)


@checks.register("residual_L")
def check_residual_L(vc: VerifyConfig) -> CheckResult:
    def build(grid: GridSpec) -> float:
        F = SourceField.from_function(grid, _bump)
        return residual_max(apply_L(F, grid), F)

    return _residual_check("residual_L", vc, build)


@checks.register("residual_R")
def check_residual_R(vc: VerifyConfig) -> CheckResult:
    def build(grid: GridSpec) -> float:
        F = SourceField.from_function(grid, _bump)
        return residual_max(apply_R(F, grid), F)

    return _residual_check("residual_R", vc, build)


@checks.register("norm_embeddings")
def check_norm_embeddings(vc: VerifyConfig) -> CheckResult:
    rng = np.random.default_rng(vc.seed)
    grid = GridSpec(r_max=vc.t_max, t_max=vc.t_max, n=16)
    failures = 0
    for _ in range(vc.samples):
        u = Field(grid, *(rng.standard_normal(grid.shape) for _ in range(3)))
        for s in (1, 2):
            for nu in (0.5, 1.0):
                failures += norm_Z(u, s, nu) > norm_X(u, s, nu)
            failures += norm_X(u, s, 2.0) > norm_Z(u, s, 2.0)
    return CheckResult(
        "norm_embeddings", failures == 0, f"{failures} violations in {vc.samples} fields", float(failures)
    )


LADDER_CASES = ((1.8, 4.0, 0), (1.5, 5.5, 1))


@checks.register("ladder_arithmetic")
def check_ladder_arithmetic(vc: VerifyConfig) -> CheckResult:
    problems = []
    worst = 0.0
    for p, q, ell in LADDER_CASES:
        lp = ladder_for(p, q)
        if lp.ell != ell:
            problems.append(f"(p={p}, q={q}) gives ell={lp.ell}, expected {ell}")
        for j, a in enumerate(lp.a):
            worst = max(worst, abs(a - closed_form_a(lp.kappas, j)))
        k1 = lp.kappas.kappa1
        if not (k1 * lp.a[lp.ell] <= 1.0 < k1 * lp.a[lp.ell + 1]):
            problems.append(f"(p={p}, q={q}) fails kappa1 a_ell <= 1 < kappa1 a_ell+1")
    passed = not problems and worst <= 1e-12
    return CheckResult("ladder_arithmetic", passed, "; ".join(problems) or f"closed form {worst:.1e}", worst)


@checks.register("gatekeeping")
def check_gatekeeping(vc: VerifyConfig) -> CheckResult:
    problems = []
    for p, q, error in ((1.5, 3.0, SubcriticalExponents), (1.4, 6.0, ConditionViolated)):
        try:
            ladder_for(p, q)
            problems.append(f"(p={p}, q={q}) accepted")
        except error:
            pass
        except RadwaveError as e:
            problems.append(f"(p={p}, q={q}) raised {e}")
    try:
        kappas = ladder_for(2.0, 4.0).kappas
        if abs(kappas.kappa1 - 0.75) > 1e-12 or abs(kappas.kappa2 - 2.0) > 1e-12:
            problems.append(f"p=2, q=4 gives {kappas}")
    except RadwaveError as e:
        problems.append(f"p=2, q=4 rejected: {e}")
    return CheckResult("gatekeeping", not problems, "; ".join(problems) or "all gates hold")


@checks.register("profile_membership")
def check_profile_membership(vc: VerifyConfig) -> CheckResult:
    grid = _grid(vc)
    problems = []
    for family in profile_families.keys():
        for nu in (0.8, 2.2):
            d = make_profile(family, nu, vc.eps, grid)
            ok, sup = check_Y_membership(d, nu, vc.eps)
            if not ok or (not d.is_zero and abs(sup - vc.eps) > 1e-10 * vc.eps):
                problems.append(f"{family} nu={nu}: sup {sup:.3e}")
    return CheckResult("profile_membership", not problems, "; ".join(problems) or "all families scale to eps")


@checks.register("ladder_scaling")
def check_ladder_scaling(vc: VerifyConfig) -> CheckResult:
    lp = ladder_for(1.8, 4.0)
    grid = _grid(vc)
    k1, k2 = lp.kappas.kappa1, lp.kappas.kappa2
    trunc = TruncationPolicy()

    steps = {}
    for eps in (vc.eps, vc.eps / 2.0):
        f1 = make_profile("gaussian", k1, eps, grid)
        f2 = make_profile("gaussian", k2, eps, grid)
        ladder = build_final_ladder(f1, f2, lp, grid, trunc)
        steps[eps] = (
            norm_Z(ladder.w_step(0), 2, k1),
            norm_Z(ladder.v_step(0), 2, k2),
        )

    results = [
        ScalingCheck(name, power, 0.15, steps[vc.eps / 2.0][j], steps[vc.eps][j], vc.eps / 2.0, vc.eps)
        for j, (name, power) in enumerate((("w1-w0", lp.p), ("v1-v0", lp.q)))
    ]
    detail = ", ".join(
        f"{c.name} ~ eps^{c.exponent if c.exponent is None else round(c.exponent, 3)} "
        f"(expected {c.expected_power:g})"
        for c in results
    )
    return CheckResult("ladder_scaling", all(c.passed for c in results), detail)


def run_suite(vc: VerifyConfig, only: Optional[Sequence[str]] = None) -> List[CheckResult]:
    names = list(only) if only else checks.keys()
    unknown = [name for name in names if name not in checks]
    if unknown:
        raise ConfigError(f"Unknown verify checks {unknown}; available: {checks.keys()}")
    results = []
    for name in names:
        try:
            result = checks.create(name, vc)
        except RadwaveError as e:
            result = CheckResult(name, False, str(e))
        level = logger.info if result.passed else logger.warning
        level(f"{'PASS' if result.passed else 'FAIL'} {name}: {result.detail}")
        results.append(result)
    return results
