"""Subcommand orchestration: builds inputs from a RunConfig, runs, writes artifacts."""

import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from src.core.config import RunConfig
from src.core.exceptions import RadwaveError, RangeMismatch, VerificationFailed
from src.experiments.rates import DecayCheck, ScalingCheck, decay_check
from src.experiments.reporting import RunWriter
from src.experiments.verify import run_suite
from src.utils.factory import Factory
from src.utils.logging import get_logger
from src.wave.fields import DataPair, GridSpec, make_profile
from src.wave.finalstate import build_final_ladder, ladder_norm_report
from src.wave.params import ExponentLadder, Regime
from src.wave.scatter import (
    OperatorConfig,
    OperatorResult,
    forward_operator,
    round_trip,
    scattering_map,
    wave_operator_inverse,
)
from src.wave.solver import ProblemKind, ProbeResult, contraction_probe, solve_ivp

logger = get_logger("runner")


@dataclass
class RunContext:
    config: RunConfig
    writer: RunWriter
    options: Dict[str, Any] = field(default_factory=dict)

    @cached_property
    def ladder(self) -> ExponentLadder:
        return self.config.to_ladder()

    @cached_property
    def grid(self) -> GridSpec:
        return self.config.to_grid()

    @cached_property
    def operator_config(self) -> OperatorConfig:
        return OperatorConfig.from_run(self.config)

    def data(self, eps: float) -> Tuple[DataPair, DataPair]:
        """Profile pair at amplitude eps, measured in Y_nu with nu defaulting to kappa_j."""
        d = self.config.data
        k = self.ladder.kappas
        nu1 = d.nu1 or k.kappa1
        nu2 = d.nu2 or k.kappa2
        return (
            make_profile(d.family, nu1, eps, self.grid),
            make_profile(d.family, nu2, eps, self.grid),
        )

    def payload(self, command: str, eps: Optional[float]) -> Dict[str, Any]:
        lp = self.ladder
        return {
            "command": command,
            "p": lp.p,
            "q": lp.q,
            "regime": lp.regime.value,
            "kappas": [lp.kappas.kappa1, lp.kappas.kappa2],
            "ell": lp.ell,
            "eps": eps,
            "grid": {"r_max": self.grid.r_max, "t_max": self.grid.t_max, "n": self.grid.n},
        }


@dataclass
class RunOutcome:
    command: str
    exit_code: int
    payload: Dict[str, Any]
    artifacts: List[Path]
    error: Optional[str] = None


subcommands: Factory[Dict[str, Any]] = Factory("subcommand")


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower()


def _write_operator(ctx: RunContext, result: OperatorResult, prefix: str) -> None:
    w = ctx.writer
    w.export(f"{prefix}_trace.csv", result.trace.to_csv)
    for series in result.diagnostics.energy:
        w.export(f"{prefix}_energy_{_slug(series.name)}.csv", series.to_csv)
    for shift in result.diagnostics.shifts:
        w.csv(f"{prefix}_{shift.name}.csv", ["r", "value"], zip(shift.r, shift.profile))


def _decay_checks(ctx: RunContext, result: OperatorResult) -> List[DecayCheck]:
    window = ctx.config.fit_window()
    margin = ctx.config.rates.decay_margin
    return [
        decay_check(f"{result.operator} {s.name}", s.times, s.values, s.expected_exponent, window, margin)
        for s in result.diagnostics.energy
    ]


def _check_row(check) -> Dict[str, Any]:
    row = check.as_dict()
    if isinstance(check, DecayCheck):
        fitted = "n/a" if check.slope is None else f"{check.slope:.3f}"
        row["detail"] = f"fitted {fitted}, expected {check.expected:.3f} +/- {check.margin:g}"
    elif isinstance(check, ScalingCheck):
        k = check.exponent
        relation = "at least" if check.bound else "vs"
        row["detail"] = f"eps^{'n/a' if k is None else f'{k:.3f}'} {relation} eps^{check.expected_power:g}"
    return row


@subcommands.register("forward")
def run_forward(ctx: RunContext) -> Dict[str, Any]:
    eps = ctx.config.data.eps
    phi1, phi2 = ctx.data(eps)
    sol = solve_ivp(phi1, phi2, ctx.ladder, ctx.grid, ctx.config.solver)

    ctx.writer.export("trace.csv", sol.trace.to_csv)
    if ctx.config.output.write_fields:
        stride = ctx.config.output.snapshot_stride
        ctx.writer.export("u1.csv", lambda path: sol.u1.to_csv(path, stride))
        ctx.writer.export("u2.csv", lambda path: sol.u2.to_csv(path, stride))

    payload = ctx.payload("forward", eps)
    payload["results"] = {
        "iterations": sol.trace.iterations,
        "converged": sol.trace.converged,
        "final_distance": sol.trace.final_distance,
        "norms": sol.trace.norms,
        "max_abs_u1": sol.u1.max_abs(),
        "max_abs_u2": sol.u2.max_abs(),
    }
    return payload


@subcommands.register("final")
def run_final(ctx: RunContext) -> Dict[str, Any]:
    eps = ctx.config.data.eps
    f1, f2 = ctx.data(eps)
    result = forward_operator(f1, f2, ctx.operator_config)
    _write_operator(ctx, result, "final")

    decays = _decay_checks(ctx, result)
    payload = ctx.payload("final", eps)
    payload["results"] = result.summary()
    payload["fitted_exponents"] = [d.as_dict() for d in decays]
    payload["checks"] = [_check_row(d) for d in decays]
    return payload


def _probe_eps0(ctx: RunContext) -> ProbeResult:
    """Estimate eps0 from the final-value problem behind W- over the configured amplitudes."""
    lp = ctx.ladder
    kind = ProblemKind.FVP_SHORT if lp.regime == Regime.SHORT_RANGE else ProblemKind.FVP_LONG
    opc = ctx.operator_config
    probe = contraction_probe(
        kind, ctx.config.data.eps_list, lp, ctx.grid, opc.trunc, opc.solver, data_factory=ctx.data
    )
    logger.info(f"contraction probe over {ctx.config.data.eps_list}: eps0 estimate {probe.estimate}")
    return probe


@subcommands.register("scatter")
def run_scatter(ctx: RunContext) -> Dict[str, Any]:
    eps = ctx.config.data.eps
    f1, f2 = ctx.data(eps)
    opc = ctx.operator_config
    eps0: Dict[str, Any] = {"estimate": opc.eps0_estimate, "source": "config"}
    if opc.eps0_estimate is None:
        probe = _probe_eps0(ctx)
        eps0 = {
            "estimate": probe.estimate,
            "source": "probe",
            "anomaly": probe.anomaly,
            "outcomes": [
                {"eps": o.eps, "contracted": o.contracted, "max_ratio": o.max_ratio, "error": o.error}
                for o in probe.outcomes
            ],
        }
        if probe.estimate is None:
            raise RangeMismatch(
                f"no amplitude in {ctx.config.data.eps_list} contracts; pass --eps0 to gate by hand"
            )
        opc = replace(opc, eps0_estimate=probe.estimate)

    scattered = scattering_map(f1, f2, opc)
    trip = round_trip(f1, f2, opc)
    _write_operator(ctx, scattered.inverse, "scatter")

    payload = ctx.payload("scatter", eps)
    payload["eps0"] = eps0
    payload["results"] = {
        "f1_plus_eps": scattered.f1_plus.eps,
        "f2_plus_eps": scattered.f2_plus.eps,
        "minus": scattered.minus.summary(),
        "inverse": scattered.inverse.summary(),
        "round_trip_defects": list(trip.defects),
    }
    return payload


def _scaling_checks(
    name: str, coarse: OperatorResult, fine: OperatorResult, tol: float
) -> List[ScalingCheck]:
    out = []
    for shift in coarse.diagnostics.shifts:
        half = fine.diagnostics.shift(shift.name)
        out.append(
            ScalingCheck(
                f"{name} {shift.name}", shift.expected_power, tol,
                half.sup, shift.sup, fine.eps, coarse.eps, bound=shift.bound,
            )
        )
    for key in ("u1", "u2"):
        out.append(
            ScalingCheck(
                f"{name} norm {key}", 1.0, tol,
                fine.trace.norms[key], coarse.trace.norms[key], fine.eps, coarse.eps,
            )
        )
    return out


@subcommands.register("rates")
def run_rates(ctx: RunContext) -> Dict[str, Any]:
    eps = ctx.config.data.eps
    tol = ctx.config.rates.scaling_tol
    opc = ctx.operator_config

    runs: Dict[str, List[OperatorResult]] = {"forward": [], "inverse": []}
    for amplitude in (eps, eps / 2.0):
        f1, f2 = ctx.data(amplitude)
        runs["forward"].append(forward_operator(f1, f2, opc))
        runs["inverse"].append(wave_operator_inverse(f1, f2, opc))

    checks: List[Any] = []
    for kind, (coarse, fine) in runs.items():
        _write_operator(ctx, coarse, kind)
        checks += _decay_checks(ctx, coarse)
        checks += _scaling_checks(coarse.operator, coarse, fine, tol)

    payload = ctx.payload("rates", eps)
    if not ctx.ladder.is_trivial:
        ladders = [
            build_final_ladder(*ctx.data(e), ctx.ladder, ctx.grid, opc.trunc)
            for e in ctx.config.data.eps_list
        ]
        report = ladder_norm_report(ladders)
        payload["ladder_norms"] = [
            {
                "j": r.j,
                "norm_name": r.norm_name,
                "value": r.value,
                "eps": r.eps,
                "scaling_exponent": r.scaling_exponent,
                "expected_power": r.expected_power,
            }
            for r in report
        ]
        ctx.writer.csv(
            "ladder_norms.csv",
            ["j", "norm", "eps", "value", "scaling_exponent", "expected_power"],
            [(r.j, r.norm_name, r.eps, r.value, r.scaling_exponent, r.expected_power) for r in report],
        )

    payload["results"] = {
        "forward": runs["forward"][0].summary(),
        "inverse": runs["inverse"][0].summary(),
    }
    payload["fitted_exponents"] = [c.as_dict() for c in checks if isinstance(c, DecayCheck)]
    payload["scaling_ratios"] = [c.as_dict() for c in checks if isinstance(c, ScalingCheck)]
    payload["checks"] = [_check_row(c) for c in checks]
    return payload


@subcommands.register("verify")
def run_verify(ctx: RunContext) -> Dict[str, Any]:
    results = run_suite(ctx.config.verify, ctx.options.get("checks"))
    vc = ctx.config.verify
    return {
        "command": "verify",
        "eps": vc.eps,
        "grid": {"t_max": vc.t_max, "n": vc.n},
        "checks": [r.as_dict() for r in results],
    }


# Subcommands whose failed checks turn into a non-zero exit
STRICT_COMMANDS = ("rates", "verify")


def run(config: RunConfig, command: str, options: Optional[Dict[str, Any]] = None) -> RunOutcome:
    """Execute one subcommand and write its artifacts under <output>/<command>."""
    if command not in subcommands:
        raise KeyError(f"Unknown subcommand {command!r}; available: {subcommands.keys()}")
    writer = RunWriter(config.output_root() / command)
    ctx = RunContext(config=config, writer=writer, options=options or {})

    payload: Dict[str, Any] = {}
    try:
        payload = subcommands.create(command, ctx)
        failed = [c["name"] for c in payload.get("checks", []) if not c["passed"]]
        writer.json("run.json", payload)
        writer.summary(payload)
        if failed and command in STRICT_COMMANDS:
            raise VerificationFailed(f"{len(failed)} check(s) failed: {', '.join(failed)}")
    except RadwaveError as e:
        logger.error(str(e))
        return RunOutcome(command, e.exit_code, payload, writer.written, error=str(e))

    logger.info(f"{command} finished; {len(writer.written)} artifacts in {writer.directory}")
    return RunOutcome(command, 0, payload, writer.written)
