import argparse
from typing import Any, Dict, List, Optional

from src.core.config import RunConfig, settings
from src.core.exceptions import RadwaveError
from src.experiments.runner import run, subcommands
from src.utils.logging import get_logger, set_global_level

logger = get_logger("cli")

COMMAND_HELP = {
    "forward": "solve the initial-value problem and report solution norms",
    "final": "evaluate the (generalized) wave operator with decay diagnostics",
    "scatter": "compose W- with the inverse wave operator and report the round trip",
    "rates": "eps vs eps/2 scaling and decay-exponent study",
    "verify": "run the invariant suite",
}

# flag dest -> (config section, key)
FLAG_SECTIONS = {
    "p": ("exponents", "p"),
    "q": ("exponents", "q"),
    "kappa1": ("exponents", "kappa1"),
    "kappa2": ("exponents", "kappa2"),
    "eps": ("data", "eps"),
    "eps_list": ("data", "eps_list"),
    "family": ("data", "family"),
    "nu1": ("data", "nu1"),
    "nu2": ("data", "nu2"),
    "eps0": ("data", "eps0_estimate"),
    "r_max": ("grid", "r_max"),
    "t_max": ("grid", "t_max"),
    "n": ("grid", "n"),
    "t_infinity": ("truncation", "t_infinity"),
    "tail_tol": ("truncation", "tail_tol"),
    "tol": ("solver", "tol"),
    "max_iters": ("solver", "max_iters"),
    "ratio_bound": ("solver", "ratio_bound"),
    "output": ("output", "directory"),
    "snapshot_stride": ("output", "snapshot_stride"),
    "window_start": ("rates", "window_start"),
    "window_end": ("rates", "window_end"),
    "verify_n": ("verify", "n"),
    "seed": ("verify", "seed"),
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("exponents")
    g.add_argument("--p", type=float, help="exponent of |d_t v|^p (default 1.8)")
    g.add_argument("--q", type=float, help="exponent of |d_t w|^q (default 4)")
    g.add_argument("--kappa1", type=float, help="kappa override, p = 2 only")
    g.add_argument("--kappa2", type=float, help="kappa override, p = 2 only")

    g = p.add_argument_group("data")
    g.add_argument("--eps", type=float, help="datum amplitude in Y_nu (default 1e-2)")
    g.add_argument("--eps-list", type=float, nargs="+", dest="eps_list", help="amplitudes for ladder scaling")
    g.add_argument("--family", choices=["gaussian", "algebraic", "zero"], help="datum family")
    g.add_argument("--nu1", type=float, help="decay index of datum 1 (default kappa1)")
    g.add_argument("--nu2", type=float, help="decay index of datum 2 (default kappa2)")
    g.add_argument("--eps0", type=float, help="small-data threshold estimate gating scatter")

    g = p.add_argument_group("grid")
    g.add_argument("--r-max", type=float, dest="r_max")
    g.add_argument("--t-max", type=float, dest="t_max")
    g.add_argument("--n", type=int, help="characteristic cells across t_max")
    g.add_argument("--t-infinity", type=float, dest="t_infinity", help="cutoff replacing s = infinity")
    g.add_argument("--tail-tol", type=float, dest="tail_tol")

    g = p.add_argument_group("solver")
    g.add_argument("--tol", type=float)
    g.add_argument("--max-iters", type=int, dest="max_iters")
    g.add_argument("--ratio-bound", type=float, dest="ratio_bound")

    g = p.add_argument_group("output")
    g.add_argument("--output", help="output directory (default $RADWAVE_OUTPUT_DIR or runs)")
    g.add_argument("--snapshot-stride", type=int, dest="snapshot_stride")
    g.add_argument("--no-fields", action="store_true", help="skip field snapshot CSVs")
    g.add_argument("--window-start", type=float, dest="window_start")
    g.add_argument("--window-end", type=float, dest="window_end")
    g.add_argument(
        "--no-tail-compensation",
        action="store_true",
        help="fit energies as integrated up to t_infinity, without the tail past it",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radwave",
        description="Radial semilinear wave systems: solvers, wave operators and scattering checks.",
    )
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument(
        "--log-level", dest="log_level", choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
    )

    sub = parser.add_subparsers(dest="command", required=True)
    for name in subcommands.keys():
        p = sub.add_parser(name, help=COMMAND_HELP.get(name, name))
        _add_run_flags(p)
        if name == "verify":
            p.add_argument("--check", action="append", dest="checks", help="run only this check")
            p.add_argument("--verify-n", type=int, dest="verify_n", help="base resolution of the suite")
            p.add_argument("--seed", type=int)
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
    overrides: Dict[str, Dict[str, Any]] = {}
    for dest, (section, key) in FLAG_SECTIONS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides.setdefault(section, {})[key] = value
    if getattr(args, "no_fields", False):
        overrides.setdefault("output", {})["write_fields"] = False
    if getattr(args, "no_tail_compensation", False):
        overrides.setdefault("rates", {})["tail_compensation"] = False
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_global_level(args.log_level or settings.log_level)

    try:
        config = RunConfig.load(args.config, overrides_from_args(args))
    except RadwaveError as e:
        logger.error(str(e))
        return e.exit_code

    options = {"checks": getattr(args, "checks", None)}
    outcome = run(config, args.command, options)
    return outcome.exit_code
