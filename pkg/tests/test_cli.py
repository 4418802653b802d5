import json

import pytest

from src.core.exceptions import RangeMismatch, VerificationFailed
from src.experiments.cli import build_parser, main, overrides_from_args

SMALL_GRID = ["--n", "16", "--t-max", "2", "--r-max", "2"]


def test_flags_map_to_sections():
    args = build_parser().parse_args(["forward", "--p", "3", "--q", "3", "--n", "64", "--no-fields"])
    overrides = overrides_from_args(args)
    assert overrides["exponents"] == {"p": 3.0, "q": 3.0}
    assert overrides["grid"] == {"n": 64}
    assert overrides["output"] == {"write_fields": False}


def test_forward_on_zero_data(tmp_path):
    code = main(["forward", "--family", "zero", "--output", str(tmp_path), *SMALL_GRID])
    assert code == 0
    doc = json.loads((tmp_path / "forward" / "run.json").read_text())
    assert doc["version"] == 1
    assert doc["results"]["converged"] is True
    assert (tmp_path / "forward" / "u1.csv").exists()
    assert (tmp_path / "forward" / "trace.csv").exists()
    assert (tmp_path / "forward" / "summary.txt").exists()


def test_subcritical_exponents_exit_with_config_code(tmp_path):
    code = main(["forward", "--p", "1.5", "--q", "3", "--output", str(tmp_path), *SMALL_GRID])
    assert code == 2


def test_invalid_flag_value_exits_with_config_code(tmp_path):
    assert main(["forward", "--p", "3", "--q", "2", "--output", str(tmp_path)]) == 2


def test_verify_selected_check(tmp_path):
    code = main(["verify", "--check", "gatekeeping", "--check", "ladder_arithmetic", "--output", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "verify" / "run.json").read_text())
    assert [c["name"] for c in doc["checks"]] == ["gatekeeping", "ladder_arithmetic"]
    assert "Checks (2/2 passed)" in (tmp_path / "verify" / "summary.txt").read_text()


def test_verify_unknown_check(tmp_path):
    assert main(["verify", "--check", "no_such_check", "--output", str(tmp_path)]) == 2


def test_scatter_estimates_eps0_when_unset(tmp_path):
    argv = ["scatter", "--family", "zero", "--eps", "1e-3", "--eps-list", "1e-2", "5e-3"]
    assert main([*argv, "--output", str(tmp_path), *SMALL_GRID]) == 0
    doc = json.loads((tmp_path / "scatter" / "run.json").read_text())
    assert doc["eps0"]["source"] == "probe"
    assert doc["eps0"]["estimate"] == 1e-2
    assert [o["eps"] for o in doc["eps0"]["outcomes"]] == [1e-2, 5e-3]


def test_scatter_gate_uses_the_estimate(tmp_path):
    # eps0/4 = 2.5e-3 < eps
    argv = ["scatter", "--family", "zero", "--eps", "5e-3", "--eps-list", "1e-2"]
    assert main([*argv, "--output", str(tmp_path), *SMALL_GRID]) == RangeMismatch.exit_code


def test_scatter_with_configured_eps0(tmp_path):
    argv = ["scatter", "--family", "zero", "--eps", "1e-3", "--eps0", "1.0"]
    assert main([*argv, "--output", str(tmp_path), *SMALL_GRID]) == 0
    doc = json.loads((tmp_path / "scatter" / "run.json").read_text())
    assert doc["eps0"] == {"estimate": 1.0, "source": "config"}


def test_rates_records_ladder_norms(tmp_path):
    argv = ["rates", "--eps", "1e-2", "--eps-list", "1e-2", "5e-3", "--output", str(tmp_path), *SMALL_GRID]
    # no sample time fits below t_max = 2, so the decay checks fail
    assert main(argv) == VerificationFailed.exit_code
    doc = json.loads((tmp_path / "rates" / "run.json").read_text())
    records = doc["ladder_norms"]
    assert {tuple(sorted(r)) for r in records} == {
        ("eps", "expected_power", "j", "norm_name", "scaling_exponent", "value")
    }
    step = [r for r in records if (r["j"], r["norm_name"]) == (0, "w_step_Z2") and r["eps"] == 5e-3]
    assert step[0]["scaling_exponent"] == pytest.approx(1.8, abs=1e-3)


def test_tail_compensation_flag():
    args = build_parser().parse_args(["rates", "--no-tail-compensation"])
    assert overrides_from_args(args)["rates"] == {"tail_compensation": False}
