import pytest

from src.core.config import RunConfig
from src.core.exceptions import ConfigError
from src.wave.params import Regime


def test_defaults():
    config = RunConfig.load()
    assert (config.exponents.p, config.exponents.q) == (1.8, 4.0)
    assert config.to_ladder().regime == Regime.LONG_RANGE_SIMPLE
    assert config.data.eps_list == sorted(config.data.eps_list, reverse=True)
    assert config.fit_window() == (config.rates.window_start, 0.8 * config.grid.t_max)
    assert config.to_truncation().tail_tol == 0.5
    assert config.rates.tail_compensation


def test_toml_file_and_overrides(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        "[exponents]\np = 3.0\nq = 3.0\n\n[grid]\nr_max = 10.0\nt_max = 10.0\nn = 64\n"
    )
    config = RunConfig.load(path, {"grid": {"n": 32, "r_max": None}})
    assert config.exponents.p == 3.0
    assert config.grid.n == 32
    assert config.grid.r_max == 10.0
    grid = config.to_grid()
    assert grid.h == pytest.approx(10.0 / 32)


def test_output_directory_override(tmp_path):
    config = RunConfig.load(overrides={"output": {"directory": str(tmp_path)}})
    assert config.output_root() == tmp_path


@pytest.mark.parametrize(
    "overrides",
    [
        {"exponents": {"p": 3.0, "q": 2.0}},
        {"exponents": {"kappa1": 0.7}},
        {"data": {"family": "sawtooth"}},
        {"grid": {"t_max": 4.0}, "truncation": {"t_infinity": 5.0}},
        {"plotting": {"dpi": 300}},
        {"truncation": {"tail_tol": 1.5}},
    ],
)
def test_invalid_configuration(overrides):
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=overrides)


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[grid\n")
    with pytest.raises(ConfigError):
        RunConfig.load(bad)
