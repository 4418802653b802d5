import pytest

from src.core.config import SolverConfig
from src.wave.fields import GridSpec, make_profile
from src.wave.params import ladder_for
from src.wave.waveops import TruncationPolicy


@pytest.fixture
def grid():
    return GridSpec(r_max=6.0, t_max=6.0, n=32)


@pytest.fixture
def wide_grid():
    # r_max = 2 t_max keeps a causal strip at every time row
    return GridSpec(r_max=8.0, t_max=4.0, n=32)


@pytest.fixture
def short_range():
    return ladder_for(3.0, 3.0)


@pytest.fixture
def long_range():
    return ladder_for(1.8, 4.0)


@pytest.fixture
def trunc():
    return TruncationPolicy()


@pytest.fixture
def solver_settings():
    return SolverConfig(tol=1e-10, max_iters=30)


@pytest.fixture
def gaussian_pair():
    def build(lp, eps, grid):
        return (
            make_profile("gaussian", lp.kappas.kappa1, eps, grid),
            make_profile("gaussian", lp.kappas.kappa2, eps, grid),
        )

    return build
