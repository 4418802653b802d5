import math

import numpy as np
import pytest

from src.core.exceptions import ConfigError, GridError, TruncationWarning
from src.wave.fields import (
    DataPair,
    Field,
    GridSpec,
    SourceField,
    WeightParams,
    bracket_norm,
    check_Y_membership,
    energy_norm,
    make_profile,
    norm_X,
    norm_Z,
    weighted_sup_M,
)
from src.wave.waveops import apply_K


def test_grid_layout(grid):
    assert grid.h == pytest.approx(6.0 / 32)
    assert grid.shape == (33, 32)
    assert grid.n_data == 32 + 33
    assert grid.r[0] == pytest.approx(grid.h / 2)
    assert grid.t[-1] == pytest.approx(6.0)
    assert grid.time_index(3.0) == 16
    assert grid.radius_index(grid.r[5]) == 5


def test_grid_rejects_bad_input(grid):
    with pytest.raises(GridError):
        GridSpec(r_max=6.0, t_max=6.0, n=4)
    with pytest.raises(GridError):
        GridSpec(r_max=-1.0, t_max=6.0, n=32)
    with pytest.raises(GridError):
        grid.time_index(0.1)


def test_causal_mask(grid):
    mask = grid.causal_mask()
    assert mask[0].all()
    assert mask[5, : grid.n_r - 5].all()
    assert not mask[5, grid.n_r - 5 :].any()


def test_field_algebra_and_immutability(grid):
    a = Field.from_functions(grid, lambda R, T: R * T, lambda R, T: T, lambda R, T: R)
    b = Field(grid, 1.0, 0.0, 0.0)
    c = 2.0 * (a - b) + b
    np.testing.assert_allclose(c.u, 2.0 * grid.mesh[0] * grid.mesh[1] - 1.0)
    np.testing.assert_allclose((-c).u_t, -2.0 * grid.mesh[0])
    with pytest.raises(ValueError):
        a.u[0, 0] = 1.0


def test_field_grid_mismatch(grid):
    other = GridSpec(r_max=6.0, t_max=6.0, n=16)
    with pytest.raises(GridError):
        Field.zeros(grid) + Field.zeros(other)


def test_source_last_active_row(grid):
    F = SourceField.from_function(grid, lambda R, T: np.where(T <= 1.5, 1.0, 0.0))
    assert F.last_active_row() == grid.time_index(1.5)
    assert SourceField.zeros(grid).last_active_row() == -1


@pytest.mark.parametrize("family", ["gaussian", "algebraic"])
@pytest.mark.parametrize("nu", [0.8, 2.2])
def test_profiles_scale_to_eps(grid, family, nu):
    d = make_profile(family, nu, 1e-3, grid)
    ok, sup = check_Y_membership(d, nu, 1e-3)
    assert ok
    assert sup == pytest.approx(1e-3, rel=1e-10)
    assert d.r.shape == (grid.n_data,)


def test_zero_profile(grid):
    d = make_profile("zero", 1.0, 1e-2, grid)
    assert d.is_zero
    assert check_Y_membership(d, 1.0, 0.0)[0]


def test_unknown_profile_family(grid):
    with pytest.raises(ConfigError):
        make_profile("sawtooth", 1.0, 1e-2, grid)


def test_membership_detects_slow_decay(grid):
    d = make_profile("algebraic", 0.5, 1e-3, grid)
    ok, sup = check_Y_membership(d, 2.0, 1e-3)
    assert not ok
    assert sup > 1e-3


def test_data_pair_algebra(grid):
    d = make_profile("gaussian", 1.0, 1e-2, grid)
    assert (d - d).is_zero
    assert (2.0 * d).eps == pytest.approx(2e-2)
    reflected = d.time_reflected()
    np.testing.assert_array_equal(reflected.f, d.f)
    np.testing.assert_array_equal(reflected.g, -d.g)


def test_trace_of_free_wave_returns_datum(grid):
    d = make_profile("gaussian", 1.0, 1e-2, grid)
    back = DataPair.from_trace(apply_K(d, grid), 1.0)
    n = grid.n_r
    np.testing.assert_allclose(back.f[:n], d.f[:n], atol=1e-14)
    np.testing.assert_allclose(back.g[:n], d.g[:n], atol=1e-14)
    assert not back.f[n:].any()
    assert back.eps == pytest.approx(back.sup_weighted(1.0))


@pytest.mark.parametrize("s", [1, 2])
def test_norm_embeddings_hold_pointwise(grid, s):
    rng = np.random.default_rng(7)
    for _ in range(20):
        u = Field(grid, *(rng.standard_normal(grid.shape) for _ in range(3)))
        assert norm_Z(u, s, 0.5) <= norm_X(u, s, 0.5)
        assert norm_Z(u, s, 1.0) <= norm_X(u, s, 1.0)
        assert norm_X(u, s, 2.0) <= norm_Z(u, s, 2.0)


def test_bracket_of_constant_field(grid):
    u = Field(grid, 3.0, 0.0, 0.0)
    assert bracket_norm(u, 1, grid.r[3], grid.t[4]) == pytest.approx(3.0)
    assert bracket_norm(u, 2, grid.r[3], grid.t[4]) == pytest.approx(3.0)
    assert norm_X(u, 1, 0.0) == pytest.approx(3.0)


def test_energy_norm_of_uniform_velocity(grid):
    u = Field(grid, 0.0, 0.0, 1.0)
    expected = math.sqrt(2.0 * math.pi * grid.r[-1] ** 3 / 3.0)
    with pytest.warns(TruncationWarning):
        value = energy_norm(u, 0.0)
    assert value == pytest.approx(expected, rel=1e-2)


def test_energy_norm_of_localized_field_is_quiet(grid):
    u = Field.from_functions(
        grid, lambda R, T: np.exp(-R**2), lambda R, T: -2 * R * np.exp(-R**2), lambda R, T: 0.0
    )
    assert energy_norm(u, 0.0) > 0.0


def test_weight_params():
    w = WeightParams(1.0, 0.8, 0.96, 3.0)
    assert w.decay_order == pytest.approx(2.76)
    assert w.nu == pytest.approx(1.76)
    assert w.mu == pytest.approx(0.8)
    assert w.admits_R() and w.admits_L()
    assert not w.with_order(2).admits_L()
    with pytest.raises(ConfigError):
        WeightParams(0.0, 1.0, 0.0, 2.0, s=3)


def test_weighted_sup_of_constant_source(grid):
    F = SourceField(grid, 2.0, 0.0)
    assert weighted_sup_M(F, WeightParams(0.0, 0.0, 0.0, 0.0)) == pytest.approx(2.0)


def test_bracket_of_linear_field():
    g = GridSpec(r_max=4.0, t_max=4.0, n=9)
    R, _ = g.mesh
    u = Field(g, R, 1.0, 0.0)
    assert g.r[4] == pytest.approx(2.0)
    assert bracket_norm(u, 1, 2.0, g.t[3]) == pytest.approx(4.0)


def test_energy_norm_of_gaussian():
    g = GridSpec(r_max=6.0, t_max=6.0, n=128)
    u = Field.from_functions(
        g, lambda R, T: np.exp(-R**2), lambda R, T: -2 * R * np.exp(-R**2), lambda R, T: 0.0 * R
    )
    expected = math.sqrt(0.75 * math.pi * math.sqrt(math.pi / 2))
    assert energy_norm(u, 0.0) == pytest.approx(expected, rel=1e-3)


def test_weight_cancelling_source(grid):
    F = SourceField.from_function(
        grid, lambda R, T: (1 + R) ** -2.0 * (1 + np.abs(R - T)) ** -1.5
    )
    assert weighted_sup_M(F, WeightParams(0.0, 2.0, 0.0, 1.5)) == pytest.approx(1.0)
    R, T = grid.mesh
    expected = float(np.max((1 + np.abs(R - T)) ** 0.5))
    assert weighted_sup_M(F, WeightParams(0.0, 2.0, 0.0, 2.0)) == pytest.approx(expected)


def _bump(R, T):
    return np.exp(-(R**2) - (T - 2.0) ** 2)


@pytest.mark.parametrize("n", [32, 64])
def test_stored_derivatives_match_centred_differences(n):
    grid = GridSpec(r_max=6.0, t_max=6.0, n=n)
    u = Field.from_functions(
        grid,
        _bump,
        lambda R, T: -2.0 * R * _bump(R, T),
        lambda R, T: -2.0 * (T - 2.0) * _bump(R, T),
    )
    err_r, err_t = u.derivative_defect()
    assert err_r < 0.05 and err_t < 0.05

    # u_t = 0 is inconsistent with u
    assert Field(grid, u.u, u.u_r, 0.0).derivative_defect()[1] > 0.5
