import numpy as np
import pytest

from src.core.exceptions import MembershipViolation
from src.wave.fields import GridSpec, SourceField, make_profile
from src.wave.finalstate import (
    build_final_ladder,
    build_inverse_ladder,
    check_data,
    ladder_norm_report,
)
from src.wave.params import ladder_for
from src.wave.waveops import TruncationPolicy, apply_K, nonlinearity, residual_max


def test_check_data_returns_eps(grid, long_range, gaussian_pair):
    f1, f2 = gaussian_pair(long_range, 1e-3, grid)
    assert check_data(f1, f2, long_range) == pytest.approx(1e-3)


def test_check_data_rejects_slow_datum(grid, long_range):
    f1 = make_profile("gaussian", long_range.kappas.kappa1, 1e-3, grid)
    f2 = make_profile("algebraic", 0.1, 1e-3, grid)
    with pytest.raises(MembershipViolation):
        check_data(f1, f2, long_range)


@pytest.mark.parametrize("p, q, depth", [(3.0, 3.0, 0), (1.8, 4.0, 1), (1.5, 5.5, 2)])
def test_ladder_depth(grid, trunc, gaussian_pair, p, q, depth):
    lp = ladder_for(p, q)
    f1, f2 = gaussian_pair(lp, 1e-3, grid)
    ladder = build_final_ladder(f1, f2, lp, grid, trunc)
    assert ladder.depth == depth
    assert len(ladder.v) == depth + 1


def test_ladder_members_share_initial_data(grid, trunc, gaussian_pair):
    lp = ladder_for(1.5, 5.5)
    f1, f2 = gaussian_pair(lp, 1e-3, grid)
    ladder = build_final_ladder(f1, f2, lp, grid, trunc)
    for w in ladder.w[1:]:
        assert np.max(np.abs(w.u[0] - ladder.w[0].u[0])) <= 1e-10
        assert np.max(np.abs(w.u_t[0] - ladder.w[0].u_t[0])) <= 1e-10


def test_zero_data_give_zero_ladder(grid, long_range, trunc):
    f1 = make_profile("zero", long_range.kappas.kappa1, 0.0, grid)
    f2 = make_profile("zero", long_range.kappas.kappa2, 0.0, grid)
    ladder = build_final_ladder(f1, f2, long_range, grid, trunc)
    assert all(w.max_abs() == 0.0 for w in ladder.w)
    assert all(v.max_abs() == 0.0 for v in ladder.v)


def test_norm_report_scaling(grid, long_range, trunc, gaussian_pair):
    ladders = [
        build_final_ladder(*gaussian_pair(long_range, eps, grid), long_range, grid, trunc)
        for eps in (5e-4, 1e-3)
    ]
    report = ladder_norm_report(ladders)
    scaled = {(r.j, r.norm_name): r for r in report if r.scaling_exponent is not None}

    assert scaled[(0, "w_step_Z2")].scaling_exponent == pytest.approx(1.8, abs=1e-6)
    assert scaled[(0, "w_step_Z2")].expected_power == pytest.approx(1.8)
    assert scaled[(0, "v_X2")].scaling_exponent == pytest.approx(1.0, abs=1e-6)
    assert scaled[(0, "v_step_Z2")].within(0.15)
    assert all(r.eps == pytest.approx(5e-4) for r in scaled.values())


def test_norm_report_needs_two_ladders(grid, long_range, trunc, gaussian_pair):
    ladder = build_final_ladder(*gaussian_pair(long_range, 1e-3, grid), long_range, grid, trunc)
    with pytest.raises(ValueError):
        ladder_norm_report([ladder])


def test_short_range_inverse_of_free_pair(grid, short_range, trunc, gaussian_pair):
    phi1, phi2 = gaussian_pair(short_range, 1e-3, grid)
    u1, u2 = apply_K(phi1, grid), apply_K(phi2, grid)
    inv = build_inverse_ladder(u1, u2, phi1, short_range, grid, trunc)
    assert inv.ladder.depth == 0
    # free fields carry a small but non-zero nonlinearity, removed by R
    assert np.max(np.abs(inv.w_star.u - u1.u)) < 1e-3 * u1.max_abs()
    assert np.max(np.abs(inv.v0_star.u - u2.u)) < 1e-3 * u2.max_abs()


def test_long_range_inverse_ladder_depth(grid, long_range, trunc, gaussian_pair):
    phi1, phi2 = gaussian_pair(long_range, 1e-3, grid)
    u1, u2 = apply_K(phi1, grid), apply_K(phi2, grid)
    inv = build_inverse_ladder(u1, u2, phi1, long_range, grid, trunc)
    assert len(inv.ladder.w) == long_range.ell + 1
    assert inv.w_star.grid == grid


def test_ladder_steps_telescope(grid, trunc, gaussian_pair):
    lp = ladder_for(1.5, 5.5)
    f1, f2 = gaussian_pair(lp, 1e-2, grid)
    ladder = build_final_ladder(f1, f2, lp, grid, trunc)
    atol = 1e-14 * max(ladder.w[0].max_abs(), ladder.v[0].max_abs())

    total_w = ladder.w[0]
    for j in range(ladder.depth):
        np.testing.assert_allclose(ladder.w[j + 1].u - ladder.w[j].u, ladder.w_step(j).u, atol=atol)
        total_w = total_w + ladder.w_step(j)
    np.testing.assert_allclose(total_w.u, ladder.final_w.u, atol=atol)
    np.testing.assert_allclose((ladder.v[0] + ladder.v_offset(ladder.depth)).u, ladder.final_v.u, atol=atol)
    assert ladder.v_offset(0).max_abs() == 0.0


def test_ladder_steps_solve_their_wave_equations():
    grid = GridSpec(r_max=6.0, t_max=6.0, n=64)
    lp = ladder_for(1.8, 4.0)
    f1 = make_profile("gaussian", lp.kappas.kappa1, 1e-2, grid)
    f2 = make_profile("gaussian", lp.kappas.kappa2, 1e-2, grid)
    ladder = build_final_ladder(f1, f2, lp, grid, TruncationPolicy())

    for step, source in (
        (ladder.w_step(0), nonlinearity(ladder.v[0], lp.p)),
        (ladder.v_step(0), nonlinearity(ladder.w[1], lp.q)),
    ):
        scale = float(np.max(np.abs(source.F)[grid.interior_mask(2)]))
        assert residual_max(step, source) < 0.2 * scale
        # the same step is far from solving the free equation
        assert residual_max(step, SourceField.zeros(grid)) > 0.5 * scale


def test_inverse_gaps_are_the_removed_terms(grid, short_range, trunc, gaussian_pair):
    phi1, phi2 = gaussian_pair(short_range, 1e-3, grid)
    u1, u2 = apply_K(phi1, grid), apply_K(phi2, grid)
    inv = build_inverse_ladder(u1, u2, phi1, short_range, grid, trunc)
    assert inv.w_gap.max_abs() > 0.0
    np.testing.assert_allclose((u1 - inv.w_star).u, inv.w_gap.u, atol=1e-14 * u1.max_abs())
    np.testing.assert_allclose((u2 - inv.v0_star).u, inv.v_gap.u, atol=1e-14 * u2.max_abs())
