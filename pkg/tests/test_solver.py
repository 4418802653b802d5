import csv

import numpy as np
import pytest

from src.core.config import SolverConfig
from src.core.exceptions import ConfigError, LeftDomain, NoContraction
from src.wave.fields import DataPair, Field, make_profile, norm_Z
from src.wave.finalstate import build_final_ladder
from src.wave.params import ladder_for
from src.wave.scatter import relative_defect
from src.wave.solver import (
    FixedPointProblem,
    MetricKind,
    MetricSpec,
    ProblemKind,
    Termination,
    contraction_probe,
    fixed_point_defect,
    metric_d,
    metric_for,
    picard_iterate,
    solve_fvp_long,
    solve_fvp_short,
    solve_ivp,
)


def _constant_pair(grid, c1, c2):
    return Field(grid, c1, 0.0, 0.0), Field(grid, c2, 0.0, 0.0)


def test_short_range_metric_adds_components(grid, short_range):
    m = metric_for(short_range, 1e-3)
    assert m.kind == MetricKind.SHORT_RANGE
    assert m.radius == pytest.approx(1e-3)
    a = _constant_pair(grid, 2.0, 3.0)
    b = _constant_pair(grid, 0.0, 0.0)
    k1, k2 = m.indices
    expected = norm_Z(a[0], 2, k1) + norm_Z(a[1], 2, k2)
    assert metric_d(a, b, m) == pytest.approx(expected)


def test_long_range_metric_includes_first_order_power(grid, long_range):
    m = metric_for(long_range, 1e-2)
    assert m.kind == MetricKind.LONG_RANGE
    assert m.radius == pytest.approx(1e-2**3.2)
    a = _constant_pair(grid, 0.0, 0.5)
    b = _constant_pair(grid, 0.0, 0.0)
    nu = long_range.a_next
    expected = norm_Z(a[1], 2, nu) + norm_Z(a[1], 1, nu) ** 0.8
    assert metric_d(a, b, m) == pytest.approx(expected)


def test_p_equals_two_metric_indices():
    lp = ladder_for(2.0, 4.0)
    m = metric_for(lp, 1e-2)
    assert m.kind == MetricKind.P_EQUALS_TWO
    assert m.indices == (lp.kappas.kappa2, lp.kappas.kappa2)
    assert m.radius == pytest.approx(1e-8)


def test_zero_data_converge_immediately(grid, long_range, solver_settings):
    f1 = make_profile("zero", long_range.kappas.kappa1, 0.0, grid)
    f2 = make_profile("zero", long_range.kappas.kappa2, 0.0, grid)
    sol = solve_ivp(f1, f2, long_range, grid, solver_settings)
    assert sol.trace.converged
    assert sol.trace.iterations == 1
    assert sol.u1.max_abs() == 0.0 and sol.u2.max_abs() == 0.0


def test_ivp_small_data(grid, long_range, solver_settings, gaussian_pair):
    phi1, phi2 = gaussian_pair(long_range, 1e-3, grid)
    sol = solve_ivp(phi1, phi2, long_range, grid, solver_settings)
    assert sol.trace.converged
    assert sol.trace.contraction_certified
    assert fixed_point_defect(sol) <= 1e-9
    assert set(sol.trace.norms) == {"u1", "u2", "two_eps"}
    assert sol.trace.norms["two_eps"] == pytest.approx(2e-3)


def test_fvp_short(grid, short_range, trunc, solver_settings, gaussian_pair):
    f1, f2 = gaussian_pair(short_range, 1e-3, grid)
    sol = solve_fvp_short(f1, f2, short_range, grid, trunc, solver_settings)
    assert sol.problem.kind == ProblemKind.FVP_SHORT
    assert sol.trace.converged
    assert fixed_point_defect(sol) <= 1e-9


def test_fvp_short_rejects_long_range(grid, long_range, trunc, solver_settings, gaussian_pair):
    f1, f2 = gaussian_pair(long_range, 1e-3, grid)
    with pytest.raises(ConfigError):
        solve_fvp_short(f1, f2, long_range, grid, trunc, solver_settings)


def test_fvp_long(grid, long_range, trunc, solver_settings, gaussian_pair):
    f1, f2 = gaussian_pair(long_range, 1e-3, grid)
    ladder = build_final_ladder(f1, f2, long_range, grid, trunc)
    sol = solve_fvp_long(ladder, long_range, grid, trunc, solver_settings)
    assert sol.problem.kind == ProblemKind.FVP_LONG
    assert sol.trace.converged
    assert sol.trace.records[-1].anchor_distance <= 10 * sol.trace.radius


def test_diverging_map_raises_no_contraction(grid, short_range):
    anchor = _constant_pair(grid, 1.0, 1.0)
    problem = FixedPointProblem(
        ProblemKind.IVP,
        anchor,
        lambda pair: (2.0 * pair[0], 2.0 * pair[1]),
        metric_for(short_range, 1.0),
        1.0,
    )
    with pytest.raises(NoContraction) as err:
        picard_iterate(problem, SolverConfig(max_iters=20))
    trace = err.value.trace
    assert trace.reason == Termination.DIVERGED
    assert trace.iterations == 3


def test_leaving_the_ball_raises(grid, short_range):
    anchor = _constant_pair(grid, 0.0, 0.0)
    shift = _constant_pair(grid, 1.0, 1.0)
    metric = MetricSpec(MetricKind.SHORT_RANGE, short_range, radius=1e-6)
    problem = FixedPointProblem(
        ProblemKind.FVP_LONG,
        anchor,
        lambda pair: (pair[0] + shift[0], pair[1] + shift[1]),
        metric,
        1e-6,
    )
    with pytest.raises(LeftDomain) as err:
        picard_iterate(problem, SolverConfig(), confine=True)
    assert err.value.trace.iterations == 1


def test_max_iters_stops_without_error(grid, short_range, tmp_path):
    anchor = _constant_pair(grid, 1.0, 1.0)
    problem = FixedPointProblem(
        ProblemKind.IVP,
        anchor,
        lambda pair: (0.5 * pair[0], 0.5 * pair[1]),
        metric_for(short_range, 1.0),
        1.0,
    )
    trace = picard_iterate(problem, SolverConfig(tol=1e-300, max_iters=4)).trace
    assert trace.reason == Termination.MAX_ITERS
    assert trace.ratios_after_first() == pytest.approx([0.5, 0.5, 0.5])

    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "distance", "ratio"]
    assert len(rows) == 5
    assert rows[1][2] == ""


def test_probe_with_zero_data_is_unconstrained(grid, long_range, trunc, solver_settings):
    result = contraction_probe(
        ProblemKind.IVP, [1e-2, 1e-3], long_range, grid, trunc, solver_settings, family="zero"
    )
    assert result.unconstrained
    assert result.estimate == 1e-2
    assert not result.anomaly


def test_probe_small_data(grid, long_range, trunc, solver_settings):
    result = contraction_probe(
        ProblemKind.IVP, [5e-4, 1e-3], long_range, grid, trunc, solver_settings
    )
    assert [o.eps for o in result.outcomes] == [1e-3, 5e-4]
    assert result.estimate == 1e-3
    assert not result.unconstrained
    assert all(o.contracted for o in result.outcomes)


@pytest.mark.parametrize("kind", list(MetricKind))
def test_metric_is_symmetric_and_satisfies_the_triangle_inequality(grid, long_range, kind):
    rng = np.random.default_rng(7)
    m = metric_for(long_range, 1e-2, kind)

    def random_pair():
        return tuple(
            Field(grid, *(rng.standard_normal(grid.shape) for _ in range(3))) for _ in range(2)
        )

    for _ in range(10):
        a, b, c = random_pair(), random_pair(), random_pair()
        assert metric_d(a, a, m) == 0.0
        assert metric_d(a, b, m) == pytest.approx(metric_d(b, a, m))
        assert metric_d(a, c, m) <= (metric_d(a, b, m) + metric_d(b, c, m)) * (1.0 + 1e-12)


def test_tolerance_is_relative_to_the_anchor(grid, short_range):
    anchor = _constant_pair(grid, 1e-12, 1e-12)
    problem = FixedPointProblem(
        ProblemKind.IVP,
        anchor,
        lambda pair: (0.2 * pair[0], 0.2 * pair[1]),
        metric_for(short_range, 1e-12),
        1e-12,
    )
    trace = picard_iterate(problem, SolverConfig(tol=1e-8, max_iters=30)).trace
    # an absolute 1e-8 would have stopped after the second sweep
    assert trace.records[0].distance < 1e-8
    assert trace.scale == pytest.approx(metric_d(anchor, _constant_pair(grid, 0.0, 0.0), problem.metric))
    assert trace.threshold == pytest.approx(1e-8 * trace.scale)
    assert trace.converged
    # 0.2^k <= 1e-8 first at k = 12
    assert trace.iterations == 12


def test_first_update_gets_a_second_sweep(grid, short_range):
    anchor = _constant_pair(grid, 1.0, 0.0)
    shift = Field(grid, 0.5, 0.0, 0.0)
    problem = FixedPointProblem(
        ProblemKind.IVP,
        anchor,
        lambda pair: (shift, pair[0] - anchor[0]),
        metric_for(short_range, 1.0),
        1.0,
    )
    result = picard_iterate(problem, SolverConfig(tol=10.0))
    assert result.trace.converged
    assert result.trace.iterations == 2
    assert result.corrections[1].max_abs() == pytest.approx(0.5)
    np.testing.assert_allclose(result.pair[1].u, 0.5)


def test_fvp_long_updates_both_components(grid, long_range, trunc, gaussian_pair):
    f1, f2 = gaussian_pair(long_range, 1e-2, grid)
    ladder = build_final_ladder(f1, f2, long_range, grid, trunc)
    sol = solve_fvp_long(ladder, long_range, grid, trunc, SolverConfig())
    c1, c2 = sol.corrections
    assert sol.trace.converged
    assert sol.trace.iterations >= 2
    assert c1.max_abs() > 0.0 and c2.max_abs() > 0.0
    np.testing.assert_array_equal(sol.u1.u, (ladder.w[-1] + c1).u)
    np.testing.assert_array_equal(sol.u2.u, (ladder.v[-1] + c2).u)


def test_fvp_solution_solves_the_ivp_from_its_traces(
    grid, short_range, trunc, solver_settings, gaussian_pair
):
    f1, f2 = gaussian_pair(short_range, 1e-3, grid)
    fvp = solve_fvp_short(f1, f2, short_range, grid, trunc, solver_settings)
    k1, k2 = short_range.kappas.kappa1, short_range.kappas.kappa2
    phi1, phi2 = DataPair.from_trace(fvp.u1, k1), DataPair.from_trace(fvp.u2, k2)
    ivp = solve_ivp(phi1, phi2, short_range, grid, solver_settings)
    assert ivp.trace.converged
    assert relative_defect(fvp.u1, ivp.u1) < 1e-3
    assert relative_defect(fvp.u2, ivp.u2) < 1e-3
