"""Layered grids at finite n and the continuous gain schedule."""

import numpy as np
import pytest

from topl.crsolver import solve_cr_ell
from topl.errors import ValidationError
from topl.multibvp import (
    solve_grid,
    solve_ode_system,
    theta_c_relation,
)

# Continuous-limit gain for the second layer at depth 1, frozen after
# Richardson extrapolation over three meshes agreed to 4e-9.
THETA2_L1 = 3.271285402096204


@pytest.fixture(scope="module")
def sched21():
    return solve_ode_system(k=2, ell=1, mesh_size=20_000)


def test_grid_single_layer_matches_partition():
    from topl.bvp import solve_partition

    g = solve_grid(200, 1, 1)
    part = solve_partition(200, 1)
    assert g.theta_n.size == 0
    assert np.allclose(g.b[0], part.b, atol=0.0)
    assert g.rho_diag[0] == pytest.approx(1.0 / part.b[1], rel=1e-12)


def test_grid_two_layer_regression():
    g = solve_grid(1000, 2, 1)
    assert float(g.theta_n[0]) == pytest.approx(3.2738883662809095, rel=1e-9)
    assert g.c_n.shape == (2,)
    assert g.rho_diag.shape == (2,)
    assert np.all(g.residuals <= 1e-9)


def test_grid_layer_trajectories_close_at_one():
    g = solve_grid(300, 3, 1)
    for traj in g.b:
        assert traj[0] == 0.0
        assert traj[-1] == pytest.approx(1.0, abs=1e-9)
        assert np.all(np.diff(traj) > -1e-15)


def test_grid_rho_chain():
    # rho_j = rho_{j-1} / theta_j(n) by construction, re-derived here.
    g = solve_grid(500, 3, 2)
    for j in range(1, g.k):
        assert g.rho_diag[j] == pytest.approx(
            g.rho_diag[j - 1] / float(g.theta_n[j - 1]), rel=1e-12
        )


def test_schedule_first_gain_and_bound(sched21):
    assert float(sched21.theta[0]) == 1.0
    assert float(sched21.theta[1]) == pytest.approx(THETA2_L1, abs=5e-6)
    assert sched21.cr_limit == pytest.approx(solve_cr_ell(1).cr, abs=1e-9)
    # Two-layer guarantee: (cr/2) * (1 + 1/theta_2).
    want = sched21.cr_limit / 2.0 * (1.0 + 1.0 / float(sched21.theta[1]))
    assert sched21.cr_bound == pytest.approx(want, rel=1e-12)


def test_schedule_gains_above_one(sched21):
    assert np.all(sched21.theta >= 1.0 - 1e-6)


def test_prefix_bound_telescopes(sched21):
    assert sched21.prefix_bound(2) == pytest.approx(sched21.cr_bound, rel=1e-14)
    assert sched21.prefix_bound(1) == pytest.approx(sched21.cr_limit, rel=1e-12)
    with pytest.raises(ValidationError):
        sched21.prefix_bound(0)
    with pytest.raises(ValidationError):
        sched21.prefix_bound(3)


def test_schedule_mesh_error_estimate(sched21):
    # Richardson on the half mesh: estimate present and small at this size.
    assert 0.0 <= sched21.mesh_err < 1e-5
    assert np.all(sched21.residuals <= 1e-6)


def test_ode_grid_trajectories(sched21):
    grid = sched21.ode_grid
    assert grid.shape == (2, 20_001)
    assert np.all(grid[:, 0] == 0.0)
    assert grid[0, -1] == pytest.approx(1.0, abs=1e-6)
    assert grid[1, -1] == pytest.approx(1.0, abs=1e-6)


def test_theta_convergence_toward_limit(sched21):
    lim = float(sched21.theta[1])
    gap_small = abs(float(solve_grid(300, 2, 1).theta_n[0]) - lim)
    gap_big = abs(float(solve_grid(3000, 2, 1).theta_n[0]) - lim)
    assert gap_big < gap_small


def test_theta_c_relation_report(sched21):
    grids = [solve_grid(n, 2, 1) for n in (300, 1000, 3000)]
    rep = theta_c_relation(sched21, grids)
    assert rep.theta_gaps.shape == (3, 1)
    # Gaps shrink with n and the seed-constant identity holds loosely at
    # the largest n (it is an asymptotic relation).
    assert rep.theta_gaps[0, 0] > rep.theta_gaps[2, 0]
    assert abs(rep.relation_residual[0]) < 0.05


def test_theta_c_relation_validation(sched21):
    with pytest.raises(ValidationError):
        theta_c_relation(sched21, [solve_grid(100, 2, 2)])
    g = solve_grid(100, 2, 1)
    with pytest.raises(ValidationError):
        theta_c_relation(sched21, [g, g])


def test_solver_validation():
    from topl.errors import ConvergenceError

    with pytest.raises(ValidationError):
        solve_grid(10, 0, 1)
    with pytest.raises(ValidationError):
        solve_grid(2, 1, 4)
    # A mesh this coarse cannot hit the endpoint tolerance.
    with pytest.raises(ConvergenceError):
        solve_ode_system(k=1, ell=1, mesh_size=10)
