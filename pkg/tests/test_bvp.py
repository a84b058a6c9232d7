"""Finite-n partition solves and the equalization certificate."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topl.bvp import certify_equalization, solve_partition, step_recurrence
from topl.crsolver import solve_cr_ell
from topl.errors import ValidationError


def test_two_item_closed_form():
    # n=2, ell=1 admits the exact constant 4 - 2*sqrt(2).
    sol = solve_partition(2, 1)
    assert sol.c_ell_n == pytest.approx(4.0 - 2.0 * math.sqrt(2.0), abs=1e-10)
    assert sol.b[1] == pytest.approx(2.0 - math.sqrt(2.0), abs=1e-10)
    assert sol.b[0] == 0.0 and sol.b[2] == 1.0


def test_partition_shape_and_monotonicity():
    sol = solve_partition(40, 2)
    assert sol.b.shape == (41,)
    assert sol.b[0] == 0.0
    assert sol.b[-1] == 1.0
    assert np.all(np.diff(sol.b) > 0.0)
    assert np.all(np.diff(sol.eps) > 0.0)
    assert sol.residual <= 1e-10


@pytest.mark.parametrize("n,ell", [(5, 1), (17, 2), (60, 3), (388, 1), (1000, 2)])
def test_constant_in_unit_band(n, ell):
    sol = solve_partition(n, ell)
    assert ell < sol.c_ell_n < ell + 1.0


def test_step_recurrence_is_the_solved_path():
    # Re-run the closure step by step from the solved seed; the trajectory
    # must land on 1 and match the stored grid.
    n, ell = 25, 1
    sol = solve_partition(n, ell)
    b = sol.b[1]
    path = [0.0, b]
    for _ in range(n - 1):
        b = step_recurrence(b, sol.b[1], n, ell)
        path.append(b)
    assert path[-1] == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(path, sol.b, atol=1e-9)


def test_convergence_toward_limit():
    lim = solve_cr_ell(1).cr
    gaps = []
    for n in (100, 1000, 10000):
        sol = solve_partition(n, 1)
        gaps.append(abs(1.0 / sol.c_ell_n - lim))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 2e-4


def test_equalization_certificate_is_flat():
    for n, ell in ((12, 1), (30, 2), (90, 3)):
        sol = solve_partition(n, ell)
        cert = certify_equalization(sol)
        assert cert.rho.shape == (n,)
        assert cert.max_spread <= 1e-8
        # The acceptance rates must also be strictly positive.
        assert np.all(cert.rho > 0.0)


def test_certificate_alpha_sums_to_one():
    sol = solve_partition(15, 1)
    cert = certify_equalization(sol)
    # alpha_i = P(value lands in quantile band i), a partition of [0, 1].
    assert np.sum(cert.alpha) == pytest.approx(1.0, abs=1e-12)
    assert np.all(cert.a >= 0.0)


@given(
    n=st.integers(3, 120),
    ell=st.integers(1, 3),
)
@settings(max_examples=40, deadline=None)
def test_random_partitions_solve_clean(n, ell):
    if n < max(ell + 1, 2):
        return
    sol = solve_partition(n, ell)
    assert sol.residual <= 1e-10
    assert np.all(np.diff(sol.b) > 0.0)
    assert ell < sol.c_ell_n < ell + 1.0


def test_validation():
    with pytest.raises(ValidationError):
        solve_partition(0, 1)
    with pytest.raises(ValidationError):
        solve_partition(5, 0)
    with pytest.raises(ValidationError):
        solve_partition(3, 5)
    with pytest.raises(ValidationError):
        solve_partition(10, 1, tol=-1.0)
