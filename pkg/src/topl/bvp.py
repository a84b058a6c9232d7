"""Finite-n equalized partition via shooting on the first boundary.

The discrete closure b_{i+1} = b_i - (ell/n) * shiftcomp(b_i) + b_1 is
advanced by the compiled kernel; bisection on b_1 in [ell/n, (ell+1)/n]
lands b_n on 1.  A solved partition carries its quantile grid eps and the
finite-n constant c_ell_n = n * b_1, and can be certified independently by
re-deriving the per-interval acceptance masses from the CDFs alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._core import kernels
from .errors import ConvergenceError, ValidationError
from .numerics import bisect_best
from .specfun import beta_cdf_grid, beta_shift_comp

__all__ = [
    "PartitionSolution",
    "RhoCertificate",
    "step_recurrence",
    "solve_partition",
    "certify_equalization",
]


@dataclass(frozen=True)
class PartitionSolution:
    """Equalized acceptance partition for n items at benchmark depth ell."""

    n: int
    ell: int
    b: np.ndarray
    eps: np.ndarray
    c_ell_n: float
    residual: float = 0.0
    comp: np.ndarray = field(default=None, repr=False)


@dataclass(frozen=True)
class RhoCertificate:
    """Per-interval acceptance rates re-derived from the CDFs alone."""

    alpha: np.ndarray
    a: np.ndarray
    rho: np.ndarray
    max_spread: float


def step_recurrence(b_i: float, b_1: float, n: int, ell: int) -> float:
    """One step of the closure: b_i - (ell/n) * shiftcomp(b_i) + b_1."""
    if n < 1 or ell < 1:
        raise ValidationError("n and ell must be positive")
    return b_i - (ell / n) * beta_shift_comp(ell, n, b_i) + b_1


def solve_partition(n: int, ell: int, tol: float = 1e-12) -> PartitionSolution:
    """Shoot the discrete closure so the partition ends exactly at 1.

    Bisection on b_1 runs at most 60 rounds and keeps the iterate with the
    smallest endpoint defect; the defect floor is set by accumulated
    roundoff (~n * eps), so for large n the recorded residual, not tol, is
    the honest accuracy statement.  The boundary case n = ell collapses to
    the all-accepting partition.
    """
    if ell < 1:
        raise ValidationError("ell must be >= 1")
    if n < ell:
        raise ValidationError("need n >= ell")
    if tol <= 0.0:
        raise ValidationError("tol must be positive")
    if n == ell:
        b = np.zeros(n + 1)
        b[1:] = 1.0
        eps = b.copy()
        comp = b.copy()
        return PartitionSolution(
            n=n, ell=ell, b=b, eps=eps, c_ell_n=float(ell), residual=0.0, comp=comp
        )

    def shot(b1: float) -> float:
        return kernels.layer_shot(ell, n, 1, b1, None) - 1.0

    try:
        b1, defect = bisect_best(shot, ell / n, (ell + 1) / n, 60, what="partition shoot")
    except ConvergenceError as err:
        raise ConvergenceError(
            "partition bracket failed (specfun precision?): %s" % (err,)
        ) from err
    b = np.empty(n + 1)
    eps = np.empty(n + 1)
    comp = np.empty(n + 1)
    raw = kernels.layer_path(ell, n, 1, b1, None, b, eps, comp)
    residual = abs(raw - 1.0)
    if residual > tol and residual > 64.0 * n * 2.3e-16:
        raise ConvergenceError(
            "partition residual %.3e above tol %.3e at n=%d" % (residual, tol, n)
        )
    # the grid is the theoretical object with b_n = 1; the raw endpoint
    # defect is recorded separately
    b[n] = 1.0
    eps[n] = 1.0
    return PartitionSolution(
        n=n, ell=ell, b=b, eps=eps, c_ell_n=n * b1, residual=residual, comp=comp
    )


def certify_equalization(sol: PartitionSolution) -> RhoCertificate:
    """Re-derive the per-interval rates from CDF values only.

    alpha_i = b_i - b_{i-1} is the design mass of interval i; a_i is the
    same mass pushed through the shifted-shape CDF at the solved quantile
    grid.  For an equalized partition rho is constant, so max_spread is the
    certificate: it measures defect against the first interval.
    """
    n, ell = sol.n, sol.ell
    if n == ell:
        alpha = np.diff(sol.b)
        a = np.zeros(n)
        rho = np.full(n, 1.0 / max(sol.b[1], 1e-300))
        return RhoCertificate(alpha=alpha, a=a, rho=rho, max_spread=0.0)
    alpha = np.diff(sol.b)
    F = beta_cdf_grid(ell, n + 1, sol.eps)
    a = ((n - ell) / n) * np.diff(F)
    rho = np.empty(n)
    rho[0] = 1.0 / alpha[0]
    if n > 1:
        rho[1:] = rho[0] * np.cumprod(a[:-1] / alpha[1:])
    max_spread = float(np.max(np.abs(rho - rho[0])) / rho[0])
    return RhoCertificate(alpha=alpha, a=a, rho=rho, max_spread=max_spread)
