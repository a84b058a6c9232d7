"""Stacked selection layers: finite-n grids and the continuous limit.

Two solvers live here.  ``solve_grid`` extends the single-layer partition
to k coupled layers at finite n: layer j is seeded at an interior value
b_j^j, driven by the previous layer's companion path, and shot to land on
1, which fixes the per-layer gain theta_j(n).  ``solve_ode_system`` solves
the continuous analogue: k transport equations db/dt = drive - ell * G(b)
chained through the gain map G, with theta_j found by bisection so every
layer ends at 1.  The two meet in ``theta_c_relation``, which reports how
the finite-n gains and seed constants approach the limit schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._core import kernels
from .bvp import PartitionSolution, solve_partition
from .crsolver import solve_cr_ell
from .errors import ConvergenceError, ValidationError
from .numerics import bisect_best, expand_bracket_log, hermite_midpoints, interleave

__all__ = [
    "GridSolution",
    "ThetaSchedule",
    "ThetaRelationReport",
    "solve_grid",
    "solve_ode_system",
    "theta_c_relation",
]

_LN10 = math.log(10.0)


@dataclass(frozen=True)
class GridSolution:
    """k-layer discrete solution at finite n.

    ``b[j-1]`` is layer j's trajectory over indices j-1..n, so it opens at
    0 and (after the shot converges) closes at 1.  ``theta_n`` holds the
    fitted gains theta_2(n)..theta_k(n); ``c_n`` the rescaled seed
    constants c_{j,ell}(n) = b_j^j * n**(ell*(((ell+1)/ell)**j - 1));
    ``rho_diag`` the diagonal acceptance rates chained by
    rho_j = rho_{j-1} / theta_j(n).
    """

    n: int
    k: int
    ell: int
    b: tuple
    theta_n: np.ndarray
    c_n: np.ndarray
    rho_diag: np.ndarray
    residuals: np.ndarray = field(default=None, repr=False)


@dataclass(frozen=True)
class ThetaSchedule:
    """Limit gain schedule theta_1..theta_k and its guarantee.

    ``cr_bound`` is the k-choice guarantee (cr_limit / k) * sum_j
    prod_{t<=j} 1/theta_t; ``ode_grid`` stacks the k node trajectories.
    ``mesh_err`` is a two-mesh Richardson estimate of the endpoint
    discretization error.
    """

    k: int
    ell: int
    theta: np.ndarray
    cr_bound: float
    ode_grid: np.ndarray = field(repr=False)
    cr_limit: float = 0.0
    residuals: np.ndarray = field(default=None, repr=False)
    mesh_err: float = 0.0

    def prefix_bound(self, k: int) -> float:
        """Guarantee for keeping only the first k layers of the schedule."""
        if not 1 <= k <= self.k:
            raise ValidationError("prefix depth out of range")
        inv = 1.0 / self.theta[:k]
        return (self.cr_limit / k) * float(np.sum(np.cumprod(inv)))


@dataclass(frozen=True)
class ThetaRelationReport:
    """Finite-n gains against the limit schedule, per layer depth.

    ``theta_gaps[i, j-2]`` is |theta_j(n_i) - theta_j|; the relation
    residual compares theta_j to the seed-constant identity
    (ell+1) c_j / (ell * (ell!)**(1/ell) * c_{j-1}**(1+1/ell)) at the
    largest n, relative to theta_j.
    """

    ell: int
    n_values: tuple
    theta_gaps: np.ndarray
    relation_residual: np.ndarray


def _seed_exponent(ell: int, j: int) -> float:
    return -ell * ((ell + 1.0) / ell) ** j + ell


def solve_grid(n: int, k: int, ell: int, tol: float = 1e-12) -> GridSolution:
    """Solve the k-layer discrete system at finite n.

    Layer 1 is the single-layer partition; each further layer bisects its
    seed b_j^j in log space, starting two decades either side of the
    n**r scaling guess and widening up to n**(r +- ell) before giving up.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    if ell < 1:
        raise ValidationError("ell must be >= 1")
    if n < max(k, ell):
        raise ValidationError("need n >= max(k, ell)")
    if tol <= 0.0:
        raise ValidationError("tol must be positive")

    part = solve_partition(n, ell, tol=tol)
    layers_full = [part.b]
    comp_prev = part.comp
    residuals = [part.residual]
    seeds = [part.b[1]]
    theta_n = []
    ln_n = math.log(n)

    for j in range(2, k + 1):
        r = _seed_exponent(ell, j)
        center = r * ln_n

        def shot(u: float, _j=j, _cp=comp_prev) -> float:
            return kernels.layer_shot(ell, n, _j, math.exp(u), _cp) - 1.0

        lo, hi = center - 2.0 * _LN10, center + 2.0 * _LN10
        lo_lim, hi_lim = center - ell * ln_n, center + ell * ln_n
        if lo < math.log(1e-300):
            raise ValidationError(
                "layer %d seed scale n^%.3g underflows at n=%d" % (j, r, n)
            )
        flo, fhi = shot(lo), shot(hi)
        while flo > 0.0 and lo > lo_lim:
            hi, fhi = lo, flo
            lo = max(lo - 2.0 * _LN10, lo_lim)
            flo = shot(lo)
        while fhi < 0.0 and hi < hi_lim:
            lo, flo = hi, fhi
            hi = min(hi + 2.0 * _LN10, hi_lim)
            fhi = shot(hi)
        if flo > 0.0 or fhi < 0.0:
            raise ConvergenceError(
                "layer %d seed bracket exhausted beyond n^(r+-ell) at n=%d" % (j, n)
            )
        u_best, _ = bisect_best(shot, lo, hi, 60, what="layer %d seed" % j)
        seed = math.exp(u_best)

        b_out = np.empty(n + 1)
        eps_out = np.empty(n + 1)
        comp_out = np.empty(n + 1)
        raw = kernels.layer_path(ell, n, j, seed, comp_prev, b_out, eps_out, comp_out)
        residuals.append(abs(raw - 1.0))
        b_out[n] = 1.0
        comp_out[n] = 1.0
        theta_n.append(n * seed / (ell * comp_prev[j - 1]))
        seeds.append(seed)
        layers_full.append(b_out)
        comp_prev = comp_out

    c_n = np.array(
        [
            math.exp(math.log(seeds[j - 1]) - _seed_exponent(ell, j) * ln_n)
            for j in range(1, k + 1)
        ]
    )
    rho_diag = np.empty(k)
    rho_diag[0] = 1.0 / seeds[0]
    for j in range(2, k + 1):
        rho_diag[j - 1] = rho_diag[j - 2] / theta_n[j - 2]
    return GridSolution(
        n=n,
        k=k,
        ell=ell,
        b=tuple(arr[j:] for j, arr in enumerate(layers_full)),
        theta_n=np.asarray(theta_n),
        c_n=c_n,
        rho_diag=rho_diag,
        residuals=np.asarray(residuals),
    )


def _next_drive(ell: int, mesh: int, lg_nodes: np.ndarray, slope: np.ndarray) -> np.ndarray:
    """Interleave nodes with cubic-Hermite midpoints of ell*G along a layer."""
    mids = hermite_midpoints(lg_nodes, slope, 1.0 / mesh)
    np.clip(mids, 0.0, float(ell), out=mids)
    return interleave(lg_nodes, mids)


def solve_ode_system(
    k: int, ell: int, mesh_size: int = 200_000, tol: float = 1e-6
) -> ThetaSchedule:
    """Solve the k chained transport equations on a fixed RK4 mesh.

    Layer 1 runs at the limit constant from the scalar solver and must hit
    1 within tol on its own; layers 2..k bisect their gain theta_j until
    the endpoint lands on 1.  A half-mesh re-shot of every accepted layer
    gives the Richardson error estimate ``mesh_err``.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    if ell < 1:
        raise ValidationError("ell must be >= 1")
    if mesh_size < 8 or mesh_size % 2:
        raise ValidationError("mesh_size must be even and >= 8")
    if tol <= 0.0:
        raise ValidationError("tol must be positive")

    lim = solve_cr_ell(ell, tol=1e-12)
    c = lim.c_ell
    b_grid = np.empty((k, mesh_size + 1))
    f_work = np.empty(mesh_size + 1)
    nu_work = np.empty(mesh_size + 1)
    residuals = np.empty(k)
    theta = np.empty(k)
    theta[0] = 1.0
    mesh_err = 0.0

    raw = kernels.ode_path(ell, mesh_size, c, 1.0, None, b_grid[0], f_work, nu_work)
    residuals[0] = abs(raw - 1.0)
    if residuals[0] > tol:
        raise ConvergenceError(
            "layer 1 endpoint defect %.3e exceeds tol %.3e at mesh %d"
            % (residuals[0], tol, mesh_size)
        )
    half = kernels.ode_shot(ell, mesh_size // 2, c, 1.0, None)
    mesh_err = max(mesh_err, abs(half - raw))
    lg_nodes = c - f_work
    drive = _next_drive(ell, mesh_size, lg_nodes, nu_work * f_work)

    for j in range(2, k + 1):

        def shot(th: float, _d=drive) -> float:
            return kernels.ode_shot(ell, mesh_size, 0.0, th, _d) - 1.0

        lo, hi = expand_bracket_log(shot, 1.0, 2.0, 48, what="layer %d gain" % j)
        th_j, defect = bisect_best(shot, lo, hi, 48, what="layer %d gain" % j)
        theta[j - 1] = th_j
        residuals[j - 1] = abs(defect)
        raw = kernels.ode_path(
            ell, mesh_size, 0.0, th_j, drive, b_grid[j - 1], f_work, nu_work
        )
        half = kernels.ode_shot(
            ell, mesh_size // 2, 0.0, th_j, np.ascontiguousarray(drive[::2])
        )
        mesh_err = max(mesh_err, abs(half - raw))
        if j < k:
            lg_nodes = th_j * drive[0::2] - f_work
            drive = _next_drive(ell, mesh_size, lg_nodes, nu_work * f_work)

    inv = 1.0 / theta
    cr_bound = (lim.cr / k) * float(np.sum(np.cumprod(inv)))
    return ThetaSchedule(
        k=k,
        ell=ell,
        theta=theta,
        cr_bound=cr_bound,
        ode_grid=b_grid,
        cr_limit=lim.cr,
        residuals=residuals,
        mesh_err=mesh_err,
    )


def theta_c_relation(schedule: ThetaSchedule, grids) -> ThetaRelationReport:
    """Compare finite-n gains and seed constants against the limit schedule.

    ``grids`` must share the schedule's (k, ell) and come in increasing n.
    For k = 1 there are no gains to compare and the report is empty.
    """
    grids = list(grids)
    for g in grids:
        if g.k != schedule.k or g.ell != schedule.ell:
            raise ValidationError("grid (k, ell) does not match schedule")
    ns = [g.n for g in grids]
    if sorted(ns) != ns or len(set(ns)) != len(ns):
        raise ValidationError("grids must come in strictly increasing n")
    k, ell = schedule.k, schedule.ell
    if k == 1 or not grids:
        return ThetaRelationReport(
            ell=ell,
            n_values=tuple(ns),
            theta_gaps=np.zeros((len(ns), 0)),
            relation_residual=np.zeros(0),
        )
    gaps = np.empty((len(grids), k - 1))
    for i, g in enumerate(grids):
        gaps[i] = np.abs(g.theta_n - schedule.theta[1:])
    c_big = grids[-1].c_n
    fac = math.factorial(ell) ** (1.0 / ell)
    rel = np.empty(k - 1)
    for j in range(2, k + 1):
        pred = (ell + 1.0) * c_big[j - 1] / (ell * fac * c_big[j - 2] ** (1.0 + 1.0 / ell))
        rel[j - 2] = abs(pred - schedule.theta[j - 1]) / schedule.theta[j - 1]
    return ThetaRelationReport(
        ell=ell,
        n_values=tuple(ns),
        theta_gaps=gaps,
        relation_residual=rel,
    )
