"""Support reduction for worst-case search over bounded discrete laws.

The balayage operator sweeps the mass of an interval onto its endpoints
while preserving the mean; done in increasing order over the grid of
backward-induction gap values it leaves the adaptive optimum V_n^k exactly
unchanged and can only help the offline benchmark.  Any law on [0, 1] is
therefore dominated by one supported on 2 + k(k-1)/2 + k(n-k) points, a
finite-dimensional search space.  Brute-force enumeration oracles keep the
numerics honest on small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ValidationError
from .simkit import DiscreteAtoms, DistributionModel
from .specfun import beta_cdf_grid

__all__ = [
    "DiscreteDistribution",
    "BdpTable",
    "balayage_op",
    "bdp_table",
    "support_bound",
    "gap_support_set",
    "reduce_instance",
    "brute_force_opt",
    "opt_topl_exact",
    "discretize_model",
]

_MERGE_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely supported law on [0, 1] with strictly increasing atoms."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.ndim != 1 or v.shape != p.shape or v.size == 0:
            raise ValidationError("need matching non-empty values/probs")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValidationError("support must lie within [0, 1]")
        if np.any(np.diff(v) <= 0.0):
            raise ValidationError("values must be strictly increasing")
        if np.any(p <= 0.0):
            raise ValidationError("probabilities must be positive")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise ValidationError("probabilities must sum to 1 within 1e-12")
        object.__setattr__(self, "values", tuple(float(x) for x in v))
        object.__setattr__(self, "probs", tuple(float(x) for x in p))
        object.__setattr__(self, "_v", np.asarray(self.values))
        object.__setattr__(self, "_p", np.asarray(self.probs))

    @property
    def atoms(self) -> tuple:
        return tuple(zip(self.values, self.probs))

    def mean(self) -> float:
        return float(self._v @ self._p)

    def to_model(self) -> DiscreteAtoms:
        return DiscreteAtoms(self.values, self.probs)


@dataclass(frozen=True, eq=False)
class BdpTable:
    """Backward-induction value grid V[i, j] for i items and budget j.

    Row 0 and column 0 are zero; the acceptance bar with i items left and
    budget j is the gap V[i-1, j] - V[i-1, j-1].
    """

    n: int
    k: int
    V: np.ndarray

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.V, axis=1)

    @property
    def value(self) -> float:
        return float(self.V[self.n, self.k])


def _canonical(values: np.ndarray, probs: np.ndarray) -> DiscreteDistribution:
    """Sort, drop zero-mass atoms, and merge near-coincident values.

    Merged atoms keep their probability-weighted mean position so the
    distribution mean is untouched.
    """
    order = np.argsort(values, kind="stable")
    v = values[order]
    p = probs[order]
    keep = p > 0.0
    v, p = v[keep], p[keep]
    if v.size == 0:
        raise ValidationError("distribution lost all mass")
    mv, mp = [v[0]], [p[0]]
    for x, w in zip(v[1:], p[1:]):
        if x - mv[-1] < _MERGE_TOL:
            tot = mp[-1] + w
            mv[-1] = (mv[-1] * mp[-1] + x * w) / tot
            mp[-1] = tot
        else:
            mv.append(x)
            mp.append(w)
    p_arr = np.asarray(mp)
    return DiscreteDistribution(tuple(mv), tuple(p_arr / p_arr.sum()))


def balayage_op(d: DiscreteDistribution, a: float, b: float) -> DiscreteDistribution:
    """Push the mass of [a, b] onto the endpoints, preserving the mean."""
    if a == b:
        raise ValidationError("degenerate interval: a == b")
    if not 0.0 <= a < b:
        raise ValidationError("need 0 <= a < b")
    v, p = np.asarray(d._v), np.asarray(d._p)
    inside = (v >= a) & (v <= b)
    if not inside.any():
        return d
    w = p[inside]
    x = v[inside]
    pa = float(w @ (b - x)) / (b - a)
    pb = float(w @ (x - a)) / (b - a)
    new_v = np.concatenate((v[~inside], [a, b]))
    new_p = np.concatenate((p[~inside], [pa, pb]))
    return _canonical(new_v, new_p)


def bdp_table(d: DiscreteDistribution, n: int, k: int) -> BdpTable:
    """Exact value grid by atom summation of V_i^j = E[max(V^{j-1}+X, V^j)]."""
    if not 1 <= k <= n:
        raise ValidationError("need n >= k >= 1")
    v, p = d._v, d._p
    V = np.zeros((n + 1, k + 1))
    for i in range(1, n + 1):
        take = v[:, None] + V[i - 1, :-1][None, :]
        stay = V[i - 1, 1:][None, :]
        V[i, 1:] = p @ np.maximum(take, stay)
    return BdpTable(n=n, k=k, V=V)


def support_bound(n: int, k: int) -> int:
    return 2 + k * (k - 1) // 2 + k * (n - k)


def gap_support_set(d: DiscreteDistribution, n: int, k: int) -> np.ndarray:
    """Sorted deduplicated grid {0, 1} plus the gaps with i < n, j <= min(i, k)."""
    table = bdp_table(d, n, k)
    gaps = table.gaps
    pts = [0.0, 1.0]
    for i in range(1, n):
        for j in range(1, min(i, k) + 1):
            pts.append(float(gaps[i, j - 1]))
    pts = np.sort(np.asarray(pts))
    keep = np.concatenate(([True], np.diff(pts) > _MERGE_TOL))
    return pts[keep]


def reduce_instance(d: DiscreteDistribution, n: int, k: int) -> DiscreteDistribution:
    """Sweep successive balayage over the gap grid, left to right.

    The result is supported on the grid, so its size obeys support_bound.
    The adaptive value must survive the sweep; a drift beyond 1e-10 means
    the numerics broke and is raised rather than returned.
    """
    if isinstance(d, DistributionModel):
        raise ValidationError(
            "reduce_instance needs a DiscreteDistribution; discretize_model first"
        )
    before = bdp_table(d, n, k).value
    grid = gap_support_set(d, n, k)
    out = d
    for lo, hi in zip(grid[:-1], grid[1:]):
        out = balayage_op(out, float(lo), float(hi))
    after = bdp_table(out, n, k).value
    if abs(before - after) > 1e-10:
        raise ConvergenceError(
            "adaptive value moved by %.3e during the sweep" % (abs(before - after),)
        )
    return out


def brute_force_opt(d: DiscreteDistribution, n: int, ell: int) -> float:
    """Exact benchmark by full enumeration of the n-fold product support."""
    if not 1 <= ell <= n:
        raise ValidationError("need 1 <= ell <= n")
    m = len(d.values)
    total = m**n
    if total > 10**7:
        raise ValidationError("support^n = %d exceeds the 1e7 enumeration cap" % (total,))
    v, p = d._v, d._p
    radix = m ** np.arange(n)
    acc = 0.0
    chunk = 1 << 20
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = (idx[:, None] // radix[None, :]) % m
        vals = v[digits]
        probs = p[digits].prod(axis=1)
        top = np.partition(vals, n - ell, axis=1)[:, n - ell :].sum(axis=1)
        acc += float(probs @ top)
    return acc


def opt_topl_exact(d: DiscreteDistribution, n: int, ell: int) -> float:
    """Exact benchmark via layer-cake: sum over support gaps of
    (v_{m+1} - v_m) * E[min(count above v_m, ell)]."""
    if not 1 <= ell <= n:
        raise ValidationError("need 1 <= ell <= n")
    v = np.concatenate(([0.0], d._v))
    surv = 1.0 - np.concatenate(([0.0], np.cumsum(d._p)))[: len(v)]
    widths = np.diff(v)
    # below the lowest atom every draw clears the bar, so min(count, ell) = ell
    out = ell * widths[0]
    if widths.size > 1:
        s_mid = surv[1 : widths.size]
        emin = np.zeros(s_mid.shape)
        for j in range(1, ell + 1):
            emin += beta_cdf_grid(j, n + 1, s_mid)
        out += float(widths[1:] @ emin)
    return out


def discretize_model(model: DistributionModel, points: int = 256) -> DiscreteDistribution:
    """Quantile-grid discretization of a bounded model on [0, 1]."""
    if isinstance(model, DiscreteAtoms):
        return _canonical(np.asarray(model._v), np.asarray(model._p))
    lo, hi = model.support()
    if math.isinf(hi) or hi > 1.0 or lo < 0.0:
        raise ValidationError("support must lie within [0, 1]; rescale first")
    if points < 2:
        raise ValidationError("need at least two points")
    u = (np.arange(points) + 0.5) / points
    vals = np.asarray(model.quantile(u), dtype=float)
    return _canonical(vals, np.full(points, 1.0 / points))
