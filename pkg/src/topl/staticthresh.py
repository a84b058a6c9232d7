"""Static-threshold guarantees, the expected-demand rule, and its worst case.

A static rule fixes one acceptance bar before the stream starts and keeps
the first k items that clear it.  With the bar at the (1 - l/n)-quantile
the accepted count is Binomial(n, l/n), Poisson(l) in the limit, and the
guarantee collapses to the closed form E[min(Poisson(l), k)]/k.  The
hard instance is a rare-jackpot two-point law whose jackpot weight W is
tuned so the adversary gains nothing by moving the bar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .crsolver import solve_cr_ell
from .errors import ConvergenceError, ValidationError
from .simkit import DiscreteAtoms, DistributionModel, PolicySpec, TwoPoint, opt_topl, reward_curve
from .specfun import beta_cdf_grid, reg_inc_gamma

__all__ = [
    "StaticCr",
    "StaticWorstCase",
    "static_cr",
    "build_static_worstcase",
    "optimal_static_policy",
    "expected_demand_policy",
    "demand_rule_expectation",
    "static_gap_check",
    "static_slot_share",
    "static_slot_share_bound",
    "truncated_poisson_mean",
]


@dataclass(frozen=True)
class StaticCr:
    """Guarantee of the demand-l static rule with budget k.

    gammas[j-1] is the chance the rule fills slot j in the limit, so value
    is their average: the expected filled fraction of the budget.
    """

    k: int
    ell: int
    value: float
    gammas: tuple


@dataclass(frozen=True, eq=False)
class StaticWorstCase:
    """Rare-jackpot instance saturating the static guarantee.

    Value 1 almost always, a jackpot of n*W with probability 1/n^2.  W is
    chosen so the companion objective over the demand parameter is flat at
    its maximizer, which the constructor verifies on a grid.
    """

    k: int
    ell: int
    n: int
    W: float
    dist: DistributionModel
    lam_star: float


def _poisson_pmf_grid(lam: np.ndarray, jmax: int) -> np.ndarray:
    """pmf[i, j] = P(Poisson(lam_i) = j) for j = 0..jmax, by log evaluation."""
    lam = np.asarray(lam, dtype=float)
    j = np.arange(jmax + 1)
    lgf = np.array([math.lgamma(x + 1.0) for x in j])
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = j[None, :] * np.log(lam[:, None]) - lam[:, None] - lgf[None, :]
    pmf = np.exp(lg)
    pmf[lam == 0.0] = 0.0
    pmf[lam == 0.0, 0] = 1.0
    return pmf


def truncated_poisson_mean(lam, k: int):
    """E[min(Poisson(lam), k)], vectorized over lam."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    pmf = _poisson_pmf_grid(lam_arr, k - 1)
    cdf = np.cumsum(pmf, axis=1)
    # sum over j=1..k of the upper tails P(Poisson >= j)
    out = np.sum(1.0 - cdf, axis=1)
    if np.isscalar(lam) or np.asarray(lam).ndim == 0:
        return float(out[0])
    return out


def static_cr(k: int, ell: int) -> StaticCr:
    """Limit guarantee of the expected-demand static rule."""
    if k < 1 or ell < 1:
        raise ValidationError("need k, ell >= 1")
    gammas = tuple(reg_inc_gamma(j, float(ell)) for j in range(1, k + 1))
    return StaticCr(k=k, ell=ell, value=sum(gammas) / k, gammas=gammas)


def _two_point_or_atom(values, probs) -> DistributionModel:
    (a, pa), (b, pb) = sorted(zip(values, probs))
    if a == b:
        return DiscreteAtoms((a,), (1.0,))
    return TwoPoint(low=a, high=b, p_high=pb)


def build_static_worstcase(k: int, ell: int, n: int, grid_step: float = 1e-3) -> StaticWorstCase:
    """Assemble the jackpot instance and verify the demand maximizer.

    The companion objective E[min(Poisson(lam), k)] * (1 + W/lam) is scanned
    over lam in [ell/2, 2*ell]; the jackpot weight makes its derivative
    cancel exactly at lam = ell, so the grid argmax must land within a step
    of ell.
    """
    if k < 1 or ell < 1:
        raise ValidationError("need k, ell >= 1")
    if n < max(k, ell):
        raise ValidationError("need n >= max(k, ell)")
    below = 1.0 - reg_inc_gamma(k, float(ell))
    above = reg_inc_gamma(k + 1, float(ell))
    W = (ell * ell / k) * below / above
    lam = np.arange(0.5 * ell, 2.0 * ell + grid_step, grid_step)
    obj = truncated_poisson_mean(lam, k) * (1.0 + W / lam)
    lam_star = float(lam[int(np.argmax(obj))])
    if abs(lam_star - ell) > 2.0 * grid_step:
        raise ConvergenceError(
            "companion objective peaks at %.4f, expected %d" % (lam_star, ell)
        )
    dist = _two_point_or_atom((1.0, n * W), (1.0 - 1.0 / n**2, 1.0 / n**2))
    return StaticWorstCase(k=k, ell=ell, n=n, W=W, dist=dist, lam_star=lam_star)


def optimal_static_policy(wc: StaticWorstCase) -> PolicySpec:
    """Best static rule on the jackpot instance: bar at the common value,
    tie-break tuned so the expected demand is exactly ell."""
    n, ell = wc.n, wc.ell
    p_jack = 1.0 / n**2
    tie = (ell / n - p_jack) / (1.0 - p_jack)
    if not 0.0 <= tie <= 1.0:
        raise ValidationError("demand ell=%d infeasible at n=%d" % (ell, n))
    return PolicySpec.static(threshold=1.0, tie_prob=tie)


def expected_demand_policy(dist: DistributionModel, n: int, ell: int) -> PolicySpec:
    """Static bar at the (1 - ell/n)-quantile with exact-demand tie-breaking."""
    if not 1 <= ell <= n:
        raise ValidationError("need 1 <= ell <= n")
    q = ell / n
    T = float(dist.quantile(1.0 - q))
    above = 1.0 - float(dist.cdf(T))
    atom = float(dist.cdf(T)) - float(dist.cdf_left(T))
    tie = 0.0
    if atom > 0.0 and q > above:
        tie = min((q - above) / atom, 1.0)
    return PolicySpec.static(threshold=T, tie_prob=tie)


def demand_rule_expectation(dist: DistributionModel, n: int, k: int, ell: int) -> dict:
    """Exact finite-n expectations for the demand-ell rule.

    Signals are i.i.d. Bernoulli(ell/n) and a signaling item's value is an
    independent draw from the top-(ell/n) tail, so slot j collects
    (R(q)/q) * P(Binomial(n, q) >= j) exactly, atoms included.  The ratio
    pairs that with the exact benchmark, giving the deterministic target a
    simulation should match within its own noise.
    """
    if not 1 <= ell <= n or not 1 <= k <= n:
        raise ValidationError("need 1 <= k, ell <= n")
    q = ell / n
    per_signal = reward_curve(dist, q) / q
    # P(Binomial(n, q) >= j) through the integer-shape beta identity
    fills = np.array([float(beta_cdf_grid(j, n + 1, np.full(1, q))[0]) for j in range(1, k + 1)])
    slots = per_signal * fills
    alg_mean = float(slots.sum()) / k
    benchmark_mean = opt_topl(dist, n, ell) / ell
    return {
        "n": n,
        "k": k,
        "ell": ell,
        "slots": tuple(float(s) for s in slots),
        "alg_mean": alg_mean,
        "benchmark_mean": benchmark_mean,
        "ratio": alg_mean / benchmark_mean,
    }


def static_gap_check(ell: int) -> dict:
    """Adaptive-over-static strict separation at budget one."""
    cr = solve_cr_ell(ell).cr
    st = static_cr(1, ell).value
    if not cr > st:
        raise ConvergenceError(
            "adaptive guarantee %.9f fails to exceed static %.9f at ell=%d" % (cr, st, ell)
        )
    return {"ell": ell, "adaptive_cr": cr, "static_cr": st, "gap": cr - st}


def static_slot_share(j: int, ell: int, n: int) -> float:
    """Exact chance weight that the demand rule's j-th pick happens at all.

    Sum over positions i of the negative binomial pmf at accept rate ell/n,
    divided by n; multiplicative recursion keeps the terms stable.
    """
    if not 1 <= j <= n or not 1 <= ell <= n:
        raise ValidationError("need 1 <= j, ell <= n")
    q = ell / n
    term = q ** (j - 1)
    total = term
    for i in range(j + 1, n + 1):
        term *= (1.0 - q) * (i - 1) / (i - j)
        total += term
    return total / n


def static_slot_share_bound(j: int, ell: int, n: int) -> float:
    """First-order lower bound on the slot share near the Poisson limit."""
    if j < 1 or ell < 1 or n < 1:
        raise ValidationError("need j, ell, n >= 1")
    g = reg_inc_gamma(j, float(ell))
    pmf = math.exp(j * math.log(ell) - ell - math.lgamma(j))  # ell^j e^-ell / (j-1)!
    return g / ell - (1.0 / n) * (ell - ell * g - pmf)
