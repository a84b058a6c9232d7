"""Distribution models, selection policies, and the seeded Monte Carlo engine.

Everything downstream of the solvers lives here: the distribution algebra
(closed-form kinds, discrete atoms, power transforms, and the piecewise
worst-case law built from the layer-1 flow), benchmark evaluation for the
top-l order-statistic sum, backward-induction optimal policies, and a
reproducible simulator whose randomness is carved into per-trial Philox
counter slices so results never depend on batching or scheduling.

Policies are evaluated on the probability scale: each item carries the
uniform u that generated it, so quantile rules compare u against band
endpoints directly and atom ties are randomized exactly, not by value
comparison against a discontinuous CDF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._core import kernels
from .bvp import PartitionSolution
from .crsolver import solve_cr_ell
from .errors import ConvergenceError, ValidationError
from .multibvp import GridSolution
from .numerics import adaptive_simpson
from .specfun import beta_cdf_grid, log_beta_fn, reg_inc_beta_inv

__all__ = [
    "DEFAULT_SEED",
    "DistributionModel",
    "Uniform",
    "Exponential",
    "TwoPoint",
    "DiscreteAtoms",
    "PowerTransform",
    "WorstCaseFq",
    "WorstCaseInstance",
    "PolicySpec",
    "SimulationReport",
    "BdpResult",
    "dist_from_json",
    "reward_curve",
    "opt_topl",
    "topl_mc",
    "simulate_policy",
    "bdp_value",
    "build_worstcase_instance",
    "worstcase_ratio",
    "doubling_transform",
]

DEFAULT_SEED = 20240501
_BATCH = 1 << 14
_QUAD_TOL = 1e-10


def _substream(seed: int, start_trial: int, n_trials: int, draws: int) -> np.ndarray:
    """Uniforms for trials [start, start+n), each owning a fixed counter slice.

    Trial t consumes the Philox counters covering doubles [t*d4, (t+1)*d4)
    where d4 rounds the per-trial draw count up to a whole counter block of
    4, so the slab for any contiguous trial range is independent of how the
    caller batches its work.
    """
    d4 = -(-draws // 4) * 4
    bg = np.random.Philox(key=seed)
    if start_trial:
        bg.advance(start_trial * (d4 // 4))
    slab = np.random.Generator(bg).random((n_trials, d4))
    return slab[:, :draws]


def _match(x, out: np.ndarray):
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(out.reshape(-1)[0])
    return out


# ---------------------------------------------------------------------------
# distribution models


class DistributionModel:
    """Non-negative law with CDF, generalized-inverse quantile, and sampling.

    Subclasses provide vectorized cdf/quantile and exact first-moment
    helpers where closed forms exist.  plus_expectation(t) = E[(X-t)+] is
    the workhorse for backward induction and the reward curve.
    """

    kind = "abstract"

    def cdf(self, x):
        raise NotImplementedError

    def cdf_left(self, x):
        """P(X < x); differs from cdf only at atoms."""
        return self.cdf(x)

    def quantile(self, u):
        raise NotImplementedError

    def support(self) -> tuple:
        raise NotImplementedError

    def mean(self) -> float:
        return float(self.plus_expectation(0.0))

    def sample(self, rng: np.random.Generator, size=None):
        return self.quantile(rng.random(size))

    def plus_expectation(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = self.support()
        if math.isinf(hi):
            hi = float(self.quantile(1.0 - 1e-13))
        out = np.zeros(t_arr.shape)
        for i, tv in enumerate(t_arr.ravel()):
            a = max(tv, lo)
            if a < hi:
                val, _ = adaptive_simpson(
                    lambda x: 1.0 - np.asarray(self.cdf(x), dtype=float),
                    a,
                    hi,
                    _QUAD_TOL,
                )
                out.ravel()[i] = val
        return _match(t, out)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(DistributionModel):
    lo: float = 0.0
    hi: float = 1.0
    kind = "uniform"

    def __post_init__(self):
        if not 0.0 <= self.lo < self.hi:
            raise ValidationError("uniform needs 0 <= lo < hi")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _match(x, np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return _match(u, self.lo + u * (self.hi - self.lo))

    def support(self):
        return (self.lo, self.hi)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def plus_expectation(self, t):
        t_arr = np.asarray(t, dtype=float)
        c = np.clip(t_arr, self.lo, self.hi)
        val = (self.hi - c) ** 2 / (2.0 * (self.hi - self.lo)) + np.maximum(
            self.lo - t_arr, 0.0
        )
        return _match(t, np.asarray(val))

    def to_json(self):
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Exponential(DistributionModel):
    rate: float = 1.0
    kind = "exponential"

    def __post_init__(self):
        if not self.rate > 0.0:
            raise ValidationError("exponential rate must be positive")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _match(x, np.where(x <= 0.0, 0.0, -np.expm1(-self.rate * np.maximum(x, 0.0))))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return _match(u, -np.log1p(-u) / self.rate)

    def support(self):
        return (0.0, math.inf)

    def mean(self):
        return 1.0 / self.rate

    def plus_expectation(self, t):
        t_arr = np.asarray(t, dtype=float)
        val = np.where(
            t_arr <= 0.0,
            1.0 / self.rate - t_arr,
            np.exp(-self.rate * np.maximum(t_arr, 0.0)) / self.rate,
        )
        return _match(t, np.asarray(val))

    def to_json(self):
        return {"kind": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class TwoPoint(DistributionModel):
    """Mass at two values, the classic rare-jackpot shape."""

    low: float
    high: float
    p_high: float
    kind = "two_point"

    def __post_init__(self):
        if not 0.0 <= self.low < self.high:
            raise ValidationError("two_point needs 0 <= low < high")
        if not 0.0 < self.p_high < 1.0:
            raise ValidationError("p_high must be in (0, 1)")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= self.high, 1.0, np.where(x >= self.low, 1.0 - self.p_high, 0.0))
        return _match(x, np.asarray(out))

    def cdf_left(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > self.high, 1.0, np.where(x > self.low, 1.0 - self.p_high, 0.0))
        return _match(x, np.asarray(out))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return _match(u, np.where(u > 1.0 - self.p_high, self.high, self.low))

    def support(self):
        return (self.low, self.high)

    def mean(self):
        return self.low * (1.0 - self.p_high) + self.high * self.p_high

    def plus_expectation(self, t):
        t_arr = np.asarray(t, dtype=float)
        val = (1.0 - self.p_high) * np.maximum(self.low - t_arr, 0.0) + self.p_high * np.maximum(
            self.high - t_arr, 0.0
        )
        return _match(t, np.asarray(val))

    def to_json(self):
        return {"kind": "two_point", "low": self.low, "high": self.high, "p_high": self.p_high}


@dataclass(frozen=True)
class DiscreteAtoms(DistributionModel):
    values: tuple
    probs: tuple
    kind = "atoms"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.ndim != 1 or v.shape != p.shape or v.size == 0:
            raise ValidationError("atoms need matching non-empty values/probs")
        if np.any(np.diff(v) <= 0.0):
            raise ValidationError("atom values must be strictly increasing")
        if np.any(v < 0.0):
            raise ValidationError("atom values must be non-negative")
        if np.any(p <= 0.0) or abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValidationError("atom probs must be positive and sum to 1")
        object.__setattr__(self, "values", tuple(float(x) for x in v))
        object.__setattr__(self, "probs", tuple(float(x) for x in p / p.sum()))
        object.__setattr__(self, "_v", np.asarray(self.values))
        object.__setattr__(self, "_p", np.asarray(self.probs))
        object.__setattr__(self, "_cum", np.cumsum(self._p))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._v, x, side="right")
        out = np.where(idx == 0, 0.0, self._cum[np.maximum(idx - 1, 0)])
        return _match(x, np.asarray(out))

    def cdf_left(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._v, x, side="left")
        out = np.where(idx == 0, 0.0, self._cum[np.maximum(idx - 1, 0)])
        return _match(x, np.asarray(out))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        idx = np.minimum(np.searchsorted(self._cum, u, side="left"), self._v.size - 1)
        return _match(u, self._v[idx])

    def support(self):
        return (self.values[0], self.values[-1])

    def mean(self):
        return float(self._v @ self._p)

    def plus_expectation(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        val = np.maximum(self._v[None, :] - t_arr[..., None], 0.0) @ self._p
        return _match(t, val)

    def to_json(self):
        return {"kind": "atoms", "values": list(self.values), "probs": list(self.probs)}


@dataclass(frozen=True)
class PowerTransform(DistributionModel):
    """Law with CDF equal to the base CDF raised to a positive exponent.

    Exponent 1/2 is the doubling transform; exponent 1/n turns the law of a
    maximum back into the law of a single item.
    """

    base: DistributionModel
    exponent: float
    kind = "power"

    def __post_init__(self):
        if not self.exponent > 0.0:
            raise ValidationError("power exponent must be positive")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _match(x, np.asarray(self.base.cdf(x), dtype=float) ** self.exponent)

    def cdf_left(self, x):
        x = np.asarray(x, dtype=float)
        return _match(x, np.asarray(self.base.cdf_left(x), dtype=float) ** self.exponent)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return self.base.quantile(u ** (1.0 / self.exponent))

    def support(self):
        return self.base.support()

    def _as_atoms(self):
        base = self.base
        if isinstance(base, TwoPoint):
            base = DiscreteAtoms(
                (base.low, base.high), (1.0 - base.p_high, base.p_high)
            )
        cum = np.asarray(base._cum) ** self.exponent
        probs = np.diff(np.concatenate(([0.0], cum)))
        keep = probs > 0.0
        return DiscreteAtoms(tuple(np.asarray(base._v)[keep]), tuple(probs[keep]))

    def plus_expectation(self, t):
        if isinstance(self.base, (DiscreteAtoms, TwoPoint)):
            return self._as_atoms().plus_expectation(t)
        if isinstance(self.base, WorstCaseFq):
            return self.base._tail_integral(t, self.exponent)
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = self.support()
        tail = 0.0
        if math.isinf(hi):
            hi = float(self.base.quantile(1.0 - 1e-13))
            # remaining mass: 1 - F^a <= a (1-F)/F beyond the cut
            tail = self.exponent * float(self.base.plus_expectation(hi)) / (1.0 - 1e-13)
        out = np.zeros(t_arr.shape)
        a_exp = self.exponent

        def surv(x):
            return 1.0 - np.asarray(self.base.cdf(x), dtype=float) ** a_exp

        for i, tv in enumerate(t_arr.ravel()):
            a = max(tv, lo)
            if a < hi:
                val, _ = adaptive_simpson(surv, a, hi, _QUAD_TOL)
                out.ravel()[i] = val + tail
        return _match(t, out)

    def to_json(self):
        return {"kind": "power", "base": self.base.to_json(), "exponent": self.exponent}


@dataclass(frozen=True, eq=False)
class WorstCaseFq(DistributionModel):
    """Piecewise law of the running maximum for the tight single-choice instance.

    The smooth branch pairs threshold positions r(t) with CDF values
    exp(-nu(t)) along the solved layer-1 flow for t in [q, 1]; above the
    branch the CDF is flat at p until the closing atom at H.  All queries
    interpolate the stored mesh, which IS the instance definition here.
    """

    ell: int
    q: float
    mesh: int
    x_branch: np.ndarray = field(repr=False)
    F_branch: np.ndarray = field(repr=False)
    p: float = 0.0
    H: float = 0.0
    c_ell: float = 0.0
    _tails: dict = field(default_factory=dict, repr=False, compare=False)
    kind = "worstcase_fq"

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        smooth = np.interp(x, self.x_branch, self.F_branch)
        out = np.where(
            x >= self.H, 1.0, np.where(x > self.x_branch[-1], self.p, smooth)
        )
        out = np.where(x < 0.0, 0.0, out)
        return _match(x, np.asarray(out))

    def cdf_left(self, x):
        x = np.asarray(x, dtype=float)
        smooth = np.interp(x, self.x_branch, self.F_branch)
        out = np.where(
            x > self.H, 1.0, np.where(x > self.x_branch[-1], self.p, smooth)
        )
        out = np.where(x <= 0.0, 0.0, out)
        return _match(x, np.asarray(out))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        out = np.where(u > self.p, self.H, np.interp(u, self.F_branch, self.x_branch))
        return _match(u, np.asarray(out))

    def support(self):
        return (0.0, self.H)

    def _tail_integral(self, t, exponent: float):
        """E[(X-t)+] for the law with CDF F^exponent, off one cached grid."""
        key = float(exponent)
        if key not in self._tails:
            surv = -np.expm1(exponent * np.log(np.maximum(self.F_branch, 1e-300)))
            surv[self.F_branch <= 0.0] = 1.0
            seg = np.diff(self.x_branch) * 0.5 * (surv[1:] + surv[:-1])
            cum_to_top = np.concatenate((np.cumsum(seg[::-1])[::-1], [0.0]))
            p_alpha = self.p**exponent
            self._tails[key] = (cum_to_top, p_alpha)
        cum_to_top, p_alpha = self._tails[key]
        t_arr = np.asarray(t, dtype=float)
        r_q = self.x_branch[-1]
        flat = (1.0 - p_alpha) * (self.H - np.minimum(np.maximum(t_arr, 0.0), self.H))
        below = np.interp(np.maximum(t_arr, 0.0), self.x_branch, cum_to_top) + (
            1.0 - p_alpha
        ) * (self.H - r_q)
        val = np.where(t_arr >= self.H, 0.0, np.where(t_arr >= r_q, flat, below))
        val = val + np.where(t_arr < 0.0, -t_arr, 0.0)
        return _match(t, np.asarray(val))

    def plus_expectation(self, t):
        return self._tail_integral(t, 1.0)

    def mean(self):
        return float(self.plus_expectation(0.0))

    def to_json(self):
        return {"kind": "worstcase_fq", "ell": self.ell, "q": self.q, "mesh": self.mesh}


def dist_from_json(doc) -> DistributionModel:
    """Build a model from its JSON document form."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValidationError("distribution document needs a 'kind' field")
    kind = doc["kind"]
    try:
        if kind == "uniform":
            return Uniform(float(doc.get("lo", 0.0)), float(doc.get("hi", 1.0)))
        if kind == "exponential":
            return Exponential(float(doc.get("rate", 1.0)))
        if kind == "two_point":
            return TwoPoint(float(doc["low"]), float(doc["high"]), float(doc["p_high"]))
        if kind == "atoms":
            return DiscreteAtoms(tuple(doc["values"]), tuple(doc["probs"]))
        if kind == "power":
            return PowerTransform(dist_from_json(doc["base"]), float(doc["exponent"]))
        if kind == "worstcase_fq":
            inst = build_worstcase_instance(
                int(doc["ell"]), float(doc["q"]), int(doc.get("mesh", 200_000))
            )
            return inst.dist
    except KeyError as err:
        raise ValidationError("missing distribution field: %s" % (err,)) from err
    raise ValidationError("unknown distribution kind %r" % (kind,))


# ---------------------------------------------------------------------------
# benchmark evaluation


def reward_curve(dist: DistributionModel, q: float) -> float:
    """Expected mass collected above the upper-q quantile of one draw.

    Evaluates q*T + E[(X-T)+] at T equal to the (1-q)-quantile, which is the
    integral of the upper-tail quantile function and stays exact across
    atoms (the partial atom is priced at T).
    """
    if not 0.0 <= q <= 1.0:
        raise ValidationError("q must lie in [0, 1]")
    if q == 0.0:
        return 0.0
    T = float(dist.quantile(1.0 - q))
    return q * T + float(dist.plus_expectation(T))


def _beta_psi(ell: int, n: int, x: np.ndarray) -> np.ndarray:
    logb = log_beta_fn(ell, n)
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xs = np.where(inside, x, 0.5)
    lg = (ell - 1) * np.log(xs) + (n - ell - 1) * np.log1p(-xs) - logb
    out = np.where(inside, np.exp(lg), 0.0)
    if ell == 1:
        out = np.where(x == 0.0, math.exp(-logb), out)
    if n - ell == 1:
        out = np.where(x == 1.0, math.exp(-logb), out)
    return out


def opt_topl(
    dist: DistributionModel,
    n: int,
    ell: int,
    method: str = "quadrature",
    trials: int = 100_000,
    seed: int = DEFAULT_SEED,
) -> float:
    """Expected sum of the top ell of n draws.

    The quadrature route averages the reward curve against the order
    statistic's quantile law; the montecarlo route samples and sorts.
    """
    if ell < 1 or n < ell:
        raise ValidationError("need n >= ell >= 1")
    if n == ell:
        return n * dist.mean()
    if method == "quadrature":
        lo = reg_inc_beta_inv((ell, n - ell), 1e-13)
        hi = reg_inc_beta_inv((ell, n - ell), 1.0 - 1e-13)

        def f(x):
            rv = np.array([reward_curve(dist, float(q)) for q in np.atleast_1d(x)])
            return rv * _beta_psi(ell, n, x)

        val, _ = adaptive_simpson(f, lo, hi, 1e-12)
        return n * val
    if method == "montecarlo":
        return topl_mc(dist, n, ell, trials, seed)[0]
    raise ValidationError("method must be quadrature or montecarlo")


def topl_mc(
    dist: DistributionModel, n: int, ell: int, trials: int, seed: int = DEFAULT_SEED
) -> tuple:
    """Monte Carlo top-ell sum with its standard error."""
    if ell < 1 or n < ell or trials < 2:
        raise ValidationError("need n >= ell >= 1 and trials >= 2")
    s = ss = 0.0
    done = 0
    while done < trials:
        b = min(_BATCH, trials - done)
        U = _substream(seed, done, b, n)
        X = np.asarray(dist.quantile(U))
        top = np.partition(X, n - ell, axis=1)[:, n - ell :].sum(axis=1)
        s += float(top.sum())
        ss += float((top * top).sum())
        done += b
    mean = s / trials
    var = max(ss / trials - mean * mean, 0.0) * trials / (trials - 1)
    return mean, math.sqrt(var / trials)


# ---------------------------------------------------------------------------
# policies


@dataclass(frozen=True)
class PolicySpec:
    """Declarative policy: band rules from solved partitions, a static
    threshold with tie randomization, or backward-induction thresholds."""

    kind: str
    partition: PartitionSolution = None
    grid: GridSolution = None
    threshold: float = None
    tie_prob: float = 0.0
    k: int = None

    def __post_init__(self):
        if self.kind == "alg1":
            if self.partition is None:
                raise ValidationError("alg1 policy needs a partition")
            if np.any(np.diff(self.partition.b) < 0.0):
                raise ValidationError("alg1 partition must be non-decreasing")
        elif self.kind == "alg2":
            if self.grid is None:
                raise ValidationError("alg2 policy needs a grid solution")
        elif self.kind == "static":
            if self.threshold is None or self.threshold < 0.0:
                raise ValidationError("static policy needs a threshold >= 0")
            if not 0.0 <= self.tie_prob <= 1.0:
                raise ValidationError("tie probability must lie in [0, 1]")
        elif self.kind == "bdp":
            if self.k is None or self.k < 1:
                raise ValidationError("bdp policy needs k >= 1")
        else:
            raise ValidationError("unknown policy kind %r" % (self.kind,))

    @classmethod
    def quantile_alg1(cls, partition: PartitionSolution) -> "PolicySpec":
        return cls(kind="alg1", partition=partition)

    @classmethod
    def quantile_alg2(cls, grid: GridSolution) -> "PolicySpec":
        return cls(kind="alg2", grid=grid)

    @classmethod
    def static(cls, threshold: float, tie_prob: float = 0.0) -> "PolicySpec":
        return cls(kind="static", threshold=threshold, tie_prob=tie_prob)

    @classmethod
    def bdp_optimal(cls, k: int) -> "PolicySpec":
        return cls(kind="bdp", k=k)


@dataclass(frozen=True)
class SimulationReport:
    trials: int
    seed: int
    mean_alg: float
    se_alg: float
    mean_benchmark: float
    se_benchmark: float
    ratio: float
    ratio_se: float
    slot_means: tuple = None
    slot_ses: tuple = None


@dataclass(frozen=True, eq=False)
class BdpResult:
    """Optimal adaptive value and its acceptance thresholds.

    thresholds[r, j] is the bar faced with r items remaining after the
    current one and j selections still allowed; column 0 is +inf so an
    exhausted budget never accepts.
    """

    value: float
    thresholds: np.ndarray = field(repr=False)


def bdp_value(dist: DistributionModel, n: int, k: int) -> BdpResult:
    """Backward induction for selecting up to k of n i.i.d. draws."""
    if not 1 <= k <= n:
        raise ValidationError("need 1 <= k <= n")
    V = np.zeros(k + 1)
    thresholds = np.empty((n, k + 1))
    thresholds[:, 0] = math.inf
    for i in range(1, n + 1):
        gaps = V[1:] - V[:-1]
        thresholds[i - 1, 1:] = gaps
        V[1:] += np.asarray(dist.plus_expectation(gaps))
    return BdpResult(value=float(V[k]), thresholds=thresholds)


def _alg2_bands(grid: GridSolution) -> tuple:
    n, k = grid.n, grid.k
    lo = np.zeros((k, n))
    span = np.zeros((k, n))
    for j in range(1, k + 1):
        full = np.concatenate((np.zeros(j - 1), grid.b[j - 1]))
        lo[j - 1] = full[:-1]
        span[j - 1] = np.diff(full)
    return lo, span


def simulate_policy(
    dist: DistributionModel,
    n: int,
    k: int,
    ell: int,
    policy: PolicySpec,
    trials: int,
    seed: int = DEFAULT_SEED,
) -> SimulationReport:
    """Run the policy state machine over seeded trials.

    Per trial the score is (sum of accepted values)/k against the top-ell
    average of the same draws, so the ratio uses common random numbers.
    Results are bit-identical for a given (seed, trials) no matter how the
    batches are scheduled.
    """
    if n < 1 or not 1 <= ell <= n or not 1 <= k <= n:
        raise ValidationError("need n >= 1 and 1 <= k, ell <= n")
    if trials < 2:
        raise ValidationError("need at least two trials")

    if policy.kind == "alg1":
        sol = policy.partition
        if sol.n != n or sol.ell != ell or k != 1:
            raise ValidationError("alg1 policy shape mismatch: needs same (n, ell), k=1")
        band_lo = sol.b[:-1].copy()
        band_span = np.diff(sol.b)
    elif policy.kind == "alg2":
        grid = policy.grid
        if grid.n != n or grid.k != k or grid.ell != ell:
            raise ValidationError("alg2 policy shape mismatch: needs same (n, k, ell)")
        L_lo, L_span = _alg2_bands(grid)
    elif policy.kind == "static":
        FT = float(dist.cdf(policy.threshold))
        FTm = float(dist.cdf_left(policy.threshold))
    elif policy.kind == "bdp":
        if policy.k != k:
            raise ValidationError("bdp policy k mismatch")
        TH = bdp_value(dist, n, k).thresholds

    sa = sb = saa = sbb = sab = 0.0
    slot_sum = np.zeros(k)
    slot_sq = np.zeros(k)
    done = 0
    while done < trials:
        b = min(_BATCH, trials - done)
        slab = _substream(seed, done, b, 2 * n)
        U = slab[:, :n]
        Vt = slab[:, n:]
        X = np.asarray(dist.quantile(U), dtype=float)
        bench = np.partition(X, n - ell, axis=1)[:, n - ell :].sum(axis=1) / ell
        slots = np.zeros((b, k))

        if policy.kind == "alg1":
            W = beta_cdf_grid(ell, n, (1.0 - U).ravel()).reshape(U.shape)
            acc = W <= band_lo[None, :] + Vt * band_span[None, :]
            has = acc.any(axis=1)
            first = acc.argmax(axis=1)
            vals = np.where(has, X[np.arange(b), first], 0.0)
            slots[:, 0] = vals
        elif policy.kind == "alg2":
            W = beta_cdf_grid(ell, n, (1.0 - U).ravel()).reshape(U.shape)
            j_state = np.zeros(b, dtype=np.intp)
            for i in range(n):
                active = j_state < k
                jx = np.minimum(j_state, k - 1)
                hit = active & (
                    W[:, i] <= L_lo[jx, i] + Vt[:, i] * L_span[jx, i]
                )
                rows = np.flatnonzero(hit)
                slots[rows, j_state[rows]] = X[rows, i]
                j_state[rows] += 1
        elif policy.kind == "static":
            sig = (U > FT) | ((U > FTm) & (Vt <= policy.tie_prob))
            order = np.cumsum(sig, axis=1)
            sel = sig & (order <= k)
            rows, cols = np.nonzero(sel)
            slots[rows, order[rows, cols] - 1] = X[rows, cols]
        else:
            budget = np.full(b, k, dtype=np.intp)
            for i in range(n):
                hit = X[:, i] >= TH[n - 1 - i, budget]
                rows = np.flatnonzero(hit)
                slots[rows, k - budget[rows]] = X[rows, i]
                budget[rows] -= 1

        alg = slots.sum(axis=1) / k
        sa += float(alg.sum())
        sb += float(bench.sum())
        saa += float((alg * alg).sum())
        sbb += float((bench * bench).sum())
        sab += float((alg * bench).sum())
        slot_sum += slots.sum(axis=0)
        slot_sq += (slots * slots).sum(axis=0)
        done += b

    T = trials
    ma, mb = sa / T, sb / T
    va = max(saa / T - ma * ma, 0.0) * T / (T - 1)
    vb = max(sbb / T - mb * mb, 0.0) * T / (T - 1)
    cab = (sab / T - ma * mb) * T / (T - 1)
    ratio = ma / mb
    rel = va / (ma * ma) + vb / (mb * mb) - 2.0 * cab / (ma * mb) if ma > 0.0 else 0.0
    ratio_se = abs(ratio) * math.sqrt(max(rel, 0.0) / T)
    sm = slot_sum / T
    sv = np.maximum(slot_sq / T - sm * sm, 0.0) * T / (T - 1)
    return SimulationReport(
        trials=T,
        seed=seed,
        mean_alg=ma,
        se_alg=math.sqrt(va / T),
        mean_benchmark=mb,
        se_benchmark=math.sqrt(vb / T),
        ratio=ratio,
        ratio_se=ratio_se,
        slot_means=tuple(float(x) for x in sm),
        slot_ses=tuple(float(x) for x in np.sqrt(sv / T)),
    )


# ---------------------------------------------------------------------------
# worst-case instance and the doubling transform


@dataclass(frozen=True, eq=False)
class WorstCaseInstance:
    """Tight instance for single selection against the top-ell benchmark."""

    ell: int
    q: float
    y_traj: np.ndarray = field(repr=False)
    r_traj: np.ndarray = field(repr=False)
    p: float = 0.0
    H: float = 0.0
    dist: WorstCaseFq = None


def build_worstcase_instance(ell: int, q: float, mesh: int = 200_000) -> WorstCaseInstance:
    """Assemble the piecewise law whose optimal stopper tends to ell/c_ell.

    The survival trajectory is the layer-1 flow run at the limit constant;
    thresholds r(t) integrate the reciprocal drift from the right; the
    closing atom H caps the flat segment above r(q).
    """
    if ell < 1:
        raise ValidationError("ell must be >= 1")
    if not 0.0 < q < 1.0:
        raise ValidationError("q must lie in (0, 1)")
    if mesh < 100:
        raise ValidationError("mesh too coarse")
    if q * mesh < 10.0:
        raise ValidationError(
            "q too small for mesh %d: refine the mesh so q spans >= 10 steps" % (mesh,)
        )
    c = solve_cr_ell(ell, 1e-12).c_ell
    b = np.empty(mesh + 1)
    f = np.empty(mesh + 1)
    nu = np.empty(mesh + 1)
    raw = kernels.ode_path(ell, mesh, c, 1.0, None, b, f, nu)
    if abs(raw - 1.0) > 1e-6:
        raise ConvergenceError("flow endpoint defect %.3e at mesh %d" % (abs(raw - 1.0), mesh))
    t = np.linspace(0.0, 1.0, mesh + 1)
    h = 1.0 / mesh
    g = 1.0 / f
    seg = 0.5 * h * (g[:-1] + g[1:])
    r = np.concatenate((np.cumsum(seg[::-1])[::-1], [0.0]))

    iq = int(np.searchsorted(t, q, side="right"))
    w = (q - t[iq - 1]) / h
    b_q = (1.0 - w) * b[iq - 1] + w * b[iq]
    f_q = (1.0 - w) * f[iq - 1] + w * f[iq]
    r_q = float(np.interp(q, t, r))
    nu_q = kernels.gamma_ppf(ell, b_q)
    p = math.exp(-nu_q)
    H = r_q + 1.0 / (f_q * nu_q)
    if not H > r_q:
        raise ConvergenceError(
            "atom position H=%.6g does not exceed r(q)=%.6g (degenerate tail)" % (H, r_q)
        )

    # smooth branch, ordered by increasing x = r(t): t runs 1 -> q
    xs = np.concatenate((r[iq:][::-1], [r_q]))
    Fs = np.concatenate((np.exp(-nu[iq:][::-1]), [p]))
    keep = np.concatenate(([True], np.diff(xs) > 0.0))
    dist = WorstCaseFq(
        ell=ell,
        q=q,
        mesh=mesh,
        x_branch=xs[keep],
        F_branch=Fs[keep],
        p=p,
        H=H,
        c_ell=c,
    )
    r_traj = r.copy()
    r_traj[t < q] = H
    return WorstCaseInstance(
        ell=ell, q=q, y_traj=1.0 - b, r_traj=r_traj, p=p, H=H, dist=dist
    )


def worstcase_ratio(ell: int, q: float, n: int, mesh: int = 200_000) -> dict:
    """Optimal-stopper to benchmark ratio on the tight instance at scale n."""
    inst = build_worstcase_instance(ell, q, mesh)
    per_item = PowerTransform(inst.dist, 1.0 / n)
    value = bdp_value(per_item, n, 1).value
    bench = opt_topl(per_item, n, ell, method="quadrature") / ell
    return {
        "ell": ell,
        "q": q,
        "n": n,
        "mesh": mesh,
        "value": value,
        "benchmark": bench,
        "ratio": value / bench,
        "p": inst.p,
        "H": inst.H,
    }


def doubling_transform(dist: DistributionModel) -> PowerTransform:
    """Square-root the CDF: the comparison law for doubling the horizon."""
    return PowerTransform(dist, 0.5)
