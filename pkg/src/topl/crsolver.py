"""Asymptotic guarantee constants from their scalar integral equations.

The limiting constant for depth ell solves a one-dimensional integral
equation in c over (ell, ell/(1-e^-ell)]; the mixture variant generalizes
the benchmark to a decreasing weight vector.  Both are solved by bisection
in log(c - mean) with adaptive Simpson quadrature plus an analytic tail
remainder, and report the residual of the defining equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._core import kernels
from .errors import ConvergenceError, ValidationError
from .numerics import adaptive_simpson, bisect_best

__all__ = [
    "CrResult",
    "MixtureWeights",
    "MixtureCrResult",
    "solve_cr_ell",
    "solve_cr_mixture",
    "exp_lower_bound",
    "prophet_worst",
    "integral_residual",
]

_DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class CrResult:
    """Solution of the depth-ell scalar equation: cr = ell / c_ell."""

    ell: int
    c_ell: float
    cr: float
    residual: float


@dataclass(frozen=True)
class MixtureWeights:
    """Non-increasing positive weights summing to one."""

    p: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in self.p)
        object.__setattr__(self, "p", p)
        if len(p) == 0:
            raise ValidationError("empty weight vector")
        if any(v <= 0.0 for v in p):
            raise ValidationError("weights must be positive")
        if any(p[i] < p[i + 1] for i in range(len(p) - 1)):
            raise ValidationError("weights must be non-increasing")
        if abs(math.fsum(p) - 1.0) > 1e-12:
            raise ValidationError("weights must sum to 1 within 1e-12")


@dataclass(frozen=True)
class MixtureCrResult:
    """Solution of the mixture equation: cr = 1 / (p_1 * c)."""

    p: tuple
    c: float
    cr: float
    residual: float


def exp_lower_bound(ell: int) -> float:
    """Closed-form floor 1 - e^-ell on the depth-ell guarantee."""
    if ell < 1:
        raise ValidationError("ell must be >= 1")
    return -math.expm1(-float(ell))


def prophet_worst(k: int, ell: int) -> float:
    """Worst-case full-information ratio max(ell/k, 1)."""
    if k < 1 or ell < 1:
        raise ValidationError("k and ell must be >= 1")
    return max(ell / k, 1.0)


def _poly_coeffs(ell: int) -> np.ndarray:
    """[1, 1, 1/2!, ..., 1/ell!]: reciprocal factorials through ell."""
    c = np.ones(ell + 1)
    for i in range(2, ell + 1):
        c[i] = c[i - 1] / i
    return c


def _integral_gap(ell: int, d: float, tol: float, form: str = "denominator") -> float:
    """Evaluate the defining integral I(ell + d) parametrized by the gap d.

    Working in d = c - ell keeps full relative precision on the gap; forming
    c first would quantize d to ulp(ell), which at large depth moves the
    integral by ~1e-8 per representable step.
    """
    if d <= 0.0:
        raise ValidationError("c must exceed ell")
    # push the cut far enough that the whole tail is O(tol) relative to the
    # diverging 1/d factor; 40 units past the mode suffices until d shrinks
    # (large depths), where the cut walks out in steps of 20
    want = max(d * tol * 0.1, 1e-280)
    nu_star = ell + 40.0
    while (1.0 - kernels.gamma_cdf(ell, nu_star)) > want and nu_star < 900.0:
        nu_star += 20.0
    lgam = math.lgamma(ell)
    if form == "denominator":
        rec = _poly_coeffs(ell)

        def f(nu: np.ndarray) -> np.ndarray:
            # ell * sum_{i<=ell} nu^i/i! - ell e^nu cancels the c-ell split:
            # denominator e^nu (c - ell) + ell sum_{i<=ell} nu^i/i!
            s = np.full_like(nu, rec[ell])
            for i in range(ell - 1, -1, -1):
                s = s * nu + rec[i]
            num = np.exp((ell - 1) * np.log(np.maximum(nu, 1e-300)) - lgam)
            if ell == 1:
                num = np.exp(-lgam) * np.ones_like(nu)
            with np.errstate(over="ignore"):
                den = np.exp(nu) * d + ell * s
            return num / den

    elif form == "survival":

        def f(nu: np.ndarray) -> np.ndarray:
            nu = np.asarray(nu, dtype=float)
            # d + ell*(1 - shifted CDF) evaluated without forming c
            g = np.array([1.0 - kernels.gamma_cdf(ell + 1, float(v)) for v in nu])
            lognum = (ell - 1) * np.log(np.maximum(nu, 1e-300)) - nu - lgam
            if ell == 1:
                lognum = -nu - lgam
            return np.exp(lognum) / (d + ell * g)

    else:
        raise ValidationError("unknown integral form: %r" % (form,))

    body, _ = adaptive_simpson(f, 0.0, nu_star, tol / 10.0)
    tail = (1.0 - kernels.gamma_cdf(ell, nu_star)) / d
    return body + tail


def integral_residual(ell: int, c: float, tol: float, form: str = "denominator") -> float:
    """Evaluate the defining integral I(c) for depth ell.

    Two algebraically equal forms are kept deliberately distinct so they can
    cross-check each other: "denominator" folds e^nu into the denominator,
    "survival" integrates the gamma density against the surviving gap.
    Integration runs over [0, nu*] with the exact-decay remainder
    (1 - gamma_cdf(ell, nu*)) / (c - ell) added for the tail.
    """
    return _integral_gap(ell, c - ell, tol, form)


def solve_cr_ell(ell: int, tol: float = _DEFAULT_TOL) -> CrResult:
    """Solve I(c) = 1 for the depth-ell constant; cr = ell / c.

    Bisection runs on log(c - ell), which keeps the achievable residual at
    quadrature level even when c hugs ell (large ell).  The bracket
    (ell, ell/(1 - e^-ell)] is guaranteed; losing it means the quadrature
    itself is broken.
    """
    if ell < 1:
        raise ValidationError("ell must be >= 1")
    if tol <= 0.0:
        raise ValidationError("tol must be positive")
    c_hi = ell / exp_lower_bound(ell)
    lo = math.log(1e-13 * ell)
    hi = math.log(c_hi - ell)

    def g(u: float) -> float:
        return 1.0 - _integral_gap(ell, math.exp(u), tol)

    u_best, g_best = bisect_best(g, lo, hi, 80, what="depth-%d constant" % ell)
    residual = abs(g_best)
    if residual > tol:
        raise ConvergenceError(
            "depth-%d constant: residual %.3e above tol %.3e" % (ell, residual, tol)
        )
    d = math.exp(u_best)
    return CrResult(ell=ell, c_ell=ell + d, cr=ell / (ell + d), residual=residual)


def _mix_weights(p: Sequence[float]) -> tuple:
    w = MixtureWeights(tuple(p)) if not isinstance(p, MixtureWeights) else p
    return w.p


def solve_cr_mixture(p, tol: float = _DEFAULT_TOL) -> MixtureCrResult:
    """Solve the mixture-benchmark equation for weights p; cr = 1/(p_1 c).

    The denominator is evaluated in the telescoped form
    (c - sbar) + e^-nu * sum_s w_s s sum_{i<=s} nu^i/i!, with
    sbar = sum_s w_s s = 1/p_1 exactly, which avoids cancellation when c
    approaches its lower limit.
    """
    pv = _mix_weights(p)
    if tol <= 0.0:
        raise ValidationError("tol must be positive")
    L = len(pv)
    p1 = pv[0]
    ext = list(pv) + [0.0]
    w = [(ext[s] - ext[s + 1]) / p1 for s in range(L)]  # weight of depth s+1
    sbar = 1.0 / p1
    lgs = [math.lgamma(s + 1) for s in range(L + 2)]
    rec = _poly_coeffs(L)

    def integral(gap: float) -> float:
        want = max(gap * tol * 0.1, 1e-280)
        nu_star = L + 40.0
        while (1.0 - kernels.gamma_cdf(L, nu_star)) > want and nu_star < 900.0:
            nu_star += 20.0
        def f(nu: np.ndarray) -> np.ndarray:
            nu = np.asarray(nu, dtype=float)
            lognu = np.log(np.maximum(nu, 1e-300))
            num = np.zeros_like(nu)
            den = np.zeros_like(nu)
            for s in range(1, L + 1):
                ws = w[s - 1]
                if ws == 0.0:
                    continue
                if s == 1:
                    num += ws * np.ones_like(nu)
                else:
                    num += ws * np.exp((s - 1) * lognu - lgs[s - 1])
                inner = np.full_like(nu, rec[s])
                for i in range(s - 1, -1, -1):
                    inner = inner * nu + rec[i]
                den += ws * s * inner
            return num * np.exp(-nu) / (gap + np.exp(-nu) * den)

        body, _ = adaptive_simpson(f, 0.0, nu_star, tol / 10.0)
        tail = sum(
            w[s - 1] * (1.0 - kernels.gamma_cdf(s, nu_star)) for s in range(1, L + 1)
        ) / gap
        return body + tail

    def g_of(u: float) -> float:
        return 1.0 - integral(math.exp(u))

    hi_gap = max(1.0, sbar)
    while g_of(math.log(hi_gap)) < 0.0:
        hi_gap *= 2.0
        if hi_gap > 1e6 * (sbar + 1.0):
            raise ConvergenceError("mixture constant: no upper bracket")
    lo = math.log(1e-13 * sbar)
    hi = math.log(hi_gap)
    u_best, g_best = bisect_best(g_of, lo, hi, 80, what="mixture constant")
    residual = abs(g_best)
    if residual > tol:
        raise ConvergenceError(
            "mixture constant: residual %.3e above tol %.3e" % (residual, tol)
        )
    gap = math.exp(u_best)
    c = sbar + gap
    return MixtureCrResult(p=pv, c=c, cr=1.0 / (p1 * c), residual=residual)
