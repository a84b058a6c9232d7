"""Shared numerical machinery.

Adaptive Simpson quadrature over a stack of intervals (the integrand is
called on numpy arrays of panel nodes, so smooth integrands cost a handful
of vectorized evaluations), safeguarded bisection, and the cubic Hermite
mid-step rule used to couple one solved flow into the next one's drive.
"""

from __future__ import annotations

from typing import Callable, Tuple

import numpy as np

from .errors import ConvergenceError

Integrand = Callable[[np.ndarray], np.ndarray]


def adaptive_simpson(
    f: Integrand,
    a: float,
    b: float,
    tol: float,
    max_depth: int = 48,
    init_panels: int = 8,
) -> Tuple[float, float]:
    """Integrate f over [a, b] to absolute tolerance tol.

    Returns (value, error_estimate).  Classic Simpson halving with the
    |S_fine - S_coarse| <= 15 * local_tol acceptance rule and Richardson
    end correction, run breadth-first on arrays of pending intervals.
    """
    if not b > a:
        return 0.0, 0.0
    width = b - a
    edges = np.linspace(a, b, init_panels + 1)
    lo = edges[:-1]
    hi = edges[1:]
    flo = np.asarray(f(lo), dtype=float)
    fhi = np.asarray(f(hi), dtype=float)
    fmid = np.asarray(f(0.5 * (lo + hi)), dtype=float)
    total = 0.0
    err = 0.0
    for _ in range(max_depth):
        h = hi - lo
        mid = 0.5 * (lo + hi)
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        flmid = np.asarray(f(lmid), dtype=float)
        frmid = np.asarray(f(rmid), dtype=float)
        coarse = h / 6.0 * (flo + 4.0 * fmid + fhi)
        left = h / 12.0 * (flo + 4.0 * flmid + fmid)
        right = h / 12.0 * (fmid + 4.0 * frmid + fhi)
        fine = left + right
        delta = fine - coarse
        ok = np.abs(delta) <= 15.0 * tol * (h / width) + 1e-307
        total += float(np.sum(fine[ok] + delta[ok] / 15.0))
        err += float(np.sum(np.abs(delta[ok]) / 15.0))
        if ok.all():
            return total, err
        bad = ~ok
        lo = np.concatenate([lo[bad], mid[bad]])
        hi = np.concatenate([mid[bad], hi[bad]])
        flo = np.concatenate([flo[bad], fmid[bad]])
        fhi = np.concatenate([fmid[bad], fhi[bad]])
        fmid = np.concatenate([flmid[bad], frmid[bad]])
    raise ConvergenceError(
        "adaptive Simpson exhausted depth %d on [%g, %g]" % (max_depth, a, b)
    )


def bisect_best(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    iters: int,
    what: str = "bisection",
) -> Tuple[float, float]:
    """Bisect f on a sign-changing bracket; return (x, f(x)) best seen.

    f(lo) <= 0 <= f(hi) is required.  Tracks the iterate with the smallest
    |f| rather than returning the final midpoint, which matters once the
    residual sits at the noise floor.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo > 0.0 or fhi < 0.0:
        raise ConvergenceError(
            "%s: no sign change on bracket [%g, %g] (f: %g, %g)" % (what, lo, hi, flo, fhi)
        )
    if abs(flo) <= abs(fhi):
        best_x, best_f = lo, flo
    else:
        best_x, best_f = hi, fhi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fm = f(mid)
        if abs(fm) < abs(best_f):
            best_x, best_f = mid, fm
        if fm < 0.0:
            lo = mid
        else:
            hi = mid
    return best_x, best_f


def expand_bracket_log(
    f: Callable[[float], float],
    x0: float,
    factor: float,
    max_expand: int,
    what: str = "bracket",
) -> Tuple[float, float]:
    """Grow a sign-changing bracket for increasing f around x0, in ratio space.

    Returns (lo, hi) with f(lo) <= 0 <= f(hi).  Expands by `factor` at most
    max_expand times, walking away from x0 (which must be positive).
    """
    f0 = f(x0)
    if f0 <= 0.0:
        lo, hi = x0, x0 * factor
        for _ in range(max_expand):
            if f(hi) >= 0.0:
                return lo, hi
            lo = hi
            hi *= factor
        raise ConvergenceError("%s: no upper sign change from %g" % (what, x0))
    hi, lo = x0, x0 / factor
    for _ in range(max_expand):
        if f(lo) <= 0.0:
            return lo, hi
        hi = lo
        lo /= factor
    raise ConvergenceError("%s: no lower sign change from %g" % (what, x0))


def hermite_midpoints(y: np.ndarray, dy: np.ndarray, h: float) -> np.ndarray:
    """Cubic Hermite values at interval midpoints from nodes and slopes."""
    return 0.5 * (y[:-1] + y[1:]) + h * (dy[:-1] - dy[1:]) / 8.0


def interleave(nodes: np.ndarray, mids: np.ndarray) -> np.ndarray:
    """[n0, m0, n1, m1, ..., nM] from M+1 nodes and M midpoints."""
    out = np.empty(2 * len(nodes) - 1, dtype=float)
    out[0::2] = nodes
    out[1::2] = mids
    return out
