"""Scalar kernels shared by every solver in the package.

Integer-shape regularized incomplete beta / gamma tails, their Newton
inverses, and the sequential shooting loops (discrete partition recurrence,
layered grid recurrence, fixed-step RK4 for the threshold flows).  This is
the pure-Python reference; ``topl._core._kernels`` is a compiled twin with
the same call signatures, selected at import time when available.

Everything here is plain-float and deterministic.  Shapes are capped at
``MAX_SHAPE`` so binomial tables stay inside double range.
"""

import math

BACKEND = "python"

MAX_SHAPE = 64

# Relative stall tolerance for the Newton loops: a few ulps.
_REL = 4e-16
_TINY = 1e-300


def _binom_tables(ell, n):
    """Binomial coefficient tables for shape pair (ell, n - ell).

    Returns (C1, lC1, C2, lC2, logB, invB) where C1[j] = C(n-1, j) for
    j <= ell, C2[j] = C(n, j) for j <= ell + 1, l* are their logs, and
    B = B(ell, n - ell).  Logs are built by summation (never lgamma of a
    large argument) so absolute error stays ~1e-13 even at n = 1e6.
    """
    C1 = [1.0] * (ell + 1)
    lC1 = [0.0] * (ell + 1)
    C2 = [1.0] * (ell + 2)
    lC2 = [0.0] * (ell + 2)
    for j in range(1, ell + 1):
        f = (n - j) / j
        C1[j] = C1[j - 1] * f
        lC1[j] = lC1[j - 1] + math.log(f)
    for j in range(1, ell + 2):
        f = (n + 1 - j) / j
        C2[j] = C2[j - 1] * f
        lC2[j] = lC2[j - 1] + math.log(f)
    logB = math.lgamma(ell)
    for i in range(ell):
        logB -= math.log(n - ell + i)
    return C1, lC1, C2, lC2, logB, math.exp(-logB)


class _BetaTab:
    """Per-(ell, n) working set for the shape pair (ell, n - ell)."""

    __slots__ = ("ell", "n", "C1", "lC1", "C2", "lC2", "logB", "invB", "xsmall")

    def __init__(self, ell, n):
        if not 1 <= ell <= MAX_SHAPE:
            raise ValueError("first shape out of range: %r" % (ell,))
        if n - ell < 1:
            raise ValueError("second shape must be positive")
        self.ell = ell
        self.n = n
        (self.C1, self.lC1, self.C2, self.lC2, self.logB, self.invB) = _binom_tables(ell, n)
        # below this x the ascending tail series is used (full relative
        # precision; the complementary form would cancel)
        self.xsmall = max(1.0, 0.5 * ell) / (n - 1)


def _asc_tail(lc, m, a, x):
    """Pr(Bin(m, x) >= a) by the ascending series, full relative precision.

    lc is log C(m, a).  Requires m*x small enough that terms decay; caller
    guarantees x <= max(1, ell/2)/m-ish so the term ratio is <= ~0.55.
    """
    lx = math.log(x)
    l1x = math.log1p(-x)
    t = math.exp(lc + a * lx + (m - a) * l1x)
    s = t
    r = x / (1.0 - x)
    j = a
    while j < m:
        t *= (m - j) / (j + 1.0) * r
        s += t
        j += 1
        if t <= s * 1e-17:
            break
    return s


def _comp_linear(C, k, r, u):
    """1 - u * sum_{j<=k} C[j] r^j  (complementary binomial CDF, linear)."""
    s = C[k]
    for j in range(k - 1, -1, -1):
        s = s * r + C[j]
    return 1.0 - u * s


def _comp_log(lC, k, lx, l1x, lu):
    """Same quantity via logsumexp, for x pushed against 1."""
    d = lx - l1x
    mx = lC[0]
    for j in range(1, k + 1):
        v = lC[j] + j * d
        if v > mx:
            mx = v
    s = 0.0
    for j in range(k + 1):
        s += math.exp(lC[j] + j * d - mx)
    z = lu + mx + math.log(s)
    if z > 0.0:
        z = 0.0
    return -math.expm1(z)


def beta_triplet(tab, x):
    """(cdf, companion, pdf) at x for shapes (ell, n-ell).

    cdf  = Pr(Beta(ell, n-ell) <= x) = Pr(Bin(n-1, x) >= ell)
    companion = Pr(Bin(n, x) >= ell + 1), the shifted-shape CDF the
    recurrences compose with, and pdf the Beta density.
    """
    ell, n = tab.ell, tab.n
    if x <= 0.0:
        return 0.0, 0.0, (tab.invB if ell == 1 else 0.0)
    if x >= 1.0:
        return 1.0, 1.0, (tab.invB if ell == n - 1 else 0.0)
    l1x = math.log1p(-x)
    lpdf = (ell - 1) * math.log(x) + (n - ell - 1) * l1x - tab.logB
    pdf = math.exp(lpdf)
    if x <= tab.xsmall:
        cdf = _asc_tail(tab.lC1[ell], n - 1, ell, x)
        comp = _asc_tail(tab.lC2[ell + 1], n, ell + 1, x)
        return cdf, comp, pdf
    if x <= 0.999:
        u = math.exp((n - 1) * l1x)
        r = x / (1.0 - x)
        cdf = _comp_linear(tab.C1, ell - 1, r, u)
        comp = _comp_linear(tab.C2, ell, r, u * (1.0 - x))
        return cdf, comp, pdf
    lx = math.log(x)
    cdf = _comp_log(tab.lC1, ell - 1, lx, l1x, (n - 1) * l1x)
    comp = _comp_log(tab.lC2, ell, lx, l1x, n * l1x)
    return cdf, comp, pdf


def beta_inv_comp(tab, y, x0):
    """Solve cdf(x) = y; return (x, companion(x)).

    Newton from the warm start x0 (pass a non-positive x0 to auto-guess),
    safeguarded by a [0, 1] bisection bracket.
    """
    ell, n = tab.ell, tab.n
    if y <= 0.0:
        return 0.0, 0.0
    if y >= 1.0:
        return 1.0, 1.0
    if 0.0 < x0 < 1.0:
        x = x0
    elif y <= 0.5:
        # invert the leading term y ~ x^ell / (ell B)
        x = math.exp((math.log(y) + tab.logB + math.log(ell)) / ell)
        if x > 0.5:
            x = 0.5
    else:
        # mirrored leading term for the upper tail
        q = n - ell
        x = 1.0 - math.exp((math.log1p(-y) + tab.logB + math.log(q)) / q)
    lo, hi = 0.0, 1.0
    cdf = comp = 0.0
    for _ in range(100):
        cdf, comp, pdf = beta_triplet(tab, x)
        f = cdf - y
        if f > 0.0:
            hi = x
        else:
            lo = x
        if abs(f) <= _REL * y + _TINY or hi - lo <= _REL * hi:
            break
        if pdf > 0.0 and math.isfinite(pdf):
            xn = x - f / pdf
            if not (lo < xn < hi):
                xn = 0.5 * (lo + hi)
        else:
            xn = 0.5 * (lo + hi)
        if xn == x:
            break
        x = xn
    return x, comp


def beta_cdf(ell, n, x):
    """Regularized incomplete beta for integer shapes (ell, n - ell)."""
    return beta_triplet(_BetaTab(ell, n), x)[0]


def beta_companion(ell, n, x):
    """Shifted-shape CDF Pr(Bin(n, x) >= ell + 1) at x."""
    return beta_triplet(_BetaTab(ell, n), x)[1]


def beta_pdf(ell, n, x):
    """Beta(ell, n - ell) density."""
    return beta_triplet(_BetaTab(ell, n), x)[2]


def beta_ppf(ell, n, y, x0=-1.0):
    """Inverse of beta_cdf in its first argument."""
    return beta_inv_comp(_BetaTab(ell, n), y, x0)[0]


# ---------------------------------------------------------------------------
# gamma tails


def gamma_cdf(ell, z):
    """Lower regularized gamma at integer shape: Pr(Poisson(z) >= ell)."""
    if z <= 0.0:
        return 0.0
    if ell == 1:
        return -math.expm1(-z)
    if z <= max(1.0, 0.5 * ell):
        # ascending series e^-z sum_{j>=ell} z^j/j!
        t = 1.0
        for i in range(1, ell + 1):
            t *= z / i
        s = t
        j = ell + 1
        while True:
            t *= z / j
            s += t
            j += 1
            if t <= s * 1e-17 or j > ell + 400:
                break
        return math.exp(-z) * s
    # complementary: 1 - e^-z sum_{j<ell} z^j/j!
    t = 1.0
    p = 1.0
    for j in range(1, ell):
        t *= z / j
        p += t
    w = -z + math.log(p)
    if w > 0.0:
        w = 0.0
    return -math.expm1(w)


def _gamma_pdf(ell, z):
    if z <= 0.0:
        return 0.0 if ell > 1 else math.exp(-z)
    return math.exp((ell - 1) * math.log(z) - z - math.lgamma(ell))


def gamma_ppf(ell, y, z0=-1.0):
    """Inverse of gamma_cdf: smallest z with gamma_cdf(ell, z) = y."""
    if y <= 0.0:
        return 0.0
    if y >= 1.0:
        raise ValueError("gamma_ppf needs y < 1")
    if ell == 1:
        return -math.log1p(-y)
    if z0 > 0.0:
        z = z0
    elif y < 0.1:
        # leading term y ~ z^ell / ell!
        z = math.exp((math.log(y) + math.lgamma(ell + 1)) / ell)
    elif y > 0.9:
        w = -math.log1p(-y)
        z = w + (ell - 1) * math.log(max(w, 1.2))
    else:
        z = float(ell)
    lo = 0.0
    hi = max(2.0 * z, ell + 40.0)
    while gamma_cdf(ell, hi) < y:
        lo = hi
        hi *= 2.0
        if hi > 1e9:
            raise ArithmeticError("gamma_ppf bracket blew up")
    if z <= lo or z >= hi:
        z = 0.5 * (lo + hi)
    for _ in range(100):
        f = gamma_cdf(ell, z) - y
        if f > 0.0:
            hi = z
        else:
            lo = z
        if abs(f) <= _REL * y + _TINY or hi - lo <= _REL * hi:
            break
        pdf = _gamma_pdf(ell, z)
        if pdf > 0.0 and math.isfinite(pdf):
            zn = z - f / pdf
            if not (lo < zn < hi):
                zn = 0.5 * (lo + hi)
        else:
            zn = 0.5 * (lo + hi)
        if zn == z:
            break
        z = zn
    return z


_CLAMP = 1.0 - 1e-12


def gamma_comp(ell, b):
    """Shape-shift composition gamma_{ell+1}(gamma_ell^{-1}(b)).

    Arguments outside (0, 1) are clamped: 0 below, evaluated at 1 - 1e-12
    above (the flows integrate through the upper endpoint).
    """
    if b <= 0.0:
        return 0.0
    if b > _CLAMP:
        b = _CLAMP
    return gamma_cdf(ell + 1, gamma_ppf(ell, b))


def gamma_comp_arr(ell, b_arr, out):
    """Vectorized gamma_comp with a warm-started inverse along the array."""
    z = -1.0
    for i in range(len(b_arr)):
        b = b_arr[i]
        if b <= 0.0:
            out[i] = 0.0
            continue
        if b > _CLAMP:
            b = _CLAMP
        z = gamma_ppf(ell, b, z)
        out[i] = gamma_cdf(ell + 1, z)
    return out


# ---------------------------------------------------------------------------
# discrete shooting


def layer_shot(ell, n, j, seed, comp_prev):
    """Advance layer j of the discrete system from its seed; return raw b_n.

    The layer starts at b_j = seed (indices below j are zero) and steps
        b_{i+1} = b_i + (ell/n) * (theta * comp_prev[i] - companion(b_i))
    where theta = n * seed / (ell * comp_prev[j-1]).  Layer 1 passes
    comp_prev = None, meaning the all-ones array (so theta * 1 = n*seed/ell
    reproduces the base recurrence b_{i+1} = b_i + seed - (ell/n) comp).
    Outside (0, 1) the companion is extended by 0 and 1.
    """
    tab = _BetaTab(ell, n)
    h = ell / n
    if comp_prev is None:
        theta = n * seed / ell
    else:
        theta = n * seed / (ell * comp_prev[j - 1])
    b = seed
    x = -1.0
    for i in range(j, n):
        if b <= 0.0:
            comp = 0.0
        elif b >= 1.0:
            comp = 1.0
        else:
            x, comp = beta_inv_comp(tab, b, x)
        drive = theta if comp_prev is None else theta * comp_prev[i]
        b = b + h * (drive - comp)
    return b


def layer_path(ell, n, j, seed, comp_prev, b_out, eps_out, comp_out):
    """Like layer_shot but records b_i, eps_i, companion_i; returns raw b_n.

    Arrays have length n + 1; entries below index j are zeroed.  b_out[n]
    holds the raw shot endpoint (caller decides whether to pin it to 1);
    eps_out[n] / comp_out[n] are evaluated at the recurrence's own b_n
    clamped into [0, 1].
    """
    tab = _BetaTab(ell, n)
    h = ell / n
    if comp_prev is None:
        theta = n * seed / ell
    else:
        theta = n * seed / (ell * comp_prev[j - 1])
    for i in range(j):
        b_out[i] = 0.0
        eps_out[i] = 0.0
        comp_out[i] = 0.0
    b = seed
    x = -1.0
    for i in range(j, n + 1):
        if b <= 0.0:
            x_i, comp = 0.0, 0.0
        elif b >= 1.0:
            x_i, comp = 1.0, 1.0
            x = -1.0
        else:
            x, comp = beta_inv_comp(tab, b, x)
            x_i = x
        b_out[i] = b
        eps_out[i] = x_i
        comp_out[i] = comp
        if i < n:
            drive = theta if comp_prev is None else theta * comp_prev[i]
            b = b + h * (drive - comp)
    return b_out[n]


# ---------------------------------------------------------------------------
# continuous flows (fixed-step RK4 over t in [0, 1])


def ode_shot(ell, mesh, c, theta, drive_base):
    """Integrate db/dt = drive(t) - ell * G(b) from b(0) = 0; return b(1).

    G is gamma_comp.  drive(t) is the constant c when drive_base is None,
    else theta * drive_base sampled at half-steps (drive_base has length
    2*mesh + 1: nodes at even indices, midpoints at odd).
    """
    h = 1.0 / mesh
    b = 0.0
    z = -1.0

    def G(v):
        nonlocal z
        if v <= 0.0:
            return 0.0
        if v > _CLAMP:
            v = _CLAMP
        z = gamma_ppf(ell, v, z)
        return gamma_cdf(ell + 1, z)

    for m in range(mesh):
        if drive_base is None:
            a0 = a1 = a2 = c
        else:
            a0 = theta * drive_base[2 * m]
            a1 = theta * drive_base[2 * m + 1]
            a2 = theta * drive_base[2 * m + 2]
        k1 = a0 - ell * G(b)
        k2 = a1 - ell * G(b + 0.5 * h * k1)
        k3 = a1 - ell * G(b + 0.5 * h * k2)
        k4 = a2 - ell * G(b + h * k3)
        b += h * (k1 + 2.0 * (k2 + k3) + k4) / 6.0
    return b


def ode_path(ell, mesh, c, theta, drive_base, b_out, f_out, nu_out):
    """RK4 path recorder: node values, node drifts, node inverse points.

    b_out/f_out/nu_out have length mesh + 1.  nu_out[m] is
    gamma_ell^{-1}(clamped b) at node m, used to Hermite-interpolate the
    next layer's drive.  Returns b(1).
    """
    h = 1.0 / mesh
    b = 0.0
    z = -1.0

    def G(v):
        nonlocal z
        if v <= 0.0:
            return 0.0
        if v > _CLAMP:
            v = _CLAMP
        z = gamma_ppf(ell, v, z)
        return gamma_cdf(ell + 1, z)

    for m in range(mesh):
        a0 = c if drive_base is None else theta * drive_base[2 * m]
        a1 = c if drive_base is None else theta * drive_base[2 * m + 1]
        a2 = c if drive_base is None else theta * drive_base[2 * m + 2]
        g0 = G(b)
        b_out[m] = b
        nu_out[m] = 0.0 if b <= 0.0 else z
        k1 = a0 - ell * g0
        f_out[m] = k1
        k2 = a1 - ell * G(b + 0.5 * h * k1)
        k3 = a1 - ell * G(b + 0.5 * h * k2)
        k4 = a2 - ell * G(b + h * k3)
        b += h * (k1 + 2.0 * (k2 + k3) + k4) / 6.0
    aM = c if drive_base is None else theta * drive_base[2 * mesh]
    gM = G(b)
    b_out[mesh] = b
    nu_out[mesh] = 0.0 if b <= 0.0 else z
    f_out[mesh] = aM - ell * gM
    return b
