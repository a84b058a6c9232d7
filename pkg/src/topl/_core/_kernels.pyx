# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of ``topl._core._pykernels``; same contracts, C speed."""

from libc.math cimport exp, expm1, fabs, lgamma, log, log1p, isfinite

BACKEND = "cython"

MAX_SHAPE = 64

cdef double _REL = 4e-16
cdef double _TINY = 1e-300
cdef double _CLAMP = 1.0 - 1e-12

cdef enum:
    MAXL = 66


cdef struct BetaTab:
    int ell
    long n
    double xsmall
    double logB
    double invB
    double C1[MAXL]
    double lC1[MAXL]
    double C2[MAXL]
    double lC2[MAXL]


cdef int make_tab(BetaTab* t, int ell, long n) except -1:
    cdef int j, i
    cdef double f
    if ell < 1 or ell > MAX_SHAPE:
        raise ValueError("first shape out of range: %r" % (ell,))
    if n - ell < 1:
        raise ValueError("second shape must be positive")
    t.ell = ell
    t.n = n
    t.C1[0] = 1.0
    t.lC1[0] = 0.0
    t.C2[0] = 1.0
    t.lC2[0] = 0.0
    for j in range(1, ell + 1):
        f = (<double> (n - j)) / j
        t.C1[j] = t.C1[j - 1] * f
        t.lC1[j] = t.lC1[j - 1] + log(f)
    for j in range(1, ell + 2):
        f = (<double> (n + 1 - j)) / j
        t.C2[j] = t.C2[j - 1] * f
        t.lC2[j] = t.lC2[j - 1] + log(f)
    t.logB = lgamma(<double> ell)
    for i in range(ell):
        t.logB -= log(<double> (n - ell + i))
    t.invB = exp(-t.logB)
    cdef double cut = 1.0
    if 0.5 * ell > cut:
        cut = 0.5 * ell
    t.xsmall = cut / (n - 1)
    return 0


cdef double _asc_tail(double lc, double m, int a, double x) nogil:
    cdef double lx = log(x)
    cdef double l1x = log1p(-x)
    cdef double t = exp(lc + a * lx + (m - a) * l1x)
    cdef double s = t
    cdef double r = x / (1.0 - x)
    cdef double j = a
    while j < m:
        t *= (m - j) / (j + 1.0) * r
        s += t
        j += 1.0
        if t <= s * 1e-17:
            break
    return s


cdef double _comp_linear(double* C, int k, double r, double u) nogil:
    cdef double s = C[k]
    cdef int j
    for j in range(k - 1, -1, -1):
        s = s * r + C[j]
    return 1.0 - u * s


cdef double _comp_log(double* lC, int k, double lx, double l1x, double lu) nogil:
    cdef double d = lx - l1x
    cdef double mx = lC[0]
    cdef double v, s, z
    cdef int j
    for j in range(1, k + 1):
        v = lC[j] + j * d
        if v > mx:
            mx = v
    s = 0.0
    for j in range(k + 1):
        s += exp(lC[j] + j * d - mx)
    z = lu + mx + log(s)
    if z > 0.0:
        z = 0.0
    return -expm1(z)


cdef void _triplet(BetaTab* t, double x, double* cdf, double* comp, double* pdf) nogil:
    cdef int ell = t.ell
    cdef long n = t.n
    cdef double l1x, lpdf, u, r, lx
    if x <= 0.0:
        cdf[0] = 0.0
        comp[0] = 0.0
        pdf[0] = t.invB if ell == 1 else 0.0
        return
    if x >= 1.0:
        cdf[0] = 1.0
        comp[0] = 1.0
        pdf[0] = t.invB if ell == n - 1 else 0.0
        return
    l1x = log1p(-x)
    lpdf = (ell - 1) * log(x) + (n - ell - 1) * l1x - t.logB
    pdf[0] = exp(lpdf)
    if x <= t.xsmall:
        cdf[0] = _asc_tail(t.lC1[ell], <double> (n - 1), ell, x)
        comp[0] = _asc_tail(t.lC2[ell + 1], <double> n, ell + 1, x)
        return
    if x <= 0.999:
        u = exp((n - 1) * l1x)
        r = x / (1.0 - x)
        cdf[0] = _comp_linear(t.C1, ell - 1, r, u)
        comp[0] = _comp_linear(t.C2, ell, r, u * (1.0 - x))
        return
    lx = log(x)
    cdf[0] = _comp_log(t.lC1, ell - 1, lx, l1x, (n - 1) * l1x)
    comp[0] = _comp_log(t.lC2, ell, lx, l1x, n * l1x)


cdef void _inv_comp(BetaTab* t, double y, double x0, double* xout, double* compout) nogil:
    cdef int ell = t.ell
    cdef long n = t.n
    cdef double x, lo, hi, cdf, comp, pdf, f, xn
    cdef long q
    cdef int it
    if y <= 0.0:
        xout[0] = 0.0
        compout[0] = 0.0
        return
    if y >= 1.0:
        xout[0] = 1.0
        compout[0] = 1.0
        return
    if 0.0 < x0 < 1.0:
        x = x0
    elif y <= 0.5:
        x = exp((log(y) + t.logB + log(<double> ell)) / ell)
        if x > 0.5:
            x = 0.5
    else:
        q = n - ell
        x = 1.0 - exp((log1p(-y) + t.logB + log(<double> q)) / q)
    lo = 0.0
    hi = 1.0
    cdf = 0.0
    comp = 0.0
    for it in range(100):
        _triplet(t, x, &cdf, &comp, &pdf)
        f = cdf - y
        if f > 0.0:
            hi = x
        else:
            lo = x
        if fabs(f) <= _REL * y + _TINY or hi - lo <= _REL * hi:
            break
        if pdf > 0.0 and isfinite(pdf):
            xn = x - f / pdf
            if not (lo < xn < hi):
                xn = 0.5 * (lo + hi)
        else:
            xn = 0.5 * (lo + hi)
        if xn == x:
            break
        x = xn
    xout[0] = x
    compout[0] = comp


def beta_cdf(int ell, long n, double x):
    """Regularized incomplete beta for integer shapes (ell, n - ell)."""
    cdef BetaTab t
    cdef double cdf, comp, pdf
    make_tab(&t, ell, n)
    _triplet(&t, x, &cdf, &comp, &pdf)
    return cdf


def beta_companion(int ell, long n, double x):
    """Shifted-shape CDF Pr(Bin(n, x) >= ell + 1) at x."""
    cdef BetaTab t
    cdef double cdf, comp, pdf
    make_tab(&t, ell, n)
    _triplet(&t, x, &cdf, &comp, &pdf)
    return comp


def beta_pdf(int ell, long n, double x):
    """Beta(ell, n - ell) density."""
    cdef BetaTab t
    cdef double cdf, comp, pdf
    make_tab(&t, ell, n)
    _triplet(&t, x, &cdf, &comp, &pdf)
    return pdf


def beta_ppf(int ell, long n, double y, double x0=-1.0):
    """Inverse of beta_cdf in its first argument."""
    cdef BetaTab t
    cdef double x, comp
    make_tab(&t, ell, n)
    _inv_comp(&t, y, x0, &x, &comp)
    return x


# ---------------------------------------------------------------------------
# gamma tails


cdef double _gamma_cdf(int ell, double z) nogil:
    cdef double t, s, p, w, cut
    cdef int i
    cdef double j
    if z <= 0.0:
        return 0.0
    if ell == 1:
        return -expm1(-z)
    cut = 1.0
    if 0.5 * ell > cut:
        cut = 0.5 * ell
    if z <= cut:
        t = 1.0
        for i in range(1, ell + 1):
            t *= z / i
        s = t
        j = ell + 1.0
        while True:
            t *= z / j
            s += t
            j += 1.0
            if t <= s * 1e-17 or j > ell + 400.0:
                break
        return exp(-z) * s
    t = 1.0
    p = 1.0
    for i in range(1, ell):
        t *= z / i
        p += t
    w = -z + log(p)
    if w > 0.0:
        w = 0.0
    return -expm1(w)


cdef double _gamma_pdf(int ell, double z) nogil:
    if z <= 0.0:
        return exp(-z) if ell == 1 else 0.0
    return exp((ell - 1) * log(z) - z - lgamma(<double> ell))


cdef double _gamma_ppf(int ell, double y, double z0) except? -1.0:
    cdef double z, lo, hi, f, pdf, zn, w, w2
    cdef int it
    if y <= 0.0:
        return 0.0
    if y >= 1.0:
        raise ValueError("gamma_ppf needs y < 1")
    if ell == 1:
        return -log1p(-y)
    if z0 > 0.0:
        z = z0
    elif y < 0.1:
        z = exp((log(y) + lgamma(ell + 1.0)) / ell)
    elif y > 0.9:
        w = -log1p(-y)
        if w < 1.2:
            w2 = 1.2
        else:
            w2 = w
        z = w + (ell - 1) * log(w2)
    else:
        z = <double> ell
    lo = 0.0
    hi = 2.0 * z
    if ell + 40.0 > hi:
        hi = ell + 40.0
    while _gamma_cdf(ell, hi) < y:
        lo = hi
        hi *= 2.0
        if hi > 1e9:
            raise ArithmeticError("gamma_ppf bracket blew up")
    if z <= lo or z >= hi:
        z = 0.5 * (lo + hi)
    for it in range(100):
        f = _gamma_cdf(ell, z) - y
        if f > 0.0:
            hi = z
        else:
            lo = z
        if fabs(f) <= _REL * y + _TINY or hi - lo <= _REL * hi:
            break
        pdf = _gamma_pdf(ell, z)
        if pdf > 0.0 and isfinite(pdf):
            zn = z - f / pdf
            if not (lo < zn < hi):
                zn = 0.5 * (lo + hi)
        else:
            zn = 0.5 * (lo + hi)
        if zn == z:
            break
        z = zn
    return z


def gamma_cdf(int ell, double z):
    """Lower regularized gamma at integer shape: Pr(Poisson(z) >= ell)."""
    return _gamma_cdf(ell, z)


def gamma_ppf(int ell, double y, double z0=-1.0):
    """Inverse of gamma_cdf: smallest z with gamma_cdf(ell, z) = y."""
    return _gamma_ppf(ell, y, z0)


def gamma_comp(int ell, double b):
    """Shape-shift composition gamma_{ell+1}(gamma_ell^{-1}(b)), clamped."""
    if b <= 0.0:
        return 0.0
    if b > _CLAMP:
        b = _CLAMP
    return _gamma_cdf(ell + 1, _gamma_ppf(ell, b, -1.0))


def gamma_comp_arr(int ell, double[::1] b_arr, double[::1] out):
    """Vectorized gamma_comp with a warm-started inverse along the array."""
    cdef Py_ssize_t i, m = b_arr.shape[0]
    cdef double z = -1.0
    cdef double b
    for i in range(m):
        b = b_arr[i]
        if b <= 0.0:
            out[i] = 0.0
            continue
        if b > _CLAMP:
            b = _CLAMP
        z = _gamma_ppf(ell, b, z)
        out[i] = _gamma_cdf(ell + 1, z)
    return out


# ---------------------------------------------------------------------------
# discrete shooting


def layer_shot(int ell, long n, long j, double seed, comp_prev):
    """Advance layer j of the discrete system from its seed; return raw b_n."""
    cdef BetaTab t
    cdef double h = (<double> ell) / n
    cdef double theta, b, x, comp, drive
    cdef double[::1] cp
    cdef long i
    cdef bint ones = comp_prev is None
    make_tab(&t, ell, n)
    if ones:
        theta = n * seed / ell
    else:
        cp = comp_prev
        theta = n * seed / (ell * cp[j - 1])
    b = seed
    x = -1.0
    with nogil:
        for i in range(j, n):
            if b <= 0.0:
                comp = 0.0
            elif b >= 1.0:
                comp = 1.0
            else:
                _inv_comp(&t, b, x, &x, &comp)
            if ones:
                drive = theta
            else:
                drive = theta * cp[i]
            b = b + h * (drive - comp)
    return b


def layer_path(int ell, long n, long j, double seed, comp_prev,
               double[::1] b_out, double[::1] eps_out, double[::1] comp_out):
    """Like layer_shot but records b_i, eps_i, companion_i; returns raw b_n."""
    cdef BetaTab t
    cdef double h = (<double> ell) / n
    cdef double theta, b, x, x_i, comp, drive
    cdef double[::1] cp
    cdef long i
    cdef bint ones = comp_prev is None
    make_tab(&t, ell, n)
    if ones:
        theta = n * seed / ell
    else:
        cp = comp_prev
        theta = n * seed / (ell * cp[j - 1])
    with nogil:
        for i in range(j):
            b_out[i] = 0.0
            eps_out[i] = 0.0
            comp_out[i] = 0.0
        b = seed
        x = -1.0
        for i in range(j, n + 1):
            if b <= 0.0:
                x_i = 0.0
                comp = 0.0
            elif b >= 1.0:
                x_i = 1.0
                comp = 1.0
                x = -1.0
            else:
                _inv_comp(&t, b, x, &x, &comp)
                x_i = x
            b_out[i] = b
            eps_out[i] = x_i
            comp_out[i] = comp
            if i < n:
                if ones:
                    drive = theta
                else:
                    drive = theta * cp[i]
                b = b + h * (drive - comp)
    return b_out[n]


# ---------------------------------------------------------------------------
# continuous flows


cdef inline double _G(int ell, double v, double* z) except? -1.0:
    if v <= 0.0:
        return 0.0
    if v > _CLAMP:
        v = _CLAMP
    z[0] = _gamma_ppf(ell, v, z[0])
    return _gamma_cdf(ell + 1, z[0])


def ode_shot(int ell, long mesh, double c, double theta, drive_base):
    """Integrate db/dt = drive(t) - ell*G(b) from b(0)=0; return b(1)."""
    cdef double h = 1.0 / mesh
    cdef double b = 0.0
    cdef double z = -1.0
    cdef double a0, a1, a2, k1, k2, k3, k4
    cdef double[::1] db
    cdef bint const = drive_base is None
    cdef long m
    if not const:
        db = drive_base
    for m in range(mesh):
        if const:
            a0 = c
            a1 = c
            a2 = c
        else:
            a0 = theta * db[2 * m]
            a1 = theta * db[2 * m + 1]
            a2 = theta * db[2 * m + 2]
        k1 = a0 - ell * _G(ell, b, &z)
        k2 = a1 - ell * _G(ell, b + 0.5 * h * k1, &z)
        k3 = a1 - ell * _G(ell, b + 0.5 * h * k2, &z)
        k4 = a2 - ell * _G(ell, b + h * k3, &z)
        b += h * (k1 + 2.0 * (k2 + k3) + k4) / 6.0
    return b


def ode_path(int ell, long mesh, double c, double theta, drive_base,
             double[::1] b_out, double[::1] f_out, double[::1] nu_out):
    """RK4 path recorder: node values, node drifts, node inverse points."""
    cdef double h = 1.0 / mesh
    cdef double b = 0.0
    cdef double z = -1.0
    cdef double a0, a1, a2, g0, gM, aM, k1, k2, k3, k4
    cdef double[::1] db
    cdef bint const = drive_base is None
    cdef long m
    if not const:
        db = drive_base
    for m in range(mesh):
        if const:
            a0 = c
            a1 = c
            a2 = c
        else:
            a0 = theta * db[2 * m]
            a1 = theta * db[2 * m + 1]
            a2 = theta * db[2 * m + 2]
        g0 = _G(ell, b, &z)
        b_out[m] = b
        nu_out[m] = 0.0 if b <= 0.0 else z
        k1 = a0 - ell * g0
        f_out[m] = k1
        k2 = a1 - ell * _G(ell, b + 0.5 * h * k1, &z)
        k3 = a1 - ell * _G(ell, b + 0.5 * h * k2, &z)
        k4 = a2 - ell * _G(ell, b + h * k3, &z)
        b += h * (k1 + 2.0 * (k2 + k3) + k4) / 6.0
    if const:
        aM = c
    else:
        aM = theta * db[2 * mesh]
    gM = _G(ell, b, &z)
    b_out[mesh] = b
    nu_out[mesh] = 0.0 if b <= 0.0 else z
    f_out[mesh] = aM - ell * gM
    return b
