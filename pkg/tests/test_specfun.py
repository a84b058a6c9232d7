"""Special-function layer: closed-form oracles and shape identities."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topl.errors import ValidationError
from topl.specfun import (
    BetaParams,
    GammaShape,
    beta_cdf_grid,
    beta_density,
    beta_shift_comp,
    gamma_density,
    gamma_shift_comp,
    log_beta_fn,
    reg_inc_beta,
    reg_inc_beta_inv,
    reg_inc_gamma,
    reg_inc_gamma_inv,
)


def test_beta_uniform_case_is_identity():
    # Beta(1, 1) is the uniform law, so the CDF is x itself.
    for x in (0.0, 0.25, 0.5, 0.99, 1.0):
        assert reg_inc_beta(BetaParams(1, 1), x) == pytest.approx(x, abs=1e-15)


def test_beta_closed_forms():
    # Beta(1, b): 1 - (1-x)^b.  Beta(a, 1): x^a.
    assert reg_inc_beta((1, 3), 0.3) == pytest.approx(1.0 - 0.7**3, abs=1e-14)
    assert reg_inc_beta((4, 1), 0.6) == pytest.approx(0.6**4, abs=1e-14)
    # Symmetric pair at the midpoint.
    assert reg_inc_beta((2, 2), 0.5) == pytest.approx(0.5, abs=1e-14)


def test_beta_matches_binomial_survival():
    # reg_inc_beta((j, n-j+1), s) = P(Bin(n, s) >= j), checked by direct sum.
    n, s = 12, 0.37
    for j in range(1, n + 1):
        direct = sum(
            math.comb(n, i) * s**i * (1.0 - s) ** (n - i) for i in range(j, n + 1)
        )
        assert reg_inc_beta((j, n - j + 1), s) == pytest.approx(direct, abs=1e-13)


def test_gamma_closed_forms():
    # Shape 1 is exponential; shape 2 integrates by parts.
    assert reg_inc_gamma(GammaShape(1), 0.7) == pytest.approx(-math.expm1(-0.7), abs=1e-15)
    z = 1.9
    assert reg_inc_gamma(2, z) == pytest.approx(1.0 - (1.0 + z) * math.exp(-z), abs=1e-14)


def test_gamma_poisson_survival_identity():
    # reg_inc_gamma(s, z) = P(Poisson(z) >= s).
    z = 2.6
    for s in range(1, 9):
        tail = 1.0 - sum(math.exp(-z) * z**i / math.factorial(i) for i in range(s))
        assert reg_inc_gamma(s, z) == pytest.approx(tail, abs=1e-13)


@given(
    a=st.integers(1, 20),
    b=st.integers(1, 20),
    y=st.floats(1e-6, 1.0 - 1e-6),
)
@settings(max_examples=200, deadline=None)
def test_beta_inverse_round_trip(a, b, y):
    x = reg_inc_beta_inv((a, b), y)
    assert 0.0 <= x <= 1.0
    assert reg_inc_beta((a, b), x) == pytest.approx(y, abs=1e-10)


@given(s=st.integers(1, 20), y=st.floats(1e-6, 1.0 - 1e-6))
@settings(max_examples=200, deadline=None)
def test_gamma_inverse_round_trip(s, y):
    z = reg_inc_gamma_inv(s, y)
    assert z > 0.0
    assert reg_inc_gamma(s, z) == pytest.approx(y, abs=1e-10)


def test_densities_are_derivatives():
    # Central finite difference of the CDF at interior points.
    h = 1e-6
    for p, x in (((3, 5), 0.42), ((1, 2), 0.7)):
        fd = (reg_inc_beta(p, x + h) - reg_inc_beta(p, x - h)) / (2 * h)
        assert beta_density(p, x) == pytest.approx(fd, rel=1e-7)
    for s, z in ((2, 1.3), (5, 4.0)):
        fd = (reg_inc_gamma(s, z + h) - reg_inc_gamma(s, z - h)) / (2 * h)
        assert gamma_density(s, z) == pytest.approx(fd, rel=1e-7)


def test_log_beta_fn_small_cases():
    # B(1, n-1) = 1/(n-1); B(2, 2) = 1/6.
    assert log_beta_fn(1, 5) == pytest.approx(math.log(1.0 / 4.0), abs=1e-13)
    assert log_beta_fn(2, 4) == pytest.approx(math.log(1.0 / 6.0), abs=1e-13)


def test_log_beta_fn_large_n_stable():
    # High-precision reference; lgamma of large arguments is itself too
    # coarse to serve as the oracle here.
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    for ell, n in ((3, 20_000), (5, 1_000_000)):
        exact = float(mp.log(mp.beta(ell, n - ell)))
        assert log_beta_fn(ell, n) == pytest.approx(exact, abs=5e-13)


def test_beta_cdf_grid_vectorizes_scalar():
    x = np.array([0.0, 0.2, 0.55, 0.9, 1.0])
    grid = beta_cdf_grid(2, 7, x)
    for xi, gi in zip(x, grid):
        assert gi == pytest.approx(reg_inc_beta((2, 5), float(xi)), abs=1e-14)


def test_beta_cdf_grid_binomial_shift():
    # beta_cdf_grid(j, n+1, s) = P(Bin(n, s) >= j), the slot-fill identity.
    n, s = 9, 0.44
    for j in range(1, n + 1):
        direct = sum(
            math.comb(n, i) * s**i * (1.0 - s) ** (n - i) for i in range(j, n + 1)
        )
        got = beta_cdf_grid(j, n + 1, np.array([s]))[0]
        assert got == pytest.approx(direct, abs=1e-13)


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_shift_composition_monotone_in_n(ell):
    """The discrete drive decreases toward its continuous limit.

    ell * beta_{ell+1, n-ell}(beta_inv_{ell, n-ell}(x)) is non-increasing in
    n pointwise and dominates the gamma composition it converges to.
    """
    xs = np.linspace(1e-4, 1.0 - 1e-4, 1000)
    prev = None
    for n in (ell + 2, 10, 40, 200, 2000):
        vals = np.array([ell * beta_shift_comp(ell, n, x) for x in xs])
        if prev is not None:
            assert np.all(vals <= prev + 1e-12)
        prev = vals
    limit = np.array([ell * gamma_shift_comp(ell, x) for x in xs])
    assert np.all(prev >= limit - 1e-12)


def test_validation_rejects_bad_shapes():
    with pytest.raises(ValidationError):
        reg_inc_beta((0, 3), 0.5)
    with pytest.raises(ValidationError):
        reg_inc_gamma(0, 1.0)
    with pytest.raises(ValidationError):
        reg_inc_beta((2, 3), -0.1)
    with pytest.raises(ValidationError):
        reg_inc_beta_inv((2, 3), 1.5)
