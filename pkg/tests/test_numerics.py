"""Quadrature and root-bracketing helpers."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topl.errors import ConvergenceError
from topl.numerics import (
    adaptive_simpson,
    bisect_best,
    expand_bracket_log,
    hermite_midpoints,
    interleave,
)


@pytest.mark.parametrize(
    "f,a,b,exact",
    [
        (lambda x: x * x, 0.0, 1.0, 1.0 / 3.0),
        (np.sin, 0.0, math.pi, 2.0),
        (lambda x: np.exp(-x), 0.0, 5.0, 1.0 - math.exp(-5.0)),
    ],
)
def test_simpson_known_integrals(f, a, b, exact):
    val, err = adaptive_simpson(f, a, b, 1e-12)
    assert val == pytest.approx(exact, abs=1e-11)
    assert err <= 1e-10


def test_simpson_handles_sharp_peak():
    # Narrow Gaussian with most mass inside one initial panel.
    s = 1e-3
    f = lambda x: np.exp(-((x - 0.5) ** 2) / (2 * s * s)) / (s * math.sqrt(2 * math.pi))
    val, _ = adaptive_simpson(f, 0.0, 1.0, 1e-10)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_simpson_reports_error_estimate():
    val, err = adaptive_simpson(lambda x: np.cos(3.0 * x), 0.0, 2.0, 1e-9)
    assert abs(val - math.sin(6.0) / 3.0) <= max(err, 1e-12) * 10


def test_simpson_empty_interval():
    val, err = adaptive_simpson(lambda x: x, 2.0, 2.0, 1e-10)
    assert val == 0.0 and err == 0.0


def test_bisect_best_linear_root():
    x, fx = bisect_best(lambda t: t - 0.3, 0.0, 1.0, 60, what="line")
    assert x == pytest.approx(0.3, abs=1e-15)
    assert abs(fx) < 1e-14


def test_bisect_best_returns_best_iterate():
    # Root of cos at pi/2 to full bisection accuracy.
    x, _ = bisect_best(lambda t: -math.cos(t), 1.0, 2.0, 80, what="cos")
    assert x == pytest.approx(math.pi / 2.0, abs=1e-14)


def test_bisect_best_requires_sign_change():
    with pytest.raises(ConvergenceError, match="no-root"):
        bisect_best(lambda t: t + 1.0, 0.0, 1.0, 20, what="no-root")


@given(root=st.floats(0.01, 0.99))
@settings(max_examples=100, deadline=None)
def test_bisect_best_random_monotone(root):
    f = lambda t: (t - root) * (1.0 + t)
    x, _ = bisect_best(f, 0.0, 1.0, 70, what="poly")
    assert x == pytest.approx(root, abs=1e-12)


def test_expand_bracket_log_widens_to_sign_change():
    # Root at 40; starting guess far below.
    lo, hi = expand_bracket_log(lambda x: x - 40.0, 1.0, 4.0, 16, what="shift")
    assert lo <= 40.0 <= hi


def test_expand_bracket_log_gives_up():
    with pytest.raises(ConvergenceError, match="always-neg"):
        expand_bracket_log(lambda x: -1.0, 1.0, 2.0, 5, what="always-neg")


def test_hermite_midpoints_exact_on_cubic():
    # Cubic Hermite interpolation reproduces cubics exactly.
    h = 0.1
    t = np.arange(0.0, 1.0 + h / 2, h)
    y = t**3 - 2.0 * t
    dy = 3.0 * t**2 - 2.0
    mids = hermite_midpoints(y, dy, h)
    tm = t[:-1] + h / 2
    assert np.allclose(mids, tm**3 - 2.0 * tm, atol=1e-14)


def test_interleave_layout():
    nodes = np.array([0.0, 2.0, 4.0])
    mids = np.array([1.0, 3.0])
    out = interleave(nodes, mids)
    assert out.tolist() == [0.0, 1.0, 2.0, 3.0, 4.0]
