"""Distribution models, benchmark evaluation, policies, and the MC engine."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topl.balayage import DiscreteDistribution, opt_topl_exact
from topl.bvp import solve_partition
from topl.errors import ConvergenceError, ValidationError
from topl.multibvp import solve_grid
from topl.simkit import (
    DEFAULT_SEED,
    DiscreteAtoms,
    Exponential,
    PolicySpec,
    PowerTransform,
    TwoPoint,
    Uniform,
    WorstCaseFq,
    _substream,
    bdp_value,
    build_worstcase_instance,
    dist_from_json,
    doubling_transform,
    opt_topl,
    reward_curve,
    simulate_policy,
    topl_mc,
    worstcase_ratio,
)

ALL_KINDS = [
    Uniform(0.0, 1.0),
    Uniform(0.5, 3.0),
    Exponential(1.0),
    Exponential(0.25),
    TwoPoint(0.0, 1.0, 0.3),
    DiscreteAtoms((0.1, 0.4, 0.9), (0.2, 0.5, 0.3)),
    PowerTransform(Uniform(0.0, 1.0), 0.5),
    PowerTransform(DiscreteAtoms((0.2, 0.8), (0.6, 0.4)), 2.0),
]


# ---------------------------------------------------------------------------
# substreams


def test_substream_batch_invariance():
    # Trial t owns a fixed counter range, so any batching gives the same rows.
    whole = _substream(123, 0, 7, 10)
    parts = np.vstack(
        [_substream(123, 0, 2, 10), _substream(123, 2, 4, 10), _substream(123, 6, 1, 10)]
    )
    assert np.array_equal(whole, parts)


def test_substream_seed_and_draw_isolation():
    a = _substream(1, 0, 4, 6)
    b = _substream(2, 0, 4, 6)
    assert not np.array_equal(a, b)
    # A wider draw request keeps the leading columns of the narrow one.
    wide = _substream(1, 0, 4, 8)
    assert np.array_equal(wide[:, :6], a)


# ---------------------------------------------------------------------------
# distribution models


@pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: type(d).__name__)
def test_quantile_cdf_coherence(dist):
    rng = np.random.default_rng(7)
    us = rng.random(1000)
    for u in us:
        x = dist.quantile(float(u))
        assert dist.cdf(x) >= u - 1e-12
        assert dist.quantile(dist.cdf(x)) <= x + 1e-12


@pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: type(d).__name__)
def test_json_round_trip(dist):
    doc = dist.to_json()
    json.dumps(doc)  # must be serializable as-is
    clone = dist_from_json(doc)
    for u in (0.05, 0.3, 0.77, 0.999):
        assert clone.quantile(u) == pytest.approx(dist.quantile(u), rel=1e-14, abs=1e-14)


def test_uniform_plus_expectation_closed_form():
    d = Uniform(0.0, 1.0)
    assert d.plus_expectation(0.25) == pytest.approx(0.28125, abs=1e-14)
    assert d.plus_expectation(-1.0) == pytest.approx(1.5, abs=1e-14)
    assert d.plus_expectation(2.0) == 0.0


def test_exponential_plus_expectation_closed_form():
    d = Exponential(2.0)
    # E[(X - t)+] = e^{-2t}/2 for t >= 0.
    assert d.plus_expectation(0.7) == pytest.approx(math.exp(-1.4) / 2.0, rel=1e-13)
    assert d.plus_expectation(0.0) == pytest.approx(0.5, rel=1e-13)


def test_atoms_plus_expectation_exact_sum():
    d = DiscreteAtoms((0.1, 0.4, 0.9), (0.2, 0.5, 0.3))
    assert d.plus_expectation(0.3) == pytest.approx(0.5 * 0.1 + 0.3 * 0.6, abs=1e-15)
    assert d.plus_expectation(1.5) == 0.0


def test_atoms_cdf_sides():
    d = DiscreteAtoms((0.2, 0.7), (0.5, 0.5))
    assert d.cdf(0.2) == 0.5
    assert d.cdf_left(0.2) == 0.0
    assert d.cdf(0.7) == 1.0
    assert d.cdf_left(0.7) == 0.5
    assert d.quantile(0.5) == 0.2
    assert d.quantile(0.5000001) == 0.7


def test_two_point_moments():
    d = TwoPoint(0.0, 5.0, 0.2)
    assert d.mean() == pytest.approx(1.0, abs=1e-15)
    assert d.plus_expectation(1.0) == pytest.approx(0.8, abs=1e-15)


def test_power_transform_is_cdf_power():
    base = Uniform(0.0, 1.0)
    d = PowerTransform(base, 0.5)
    for x in (0.1, 0.5, 0.9):
        assert d.cdf(x) == pytest.approx(math.sqrt(x), rel=1e-14)
    # Quantile inverts through the power.
    for u in (0.2, 0.9):
        assert d.cdf(d.quantile(u)) == pytest.approx(u, rel=1e-12)


def test_power_of_atoms_mass():
    base = DiscreteAtoms((0.2, 0.8), (0.6, 0.4))
    d = PowerTransform(base, 0.5)
    # sqrt of the CDF keeps the support, reweights the atoms.
    assert d.cdf(0.2) == pytest.approx(math.sqrt(0.6), rel=1e-14)
    assert d.cdf(0.8) == 1.0
    assert d.mean() == pytest.approx(
        0.2 * math.sqrt(0.6) + 0.8 * (1.0 - math.sqrt(0.6)), rel=1e-12
    )


def test_doubling_transform_exponent():
    d = doubling_transform(Exponential(1.0))
    assert isinstance(d, PowerTransform)
    assert d.exponent == 0.5
    assert d.cdf(1.0) == pytest.approx(math.sqrt(1.0 - math.exp(-1.0)), rel=1e-14)


def test_validation_of_model_parameters():
    with pytest.raises(ValidationError):
        Uniform(1.0, 1.0)
    with pytest.raises(ValidationError):
        Uniform(-2.0, 3.0)  # values are rewards, support must be >= 0
    with pytest.raises(ValidationError):
        Exponential(0.0)
    with pytest.raises(ValidationError):
        TwoPoint(2.0, 1.0, 0.5)
    with pytest.raises(ValidationError):
        DiscreteAtoms((0.3, 0.1), (0.5, 0.5))
    with pytest.raises(ValidationError):
        DiscreteAtoms((0.3,), (0.7,))
    with pytest.raises(ValidationError):
        PowerTransform(Uniform(0, 1), 0.0)
    with pytest.raises(ValidationError):
        dist_from_json({"kind": "nope"})


# ---------------------------------------------------------------------------
# reward and benchmark


def test_reward_curve_values():
    assert reward_curve(Uniform(0.0, 1.0), 0.5) == pytest.approx(0.375, abs=1e-13)
    assert reward_curve(Exponential(1.0), 0.5) == pytest.approx(
        0.5 * math.log(2.0) + 0.5, rel=1e-12
    )
    assert reward_curve(TwoPoint(0.0, 1.0, 0.3), 0.25) == pytest.approx(0.25, abs=1e-13)
    assert reward_curve(
        DiscreteAtoms((0.2, 0.7, 1.0), (0.5, 0.3, 0.2)), 0.35
    ) == pytest.approx(0.305, abs=1e-13)
    assert reward_curve(Uniform(0.0, 1.0), 0.0) == 0.0


def test_reward_curve_monotone_concave_shape():
    d = Exponential(1.0)
    qs = np.linspace(0.01, 1.0, 60)
    vals = np.array([reward_curve(d, float(q)) for q in qs])
    assert np.all(np.diff(vals) > 0.0)
    assert np.all(np.diff(vals, 2) < 1e-10)


def test_opt_topl_uniform_exact():
    # Sum of the top-ell order-statistic means of n uniforms.
    assert opt_topl(Uniform(0.0, 1.0), 2, 1) == pytest.approx(2.0 / 3.0, abs=1e-10)
    assert opt_topl(Uniform(0.0, 1.0), 5, 2) == pytest.approx(1.5, abs=1e-10)


def test_opt_topl_exponential_harmonic():
    # E[max of n] = H_n for rate 1.
    h4 = 1.0 + 0.5 + 1.0 / 3.0 + 0.25
    assert opt_topl(Exponential(1.0), 4, 1) == pytest.approx(h4, abs=1e-9)


def test_opt_topl_full_depth_is_total_mean():
    d = Exponential(0.5)
    assert opt_topl(d, 6, 6) == pytest.approx(6.0 * d.mean(), rel=1e-13)


def test_opt_topl_atoms_against_layer_cake():
    vals = (0.15, 0.55, 0.8)
    probs = (0.25, 0.4, 0.35)
    model = DiscreteAtoms(vals, probs)
    exact = opt_topl_exact(DiscreteDistribution(vals, probs), 6, 2)
    assert opt_topl(model, 6, 2) == pytest.approx(exact, rel=1e-9)


def test_opt_topl_monte_carlo_agrees():
    d = Exponential(1.0)
    mean, se = topl_mc(d, 10, 2, trials=200_000, seed=11)
    quad = opt_topl(d, 10, 2)
    assert abs(mean - quad) <= 3.0 * se
    assert se < 0.02


def test_opt_topl_validation():
    with pytest.raises(ValidationError):
        opt_topl(Uniform(0, 1), 3, 4)
    with pytest.raises(ValidationError):
        opt_topl(Uniform(0, 1), 3, 1, method="exact")


# ---------------------------------------------------------------------------
# backward dynamic programming


def test_bdp_small_closed_forms():
    assert bdp_value(Uniform(0.0, 1.0), 2, 1).value == pytest.approx(0.625, abs=1e-12)
    assert bdp_value(TwoPoint(0.0, 1.0, 0.5), 2, 1).value == pytest.approx(0.75, abs=1e-12)
    assert bdp_value(Uniform(0.0, 1.0), 3, 2).value == pytest.approx(1.1953125, abs=1e-12)


def test_bdp_threshold_table_shape():
    res = bdp_value(Uniform(0.0, 1.0), 5, 2)
    assert res.thresholds.shape == (5, 3)
    assert np.all(np.isinf(res.thresholds[:, 0]))
    # More remaining items means a pickier bar.
    assert np.all(np.diff(res.thresholds[:, 1]) >= -1e-12)


def test_bdp_value_increasing_in_budget_and_horizon():
    d = Exponential(1.0)
    v1 = bdp_value(d, 6, 1).value
    v2 = bdp_value(d, 6, 2).value
    v3 = bdp_value(d, 8, 2).value
    assert v2 > v1
    assert v3 > v2


def test_bdp_never_beats_prophet():
    d = Uniform(0.0, 1.0)
    for n, k in ((4, 1), (6, 2), (9, 3)):
        assert bdp_value(d, n, k).value <= opt_topl(d, n, k) + 1e-12


# ---------------------------------------------------------------------------
# policies and simulation


def test_policy_spec_validation():
    with pytest.raises(ValidationError):
        PolicySpec(kind="static")  # missing threshold
    with pytest.raises(ValidationError):
        PolicySpec(kind="bdp")  # missing k
    with pytest.raises(ValidationError):
        PolicySpec(kind="warp", k=1)
    spec = PolicySpec.static(0.7, tie_prob=0.25)
    assert spec.kind == "static" and spec.threshold == 0.7


def test_simulate_constant_distribution_full_budget():
    atom = DiscreteAtoms((1.0,), (1.0,))
    rep = simulate_policy(atom, 12, 2, 2, PolicySpec.bdp_optimal(2), 500, seed=3)
    assert rep.ratio == 1.0
    assert rep.ratio_se == 0.0
    rep2 = simulate_policy(
        atom, 12, 3, 1, PolicySpec.static(1.0, tie_prob=1.0), 500, seed=3
    )
    assert rep2.ratio == 1.0


def test_simulate_reports_are_bit_identical():
    d = Exponential(1.0)
    pol = PolicySpec.bdp_optimal(1)
    a = simulate_policy(d, 10, 1, 1, pol, 4000, seed=77)
    b = simulate_policy(d, 10, 1, 1, pol, 4000, seed=77)
    assert a == b
    c = simulate_policy(d, 10, 1, 1, pol, 4000, seed=78)
    assert c.mean_alg != a.mean_alg


def test_simulate_alg1_identity_short_run():
    # Prop-style check at modest trials; the acceptance suite runs 1e6.
    n, ell = 20, 1
    part = solve_partition(n, ell)
    rep = simulate_policy(
        Uniform(0.0, 1.0), n, 1, ell, PolicySpec.quantile_alg1(part), 120_000
    )
    target = ell / part.c_ell_n
    assert abs(rep.ratio - target) <= 3.0 * rep.ratio_se
    assert rep.slot_means[0] == rep.mean_alg


def test_simulate_alg1_distribution_free():
    # The ratio law depends only on the partition, not on F (u-scale policy).
    n, ell = 15, 2
    part = solve_partition(n, ell)
    pol = PolicySpec.quantile_alg1(part)
    r_uni = simulate_policy(Uniform(0.0, 1.0), n, 1, ell, pol, 150_000, seed=5)
    r_exp = simulate_policy(Exponential(1.0), n, 1, ell, pol, 150_000, seed=5)
    spread = abs(r_uni.ratio - r_exp.ratio)
    assert spread <= 3.0 * math.hypot(r_uni.ratio_se, r_exp.ratio_se)


def test_simulate_alg2_runs_and_decomposes():
    n, k, ell = 60, 2, 1
    grid = solve_grid(n, k, ell)
    rep = simulate_policy(
        Uniform(0.0, 1.0), n, k, ell, PolicySpec.quantile_alg2(grid), 30_000
    )
    assert len(rep.slot_means) == k
    assert rep.mean_alg == pytest.approx(sum(rep.slot_means) / k, rel=1e-12)
    assert 0.3 < rep.ratio < 0.7


def test_simulate_shape_mismatch_errors():
    part = solve_partition(10, 1)
    with pytest.raises(ValidationError):
        simulate_policy(Uniform(0, 1), 12, 1, 1, PolicySpec.quantile_alg1(part), 100)
    with pytest.raises(ValidationError):
        simulate_policy(Uniform(0, 1), 10, 2, 1, PolicySpec.quantile_alg1(part), 100)
    grid = solve_grid(30, 2, 1)
    with pytest.raises(ValidationError):
        simulate_policy(Uniform(0, 1), 30, 3, 1, PolicySpec.quantile_alg2(grid), 100)
    with pytest.raises(ValidationError):
        simulate_policy(Uniform(0, 1), 8, 2, 1, PolicySpec.bdp_optimal(3), 100)
    with pytest.raises(ValidationError):
        simulate_policy(Uniform(0, 1), 8, 1, 1, PolicySpec.bdp_optimal(1), 1)


# ---------------------------------------------------------------------------
# worst-case instance


@pytest.fixture(scope="module")
def wc_inst():
    return build_worstcase_instance(1, 0.05, mesh=20_000)


def test_worstcase_instance_shape(wc_inst):
    d = wc_inst.dist
    assert isinstance(d, WorstCaseFq)
    # Flat segment of mass p ends at the terminal atom H.
    assert 0.0 < d.p < 1.0
    assert d.H > d.x_branch[-1]
    assert d.cdf(d.H) == 1.0
    assert d.cdf(d.H * 0.999999) == pytest.approx(d.p, rel=1e-9)
    # Branch CDF is non-decreasing from 0.
    assert np.all(np.diff(d.F_branch) >= 0.0)
    assert d.x_branch[0] == 0.0


def test_worstcase_instance_regression(wc_inst):
    assert wc_inst.p == pytest.approx(0.9329636618024424, rel=1e-9)
    assert wc_inst.H == pytest.approx(11.864863616292439, rel=1e-9)


def test_worstcase_instance_round_trip(wc_inst):
    doc = wc_inst.dist.to_json()
    clone = dist_from_json(doc)
    for u in (0.01, 0.5, 0.93, 0.999):
        assert clone.quantile(u) == pytest.approx(wc_inst.dist.quantile(u), rel=1e-12)


def test_worstcase_ratio_record():
    rec = worstcase_ratio(1, 0.05, 5000, mesh=20_000)
    assert rec["ratio"] == pytest.approx(0.7579980550344483, rel=1e-9)
    assert set(rec) == {"ell", "q", "n", "mesh", "value", "benchmark", "ratio", "p", "H"}


def test_worstcase_builder_validation():
    with pytest.raises(ValidationError):
        build_worstcase_instance(1, 0.0)
    with pytest.raises(ValidationError):
        build_worstcase_instance(1, 1.0)
    with pytest.raises(ValidationError, match="refine the mesh"):
        build_worstcase_instance(1, 1e-5, mesh=1000)


def test_power_of_worstcase_tail_integral(wc_inst):
    # plus_expectation under the 1/n power must match a brute numeric
    # integral of the survival power.
    d = PowerTransform(wc_inst.dist, 1.0 / 50.0)
    t = 2.0
    xs = np.linspace(t, wc_inst.H, 400_001)
    F = np.array([wc_inst.dist.cdf(float(x)) for x in xs])
    surv = 1.0 - F ** (1.0 / 50.0)
    brute = float(np.trapezoid(surv, xs))
    assert d.plus_expectation(t) == pytest.approx(brute, rel=1e-5)
