import numpy as np
import pytest

from sftlab import (
    AffinePotential,
    CylinderPotential,
    MarkovMeasure,
    MarkovPoint,
    MetricPotential,
    PeriodicPoint,
    PreconditionError,
    PrefixPoint,
    UnsupportedError,
    achievable_set_estimate,
    birkhoff_sum,
    frequency_potential,
    limit_set_estimate,
    load_potential,
    segment_average_bound_check,
)


def alt01():
    return PeriodicPoint([], [0, 1], 2)


def constant_potential(c, K=2):
    return CylinderPotential(1, 1, np.full((K, K, 1), float(c)), K, K)


# -- evaluation and variation bounds -----------------------------------


def test_frequency_potential_counts_ones():
    f = frequency_potential(2, 1)
    s = birkhoff_sum(f, None, alt01(), 0, 10)
    assert s.lo[0] == s.hi[0] == 5.0


def test_metric_birkhoff_identity_pair():
    f = MetricPotential(2)
    x = alt01()
    s = birkhoff_sum(f, x, x, 0, 10)
    assert s.lo[0] == 0.0
    # the unresolved tail allowance is small but not zero
    assert 0.0 < s.hi[0] < 1e-10


def test_metric_birkhoff_constant_one():
    f = MetricPotential(2)
    w = PeriodicPoint([], [0], 2)
    x = PeriodicPoint([], [1], 2)
    s = birkhoff_sum(f, w, x, 0, 4)
    assert s.lo[0] == s.hi[0] == 4.0


def test_cylinder_var_vanishes_at_depth():
    f = frequency_potential(2, 1)
    assert f.var_bound(0) == 1.0
    assert f.var_bound(1) == 0.0
    assert f.var_bound(7) == 0.0


def test_metric_var_is_geometric():
    f = MetricPotential(3)
    for i in range(8):
        assert f.var_bound(i) == pytest.approx(3.0**-i)


def test_metric_var_bound_is_definitional():
    """Pairs agreeing to depth i give metric values within K^-i."""
    K = 2
    rng = np.random.default_rng(2)
    f = MetricPotential(K)
    for i in range(1, 11):
        for _ in range(30):
            a = rng.integers(0, K, size=16)
            b = a.copy()
            c = rng.integers(0, K, size=16)
            d = c.copy()
            b[i:] = rng.integers(0, K, size=16 - i)
            d[i:] = rng.integers(0, K, size=16 - i)
            va = f.eval_box(a, c)
            vb = f.eval_box(b, d)
            mid_a = 0.5 * (va.lo[0] + va.hi[0])
            mid_b = 0.5 * (vb.lo[0] + vb.hi[0])
            assert abs(mid_a - mid_b) <= K**-i + 1e-12


def test_eval_exact_beyond_depth_and_stable():
    f = CylinderPotential.from_table(
        2, 1, {((0, 1), (0, 1)): [2.5], ((0, 0), (1, 0)): [-1.0]}, 2, 2
    )
    short = f.eval_box(np.array([0, 1]), np.array([0, 1, 1]))
    longer = f.eval_box(np.array([0, 1, 0, 0]), np.array([0, 1, 1, 0, 1]))
    assert short.lo[0] == short.hi[0] == 2.5
    assert longer.lo[0] == short.lo[0]


def test_eval_partial_window_is_honest():
    f = CylinderPotential.from_table(
        2, 1, {((0, 0), (0, 0)): [1.0], ((0, 0), (0, 1)): [3.0]}, 2, 2
    )
    v = f.eval_box(np.array([0, 0]), np.array([0]))
    assert v.lo[0] == 1.0 and v.hi[0] == 3.0


def test_birkhoff_additivity():
    f = MetricPotential(2)
    w = PeriodicPoint([], [0], 2)
    x = MarkovPoint(MarkovMeasure.bernoulli([0.5, 0.5]), 9)
    ab = birkhoff_sum(f, w, x, 0, 20)
    bc = birkhoff_sum(f, w, x, 20, 50)
    ac = birkhoff_sum(f, w, x, 0, 50)
    assert ac.lo[0] >= ab.lo[0] + bc.lo[0] - 1e-12
    assert ac.hi[0] <= ab.hi[0] + bc.hi[0] + 1e-12


def test_affine_combination():
    base = frequency_potential(2, 1)
    f = AffinePotential(base, [2.0], [0.25])
    v = f.eval_box(np.array([0]), np.array([1]))
    assert v.lo[0] == pytest.approx(2.0 * (1.0 - 0.25))
    assert f.var_bound(0) == pytest.approx(2.0)


# -- segment averages --------------------------------------------------


def test_segment_bound_constant_potential():
    f = constant_potential(0.4)
    chk = segment_average_bound_check(f, None, alt01(), 0.4, 0.05, 4, 10, 40)
    assert chk.ok
    # measured deviation is exactly zero, so the whole bound is slack
    assert chk.slack == pytest.approx(chk.bound)


def test_segment_bound_on_sampled_stream():
    f = frequency_potential(2, 1)
    x = MarkovPoint(MarkovMeasure.bernoulli([0.5, 0.5]), 4)
    w = x.prefix(400)
    avgs = np.cumsum(w == 1) / np.arange(1, 401)
    eps = float(np.abs(avgs[99:] - 0.5).max()) + 1e-6
    chk = segment_average_bound_check(f, None, x, 0.5, eps, 100, 150, 400)
    assert chk.ok
    assert chk.measured.hi <= chk.bound + 1e-12


def test_segment_bound_extreme_window():
    # m = n - 1 leaves a single-step segment, the loosest case
    f = frequency_potential(2, 1)
    chk = segment_average_bound_check(f, None, alt01(), 0.5, 0.6, 2, 39, 40)
    assert chk.ok and chk.bound >= 1.0


def test_segment_bound_hypothesis_enforced():
    f = frequency_potential(2, 1)
    x = PeriodicPoint([], [1], 2)
    with pytest.raises(PreconditionError):
        segment_average_bound_check(f, None, x, 0.0, 0.01, 4, 10, 40)


# -- limit sets --------------------------------------------------------


def test_limit_set_constant_potential():
    est = limit_set_estimate(constant_potential(1.5), None, alt01(), 2000)
    assert len(est.clusters) == 1
    rep, rad, cnt = est.clusters[0]
    assert float(rep[0]) == pytest.approx(1.5, abs=1e-12)
    assert rad == 0.0


def test_limit_set_markov_typical():
    f = frequency_potential(2, 1)
    x = MarkovPoint(MarkovMeasure.bernoulli([0.3, 0.7]), 17)
    est = limit_set_estimate(f, None, x, 100_000)
    rep, rad, cnt = max(est.clusters, key=lambda c: c[2])
    assert float(rep[0]) == pytest.approx(0.7, abs=0.02)


def test_limit_set_two_targets():
    """Alternating block structure leaves separated accumulation values."""
    sym = []
    n, val = 1, 0
    while len(sym) < 70_000:
        sym.extend([val] * n)
        val ^= 1
        n *= 4
    f = frequency_potential(2, 1)
    est = limit_set_estimate(
        f, None, PrefixPoint(sym[:70_000], 2), 65_536, cluster_radius=0.02
    )
    reps = sorted(float(c[0][0]) for c in est.clusters)
    assert len(reps) >= 2
    assert reps[0] < 0.35 and reps[-1] > 0.65


def test_cluster_reps_are_observed_averages():
    f = frequency_potential(2, 1)
    x = MarkovPoint(MarkovMeasure.bernoulli([0.5, 0.5]), 3)
    est = limit_set_estimate(f, None, x, 20_000)
    for rep, rad, cnt in est.clusters:
        assert any(abs(float(rep[0]) - a) <= rad + 1e-12 for a in est.averages[:, 0])


# -- achievable averages -----------------------------------------------


def test_achievable_full_shift_frequency(full2):
    a = achievable_set_estimate(frequency_potential(2, 1), full2, 8)
    assert a.lo[0] == pytest.approx(0.0)
    assert a.hi[0] == pytest.approx(1.0)


def test_achievable_golden_frequency(golden):
    a = achievable_set_estimate(frequency_potential(2, 1), golden, 10)
    assert a.lo[0] == pytest.approx(0.0)
    assert a.hi[0] == pytest.approx(0.5)


def test_achievable_constant(full2):
    a = achievable_set_estimate(constant_potential(0.7), full2, 6)
    assert a.lo[0] == pytest.approx(0.7)
    assert a.hi[0] == pytest.approx(0.7)


def test_achievable_tracks_cycle_averages(golden):
    """Period <= 3 cycle averages of the golden mean shift by hand:
    0^inf gives 0 and (001)^inf, (01)^inf give 1/3, 1/2."""
    a = achievable_set_estimate(frequency_potential(2, 1), golden, 3)
    assert a.lo[0] == pytest.approx(0.0)
    assert a.hi[0] == pytest.approx(0.5)
    assert a.cycle_count > 0 and not a.budget_hit


def test_achievable_rejects_metric_kind(full2):
    with pytest.raises(UnsupportedError):
        achievable_set_estimate(MetricPotential(2), full2, 6)


# -- file formats ------------------------------------------------------


def test_load_cylinder_potential(potential_file):
    path = potential_file("kind=cylinder depth=1 dim=1\n0 1 1\n1 1 1\n")
    f = load_potential(path)
    assert f.depth == 1 and f.dim == 1
    assert f.eval_box(np.array([0]), np.array([1])).lo[0] == 1.0
    assert f.eval_box(np.array([0]), np.array([0])).lo[0] == 0.0


def test_load_metric_potential(potential_file):
    f = load_potential(potential_file("kind=metric K=2\n"))
    assert isinstance(f, MetricPotential)
    assert f.K == 2


def test_load_affine_potential(potential_file):
    base = potential_file("kind=cylinder depth=1 dim=1\n0 1 1\n1 1 1\n", "base.pot")
    path = potential_file(f"kind=affine base={base} p=2.0 alpha=0.25\n", "aff.pot")
    f = load_potential(path)
    assert isinstance(f, AffinePotential)
    v = f.eval_box(np.array([0]), np.array([1]))
    assert v.lo[0] == pytest.approx(2.0 * (1.0 - 0.25))
