import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import GOLDEN
from oracles import band_count, enum_words, fib
from sftlab import (
    AllWordsLibrary,
    BudgetError,
    FrequencyLibrary,
    InputError,
    MetricPotential,
    PeriodicPoint,
    Sft,
    StructuralError,
    assemble_moran,
    birkhoff_sum,
    build_alpha_chain,
    build_schedule,
    ml_witness,
    moran_entropy_report,
)

LOG2 = math.log(2)


# -- target chains -----------------------------------------------------


def test_chain_invariants_interval_target():
    chain = build_alpha_chain((0.2, 0.8), [0.1, 0.05, 0.025])
    v = chain.verify((0.2, 0.8))
    assert v == {"steps": True, "cover": True, "lambda_bijection": True}
    assert chain.J == [len(lv) for lv in chain.levels]
    assert chain.alphas.shape == (sum(chain.J), 1)
    assert len(chain.eps_flat) == sum(chain.J)


def test_chain_flat_index_is_one_based():
    chain = build_alpha_chain((0.3, 0.6), [0.1, 0.05])
    assert chain.flat_index(0, 0) == 1
    assert chain.flat_index(1, 0) == chain.J[0] + 1
    assert chain.flat_index(1, chain.J[1] - 1) == sum(chain.J)
    with pytest.raises(InputError):
        chain.flat_index(2, 0)


def test_chain_polyline_target():
    C = [[0.2, 0.2], [0.5, 0.8], [0.8, 0.2]]
    chain = build_alpha_chain(C, [0.2, 0.1])
    assert chain.dim == 2
    assert chain.verify(C)["cover"]


def test_chain_rejects_coarsening_ladder():
    with pytest.raises(InputError):
        build_alpha_chain((0.2, 0.8), [0.05, 0.1])


# -- schedules ---------------------------------------------------------


def test_schedule_explicit_ratios():
    sch = build_schedule(1024, [0.5, 0.25, 0.125, 0.0625], ratios=[2, 20, 2.5])
    assert sch.T == [1024, 2048, 40960, 102400]
    assert sch.breakpoints[0] == 0
    assert sch.breakpoints[-1] == 102400
    for t in sch.T:
        assert t in sch.breakpoints
    assert sch.breakpoints == sorted(set(sch.breakpoints))


def test_schedule_segments_partition():
    sch = build_schedule(64, [0.5, 0.25, 0.125], ratios=[4, 4])
    segs = sch.segments()
    assert segs[0] == (0, 64)
    for (a, b), (c, d) in zip(segs, segs[1:]):
        assert b == c and a < b
    assert segs[-1][1] == sch.T[-1]


def test_schedule_stage_lookup():
    sch = build_schedule(64, [0.5, 0.25], ratios=[4])
    assert sch.stage_of(10) == 1
    assert sch.stage_of(64) == 2
    assert sch.stage_of(255) == 2
    assert sch.stages == 2


def test_schedule_default_policy_respects_cap():
    sch = build_schedule(1024, [0.5, 0.25, 0.125], cap=10**5)
    assert sch.T[-1] <= 2 * 10**5
    assert all(a < b for a, b in zip(sch.T, sch.T[1:]))


def test_schedule_validation():
    with pytest.raises(InputError):
        build_schedule(8, [0.5])
    with pytest.raises(InputError):
        build_schedule(64, [0.5, 0.25], ratios=[0.9])
    with pytest.raises(InputError):
        build_schedule(64, [0.5] * 9)


# -- block libraries ---------------------------------------------------


def test_band_endpoints():
    lib = FrequencyLibrary(Sft.golden_mean(), 1, 0.3, 0.1)
    assert lib.band(20) == (4, 8)
    assert lib.band(31) == (7, 12)


@pytest.mark.parametrize("length", [5, 12, 20])
def test_frequency_count_full_shift(full2, length):
    lib = FrequencyLibrary(full2, 1, 0.5, 0.1)
    assert lib.count(length) == band_count(length, 0.4, 0.6)


@pytest.mark.parametrize("length", [6, 10, 14])
def test_frequency_count_golden_enumeration(golden, length):
    lib = FrequencyLibrary(golden, 1, 0.3, 0.15)
    kmin, kmax = lib.band(length)
    want = sum(1 for w in enum_words(GOLDEN, length) if kmin <= sum(w) <= kmax)
    assert lib.count(length) == want


def test_frequency_count_with_first_partitions(golden):
    lib = FrequencyLibrary(golden, 1, 0.3, 0.1)
    for length in (8, 13):
        total = sum(lib.count_with_first(s, length) for s in range(2))
        assert total == lib.count(length)


def test_frequency_log_matches_exact(full2, golden):
    for lib, length in [
        (FrequencyLibrary(full2, 1, 0.5, 0.1), 60),
        (FrequencyLibrary(full2, 1, 0.3, 0.05), 200),
        (FrequencyLibrary(golden, 1, 0.3, 0.1), 120),
    ]:
        assert lib.log_count(length) == pytest.approx(
            math.log(lib.count(length)), abs=1e-10
        )


def test_frequency_log_count_scales(full2):
    lib = FrequencyLibrary(full2, 1, 0.5, 0.1)
    n = 500_000
    assert lib.log_count(n) / n == pytest.approx(LOG2, abs=1e-6)


def test_frequency_dp_cap_on_proper_shifts(golden):
    lib = FrequencyLibrary(golden, 1, 0.3, 0.1)
    with pytest.raises(BudgetError):
        lib.count(600)


def test_frequency_empty_band(golden):
    lib = FrequencyLibrary(golden, 1, 0.9, 0.05)
    assert not lib.nonempty(20)
    with pytest.raises(StructuralError):
        lib.sample(20, np.random.default_rng(0))


def test_frequency_sample_lands_in_band(full2, golden):
    for sft in (full2, golden):
        lib = FrequencyLibrary(sft, 1, 0.4, 0.1)
        for seed in range(4):
            w = lib.sample(50, np.random.default_rng(seed))
            kmin, kmax = lib.band(50)
            assert kmin <= int(w.sum()) <= kmax
            assert sft.is_admissible(w)


def test_frequency_enumerate_and_accepts(golden):
    lib = FrequencyLibrary(golden, 1, 0.3, 0.15)
    words = list(lib.enumerate(9))
    assert len(words) == lib.count(9)
    for w in words:
        assert lib.accepts(w)
    assert not lib.accepts([1, 1, 0, 0, 0, 0, 0, 0, 0])
    assert not lib.accepts([0] * 9)


def test_all_words_library(golden):
    lib = AllWordsLibrary(golden)
    assert lib.count(10) == golden.count_words(10) == fib(12)
    assert lib.log_count(1000) / 1000 == pytest.approx(
        golden.topological_entropy(), abs=1e-3
    )
    assert lib.accepts([0, 1, 0, 0, 1])
    assert not lib.accepts([0, 1, 1])


# -- assembled sets ----------------------------------------------------


def small_full_build(full2):
    sch = build_schedule(64, [0.5, 0.25], ratios=[4])
    libs = [FrequencyLibrary(full2, 1, 0.5, 0.1), AllWordsLibrary(full2)]
    return sch, assemble_moran(full2, sch, libs)


def test_counts_multiply_across_segments(full2):
    sch, m = small_full_build(full2)
    lib1 = FrequencyLibrary(full2, 1, 0.5, 0.1)
    # full shift: no gaps, segment counts multiply directly
    assert m.count_at(64) == lib1.count(64)
    assert m.count_at(128) == lib1.count(64) * 2**64
    assert m.count_at(256) == lib1.count(64) * 2**192


def test_counts_with_gap_layout(golden):
    sch = build_schedule(32, [0.5, 0.25], ratios=[8])
    lib2 = FrequencyLibrary(golden, 1, 0.3, 0.1)
    m = assemble_moran(golden, sch, [AllWordsLibrary(golden), lib2])
    # first segment carries no gap; every later segment gives up one
    # symbol to the connecting word
    assert m.count_at(32) == golden.count_words(32)
    assert m.count_at(64) == m.count_at(32) * lib2.count(31)
    assert m.count_at(128) == m.count_at(64) * lib2.count(63)


def test_count_at_non_breakpoint(full2):
    _, m = small_full_build(full2)
    with pytest.raises(InputError):
        m.count_at(65)


def test_exact_counts_stop_past_the_cap(golden):
    sch = build_schedule(300, [0.5, 0.25], ratios=[4])
    m = assemble_moran(
        golden, sch, [AllWordsLibrary(golden), AllWordsLibrary(golden)]
    )
    with pytest.raises(BudgetError):
        m.count_at(300)
    assert m.log_count_at(300) == pytest.approx(
        300 * golden.topological_entropy(), abs=2.0
    )


def test_sampled_prefix_hits_balanced_mass(full2):
    sch, m = small_full_build(full2)
    x = m.sample(seed=2)
    for t in (64, 128):
        pre = x.prefix(t)
        assert m.log_mass(pre) == pytest.approx(-m.log_count_at(t), abs=1e-9)
        assert m.mass_exact(pre) == Fraction(1, m.count_at(t))


def test_mass_of_rejected_word_is_zero(full2):
    _, m = small_full_build(full2)
    assert m.mass_exact([0] * 64) == 0
    assert m.log_mass([0] * 64) == -math.inf


def test_masses_sum_to_one_across_library(full2):
    sch = build_schedule(16, [0.5, 0.25], ratios=[4])
    lib = FrequencyLibrary(full2, 1, 0.5, 0.25)
    m = assemble_moran(full2, sch, [lib, AllWordsLibrary(full2)])
    total = sum(m.mass_exact(w) for w in lib.enumerate(16))
    assert total == 1


def test_oracle_wraps_membership(full2):
    sch, m = small_full_build(full2)
    orc = m.oracle()
    x = m.sample(seed=7)
    assert orc(x.prefix(64)) and orc(x.prefix(100))
    assert not orc([0] * 64)
    assert orc.provenance == "exact"


def test_sampling_is_seed_stable(full2):
    _, m = small_full_build(full2)
    a = m.sample(seed=11).prefix(200)
    b = m.sample(seed=11).prefix(200)
    c = m.sample(seed=12).prefix(200)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_library_count_mismatch_rejected(full2):
    sch = build_schedule(64, [0.5, 0.25], ratios=[4])
    with pytest.raises(InputError):
        assemble_moran(full2, sch, [AllWordsLibrary(full2)])


# -- entropy reports ---------------------------------------------------


def test_entropy_report_slopes(full2):
    sch, m = small_full_build(full2)
    rep = moran_entropy_report(m, LOG2 * 0.9)
    assert rep.breakpoints == sch.breakpoints[1:]
    assert len(rep.slopes) == len(rep.breakpoints)
    assert rep.final_slope == m.slope_at(sch.breakpoints[-1])
    assert rep.design_target == pytest.approx(LOG2 * 0.9)


def test_distribution_check_two_sided(full2):
    # the sampled-measure mass principle accepts a slope slightly below
    # the real one and rejects a slope slightly above it
    sch = build_schedule(64, [0.5, 0.25, 0.125], ratios=[8, 8])
    lib = FrequencyLibrary(full2, 1, 0.5, 0.05)
    m = assemble_moran(full2, sch, [lib, lib, lib])
    h = m.slope_at(sch.breakpoints[-1])
    below = moran_entropy_report(m, h, margin=0.05)
    above = moran_entropy_report(m, h, margin=-0.05)
    assert not below.dist_check.diverging
    assert above.dist_check.diverging
    assert below.dist_check.s == pytest.approx(h - 0.05)
    assert above.dist_check.s == pytest.approx(h + 0.05)


# -- witnesses ---------------------------------------------------------


def test_witness_deviation_count(full2):
    sch = build_schedule(64, [0.5, 0.25], ratios=[4])
    w = ml_witness(PeriodicPoint([], [0], 2), full2, sch, deviate_stages=[2])
    # deviate stage spans [64, 256): one flip per length-2 sub-block
    assert w.deviation_count == (256 - 64) // 2
    assert w.stage_ends == [64, 256]
    dev = w.point.prefix(256) != np.zeros(256, dtype=np.int64)
    assert int(dev[:64].sum()) == 0
    assert int(dev[64:].sum()) == w.deviation_count


def test_witness_prediction_function(full2):
    sch = build_schedule(64, [0.5, 0.25], ratios=[4])
    w = ml_witness(PeriodicPoint([], [0], 2), full2, sch, deviate_stages=[2])
    f = MetricPotential(2)
    zeros = PeriodicPoint([], [0], 2)
    for n in (64, 100, 256):
        box = birkhoff_sum(f, zeros, w.point, 0, n)
        measured = 0.5 * (box.lo[0] + box.hi[0]) / n
        assert w.predicted_average(n) == pytest.approx(measured, rel=0.02, abs=1e-3)
