import numpy as np
import pytest

from oracles import first_mismatch, phi_full_symbol
from sftlab import (
    InputError,
    MarkovMeasure,
    MarkovPoint,
    PeriodicPoint,
    Sft,
    check_bilipschitz,
    check_equivariance,
    check_involution,
    phi_encode,
    phi_full,
    phi_sft,
)
from sftlab.transfer import BlockCodebook, BlockLayout


def rand_point(seed, p=0.5):
    return MarkovPoint(MarkovMeasure.bernoulli([1 - p, p]), seed)


# -- the symbol-exchange map -------------------------------------------


def test_symbol_rule_matches_oracle():
    om, om2, x = rand_point(1), rand_point(2), rand_point(3)
    y = phi_full(om, om2, x)
    w, w2, xs, ys = (p.prefix(200) for p in (om, om2, x, y))
    for i in range(200):
        assert ys[i] == phi_full_symbol(int(w[i]), int(w2[i]), int(xs[i]))


def test_map_sends_omega_to_omega2():
    om, om2 = rand_point(4), rand_point(5)
    y = phi_full(om, om2, om)
    assert np.array_equal(y.prefix(300), om2.prefix(300))


def test_involution_direct():
    om, om2, x = rand_point(6), rand_point(7), rand_point(8)
    back = phi_full(om, om2, phi_full(om, om2, x))
    assert np.array_equal(back.prefix(256), x.prefix(256))


def test_involution_report():
    om, om2 = rand_point(9), rand_point(10)
    rep = check_involution(om, om2, [rand_point(s) for s in range(20, 26)], 128)
    assert rep.ok and rep.first_bad is None
    assert rep.mismatch_sets_equal
    assert rep.num_samples == 6 and rep.depth == 128


def test_mismatch_set_identity():
    om, om2, x = rand_point(11), rand_point(12), rand_point(13)
    y = phi_full(om, om2, x)
    w, w2, xs, ys = (p.prefix(400) for p in (om, om2, x, y))
    assert np.array_equal(xs != w, ys != w2)


def test_full_map_distance_is_preserved():
    # the exchange moves the orbit but not the mismatch positions, so
    # distances to the respective references agree exactly
    om, om2 = rand_point(14), rand_point(15)
    for seed in range(30, 36):
        x = rand_point(seed)
        y = phi_full(om, om2, x)
        a = first_mismatch(x.prefix(256), om.prefix(256))
        b = first_mismatch(y.prefix(256), om2.prefix(256))
        assert a == b


# -- blockwise maps on a proper sft ------------------------------------


def test_sft_map_output_admissible(golden):
    om = PeriodicPoint([], [0], 2)
    om2 = PeriodicPoint([], [0, 1], 2)
    for seed in range(6):
        x = MarkovPoint(MarkovMeasure.parry(golden), seed)
        y = phi_sft(golden, om, om2, x, 4)
        assert golden.is_admissible(y.prefix(200))


def test_sft_map_sends_omega_to_omega2(golden):
    # when every block of x matches omega, blocks and gaps alike copy
    # omega2, so the image is omega2 itself
    om = PeriodicPoint([], [0], 2)
    om2 = MarkovPoint(MarkovMeasure.parry(golden), 40)
    y = phi_sft(golden, om, om2, om, 5)
    assert np.array_equal(y.prefix(60), om2.prefix(60))


def test_equivariance_report(golden, full2):
    om, om2 = rand_point(16), rand_point(17)
    x = rand_point(18)
    rep = check_equivariance(full2, om, om2, x, 3, 48)
    assert rep.ok and rep.first_bad is None
    g_om = PeriodicPoint([], [0], 2)
    g_om2 = PeriodicPoint([], [0, 0, 1], 2)
    g_x = MarkovPoint(MarkovMeasure.parry(golden), 19)
    rep2 = check_equivariance(golden, g_om, g_om2, g_x, 4, 40)
    assert rep2.ok


@pytest.mark.parametrize("M", [2, 4, 8])
def test_bilipschitz_sft_map(golden, M):
    rep = check_bilipschitz(golden, "sft", M, num_samples=60, depth=256, seed=M)
    assert rep.ok and rep.violations == 0
    assert rep.checked > 0
    assert rep.r == 1


@pytest.mark.parametrize("M", [3, 6])
def test_bilipschitz_encode_map(golden, M):
    rep = check_bilipschitz(golden, "encode", M, num_samples=60, depth=256, seed=M)
    assert rep.ok and rep.violations == 0
    assert rep.kind == "encode"


def test_bilipschitz_rejects_unknown_kind(golden):
    with pytest.raises(InputError):
        check_bilipschitz(golden, "affine", 4)


# -- layouts and codebooks ---------------------------------------------


def test_layout_tiles_the_line():
    lay = BlockLayout(6, 1)
    assert list(lay.I0(0)) == list(range(6))
    assert list(lay.I1(2)) == list(range(14, 20))
    assert list(lay.I2(2)) == [20]
    for k in range(5):
        assert lay.I1(k).stop == lay.I2(k).start
        assert lay.I2(k).stop == lay.I1(k + 1).start


def test_layout_validation():
    with pytest.raises(InputError):
        BlockLayout(0, 1)
    with pytest.raises(InputError):
        BlockLayout(4, -1)


def test_codebook_enumerates_admissible_words(golden):
    book = BlockCodebook.build(golden, 6)
    assert book.L == golden.count_words(6) == 21
    for i in range(book.L):
        assert book.lookup(book.words[i]) == i
    with pytest.raises(InputError):
        book.lookup([1, 1, 0, 0, 0, 0])


# -- encodings ---------------------------------------------------------


def test_encode_outputs_are_admissible_and_distinct(golden):
    om = PeriodicPoint([], [0], 2)
    book = BlockCodebook.build(golden, 6)
    seen = set()
    for sym in range(book.L):
        z = PeriodicPoint([], [sym], book.L)
        y = phi_encode(golden, om, z, 6)
        pre = tuple(int(s) for s in y.prefix(7))
        assert golden.is_admissible(pre)
        seen.add(pre)
    assert len(seen) == book.L


def test_encode_blocks_follow_codebook(golden):
    book = BlockCodebook.build(golden, 3)
    om = PeriodicPoint([], [0], 2)
    z = PeriodicPoint([], [2, 0, 1], book.L)
    y = phi_encode(golden, om, z, 3)
    lay = BlockLayout(3, 1)
    yp = y.prefix(24)
    zsyms = [2, 0, 1, 2, 0, 1]
    for k, sym in enumerate(zsyms):
        got = yp[lay.I1(k).start : lay.I1(k).stop]
        assert np.array_equal(got, book.words[sym])
