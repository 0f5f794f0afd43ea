import math

import numpy as np
import pytest

from sftlab import InputError, MarkovMeasure, Sft, StructuralError
from sftlab.measures import quasi_bernoulli_constant

from oracles import enum_words, fib
from conftest import GOLDEN, SWAP

PHI = (1 + math.sqrt(5)) / 2


# -- admissibility and counting ----------------------------------------


def test_admissible_examples(golden, full2):
    assert golden.is_admissible([0, 1, 0, 1])
    assert not golden.is_admissible([0, 1, 1])
    assert full2.is_admissible([1, 1, 1, 1])
    assert golden.is_admissible([])
    assert golden.is_admissible([1])


def test_admissible_rejects_out_of_range(golden):
    with pytest.raises(InputError):
        golden.is_admissible([0, 2])


def test_count_words_examples(golden, full3):
    assert golden.count_words(6) == 21
    assert golden.count_words(1) == 2
    assert full3.count_words(4) == 81


@pytest.mark.parametrize("n", range(0, 11))
def test_counts_match_enumeration(golden, n):
    words = enum_words(GOLDEN, n)
    assert golden.count_words(n) == len(words)
    assert list(golden.enumerate_words(n)) == words


def test_enumeration_is_lexicographic(golden):
    ws = list(golden.enumerate_words(5))
    assert ws == sorted(ws)


def test_golden_counts_are_fibonacci(golden):
    for n in range(1, 21):
        assert golden.count_words(n) == fib(n + 2)


def test_count_submultiplicative(golden, swap2):
    for sft in (golden, swap2):
        for a in range(1, 13):
            for b in range(1, 13 - a):
                assert (
                    sft.count_words(a + b)
                    <= sft.count_words(a) * sft.count_words(b)
                )


def test_slope_decreasing_and_above_entropy(golden):
    h = golden.topological_entropy()
    slopes = [math.log(golden.count_words(n)) / n for n in (5, 10, 20, 40)]
    assert all(s1 >= s2 - 1e-12 for s1, s2 in zip(slopes, slopes[1:]))
    assert all(s >= h - 1e-9 for s in slopes)


# -- classification ----------------------------------------------------


def test_classify_golden(golden):
    c = golden.classify()
    assert c.irreducible and c.aperiodic
    assert c.period == 1
    assert c.primitivity_r == 1
    assert golden.connecting_words()[(1, 1)] == (0,)


def test_classify_full_shift(full2):
    c = full2.classify()
    assert c.irreducible and c.aperiodic
    assert (c.period, c.primitivity_r) == (1, 0)


def test_classify_swap(swap2):
    c = swap2.classify()
    assert c.irreducible
    assert not c.aperiodic
    assert c.period == 2
    assert c.primitivity_r is None


def test_connecting_words_admissible(golden):
    cw = golden.connecting_words()
    for (a, b), w in cw.items():
        assert golden.is_admissible([a, *w, b])
        assert len(w) == golden.classify().primitivity_r


def test_connecting_words_need_aperiodicity(swap2):
    with pytest.raises(StructuralError):
        swap2.connecting_words()


def test_spectral_decomposition_swap(swap2):
    d = swap2.spectral_decomposition()
    assert d.period == 2
    assert d.classes == [[0], [1]]
    for sub, blocks in d.induced:
        assert sub.K == len(blocks) == 1


def test_spectral_decomposition_aperiodic(golden, full2):
    for sft in (golden, full2):
        d = sft.spectral_decomposition()
        assert d.period == 1
        assert d.classes == [[0, 1]]


def test_spectral_decomposition_classes_advance(swap2):
    d = swap2.spectral_decomposition()
    A = swap2.matrix
    for i, cls in enumerate(d.classes):
        nxt = set(d.classes[(i + 1) % d.period])
        for a in cls:
            targets = {b for b in range(swap2.K) if A[a, b]}
            assert targets <= nxt


def test_reducible_decomposition_rejected():
    sft = Sft(np.array([[1, 1], [0, 1]]))
    with pytest.raises(StructuralError):
        sft.spectral_decomposition()


# -- entropy -----------------------------------------------------------


def test_entropy_values(golden, full2, swap2):
    assert abs(golden.topological_entropy() - math.log(PHI)) < 1e-12
    assert abs(full2.topological_entropy() - math.log(2)) < 1e-14
    assert abs(swap2.topological_entropy()) < 1e-12


def test_entropy_full_shifts():
    for K in range(2, 7):
        assert abs(Sft.full_shift(K).topological_entropy() - math.log(K)) < 1e-12


def test_log_count_words_matches_exact(golden):
    for n in (1, 7, 40, 200):
        assert abs(
            golden.log_count_words(n) - math.log(golden.count_words(n))
        ) < 1e-9


# -- Markov measures ---------------------------------------------------


def test_bernoulli_mass_and_entropy(bern_half):
    assert bern_half.cylinder_mass([0, 1, 1, 0]) == pytest.approx(1 / 16)
    assert bern_half.entropy_rate() == pytest.approx(math.log(2))


def test_parry_entropy_is_topological(golden):
    pm = MarkovMeasure.parry(golden)
    assert pm.entropy_rate() == pytest.approx(math.log(PHI), abs=1e-10)


def test_markov_mass_sums_to_one(golden):
    pm = MarkovMeasure.parry(golden)
    for n in range(1, 11):
        total = sum(pm.cylinder_mass(w) for w in golden.enumerate_words(n))
        assert total == pytest.approx(1.0, abs=1e-9)


def test_inadmissible_word_has_zero_mass(golden):
    pm = MarkovMeasure.parry(golden)
    assert pm.cylinder_mass([1, 1]) == 0.0


def test_markov_sampling_deterministic(golden):
    pm = MarkovMeasure.parry(golden)
    a = pm.sample_word(64, rng=123)
    b = pm.sample_word(64, rng=123)
    assert np.array_equal(a, b)
    assert golden.is_admissible(a)


def test_stationarity(golden):
    pm = MarkovMeasure.parry(golden)
    assert np.allclose(pm.pi @ pm.P, pm.pi, atol=1e-10)
    assert np.allclose(pm.P.sum(axis=1), 1.0, atol=1e-12)


def test_quasi_bernoulli_bernoulli_is_one(bern_half):
    assert quasi_bernoulli_constant(bern_half, 3) == pytest.approx(1.0)


def test_quasi_bernoulli_stabilizes_by_two(golden):
    pm = MarkovMeasure.parry(golden)
    assert quasi_bernoulli_constant(pm, 4) == pytest.approx(
        quasi_bernoulli_constant(pm, 2)
    )


def test_quasi_bernoulli_brute_force(golden):
    """c must dominate the concatenation defect over all small word pairs."""
    pm = MarkovMeasure.parry(golden)
    c = quasi_bernoulli_constant(pm, 3)
    for wa in golden.enumerate_words(3):
        for wb in golden.enumerate_words(3):
            m = pm.cylinder_mass(list(wa) + list(wb))
            prod = pm.cylinder_mass(wa) * pm.cylinder_mass(wb)
            if m > 0 and prod > 0:
                ratio = m / prod
                assert 1 / (c + 1e-12) <= ratio <= c + 1e-12


# -- construction edges ------------------------------------------------


def test_stranded_symbol_rejected():
    with pytest.raises(InputError):
        Sft(np.array([[1, 0], [1, 0]]))


def test_non_binary_matrix_rejected():
    with pytest.raises(InputError):
        Sft(np.array([[1, 2], [1, 1]]))


def test_matrix_file_roundtrip(matrix_file):
    path = matrix_file(GOLDEN)
    sft = Sft.from_file(path)
    assert sft.K == 2
    assert np.array_equal(sft.matrix, np.array(GOLDEN))
