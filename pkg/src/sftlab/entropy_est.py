"""Finite-depth entropy estimation on cylinder-describable sets.

Everything here is an estimate at explicit depths: counts of accepted
words and their log-slopes, never a claimed limit.  The same fixed-depth
counts serve both the covering (Bowen) reading and the disjoint-family
(packing) reading; at equal depth the two slopes coincide, which is the
finite shadow of the covering bound sitting below the packing bound.

Oracles answer "does this cylinder meet the target set, as far as
finitely verifiable" and must be monotone: rejecting a word rejects all
its extensions.  Measures enter as cylinder-mass functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BudgetError, InputError, PreconditionError
from .measures import MarkovMeasure
from .points import Point
from .potentials import Potential, word_sum_bounds, _metric_word_sum_bounds
from .sft import DEFAULT_WORD_BUDGET, Sft


class CylinderSetOracle:
    """Membership test on words, monotone under extension.

    provenance is 'exact' when acceptance is decided, or
    'outer-approximation' when acceptance may include false positives
    (counts then upper-bound the true cover counts).
    """

    def __init__(
        self,
        fn: Callable,
        provenance: str = "outer-approximation",
        batch: Optional[Callable] = None,
    ):
        if provenance not in ("exact", "outer-approximation"):
            raise InputError("provenance must be exact or outer-approximation")
        self.fn = fn
        self.provenance = provenance
        self.batch = batch

    def __call__(self, word) -> bool:
        return bool(self.fn(tuple(int(s) for s in word)))

    def accept_mask(self, words: np.ndarray) -> np.ndarray:
        if self.batch is not None:
            return np.asarray(self.batch(words), dtype=bool)
        return np.array([self(w) for w in words], dtype=bool)

    @classmethod
    def accept_all(cls):
        return cls(
            lambda w: True,
            provenance="exact",
            batch=lambda ws: np.ones(ws.shape[0], dtype=bool),
        )

    @classmethod
    def point_prefixes(cls, x: Point):
        """Accepts exactly the prefixes of one stream."""

        def fn(w):
            pref = x.bounded_prefix(len(w))
            return len(w) <= pref.size and tuple(pref[: len(w)]) == w

        def batch(ws):
            pref = x.bounded_prefix(ws.shape[1])
            if pref.size < ws.shape[1]:
                return np.zeros(ws.shape[0], dtype=bool)
            return np.all(ws == pref[np.newaxis, :], axis=1)

        return cls(fn, provenance="exact", batch=batch)

    @classmethod
    def first_symbol(cls, sym: int):
        return cls(
            lambda w: len(w) == 0 or w[0] == sym,
            provenance="exact",
            batch=lambda ws: ws[:, 0] == sym,
        )


def oracle_monotonicity_sample(
    oracle: CylinderSetOracle,
    sft: Sft,
    depth: int,
    num: int = 64,
    seed: int = 0,
) -> int:
    """Violation count: rejected words whose one-symbol extensions get
    accepted.  Zero for any honest oracle."""
    words = sft.word_array(depth)
    mask = oracle.accept_mask(words)
    rejected = words[~mask]
    if rejected.shape[0] == 0:
        return 0
    rng = np.random.default_rng(seed)
    pick = rng.integers(0, rejected.shape[0], size=min(num, rejected.shape[0]))
    bad = 0
    for w in rejected[pick]:
        last = int(w[-1])
        for s in range(sft.K):
            if sft.matrix[last, s] and oracle(tuple(w) + (s,)):
                bad += 1
    return bad


class CylinderMeasure:
    """mass(word) for admissible words; unit mass on the empty word."""

    def __init__(self, mass_fn: Callable, label: str = ""):
        self._mass = mass_fn
        self.label = label

    def mass(self, word) -> float:
        return float(self._mass(tuple(int(s) for s in word)))

    @classmethod
    def from_markov(cls, m: MarkovMeasure):
        return cls(lambda w: m.cylinder_mass(w), label="markov")

    @classmethod
    def counting(cls, sft: Sft, oracle: CylinderSetOracle, budget: int = DEFAULT_WORD_BUDGET):
        """Per-depth normalized counting measure on accepted words.

        Not additive across depths in general; useful as the crude
        companion of word_count_slope.
        """
        counts: dict = {0: 1}

        def mass(w):
            n = len(w)
            if n == 0:
                return 1.0
            if not sft.is_admissible(w):
                return 0.0
            if n not in counts:
                words = sft.word_array(n, budget=budget)
                counts[n] = max(int(oracle.accept_mask(words).sum()), 1)
            return (1.0 / counts[n]) if oracle(w) else 0.0

        return cls(mass, label="counting")

    def additivity_defect(self, sft: Sft, depth: int) -> float:
        """max over words at the given depth of |mass(W) - sum of children|."""
        worst = 0.0
        for w in sft.enumerate_words(depth):
            kids = sum(
                self.mass(w + (s,)) for s in range(sft.K) if sft.matrix[w[-1], s]
            )
            worst = max(worst, abs(self.mass(w) - kids))
        return worst


@dataclass
class SlopeTable:
    depths: list
    counts: list
    provenance: str

    @property
    def slopes(self) -> list:
        return [
            (math.log(c) / n) if c > 0 else -math.inf
            for n, c in zip(self.depths, self.counts)
        ]

    @property
    def packing_slopes(self) -> list:
        # fixed-depth accepted cylinders are pairwise disjoint, so the same
        # counts feed the packing-side lower object; identical numbers here
        return self.slopes


def word_count_slope(
    sft: Sft,
    oracle: CylinderSetOracle,
    depths: Sequence[int],
    budget: int = DEFAULT_WORD_BUDGET,
) -> SlopeTable:
    depths = list(depths)
    if any(d < 1 for d in depths):
        raise InputError("depths must be positive")
    counts = []
    for d in depths:
        if sft.count_words(d) > budget:
            raise BudgetError(f"depth {d} exceeds the word budget")
        words = sft.word_array(d, budget=budget)
        counts.append(int(oracle.accept_mask(words).sum()))
    return SlopeTable(depths, counts, oracle.provenance)


@dataclass
class FrostmanResult:
    s: float
    depths: list
    constants: list
    diverging: bool

    @property
    def C(self) -> float:
        return max(self.constants)

    @property
    def growth_rate(self) -> float:
        """Late-ladder slope of log C in nats per symbol."""
        return _late_slope(self.depths, self.constants)


def _late_slope(ns: list, cs: list) -> float:
    if len(ns) < 2:
        return 0.0
    half = len(ns) // 2
    n0, n1 = ns[half - 1] if half > 0 else ns[0], ns[-1]
    c0 = max(cs[half - 1] if half > 0 else cs[0], 1e-300)
    c1 = max(cs[-1], 1e-300)
    if n1 == n0:
        return 0.0
    return (math.log(c1) - math.log(c0)) / (n1 - n0)


def frostman_check(
    mu: CylinderMeasure,
    oracle: CylinderSetOracle,
    s: float,
    max_depth: int,
    sft: Sft,
    budget: int = DEFAULT_WORD_BUDGET,
) -> FrostmanResult:
    """C = max over accepted words of mass(W) e^{s |W|}, per depth.

    A C that stays bounded as depth grows is evidence that the set
    carries a measure with decay e^{-s n}, hence entropy at least s;
    reported as evidence, never as the theorem.
    """
    if max_depth < 1:
        raise InputError("need max_depth >= 1")
    depths = list(range(1, max_depth + 1))
    consts = []
    for d in depths:
        if sft.count_words(d) > budget:
            raise BudgetError(f"depth {d} exceeds the word budget")
        best = 0.0
        for w in sft.enumerate_words(d):
            m = mu.mass(w)
            if not oracle(w):
                if m > 1e-12:
                    raise PreconditionError(
                        f"measure puts mass {m:.3g} on rejected word {w}"
                    )
                continue
            best = max(best, m * math.exp(s * d))
        consts.append(best)
    diverging = _late_slope(depths, consts) > 0.01
    return FrostmanResult(s=s, depths=depths, constants=consts, diverging=diverging)


@dataclass
class DistributionCheck:
    s: float
    ladder: list
    constants: list  # per rung: max over points of mass * e^{s n}
    diverging: bool

    @property
    def C(self) -> float:
        return max(self.constants)


def distribution_principle_check(
    mu: CylinderMeasure,
    points: Sequence[Point],
    s: float,
    ladder: Sequence[int],
) -> DistributionCheck:
    """Smallest C with mass(x|_n) <= C e^{-s n} along the ladder, over the
    sampled points.  A drifting C (positive late slope of log C) flags
    that s sits above what the measure supports."""
    ns = list(ladder)
    if ns != sorted(ns):
        raise InputError("ladder must be increasing")
    if not points:
        raise InputError("need at least one sampled point")
    consts = []
    for n in ns:
        worst = 0.0
        for x in points:
            pref = x.prefix(n)
            worst = max(worst, mu.mass(pref) * math.exp(s * n))
        consts.append(worst)
    return DistributionCheck(
        s=s, ladder=ns, constants=consts, diverging=_late_slope(ns, consts) > 0.01
    )


@dataclass
class GCountTable:
    depths: list
    counts: list
    delta: float

    @property
    def slopes(self) -> list:
        return [
            (math.log(c) / n) if c > 0 else -math.inf
            for n, c in zip(self.depths, self.counts)
        ]


def g_omega_counts(
    sft: Sft,
    f: Potential,
    omega: Optional[Point],
    targets,
    delta: float,
    depths: Sequence[int],
    budget: int = DEFAULT_WORD_BUDGET,
) -> GCountTable:
    """Count words whose interval Birkhoff average meets the delta-ball
    around the target set (outer: any intersection counts).

    targets: one vector in R^d or a sequence of them; distance to the set
    is the min over targets.
    """
    if delta <= 0:
        raise InputError("delta must be positive")
    tg = np.atleast_2d(np.asarray(targets, dtype=float))
    if tg.shape[1] != f.dim:
        if tg.shape == (1, 1) or (f.dim == 1 and tg.ndim == 2 and tg.shape[0] >= 1):
            tg = tg.reshape(-1, f.dim)
        else:
            raise InputError("target dimension does not match the potential")
    counts = []
    for n in depths:
        if sft.count_words(n) > budget:
            raise BudgetError(f"depth {n} exceeds the word budget")
        words = sft.word_array(n, budget=budget)
        lo, hi = word_sum_bounds(f, omega, words)
        lo = lo / n
        hi = hi / n
        qualifies = np.zeros(words.shape[0], dtype=bool)
        for c in tg:
            gap = np.maximum(np.maximum(lo - c, c - hi), 0.0)
            dist_lo = np.sqrt((gap**2).sum(axis=1))
            qualifies |= dist_lo <= delta
        counts.append(int(qualifies.sum()))
    return GCountTable(list(depths), counts, delta)


@dataclass
class MlScanTable:
    deltas: list
    depths: list
    counts: np.ndarray  # shape (len(deltas), len(depths))

    @property
    def slopes(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(
                self.counts > 0,
                np.log(np.maximum(self.counts, 1)) / np.asarray(self.depths, dtype=float),
                -np.inf,
            )


def ml_set_slope_scan(
    sft: Sft,
    omega: Point,
    delta_list: Sequence[float],
    depths: Sequence[int],
    budget: int = DEFAULT_WORD_BUDGET,
) -> MlScanTable:
    """Counts of words whose average metric distance to omega stays
    below delta (outer reading: the lower end of the interval average).

    delta = 0 keeps only omega's own prefix; delta >= 1 keeps everything,
    so the slope column recovers the plain word-count slope.
    """
    deltas = list(delta_list)
    depths = list(depths)
    if any(d < 0 for d in deltas):
        raise InputError("deltas must be nonnegative")
    out = np.zeros((len(deltas), len(depths)), dtype=np.int64)
    for j, n in enumerate(depths):
        if sft.count_words(n) > budget:
            raise BudgetError(f"depth {n} exceeds the word budget")
        wa = omega.bounded_prefix(n)
        if wa.size < n:
            raise InputError(f"omega must supply {n} symbols")
        words = sft.word_array(n, budget=budget)
        s_lo, _ = _metric_word_sum_bounds(sft.K, wa, words)
        avg = s_lo[:, 0] / n
        for i, dlt in enumerate(deltas):
            out[i, j] = int((avg <= dlt + 1e-15).sum())
    return MlScanTable(deltas, depths, out)
