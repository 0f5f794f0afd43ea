"""Shifts of finite type over a finite alphabet {0..K-1}.

A shift is given by a 0/1 transition matrix A: the word w is admissible
when A[w[i], w[i+1]] == 1 for every i.  This module covers word counting
and enumeration, irreducibility / aperiodicity classification with
connecting words, the cyclic-class decomposition, and topological entropy
as the log of the Perron root.

All objects here are immutable after construction and safe to share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import gcd
from typing import Iterator, Optional

import numpy as np

from .errors import BudgetError, InputError, StructuralError

#: default cap on the number of words any enumeration is allowed to touch
DEFAULT_WORD_BUDGET = 1 << 26

#: exact big-integer counting is offered up to this length
EXACT_COUNT_MAX_N = 256


def _as_symbols(word) -> np.ndarray:
    a = np.asarray(word, dtype=np.int64)
    if a.ndim != 1:
        raise InputError(f"word must be one-dimensional, got shape {a.shape}")
    return a


def log_big(n: int) -> float:
    """log of a positive Python int, safe for values far beyond float range."""
    if n <= 0:
        raise ValueError("log_big needs a positive integer")
    b = n.bit_length()
    if b <= 900:
        return math.log(n)
    shift = b - 900
    return math.log(n >> shift) + shift * math.log(2.0)


@dataclass(frozen=True)
class SftClassification:
    irreducible: bool
    aperiodic: bool
    period: Optional[int]
    primitivity_r: Optional[int]
    #: (a, b) -> lexicographically smallest W with len(W) == primitivity_r
    #: and a + W + b admissible; present iff irreducible and aperiodic
    connecting_words: Optional[dict] = field(default=None, repr=False)


@dataclass(frozen=True)
class SpectralDecomposition:
    period: int
    #: classes[i] = sorted symbols at BFS distance i mod period from symbol 0
    classes: list
    #: induced[i] = (Sft on length-p block alphabet, tuple of blocks); the
    #: block system is conjugate to the p-th power map on class i
    induced: list


class Sft:
    """Shift of finite type defined by a square 0/1 transition matrix."""

    def __init__(self, matrix):
        A = np.asarray(matrix, dtype=np.int64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InputError(f"transition matrix must be square, got {A.shape}")
        if not np.isin(A, (0, 1)).all():
            raise InputError("transition matrix entries must be 0 or 1")
        K = A.shape[0]
        if K < 2:
            raise InputError("alphabet needs at least 2 symbols")
        if K > 127:
            raise InputError("alphabets beyond 127 symbols are not supported")
        if (A.sum(axis=1) == 0).any() or (A.sum(axis=0) == 0).any():
            bad = int(np.argmax((A.sum(axis=1) == 0) | (A.sum(axis=0) == 0)))
            raise InputError(f"symbol {bad} is stranded (empty row or column)")
        self._A = A
        self._A.setflags(write=False)
        self._K = K
        self._classification: Optional[SftClassification] = None
        self._entropy: Optional[float] = None

    # -- constructors ---------------------------------------------------

    @classmethod
    def full_shift(cls, K: int) -> "Sft":
        return cls(np.ones((K, K), dtype=np.int64))

    @classmethod
    def _block_system(cls, B) -> "Sft":
        # induced class systems may collapse to a single block, which the
        # public constructor rejects; keep only the stranded-block check
        s = object.__new__(cls)
        A = np.asarray(B, dtype=np.int64)
        if (A.sum(axis=1) == 0).any() or (A.sum(axis=0) == 0).any():
            raise StructuralError("induced block system has a stranded block")
        A.setflags(write=False)
        s._A = A
        s._K = A.shape[0]
        s._classification = None
        s._entropy = None
        return s

    @classmethod
    def golden_mean(cls) -> "Sft":
        return cls([[1, 1], [1, 0]])

    @classmethod
    def from_file(cls, path) -> "Sft":
        """Read 'K' on line 1, then K rows of K space-separated 0/1 entries."""
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        if not lines:
            raise InputError(f"{path}: empty matrix file")
        try:
            K = int(lines[0])
        except ValueError:
            raise InputError(f"{path}: first line must be the alphabet size") from None
        if len(lines) != K + 1:
            raise InputError(f"{path}: expected {K} matrix rows, found {len(lines) - 1}")
        try:
            rows = [[int(tok) for tok in ln.split()] for ln in lines[1:]]
        except ValueError:
            raise InputError(f"{path}: matrix entries must be integers") from None
        if any(len(r) != K for r in rows):
            raise InputError(f"{path}: every row must have {K} entries")
        return cls(rows)

    # -- basics ---------------------------------------------------------

    @property
    def K(self) -> int:
        return self._K

    @property
    def matrix(self) -> np.ndarray:
        return self._A

    def __eq__(self, other):
        return isinstance(other, Sft) and np.array_equal(self._A, other._A)

    def __hash__(self):
        return hash((self._K, self._A.tobytes()))

    def __repr__(self):
        return f"Sft(K={self._K})"

    def is_full_shift(self) -> bool:
        return bool((self._A == 1).all())

    def successors(self, s: int) -> np.ndarray:
        return np.flatnonzero(self._A[s])

    def is_admissible(self, word) -> bool:
        w = _as_symbols(word)
        if w.size and (w.min() < 0 or w.max() >= self._K):
            raise InputError(f"symbol out of range for alphabet of size {self._K}")
        if w.size < 2:
            return True
        return bool(self._A[w[:-1], w[1:]].all())

    # -- counting and enumeration --------------------------------------

    def count_words(self, n: int) -> int:
        """Exact number of admissible words of length n (big integers).

        Uses repeated vector-matrix products over Python ints, so the
        result is exact for any n up to EXACT_COUNT_MAX_N.
        """
        if n < 0:
            raise InputError("word length must be >= 0")
        if n > EXACT_COUNT_MAX_N:
            raise BudgetError(
                f"exact counts stop at n={EXACT_COUNT_MAX_N}; use log_count_words"
            )
        if n == 0:
            return 1
        A = self._A.tolist()
        v = [1] * self._K
        for _ in range(n - 1):
            v = [sum(A[i][j] * v[j] for j in range(self._K)) for i in range(self._K)]
        return sum(v)

    def log_count_words(self, n: int) -> float:
        """log of count_words(n) by normalized float iteration; any n >= 0."""
        if n < 0:
            raise InputError("word length must be >= 0")
        if n == 0:
            return 0.0
        v = np.ones(self._K)
        acc = 0.0
        A = self._A.astype(float)
        for _ in range(n - 1):
            v = A @ v
            s = v.sum()
            acc += math.log(s)
            v /= s
        return acc + math.log(v.sum())

    def enumerate_words(self, n: int, budget: int = DEFAULT_WORD_BUDGET) -> Iterator[tuple]:
        """Yield admissible words of length n as tuples, lexicographically."""
        if n < 0:
            raise InputError("word length must be >= 0")
        self._check_budget(n, budget)
        if n == 0:
            yield ()
            return
        succ = [tuple(self.successors(s)) for s in range(self._K)]
        word = [0] * n

        def rec(depth: int):
            if depth == n:
                yield tuple(word)
                return
            choices = range(self._K) if depth == 0 else succ[word[depth - 1]]
            for s in choices:
                word[depth] = int(s)
                yield from rec(depth + 1)

        yield from rec(0)

    def word_array(self, n: int, budget: int = DEFAULT_WORD_BUDGET) -> np.ndarray:
        """All admissible words of length n as an int8 array, lex order by row."""
        if n < 0:
            raise InputError("word length must be >= 0")
        self._check_budget(n, budget)
        if n == 0:
            return np.zeros((1, 0), dtype=np.int8)
        words = np.arange(self._K, dtype=np.int8).reshape(-1, 1)
        deg = self._A.sum(axis=1)
        # successors padded to max degree; -1 slots are masked out after gather
        pad = np.full((self._K, int(deg.max())), -1, dtype=np.int8)
        for s in range(self._K):
            pad[s, : deg[s]] = np.flatnonzero(self._A[s]).astype(np.int8)
        for _ in range(n - 1):
            last = words[:, -1]
            base = np.repeat(words, deg[last], axis=0)
            ext = pad[last].ravel()
            words = np.column_stack([base, ext[ext >= 0]])
        return words

    def _check_budget(self, n: int, budget: int):
        if n <= EXACT_COUNT_MAX_N:
            total = self.count_words(n)
        else:
            total = math.inf
        if total > budget:
            raise BudgetError(
                f"enumerating length-{n} words needs {total} items, budget is {budget}"
            )

    # -- classification -------------------------------------------------

    def classify(self) -> SftClassification:
        if self._classification is None:
            self._classification = self._classify()
        return self._classification

    def _classify(self) -> SftClassification:
        A = self._A
        K = self._K
        reach = _reachability(A)
        irreducible = bool(reach.all())
        if not irreducible:
            return SftClassification(False, False, None, None, None)
        period = self._period()
        if period > 1:
            return SftClassification(True, False, period, None, None)
        r = self._primitivity_r()
        return SftClassification(True, True, 1, r, self._connecting_table(r))

    def _period(self) -> int:
        # gcd of (dist[u] + 1 - dist[v]) over edges, with BFS distances from 0
        dist = _bfs_dist(self._A, 0)
        p = 0
        for u in range(self._K):
            for v in self.successors(u):
                p = gcd(p, dist[u] + 1 - dist[int(v)])
        return abs(p) if p else 1

    def _primitivity_r(self) -> int:
        """Smallest r with every entry of A^(r+1) positive.

        The search is capped at the Wielandt exponent (K-1)^2 + 1.
        """
        bound = (self._K - 1) ** 2 + 1
        B = self._A > 0
        power = 1
        while power <= bound:
            if B.all():
                return power - 1
            B = (B.astype(np.int64) @ self._A) > 0
            power += 1
        raise StructuralError("matrix is not primitive within the Wielandt bound")

    def _connecting_table(self, r: int) -> dict:
        """Lexicographically smallest W of length r with a+W+b admissible."""
        K = self._K
        # reach_t[t][s] = set of symbols reachable from s in exactly t steps
        reach_t = [np.eye(K, dtype=bool)]
        for _ in range(r + 1):
            reach_t.append((reach_t[-1].astype(np.int64) @ self._A) > 0)
        table = {}
        for a in range(K):
            for b in range(K):
                w = []
                prev = a
                for t in range(r):
                    steps_left = r - t
                    for s in range(K):
                        if self._A[prev, s] and reach_t[steps_left][s, b]:
                            w.append(s)
                            prev = s
                            break
                    else:
                        raise StructuralError(
                            f"no connecting word of length {r} from {a} to {b}"
                        )
                if not self._A[prev, b]:
                    raise StructuralError(
                        f"no connecting word of length {r} from {a} to {b}"
                    )
                table[(a, b)] = tuple(w)
        return table

    def connecting_words(self) -> dict:
        cls = self.classify()
        if not cls.irreducible:
            reach = _reachability(self._A)
            a, b = np.argwhere(~reach)[0]
            raise StructuralError(
                f"connecting words need irreducibility; no path from {a} to {b}"
            )
        if not cls.aperiodic:
            raise StructuralError(
                f"connecting words need aperiodicity; period is {cls.period}"
            )
        return dict(cls.connecting_words)

    def spectral_decomposition(self) -> SpectralDecomposition:
        """Cyclic classes and the induced block systems of an irreducible shift."""
        cls = self.classify()
        if not cls.irreducible:
            raise StructuralError("spectral decomposition needs an irreducible matrix")
        p = cls.period
        dist = _bfs_dist(self._A, 0)
        classes = [sorted(s for s in range(self._K) if dist[s] % p == i) for i in range(p)]
        induced = []
        for i in range(p):
            blocks = [w for w in self.enumerate_words(p) if w[0] in set(classes[i])]
            index = {w: j for j, w in enumerate(blocks)}
            B = np.zeros((len(blocks), len(blocks)), dtype=np.int64)
            for u in blocks:
                for v in blocks:
                    if self._A[u[-1], v[0]]:
                        B[index[u], index[v]] = 1
            induced.append((Sft._block_system(B), tuple(blocks)))
        return SpectralDecomposition(p, classes, induced)

    # -- entropy --------------------------------------------------------

    def topological_entropy(self, tol: float = 1e-12, max_iter: int = 200_000) -> float:
        """log of the Perron root of A.

        Power iteration runs on A + I (primitive whenever A is irreducible,
        so the iteration converges geometrically even for periodic matrices)
        and the shift is subtracted at the end.  Start vector is all ones.
        The result is cross-checked against the length-40 word-count slope.
        """
        if self._entropy is not None:
            return self._entropy
        B = self._A.astype(float) + np.eye(self._K)
        v = np.ones(self._K)
        lam = 0.0
        for _ in range(max_iter):
            w = B @ v
            new_lam = float(w @ v) / float(v @ v)
            v = w / np.linalg.norm(w)
            if abs(new_lam - lam) <= tol * max(1.0, abs(new_lam)):
                lam = new_lam
                break
            lam = new_lam
        h = math.log(lam - 1.0) if lam > 1.0 else 0.0
        slope = self.log_count_words(40) / 40.0
        if slope < h - 1e-9 or slope - h > (2.0 * math.log(self._K) + 2.0) / 40.0:
            raise StructuralError(
                f"entropy {h:.12f} inconsistent with count slope {slope:.12f}"
            )
        self._entropy = h
        return h


def _reachability(A: np.ndarray) -> np.ndarray:
    K = A.shape[0]
    R = (A + np.eye(K, dtype=np.int64)) > 0
    for _ in range(int(math.ceil(math.log2(max(K, 2))))):
        R = (R.astype(np.int64) @ R.astype(np.int64)) > 0
    return R


def _bfs_dist(A: np.ndarray, start: int) -> np.ndarray:
    K = A.shape[0]
    dist = np.full(K, -1, dtype=np.int64)
    dist[start] = 0
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(A[u]):
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    nxt.append(int(v))
        frontier = nxt
    return dist
