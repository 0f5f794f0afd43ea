"""Moran-set construction engine.

A build stacks stages: each stage j covers the index window [T_{j-1}, T_j)
subdivided at breakpoints floor(r_j^l T_{j-1}), and fills each segment
with a word drawn from the stage's library.  Libraries here are
frequency-typical word sets (all admissible words with the tracked
symbol's frequency inside a band), standing in for the measure-typical
sets of the underlying theory while keeping every count exactly
enumerable.

On a proper SFT the segments are glued through r-symbol connecting gaps.
The gap sits at the START of a segment and is determined by the last
symbol before it and the first symbol of the segment's own word; this
keeps segment choices independent, so breakpoint counts are exact
products of library counts.

The measure mu-hat of a word is the fraction of assembled prefixes
extending it: exact rational arithmetic at small depth, log-domain
floats beyond.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .entropy_est import CylinderMeasure, CylinderSetOracle
from .errors import BudgetError, InputError, StructuralError, UnsupportedError
from .points import BlockLazyPoint, Point
from .sft import EXACT_COUNT_MAX_N, Sft, log_big

#: exact big-int frequency DP only up to this word length on proper SFTs
SFT_FREQ_CAP = 512

#: exact binomial band sums only up to this segment length on full shifts;
#: longer segments are tracked in the log domain
FULL_EXACT_CAP = 4096

#: exact rational mu-hat up to this depth, log-domain floats beyond
EXACT_MASS_CAP = 4096


# -- alpha chains ------------------------------------------------------


@dataclass
class AlphaChain:
    eps_ladder: list
    levels: list  # per level: ndarray of alphas, shape (J(L), d)
    dim: int

    @property
    def J(self) -> list:
        return [len(lv) for lv in self.levels]

    @property
    def alphas(self) -> np.ndarray:
        return np.concatenate(self.levels, axis=0)

    @property
    def eps_flat(self) -> np.ndarray:
        out = []
        for e, lv in zip(self.eps_ladder, self.levels):
            out.extend([e] * len(lv))
        return np.array(out)

    def flat_index(self, L: int, k: int) -> int:
        """lambda(L, k): 1-based position of alpha_{L,k} in the flattening."""
        if not (0 <= L < len(self.levels)) or not (0 <= k < len(self.levels[L])):
            raise InputError("chain index out of range")
        return k + sum(len(self.levels[i]) for i in range(L)) + 1

    def verify(self, C, grid_resolution: float = 1e-3) -> dict:
        """Re-checks the step, cover, and flattening invariants."""
        flat = self.alphas
        eps = self.eps_flat
        steps_ok = True
        for j in range(len(flat) - 1):
            if np.linalg.norm(flat[j + 1] - flat[j]) >= eps[j]:
                steps_ok = False
        grid = _discretize_target(C, grid_resolution)
        cover_ok = True
        for e, lv in zip(self.eps_ladder, self.levels):
            d = np.sqrt(
                ((grid[:, np.newaxis, :] - lv[np.newaxis, :, :]) ** 2).sum(axis=-1)
            )
            if not np.all(d.min(axis=1) <= e + 1e-12):
                cover_ok = False
        lam_ok = len(flat) == sum(self.J)
        return {"steps": steps_ok, "cover": cover_ok, "lambda_bijection": lam_ok}


def _discretize_target(C, resolution: float) -> np.ndarray:
    if isinstance(C, tuple) and len(C) == 2 and np.isscalar(C[0]):
        lo, hi = float(C[0]), float(C[1])
        if hi < lo:
            raise InputError("interval target needs lo <= hi")
        m = max(int(math.ceil((hi - lo) / resolution)), 1)
        return np.linspace(lo, hi, m + 1).reshape(-1, 1)
    pts = np.atleast_2d(np.asarray(C, dtype=float))
    if pts.shape[0] == 1:
        return pts
    out = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        seg = float(np.linalg.norm(b - a))
        m = max(int(math.ceil(seg / resolution)), 1)
        for t in range(1, m + 1):
            out.append(a + (b - a) * (t / m))
    return np.array(out)


def build_alpha_chain(
    C,
    eps_ladder: Sequence[float],
    grid_resolution: float = 1e-3,
    score: Optional[Callable] = None,
) -> AlphaChain:
    """Per-level sweeps of a compact connected target with steps below
    eps_L, consecutive levels joined continuously.

    With a score hook, each level is re-routed to end at the argmax of
    the score over the level's own discretization (duplicated visits are
    fine; only the step bound matters).
    """
    eps_ladder = list(eps_ladder)
    if not eps_ladder or any(e <= 0 for e in eps_ladder):
        raise InputError("eps ladder must be positive")
    if any(b > a for a, b in zip(eps_ladder, eps_ladder[1:])):
        # a ladder is a refinement; allow equal rungs but not coarsening
        raise InputError("eps ladder must be non-increasing")
    path = _discretize_target(C, grid_resolution)
    if len(path) > 1:
        gaps = np.linalg.norm(np.diff(path, axis=0), axis=1)
        if gaps.max() >= min(eps_ladder) * 0.9:
            raise InputError("grid resolution must be finer than the finest eps")
    levels = []
    prev_end_idx = 0
    for e in eps_ladder:
        walk_idx = _level_walk(path, e, prev_end_idx)
        if score is not None:
            best = max(range(len(path)), key=lambda i: score(path[i]))
            walk_idx = walk_idx + _index_path(path, walk_idx[-1], best, e)
        levels.append(path[walk_idx])
        prev_end_idx = walk_idx[-1]
    return AlphaChain(eps_ladder=eps_ladder, levels=levels, dim=path.shape[1])


def _steps_between(path: np.ndarray, i: int, j: int, e: float) -> list:
    """Index hops from i to j along the discretized path, each below e."""
    if i == j:
        return []
    out = []
    cur = i
    sgn = 1 if j > i else -1
    while cur != j:
        nxt = cur
        while nxt != j:
            cand = nxt + sgn
            if float(np.linalg.norm(path[cand] - path[cur])) >= e * 0.95:
                break
            nxt = cand
        if nxt == cur:
            nxt = cur + sgn
        out.append(nxt)
        cur = nxt
    return out


def _index_path(path, i, j, e):
    return _steps_between(path, i, j, e)


def _level_walk(path: np.ndarray, e: float, start_idx: int) -> list:
    """Cover the whole discretized path starting at start_idx: go to the
    near end first, then sweep to the far end."""
    last = len(path) - 1
    walk = [start_idx]
    near, far = (0, last) if start_idx <= last - start_idx else (last, 0)
    walk += _steps_between(path, start_idx, near, e)
    walk += _steps_between(path, near, far, e)
    return walk


# -- schedules ---------------------------------------------------------


@dataclass
class MoranSchedule:
    T: list  # milestones T_1..T_N
    eps: list  # per-stage tolerance
    rs: dict  # stage j (2-based) -> r_j
    ms: dict  # stage j -> m(j)
    breakpoints: list  # flat ascending, starting at 0

    @property
    def stages(self) -> int:
        return len(self.T)

    def stage_of(self, t: int) -> int:
        """1-based stage whose window contains index t."""
        for j, Tj in enumerate(self.T, start=1):
            if t < Tj:
                return j
        return len(self.T)

    def segments(self) -> list:
        return list(zip(self.breakpoints[:-1], self.breakpoints[1:]))

    def trends(self) -> dict:
        """Finite-window readings of the asymptotic schedule constraints."""
        Te = [t * e for t, e in zip(self.T, self.eps)]
        ratio = [
            sum(self.T[: j + 1]) / self.T[j + 1] for j in range(len(self.T) - 1)
        ]
        re = [
            (self.rs[j] - 1.0) / self.eps[j - 1]
            for j in sorted(self.rs)
        ]
        return {
            "T_eps": Te,
            "T_eps_increasing": all(a < b for a, b in zip(Te, Te[1:])),
            "sum_ratio": ratio,
            "sum_ratio_decreasing": all(a > b for a, b in zip(ratio, ratio[1:])),
            "r_over_eps": re,
            "r_over_eps_increasing": all(a < b for a, b in zip(re, re[1:])),
        }


def build_schedule(
    T1: int,
    eps_chain: Sequence[float],
    ratios: Optional[Sequence[float]] = None,
    cap: int = 10**6,
) -> MoranSchedule:
    """Milestones and intra-stage breakpoints floor(r^l T_{j-1}).

    Default growth policy: T_j = j * T_{j-1} * ceil(1/eps_j), softened so
    the final milestone stays near `cap`.  Explicit per-stage ratios
    override the policy.  Each stage solves m = ceil(log2 ratio) and
    r = ratio^(1/m), landing r in (1, 2]; the last breakpoint of a stage
    is pinned to T_j so float drift cannot shift a milestone.
    """
    if T1 < 16:
        raise InputError("need T1 >= 16")
    eps = [float(e) for e in eps_chain]
    n = len(eps)
    if n < 1:
        raise InputError("need at least one stage")
    if n > 8:
        raise InputError("stage count caps at 8 for enumeration-backed builds")
    T = [int(T1)]
    for j in range(2, n + 1):
        prev = T[-1]
        if ratios is not None:
            ratio = float(ratios[j - 2])
        else:
            ratio = j * math.ceil(1.0 / eps[j - 1])
            tgt = prev * ratio
            if tgt > cap:
                ratio = max(cap / prev, 2.0)
        if ratio <= 1.0:
            raise InputError(f"stage {j}: milestones must strictly grow (ratio {ratio})")
        Tj = int(round(prev * ratio))
        if Tj <= prev:
            raise InputError(f"stage {j}: milestones must strictly grow")
        T.append(Tj)
    rs, ms = {}, {}
    bps = [0, T[0]]
    for j in range(2, n + 1):
        prev, Tj = T[j - 2], T[j - 1]
        ratio = Tj / prev
        m = max(int(math.ceil(math.log2(ratio) - 1e-12)), 1)
        r = ratio ** (1.0 / m)
        assert 1.0 < r <= 2.0 + 1e-12, "r outside (1,2] cannot happen with this m"
        if (r - 1.0) * prev <= 1.0:
            raise InputError(
                f"stage {j}: growth too slow for distinct breakpoints "
                f"(r={r:.4f}, T={prev})"
            )
        rs[j], ms[j] = r, m
        marks = [int(math.floor(prev * r**l)) for l in range(1, m)]
        marks.append(Tj)  # pin the stage end exactly
        for t in marks:
            if t <= bps[-1]:
                raise InputError(f"stage {j}: breakpoints failed to increase at {t}")
            bps.append(t)
    return MoranSchedule(T=T, eps=eps, rs=rs, ms=ms, breakpoints=bps)


# -- block libraries ---------------------------------------------------


class BlockLibrary:
    """Per-segment word supplier with exact counts.

    Exact integer counts are mandatory only where exact_ok says they are
    affordable; the log_* variants always work and back the large-scale
    slope and mass arithmetic.
    """

    def count(self, length: int) -> int:
        raise NotImplementedError

    def exact_ok(self, length: int) -> bool:
        return True

    def nonempty(self, length: int) -> bool:
        return self.count(length) > 0

    def log_count(self, length: int) -> float:
        c = self.count(length)
        if c <= 0:
            return -math.inf
        return log_big(c)

    def count_with_first(self, first: int, length: int) -> int:
        raise NotImplementedError

    def log_count_with_first(self, first: int, length: int) -> float:
        c = self.count_with_first(first, length)
        return log_big(c) if c > 0 else -math.inf

    def count_extensions(self, prefix, length: int) -> int:
        raise NotImplementedError

    def log_count_extensions(self, prefix, length: int) -> float:
        c = self.count_extensions(prefix, length)
        return log_big(c) if c > 0 else -math.inf

    def sample(self, length: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def accepts(self, word) -> bool:
        raise NotImplementedError

    def partial_ok(self, prefix, length: int) -> bool:
        return self.count_extensions(prefix, length) > 0

    def enumerate(self, length: int):
        raise NotImplementedError


class AllWordsLibrary(BlockLibrary):
    """Every admissible word qualifies; the degenerate Moran build."""

    def __init__(self, sft: Sft):
        self.sft = sft
        self._logrow = None

    def count(self, length: int) -> int:
        if np.all(self.sft.matrix == 1):
            return self.sft.K**length
        return self.sft.count_words(length)

    def log_count(self, length: int) -> float:
        if np.all(self.sft.matrix == 1):
            return length * math.log(self.sft.K)
        return self.sft.log_count_words(length)

    def exact_ok(self, length: int) -> bool:
        if np.all(self.sft.matrix == 1):
            return length <= FULL_EXACT_CAP
        return length <= EXACT_COUNT_MAX_N

    def nonempty(self, length: int) -> bool:
        if self.exact_ok(length):
            return self.count(length) > 0
        return self.log_count(length) > -math.inf

    def count_with_first(self, first: int, length: int) -> int:
        if np.all(self.sft.matrix == 1):
            return self.sft.K ** (length - 1)
        v = np.zeros(self.sft.K, dtype=object)
        v[first] = 1
        A = self.sft.matrix.astype(object)
        for _ in range(length - 1):
            v = v @ A
        return int(v.sum())

    def count_extensions(self, prefix, length: int) -> int:
        prefix = list(prefix)
        t = length - len(prefix)
        if t < 0:
            raise InputError("prefix longer than the segment")
        if t == 0:
            return 1 if self.accepts(prefix) else 0
        if not prefix:
            return self.count(length)
        if not self._admissible(prefix):
            return 0
        v = np.zeros(self.sft.K, dtype=object)
        for s in range(self.sft.K):
            if self.sft.matrix[prefix[-1], s]:
                v[s] = 1
        A = self.sft.matrix.astype(object)
        for _ in range(t - 1):
            v = v @ A
        return int(v.sum())

    def _admissible(self, word) -> bool:
        w = np.asarray(word, dtype=np.int64)
        if w.size < 2:
            return True
        return bool(np.all(self.sft.matrix[w[:-1], w[1:]] == 1))

    def accepts(self, word) -> bool:
        return self._admissible(word)

    def sample(self, length: int, rng: np.random.Generator) -> np.ndarray:
        K = self.sft.K
        if np.all(self.sft.matrix == 1):
            return rng.integers(0, K, size=length).astype(np.int64)
        # weight each step by the count of continuations so the draw is
        # uniform over admissible words
        logs = self._step_logs(length)
        out = np.empty(length, dtype=np.int64)
        state = -1
        for t in range(length):
            allowed = (
                np.ones(K, dtype=bool) if state < 0 else self.sft.matrix[state] == 1
            )
            w = np.full(K, -np.inf)
            w[allowed] = logs[length - t - 1][allowed]
            w -= w.max()
            p = np.exp(w)
            p /= p.sum()
            state = int(rng.choice(K, p=p))
            out[t] = state
        return out

    def _step_logs(self, length: int):
        if self._logrow is None or len(self._logrow) < length:
            K = self.sft.K
            logs = [np.zeros(K)]
            v = np.ones(K)
            base = 0.0
            A = self.sft.matrix.astype(float)
            for _ in range(length):
                v = A @ v
                norm = v.max()
                v /= norm
                base += math.log(norm)
                logs.append(np.log(np.maximum(v, 1e-300)) + base)
            self._logrow = logs
        return self._logrow

    def enumerate(self, length: int):
        return self.sft.enumerate_words(length)


class FrequencyLibrary(BlockLibrary):
    """Admissible words whose frequency of one symbol lies in a band.

    Full shifts use binomial closed forms at any length; proper SFTs run
    an exact transfer DP with a per-symbol count coordinate, capped at
    SFT_FREQ_CAP symbols.
    """

    def __init__(self, sft: Sft, symbol: int, target: float, tol: float):
        if not 0 <= symbol < sft.K:
            raise InputError("tracked symbol out of range")
        if tol <= 0 or not 0.0 <= target <= 1.0:
            raise InputError("need tol > 0 and target in [0,1]")
        self.sft = sft
        self.symbol = symbol
        self.target = float(target)
        self.tol = float(tol)
        self.full = bool(np.all(sft.matrix == 1))
        self._ext_cache: dict = {}
        self._count_cache: dict = {}

    def band(self, length: int):
        kmin = math.ceil((self.target - self.tol) * length - 1e-9)
        kmax = math.floor((self.target + self.tol) * length + 1e-9)
        return max(kmin, 0), min(kmax, length)

    def exact_ok(self, length: int) -> bool:
        return length <= (FULL_EXACT_CAP if self.full else SFT_FREQ_CAP)

    def nonempty(self, length: int) -> bool:
        kmin, kmax = self.band(length)
        if kmin > kmax:
            return False
        if self.full:
            return True
        return self.count(length) > 0

    # log-domain band sums (full shift, any length) ---------------------

    def _log_band_terms(self, m: int, jmin: int, jmax: int) -> np.ndarray:
        """log of C(m,j) (K-1)^(m-j) for j in [jmin, jmax]."""
        jmin, jmax = max(jmin, 0), min(jmax, m)
        if jmin > jmax:
            return np.empty(0)
        js = np.arange(jmin, jmax + 1)
        base = (
            math.lgamma(m + 1)
            - math.lgamma(jmin + 1)
            - math.lgamma(m - jmin + 1)
        )
        # walk log C(m,j+1) = log C(m,j) + log((m-j)/(j+1)) from the base
        steps = np.concatenate(
            [[0.0], np.log((m - js[:-1]) / (js[:-1] + 1.0))]
        )
        return base + np.cumsum(steps) + (m - js) * math.log(max(self.sft.K - 1, 1))

    @staticmethod
    def _lse(terms: np.ndarray) -> float:
        if terms.size == 0:
            return -math.inf
        mx = float(terms.max())
        return mx + math.log(np.exp(terms - mx).sum())

    def log_count(self, length: int) -> float:
        if not self.full:
            c = self.count(length)
            return log_big(c) if c > 0 else -math.inf
        kmin, kmax = self.band(length)
        return self._lse(self._log_band_terms(length, kmin, kmax))

    def log_count_with_first(self, first: int, length: int) -> float:
        if not self.full:
            c = self.count_with_first(first, length)
            return log_big(c) if c > 0 else -math.inf
        s = 1 if first == self.symbol else 0
        kmin, kmax = self.band(length)
        return self._lse(self._log_band_terms(length - 1, kmin - s, kmax - s))

    def log_count_extensions(self, prefix, length: int) -> float:
        if not self.full:
            c = self.count_extensions(prefix, length)
            return log_big(c) if c > 0 else -math.inf
        prefix = np.asarray(prefix, dtype=np.int64)
        seen = len(prefix)
        if seen > length:
            raise InputError("prefix longer than the segment")
        k_seen = int(np.count_nonzero(prefix == self.symbol))
        kmin, kmax = self.band(length)
        if seen == length:
            return 0.0 if kmin <= k_seen <= kmax else -math.inf
        return self._lse(
            self._log_band_terms(length - seen, kmin - k_seen, kmax - k_seen)
        )

    # closed forms on the full shift -----------------------------------

    def _full_count(self, length: int, k_shift: int = 0, m: Optional[int] = None) -> int:
        m = length if m is None else m
        kmin, kmax = self.band(length)
        total = 0
        for k in range(kmin, kmax + 1):
            j = k - k_shift
            if 0 <= j <= m:
                total += math.comb(m, j) * (self.sft.K - 1) ** (m - j)
        return total

    # exact DP on proper SFTs ------------------------------------------

    def _dp(self, length: int):
        """E[t][a][k]: words of length t that may follow symbol a, with k
        tracked-symbol hits.  Cached per length prefix."""
        if length > SFT_FREQ_CAP:
            raise BudgetError(
                f"frequency DP caps at {SFT_FREQ_CAP} symbols on proper shifts"
            )
        cache = self._ext_cache
        if "E" not in cache or len(cache["E"]) <= length:
            K = self.sft.K
            E = [[[1] for _ in range(K)]]  # t = 0: single empty word, k = 0
            for t in range(1, length + 1):
                prev = E[t - 1]
                cur = []
                for a in range(K):
                    row = [0] * (t + 1)
                    for s in range(K):
                        if not self.sft.matrix[a, s]:
                            continue
                        hit = 1 if s == self.symbol else 0
                        ps = prev[s]
                        for k, c in enumerate(ps):
                            if c:
                                row[k + hit] += c
                    cur.append(row)
                E.append(cur)
            cache["E"] = E
        return cache["E"]

    def count(self, length: int) -> int:
        key = ("c", length)
        if key in self._count_cache:
            return self._count_cache[key]
        if self.full:
            total = self._full_count(length)
        elif length == 0:
            kmin, _ = self.band(0)
            total = 1 if kmin == 0 else 0
        else:
            E = self._dp(length)
            kmin, kmax = self.band(length)
            total = 0
            for s in range(self.sft.K):
                hit = 1 if s == self.symbol else 0
                row = E[length - 1][s]
                for k in range(kmin, kmax + 1):
                    j = k - hit
                    if 0 <= j < len(row):
                        total += row[j]
        self._count_cache[key] = total
        return total

    def count_with_first(self, first: int, length: int) -> int:
        key = ("f", first, length)
        if key in self._count_cache:
            return self._count_cache[key]
        if self.full:
            total = self._full_count(
                length, k_shift=1 if first == self.symbol else 0, m=length - 1
            )
        else:
            E = self._dp(length)
            hit = 1 if first == self.symbol else 0
            kmin, kmax = self.band(length)
            row = E[length - 1][first]
            total = 0
            for k in range(kmin, kmax + 1):
                j = k - hit
                if 0 <= j < len(row):
                    total += row[j]
        self._count_cache[key] = total
        return total

    def count_extensions(self, prefix, length: int) -> int:
        prefix = [int(s) for s in prefix]
        seen = len(prefix)
        if seen > length:
            raise InputError("prefix longer than the segment")
        k_seen = sum(1 for s in prefix if s == self.symbol)
        if seen == length:
            kmin, kmax = self.band(length)
            return 1 if (kmin <= k_seen <= kmax and self._admissible(prefix)) else 0
        if seen == 0:
            return self.count(length)
        if not self._admissible(prefix):
            return 0
        t = length - seen
        if self.full:
            kmin, kmax = self.band(length)
            total = 0
            for k in range(kmin, kmax + 1):
                j = k - k_seen
                if 0 <= j <= t:
                    total += math.comb(t, j) * (self.sft.K - 1) ** (t - j)
            return total
        E = self._dp(length)
        kmin, kmax = self.band(length)
        row_src = E[t][prefix[-1]]
        total = 0
        for k in range(kmin, kmax + 1):
            j = k - k_seen
            if 0 <= j < len(row_src):
                total += row_src[j]
        return total

    def _admissible(self, word) -> bool:
        if self.full:
            return True
        w = np.asarray(word, dtype=np.int64)
        if w.size < 2:
            return True
        return bool(np.all(self.sft.matrix[w[:-1], w[1:]] == 1))

    def accepts(self, word) -> bool:
        w = np.asarray(word, dtype=np.int64)
        kmin, kmax = self.band(len(w))
        hits = int(np.count_nonzero(w == self.symbol))
        return kmin <= hits <= kmax and self._admissible(w)

    def sample(self, length: int, rng: np.random.Generator) -> np.ndarray:
        if not self.nonempty(length):
            raise StructuralError(f"empty frequency band at length {length}")
        if self.full:
            return self._sample_full(length, rng)
        return self._sample_sft(length, rng)

    def _sample_full(self, length: int, rng) -> np.ndarray:
        K = self.sft.K
        kmin, kmax = self.band(length)
        ks = np.arange(kmin, kmax + 1)
        logw = self._log_band_terms(length, kmin, kmax)
        logw -= logw.max()
        p = np.exp(logw)
        p /= p.sum()
        k = int(rng.choice(ks, p=p))
        out = np.empty(length, dtype=np.int64)
        others = [s for s in range(K) if s != self.symbol]
        if K == 2:
            out[:] = others[0]
        else:
            out[:] = rng.choice(others, size=length)
        pos = rng.choice(length, size=k, replace=False)
        out[pos] = self.symbol
        return out

    def _sample_sft(self, length: int, rng) -> np.ndarray:
        E = self._dp(length)
        kmin, kmax = self.band(length)
        # draw the target count first, then walk the DP
        ks, ws = [], []
        for k in range(kmin, kmax + 1):
            c = 0
            for s in range(self.sft.K):
                hit = 1 if s == self.symbol else 0
                row = E[length - 1][s]
                j = k - hit
                if 0 <= j < len(row):
                    c += row[j]
            if c:
                ks.append(k)
                ws.append(c)
        total = sum(ws)
        pick = _weighted_pick(ws, rng)
        k_left = ks[pick]
        out = np.empty(length, dtype=np.int64)
        state = -1
        for t in range(length):
            rem = length - t - 1
            opts, wts = [], []
            for s in range(self.sft.K):
                if state >= 0 and not self.sft.matrix[state, s]:
                    continue
                hit = 1 if s == self.symbol else 0
                j = k_left - hit
                row = E[rem][s]
                if 0 <= j < len(row) and row[j]:
                    opts.append(s)
                    wts.append(row[j])
            state = opts[_weighted_pick(wts, rng)]
            out[t] = state
            if state == self.symbol:
                k_left -= 1
        return out

    def enumerate(self, length: int):
        for w in self.sft.enumerate_words(length):
            if self.accepts(w):
                yield w


def _weighted_pick(weights, rng) -> int:
    """Index draw proportional to (possibly huge) integer weights."""
    total = sum(weights)
    u = rng.random()
    acc = Fraction(0)
    for i, w in enumerate(weights):
        acc += Fraction(w, total)
        if u < float(acc):
            return i
    return len(weights) - 1


# -- assembled sets ----------------------------------------------------


@dataclass
class MoranSegment:
    index: int
    start: int
    end: int
    stage: int
    gap: int  # leading gap length (0 for the first segment or gapless mode)

    @property
    def content_len(self) -> int:
        return self.end - self.start - self.gap


class MoranSet:
    """Assembled construction: schedule + libraries + optional gaps."""

    def __init__(self, sft: Sft, schedule: MoranSchedule, libraries, gaps: str = "auto"):
        self.sft = sft
        self.schedule = schedule
        if isinstance(libraries, BlockLibrary):
            libraries = [libraries] * schedule.stages
        if len(libraries) != schedule.stages:
            raise InputError("need one library per stage")
        self.libraries = list(libraries)
        full = bool(np.all(sft.matrix == 1))
        if gaps == "auto":
            gaps = "none" if full else "r"
        if gaps not in ("none", "r"):
            raise InputError("gaps must be none, r, or auto")
        if gaps == "none" and not full:
            raise UnsupportedError(
                "gapless assembly cannot guarantee admissibility across "
                "segment seams on a proper shift; use gaps='r'"
            )
        self.gaps = gaps
        if gaps == "r":
            cls = sft.classify()
            if not (cls.irreducible and cls.aperiodic):
                raise UnsupportedError("gap mode needs an irreducible aperiodic matrix")
            self.r = cls.primitivity_r
            self.conn = sft.connecting_words()
        else:
            self.r = 0
            self.conn = {}
        self._segments = self._build_segments()
        self._validate_and_count()

    # segment plumbing -------------------------------------------------

    def _build_segments(self) -> list:
        segs = []
        for i, (a, b) in enumerate(self.schedule.segments()):
            gap = self.r if (self.gaps == "r" and i > 0) else 0
            stage = self.schedule.stage_of(a)
            if b - a - gap < 1:
                raise StructuralError(
                    f"segment {i} [{a},{b}) too short for a {gap}-symbol gap"
                )
            segs.append(MoranSegment(i, a, b, stage, gap))
        return segs

    def segment_at(self, i: int) -> MoranSegment:
        """Real segment, or a synthetic continuation of the last stage."""
        if i < len(self._segments):
            return self._segments[i]
        last = self._segments[-1]
        span = last.end - last.start
        extra = i - len(self._segments) + 1
        gap = self.r if self.gaps == "r" else 0
        return MoranSegment(
            i,
            last.end + (extra - 1) * span,
            last.end + extra * span,
            last.stage,
            gap,
        )

    def library_for(self, seg: MoranSegment) -> BlockLibrary:
        return self.libraries[seg.stage - 1]

    def _validate_and_count(self):
        counts = {}
        log_counts = {}
        acc = 1
        log_acc = 0.0
        exact = True
        for seg in self._segments:
            lib = self.library_for(seg)
            if not lib.nonempty(seg.content_len):
                raise StructuralError(
                    f"library of stage {seg.stage} is empty at segment "
                    f"{seg.index} (content length {seg.content_len})"
                )
            if exact and lib.exact_ok(seg.content_len):
                acc *= lib.count(seg.content_len)
                counts[seg.end] = acc
                log_acc = log_big(acc)
            else:
                # long segments: big-int products stop being worth their cost
                exact = False
                log_acc += lib.log_count(seg.content_len)
            log_counts[seg.end] = log_acc
        self.counts = counts
        self.log_counts = log_counts

    def count_at(self, t: int) -> int:
        if t not in self.log_counts:
            raise InputError(f"{t} is not a breakpoint of this build")
        if t not in self.counts:
            raise BudgetError(
                f"exact count unavailable at {t}; use log_count_at"
            )
        return self.counts[t]

    def log_count_at(self, t: int) -> float:
        if t not in self.log_counts:
            raise InputError(f"{t} is not a breakpoint of this build")
        return self.log_counts[t]

    def slope_at(self, t: int) -> float:
        return self.log_count_at(t) / t

    # sampling ---------------------------------------------------------

    def sample(self, seed: int = 0) -> Point:
        chosen: dict = {}

        def content(i: int) -> np.ndarray:
            if i not in chosen:
                seg = self.segment_at(i)
                lib = self.library_for(seg)
                rng = np.random.default_rng([int(seed), i])
                word = lib.sample(seg.content_len, rng)
                if seg.gap:
                    a = int(content(i - 1)[-1])
                    g = np.asarray(self.conn[(a, int(word[0]))], dtype=np.int64)
                    word = np.concatenate([g, word])
                chosen[i] = word
            return chosen[i]

        def fill(have: int, want: int) -> np.ndarray:
            parts = []
            i = 0
            pos = 0
            while pos < want:
                seg = self.segment_at(i)
                if seg.end > have:
                    parts.append(content(i)[max(have - seg.start, 0) :])
                pos = seg.end
                i += 1
            return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)

        return BlockLazyPoint(self.sft.K, fill)

    # membership and measure -------------------------------------------

    def oracle(self) -> CylinderSetOracle:
        # positive extension mass is exactly "some member starts this way"
        def fn(word) -> bool:
            return self._mass_fraction(list(word), allow_float=False) > 0

        return CylinderSetOracle(fn, provenance="exact")

    def measure(self) -> CylinderMeasure:
        def mass(word) -> float:
            if len(word) <= EXACT_MASS_CAP:
                return float(self._mass_fraction(word, allow_float=False))
            return math.exp(self.log_mass(word))

        return CylinderMeasure(mass, label="moran")

    def mass_exact(self, word) -> Fraction:
        if len(word) > EXACT_MASS_CAP:
            raise BudgetError(f"exact masses cap at depth {EXACT_MASS_CAP}")
        return self._mass_fraction(list(word), allow_float=False)

    def log_mass(self, word) -> float:
        # float mode already accumulates in the log domain
        return float(self._mass_fraction(list(word), allow_float=True))

    def _mass_fraction(self, word, allow_float: bool):
        """Fraction of assembled prefixes extending the word.

        Walks segments: complete segments contribute accept/reject and a
        count divisor; the straddling segment contributes its extension
        count.  In float mode returns a log-mass float instead.
        """
        w = np.asarray(word, dtype=np.int64)
        n = len(w)
        if n == 0:
            return Fraction(1) if not allow_float else 0.0
        num_log = 0.0
        frac = Fraction(1)
        i = 0
        pos = 0
        while pos < n:
            seg = self.segment_at(i)
            lib = self.library_for(seg)
            seg_word = w[seg.start : min(seg.end, n)]
            gap_obs = seg_word[: seg.gap]
            body = seg_word[seg.gap :]
            if seg.end <= n:
                # fully observed segment
                if not lib.accepts(body):
                    return Fraction(0) if not allow_float else -math.inf
                if seg.gap and list(gap_obs) != list(
                    self.conn[(w[seg.start - 1], body[0])]
                ):
                    return Fraction(0) if not allow_float else -math.inf
                if allow_float:
                    num_log -= lib.log_count(seg.content_len)
                else:
                    frac /= lib.count(seg.content_len)
            else:
                # straddling segment
                if len(seg_word) <= seg.gap:
                    # cut inside the gap: sum extension counts over the
                    # first body symbols whose connecting word matches
                    a = w[seg.start - 1]
                    bs = [
                        b
                        for b in range(self.sft.K)
                        if list(self.conn[(a, b)][: len(seg_word)])
                        == list(seg_word)
                    ]
                    if allow_float:
                        logs = [
                            v
                            for b in bs
                            if (v := lib.log_count_with_first(b, seg.content_len))
                            > -math.inf
                        ]
                        if not logs:
                            return -math.inf
                        mx = max(logs)
                        lse = mx + math.log(sum(math.exp(v - mx) for v in logs))
                        num_log += lse - lib.log_count(seg.content_len)
                    else:
                        good = sum(
                            lib.count_with_first(b, seg.content_len) for b in bs
                        )
                        if good == 0:
                            return Fraction(0)
                        frac *= Fraction(good, lib.count(seg.content_len))
                else:
                    if seg.gap and list(gap_obs) != list(
                        self.conn[(w[seg.start - 1], body[0])]
                    ):
                        return Fraction(0) if not allow_float else -math.inf
                    if allow_float:
                        lext = lib.log_count_extensions(body, seg.content_len)
                        if lext == -math.inf:
                            return -math.inf
                        num_log += lext - lib.log_count(seg.content_len)
                    else:
                        ext = lib.count_extensions(body, seg.content_len)
                        if ext == 0:
                            return Fraction(0)
                        frac *= Fraction(ext, lib.count(seg.content_len))
            pos = seg.end
            i += 1
        return num_log if allow_float else frac


def assemble_moran(
    sft: Sft, schedule: MoranSchedule, libraries, gaps: str = "auto"
) -> MoranSet:
    return MoranSet(sft, schedule, libraries, gaps)


# -- mean Li-Yorke witnesses -------------------------------------------


@dataclass
class MlWitness:
    point: Point
    deviate_stages: list
    stage_ends: list
    predicted_end_averages: list
    deviation_count: int

    def predicted_average(self, n: int) -> float:
        return float(_predicted_avgs(self._devs, np.array([n]), self._K)[0])


def ml_witness(
    omega: Point,
    sft: Sft,
    schedule: MoranSchedule,
    deviate_stages: Optional[Sequence[int]] = None,
) -> MlWitness:
    """Alternating copy/deviate stages against a reference stream.

    Copy stages reproduce omega exactly; deviate stages flip the first
    symbol of every length-2 sub-block to the smallest admissible
    alternative.  The returned predictions are computed directly from the
    deviation index set, independent of any trajectory machinery.
    """
    if deviate_stages is None:
        if schedule.stages < 4:
            raise InputError("witness schedules need >= 4 stages")
        deviate_stages = [j for j in range(1, schedule.stages + 1) if j % 2 == 0]
    deviate_stages = sorted(set(int(j) for j in deviate_stages))
    horizon = schedule.T[-1]
    wa = omega.prefix(horizon + 1)
    A = sft.matrix
    windows = []
    lo = 0
    for j, Tj in enumerate(schedule.T, start=1):
        if j in deviate_stages:
            windows.append((lo, Tj))
        lo = Tj
    x = wa[:horizon].copy()
    devs = []
    for a, b in windows:
        for i in range(a, b, 2):
            prev = x[i - 1] if i > 0 else None
            nxt = wa[i + 1] if i + 1 <= horizon else None
            for s in range(sft.K):
                if s == wa[i]:
                    continue
                if prev is not None and not A[prev, s]:
                    continue
                if nxt is not None and not A[s, nxt]:
                    continue
                x[i] = s
                devs.append(i)
                break
    devs = np.array(devs, dtype=np.int64)

    def fill(have: int, want: int) -> np.ndarray:
        if want <= horizon:
            return x[have:want]
        tail = omega.prefix(want)[max(have, horizon) : want]
        head = x[have:horizon] if have < horizon else np.empty(0, dtype=np.int64)
        return np.concatenate([head, tail])

    pt = BlockLazyPoint(sft.K, fill, max_depth=omega.max_depth)
    ends = list(schedule.T)
    preds = _predicted_avgs(devs, np.array(ends), sft.K)
    out = MlWitness(
        point=pt,
        deviate_stages=deviate_stages,
        stage_ends=ends,
        predicted_end_averages=[float(v) for v in preds],
        deviation_count=int(devs.size),
    )
    out._devs = devs
    out._K = sft.K
    return out


def _predicted_avgs(devs: np.ndarray, ns: np.ndarray, K: int) -> np.ndarray:
    """Exact running averages of K^-(gap to next deviation)."""
    out = np.empty(ns.size)
    if devs.size == 0:
        out[:] = 0.0
        return out
    for t, n in enumerate(ns):
        idx = np.arange(n)
        pos = np.searchsorted(devs, idx)
        has = pos < devs.size
        gap = np.where(has, devs[np.minimum(pos, devs.size - 1)] - idx, np.inf)
        with np.errstate(over="ignore", under="ignore"):
            vals = np.where(np.isfinite(gap), np.power(float(K), -np.minimum(gap, 1200.0)), 0.0)
        out[t] = vals.sum() / n
    return out


# -- entropy reporting -------------------------------------------------


@dataclass
class MoranDistributionCheck:
    s: float
    ladder: list
    log_constants: list
    diverging: bool

    @property
    def C(self) -> float:
        m = max(self.log_constants)
        return math.exp(m) if m < 700 else math.inf


@dataclass
class MoranEntropyReport:
    design_target: float
    breakpoints: list
    slopes: list
    dist_check: MoranDistributionCheck

    @property
    def final_slope(self) -> float:
        return self.slopes[-1]


def moran_entropy_report(
    m: MoranSet,
    h_star: float,
    margin: float = 0.02,
    num_points: int = 4,
    seed: int = 0,
) -> MoranEntropyReport:
    """Breakpoint count slopes plus a log-domain distribution-principle
    reading of mu-hat at s = h_star - margin along the milestones."""
    bps = [t for t in m.schedule.breakpoints if t > 0]
    slopes = [m.slope_at(t) for t in bps]
    s = h_star - margin
    ladder = list(m.schedule.T)
    logc = []
    pts = [m.sample(seed + i) for i in range(num_points)]
    for n in ladder:
        worst = -math.inf
        for x in pts:
            lm = m.log_mass(x.prefix(n))
            worst = max(worst, lm + s * n)
        logc.append(worst)
    diverging = False
    if len(ladder) >= 2:
        mid = len(ladder) // 2
        dn = ladder[-1] - ladder[mid - 1] if mid > 0 else ladder[-1] - ladder[0]
        if dn > 0:
            diverging = (logc[-1] - logc[mid - 1 if mid > 0 else 0]) / dn > 0.01
    return MoranEntropyReport(
        design_target=h_star,
        breakpoints=bps,
        slopes=slopes,
        dist_check=MoranDistributionCheck(
            s=s, ladder=ladder, log_constants=logc, diverging=diverging
        ),
    )
