"""Symbol-level transfer maps between streams, with their checkers.

Three maps, all lazy: the pointwise swap on full shifts, its blockwise
version threading admissibility through connecting words on aperiodic
irreducible SFTs, and the codebook encoding that carries streams over an
L-letter alphabet into the SFT.  Every structural claim about them
(involution, mismatch-set identity, distance bounds, equivariance) gets
a checker that reports worst cases instead of asserting silently.

Distance bounds are verified in the integer exponent domain: with
rho = K^{-q} the two-sided Hoelder bound turns into linear inequalities
between the mismatch depths p and q, so checks are exact and tolerance
free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError, UnsupportedError
from .measures import MarkovMeasure
from .points import BlockLazyPoint, MarkovPoint, Point
from .sft import Sft


@dataclass(frozen=True)
class BlockLayout:
    """Index bookkeeping: plain blocks I^0_k of length M against padded
    blocks I^1_k plus gaps I^2_k of length r."""

    M: int
    r: int

    def __post_init__(self):
        if self.M < 1 or self.r < 0:
            raise InputError("need M >= 1 and r >= 0")

    def I0(self, k: int) -> range:
        return range(k * self.M, (k + 1) * self.M)

    def I1(self, k: int) -> range:
        s = k * (self.M + self.r)
        return range(s, s + self.M)

    def I2(self, k: int) -> range:
        s = k * (self.M + self.r) + self.M
        return range(s, (k + 1) * (self.M + self.r))


@dataclass
class BlockCodebook:
    """Lexicographic enumeration of the admissible M-words."""

    M: int
    words: np.ndarray  # (L, M)
    index: dict  # word tuple -> position

    @property
    def L(self) -> int:
        return int(self.words.shape[0])

    @classmethod
    def build(cls, sft: Sft, M: int) -> "BlockCodebook":
        words = sft.word_array(M)
        idx = {tuple(int(s) for s in w): i for i, w in enumerate(words)}
        return cls(M=M, words=words.astype(np.int64), index=idx)

    def lookup(self, word) -> int:
        key = tuple(int(s) for s in word)
        if key not in self.index:
            raise InputError(f"word {key} is not admissible at block length {self.M}")
        return self.index[key]


def _require_full_shift(sft: Optional[Sft], K: int):
    if sft is not None:
        if sft.K != K:
            raise InputError("alphabet size mismatch between points and matrix")
        if not np.all(sft.matrix == 1):
            raise UnsupportedError(
                "the pointwise swap map does not preserve admissibility on a "
                "proper SFT; use the blockwise map instead"
            )


def phi_full(
    omega: Point, omega2: Point, x: Point, sft: Optional[Sft] = None
) -> Point:
    """Pointwise three-case swap on the full shift.

    Output symbol at i: omega2_i where x agrees with omega, omega_i where
    x agrees with omega2 (but not omega), x_i elsewhere.  Exchanging the
    roles of omega and omega2 inverts the map.
    """
    if not (omega.K == omega2.K == x.K):
        raise InputError("all three streams must share one alphabet")
    _require_full_shift(sft, x.K)
    cap = _min_depth(omega, omega2, x)

    def fill(have: int, want: int) -> np.ndarray:
        wa = omega.prefix(want)
        wb = omega2.prefix(want)
        xa = x.prefix(want)
        out = np.where(xa == wa, wb, np.where(xa == wb, wa, xa))
        return out[have:want]

    return BlockLazyPoint(x.K, fill, max_depth=cap)


def _min_depth(*pts: Point) -> Optional[int]:
    caps = [p.max_depth for p in pts if p.max_depth is not None]
    return min(caps) if caps else None


def _sft_map_context(sft: Sft, M: int):
    cls = sft.classify()
    if not (cls.irreducible and cls.aperiodic):
        raise UnsupportedError(
            "blockwise maps need an irreducible aperiodic matrix; run "
            "spectral_decomposition and map each induced component separately"
        )
    if M < 1:
        raise InputError("block length must be >= 1")
    r = cls.primitivity_r
    conn = sft.connecting_words()
    return r, conn


def phi_sft(sft: Sft, omega: Point, omega2: Point, x: Point, M: int) -> Point:
    """Blockwise swap: I^1 blocks carry the three-case rule applied to
    whole M-blocks, gaps carry omega2's content where both neighbouring
    blocks agree with omega2 and a fixed connecting word elsewhere.

    Admissible by construction; reduces to the pointwise map read
    blockwise when r = 0.
    """
    r, conn = _sft_map_context(sft, M)
    if not (omega.K == omega2.K == x.K == sft.K):
        raise InputError("streams and matrix must share one alphabet")
    span = M + r
    cap = _sft_output_cap(omega, omega2, x, M, r)

    def fill(have: int, want: int) -> np.ndarray:
        nblocks = -(-want // span)
        out = _phi_sft_prefix(sft, omega, omega2, x, M, r, conn, nblocks)
        return out[have : min(want, out.size)]

    return BlockLazyPoint(sft.K, fill, max_depth=cap)


def _sft_output_cap(omega: Point, omega2: Point, x: Point, M: int, r: int):
    if all(p.max_depth is None for p in (omega, omega2, x)):
        return None
    span = M + r
    ax = x.available(1 << 62)
    aw = omega.available(1 << 62)
    aw2 = omega2.available(1 << 62)
    # emitting [0, B*span) consumes input blocks 0..B (the last gap peeks
    # at block B), so x and omega must reach (B+1)M and omega2 B*span+M
    bmax = min(min(ax, aw) // M - 1, (aw2 - M) // span)
    return max(bmax, 0) * span


def _block_of(p: Point, start: int, length: int) -> np.ndarray:
    return p.prefix(start + length)[start : start + length]


def _phi_sft_prefix(sft, omega, omega2, x, M, r, conn, nblocks) -> np.ndarray:
    span = M + r
    wa = omega.prefix((nblocks + 1) * M)
    xa = x.prefix((nblocks + 1) * M)
    wa2 = omega2.prefix(nblocks * span + M)
    blocks = np.empty((nblocks + 1, M), dtype=np.int64)
    matches = np.empty(nblocks + 1, dtype=bool)
    for k in range(nblocks + 1):
        x0 = xa[k * M : (k + 1) * M]
        w0 = wa[k * M : (k + 1) * M]
        w1 = wa2[k * span : k * span + M]
        if np.array_equal(x0, w0):
            blocks[k] = w1
        elif np.array_equal(x0, w1):
            blocks[k] = w0
        else:
            blocks[k] = x0
        matches[k] = np.array_equal(blocks[k], w1)
    out = np.empty(nblocks * span, dtype=np.int64)
    for k in range(nblocks):
        s = k * span
        out[s : s + M] = blocks[k]
        if r:
            if matches[k] and matches[k + 1]:
                out[s + M : s + span] = wa2[s + M : s + span]
            else:
                w = conn[(int(blocks[k][-1]), int(blocks[k + 1][0]))]
                out[s + M : s + span] = w
    return out


def phi_encode(sft: Sft, omega: Point, z: Point, M: int) -> Point:
    """Codebook embedding of an L-letter stream along omega.

    Block k carries the codebook word at index (i_k + z_k) mod L, where
    i_k indexes omega's own k-th padded block; gaps copy omega when both
    adjacent z symbols vanish and use connecting words otherwise, so the
    all-zeros stream maps back to omega exactly.
    """
    r, conn = _sft_map_context(sft, M)
    book = BlockCodebook.build(sft, M)
    L = book.L
    if L < 2:
        raise InputError("block length admits a single word; encoding is degenerate")
    if L > 127:
        raise InputError(
            f"codebook size {L} exceeds the stream alphabet cap; use a smaller M"
        )
    if z.K != L:
        raise InputError(f"z must range over {{0..{L - 1}}} (codebook size {L})")
    if omega.K != sft.K:
        raise InputError("omega and matrix must share one alphabet")
    span = M + r
    cap = None
    if omega.max_depth is not None or z.max_depth is not None:
        az = z.available(1 << 62)
        aw = omega.available(1 << 62)
        cap = max(min(az - 1, (aw - M) // span), 0) * span

    def fill(have: int, want: int) -> np.ndarray:
        nblocks = -(-want // span)
        out = _phi_encode_prefix(sft, omega, z, M, r, conn, book, nblocks)
        return out[have : min(want, out.size)]

    return BlockLazyPoint(sft.K, fill, max_depth=cap)


def _phi_encode_prefix(sft, omega, z, M, r, conn, book, nblocks) -> np.ndarray:
    span = M + r
    wa = omega.prefix(nblocks * span + M)
    za = z.prefix(nblocks + 1)
    L = book.L
    out = np.empty(nblocks * span, dtype=np.int64)
    idxs = np.empty(nblocks + 1, dtype=np.int64)
    for k in range(nblocks + 1):
        idxs[k] = (book.lookup(wa[k * span : k * span + M]) + int(za[k])) % L
    for k in range(nblocks):
        s = k * span
        out[s : s + M] = book.words[idxs[k]]
        if r:
            if za[k] == 0 and za[k + 1] == 0:
                out[s + M : s + span] = wa[s + M : s + span]
            else:
                a = int(book.words[idxs[k]][-1])
                b = int(book.words[idxs[k + 1]][0])
                out[s + M : s + span] = conn[(a, b)]
    return out


# -- checkers ----------------------------------------------------------


@dataclass
class InvolutionReport:
    num_samples: int
    depth: int
    ok: bool
    first_bad: Optional[tuple]  # (sample index, position) of the first failure
    mismatch_sets_equal: bool


def check_involution(
    omega: Point, omega2: Point, samples, depth: int, sft: Optional[Sft] = None
) -> InvolutionReport:
    """Round trip through the pointwise swap and back, symbol exact on
    [0, depth); also verifies the agreement-set identity
    {i : omega_i = x_i} = {i : omega2_i = phi(x)_i} on the same window."""
    samples = list(samples)
    first_bad = None
    sets_ok = True
    wa = omega.prefix(depth)
    wb = omega2.prefix(depth)
    for si, x in enumerate(samples):
        y = phi_full(omega, omega2, x, sft)
        back = phi_full(omega2, omega, y, sft)
        xa = x.prefix(depth)
        ya = y.prefix(depth)
        ba = back.prefix(depth)
        diff = np.flatnonzero(ba != xa)
        if diff.size and first_bad is None:
            first_bad = (si, int(diff[0]))
        if not np.array_equal(wa == xa, wb == ya):
            sets_ok = False
    return InvolutionReport(
        num_samples=len(samples),
        depth=depth,
        ok=first_bad is None and sets_ok,
        first_bad=first_bad,
        mismatch_sets_equal=sets_ok,
    )


@dataclass
class BilipschitzReport:
    kind: str
    M: int
    r: int
    checked: int
    vacuous: int  # pairs with no visible mismatch on either side
    violations: int
    worst_lower_slack: Optional[int]  # integer exponent-domain slacks
    worst_upper_slack: Optional[int]

    @property
    def ok(self) -> bool:
        return self.violations == 0


def _first_mismatch_arr(a: np.ndarray, b: np.ndarray) -> Optional[int]:
    m = min(a.size, b.size)
    d = np.flatnonzero(a[:m] != b[:m])
    return int(d[0]) if d.size else None


def check_bilipschitz(
    sft: Sft,
    kind: str,
    M: int,
    num_samples: int = 200,
    depth: int = 512,
    seed: int = 0,
    measure: Optional[MarkovMeasure] = None,
) -> BilipschitzReport:
    """Two-sided distance bounds for the blockwise maps, exact in the
    exponent domain.

    For the blockwise swap with input mismatch depth p and output depth q:
        p(M+r) - M(M+2r) <= q M <= p(M+r) + M^2.
    For the encoding map (input over L symbols):
        p(M+r) - r <= q <= p(M+r) + M.
    Pairs whose mismatch lies beyond the window are counted vacuous.
    """
    if kind not in ("sft", "encode"):
        raise InputError("kind must be sft or encode")
    r, _ = _sft_map_context(sft, M)
    nu = measure or MarkovMeasure.parry(sft)
    rng = np.random.default_rng(seed)
    span = M + r
    checked = vacuous = violations = 0
    worst_lo = worst_hi = None
    out_depth = (depth // span + 2) * span
    uz = None
    if kind == "encode":
        L = sft.count_words(M)
        if L > 127:
            raise InputError("codebook too large for sampling")
        uz = MarkovMeasure.bernoulli(np.full(int(L), 1.0 / int(L)))
    for _ in range(num_samples):
        s1, s2, s3, s4 = (int(v) for v in rng.integers(0, 2**62, size=4))
        if kind == "sft":
            w = MarkovPoint(nu, s1)
            w2 = MarkovPoint(nu, s2)
            x = MarkovPoint(nu, s3)
            y = MarkovPoint(nu, s4)
            fx = phi_sft(sft, w, w2, x, M)
            fy = phi_sft(sft, w, w2, y, M)
            pairs = [
                (w.prefix(depth), x.prefix(depth), w2.prefix(out_depth), fx.prefix(out_depth)),
                (x.prefix(depth), y.prefix(depth), fx.prefix(out_depth), fy.prefix(out_depth)),
            ]
        else:
            w = MarkovPoint(nu, s1)
            z1 = MarkovPoint(uz, s2)
            z2 = MarkovPoint(uz, s3)
            e1 = phi_encode(sft, w, z1, M)
            e2 = phi_encode(sft, w, z2, M)
            pairs = [
                (z1.prefix(depth), z2.prefix(depth), e1.prefix(out_depth), e2.prefix(out_depth))
            ]
        for a, b, fa, fb in pairs:
            p = _first_mismatch_arr(a, b)
            q = _first_mismatch_arr(fa, fb)
            if p is None and q is None:
                vacuous += 1
                continue
            if q is None:
                # outputs agree through the window: the upper bound caps how
                # far the output mismatch can sit past the input one
                q_min = fa.size
                bad = (
                    q_min * M > p * span + M * M
                    if kind == "sft"
                    else q_min > p * span + M
                )
                if bad:
                    violations += 1
                else:
                    vacuous += 1
                continue
            if p is None:
                # inputs agree through the window, so p >= depth; the lower
                # bound then forces q deep as well
                p_min = a.size
                bad = (
                    q * M < p_min * span - M * (M + 2 * r)
                    if kind == "sft"
                    else q < p_min * span - r
                )
                if bad:
                    violations += 1
                else:
                    vacuous += 1
                continue
            checked += 1
            if kind == "sft":
                lo_slack = q * M - (p * span - M * (M + 2 * r))
                hi_slack = (p * span + M * M) - q * M
            else:
                lo_slack = q - (p * span - r)
                hi_slack = (p * span + M) - q
            worst_lo = lo_slack if worst_lo is None else min(worst_lo, lo_slack)
            worst_hi = hi_slack if worst_hi is None else min(worst_hi, hi_slack)
            if lo_slack < 0 or hi_slack < 0:
                violations += 1
    return BilipschitzReport(
        kind=kind,
        M=M,
        r=r,
        checked=checked,
        vacuous=vacuous,
        violations=violations,
        worst_lower_slack=worst_lo,
        worst_upper_slack=worst_hi,
    )


@dataclass
class EquivarianceReport:
    ok: bool
    checked_len: int
    first_bad: Optional[int]


def check_equivariance(
    sft: Sft, omega: Point, omega2: Point, x: Point, M: int, depth: int
) -> EquivarianceReport:
    """shift^(M+r) after the map equals the map built from shifted inputs
    (omega by M, omega2 by M+r) applied to shift^M x."""
    r, _ = _sft_map_context(sft, M)
    span = M + r
    n = depth - span
    if n < 1:
        raise InputError("depth too small for the equivariance window")
    lhs = phi_sft(sft, omega, omega2, x, M).shift(span).prefix(n)
    rhs = phi_sft(sft, omega.shift(M), omega2.shift(span), x.shift(M), M).prefix(n)
    diff = np.flatnonzero(lhs != rhs)
    return EquivarianceReport(
        ok=diff.size == 0,
        checked_len=n,
        first_bad=int(diff[0]) if diff.size else None,
    )
