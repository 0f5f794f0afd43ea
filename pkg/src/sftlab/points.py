"""One-sided symbol streams and the cylinder metric.

A Point materializes symbols on demand; backends cover explicit finite
prefixes, eventually periodic streams, Markov samples and lazily computed
streams (images of block maps, assembled constructions).

Distances follow the first-mismatch convention rho(x, y) = K^-j with
j the first index where the streams differ.  A finite window can fail to
resolve a distance, so metric queries return Interval values: exact when
a mismatch is visible or identity is known, [0, K^-m] after scanning m
symbols without a mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputError
from .intervals import Interval, exact

#: smallest positive double; stands in for positive values below float range
TINY = 5e-324

#: beyond this mismatch depth K^-j is kept as an interval [0, 2^-1000]
EXP_CAP = 1000


def _pow_neg(K: int, g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    with np.errstate(over="ignore", under="ignore"):
        v = np.power(float(K), -g)
    return np.maximum(v, TINY)


class Point:
    """Base class: a lazily extendable stream over {0..K-1}."""

    def __init__(self, K: int):
        if K < 2 or K > 127:
            raise InputError("alphabet size must be between 2 and 127")
        self.K = K
        self._buf = np.empty(0, dtype=np.int64)

    #: None for unbounded backends, otherwise the materializable depth
    max_depth: Optional[int] = None

    def _extend_to(self, n: int) -> None:
        raise NotImplementedError

    @property
    def known_depth(self) -> int:
        return self._buf.size

    def available(self, n: int) -> int:
        """How many of the first n symbols this backend can materialize."""
        return n if self.max_depth is None else min(n, self.max_depth)

    def prefix(self, n: int) -> np.ndarray:
        """First n symbols; raises when the backend cannot reach depth n."""
        if self.max_depth is not None and n > self.max_depth:
            raise InputError(
                f"point only materializes {self.max_depth} symbols, {n} requested"
            )
        if self._buf.size < n:
            self._extend_to(n)
        return self._buf[:n]

    def bounded_prefix(self, n: int) -> np.ndarray:
        return self.prefix(self.available(n))

    def symbol_at(self, i: int) -> int:
        return int(self.prefix(i + 1)[i])

    def shift(self, k: int) -> "Point":
        if k == 0:
            return self
        return _ShiftedPoint(self, k)

    def identity_key(self):
        return (id(self), 0)


def same_stream(x: Point, y: Point) -> bool:
    """True when both arguments provably denote the same stream (identity,
    possibly through equal shifts of one backend).  No symbolic deciding."""
    return x.identity_key() == y.identity_key()


class _ShiftedPoint(Point):
    def __init__(self, base: Point, offset: int):
        if offset < 0:
            raise InputError("shift offset must be >= 0")
        super().__init__(base.K)
        self._base = base
        self._off = offset

    @property
    def max_depth(self):  # type: ignore[override]
        md = self._base.max_depth
        return None if md is None else max(md - self._off, 0)

    def _extend_to(self, n: int) -> None:
        self._buf = self._base.prefix(self._off + n)[self._off :]

    def shift(self, k: int) -> Point:
        if k == 0:
            return self
        return _ShiftedPoint(self._base, self._off + k)

    def identity_key(self):
        base_id, off = self._base.identity_key()
        return (base_id, off + self._off)


class PrefixPoint(Point):
    """Finite window: only len(symbols) symbols exist."""

    def __init__(self, symbols, K: int):
        super().__init__(K)
        a = np.asarray(symbols, dtype=np.int64)
        if a.size and (a.min() < 0 or a.max() >= K):
            raise InputError(f"symbol out of range for alphabet of size {K}")
        self._buf = a
        self.max_depth = a.size

    def _extend_to(self, n: int) -> None:
        raise InputError("prefix point cannot be extended")


class PeriodicPoint(Point):
    """pre + per + per + ... ; per must be nonempty."""

    def __init__(self, pre, per, K: int):
        super().__init__(K)
        self.pre = np.asarray(pre, dtype=np.int64)
        self.per = np.asarray(per, dtype=np.int64)
        if self.per.size == 0:
            raise InputError("periodic part must be nonempty")
        allsym = np.concatenate([self.pre, self.per])
        if allsym.min() < 0 or allsym.max() >= K:
            raise InputError(f"symbol out of range for alphabet of size {K}")
        self._canon = _canonical_periodic(self.pre.tolist(), self.per.tolist())

    def identity_key(self):
        # equal eventually-periodic streams share a canonical form, so
        # equality between them is provable without window scanning
        return (("periodic", self.K, self._canon), 0)

    def _extend_to(self, n: int) -> None:
        reps = max(1, -(-(n - self.pre.size) // self.per.size)) if n > self.pre.size else 1
        self._buf = np.concatenate([self.pre] + [self.per] * reps)


def _canonical_periodic(pre, per):
    # primitive period, then absorb pre symbols that just repeat its tail
    for d in range(1, len(per) + 1):
        if len(per) % d == 0 and per == per[: d] * (len(per) // d):
            per = per[:d]
            break
    pre = list(pre)
    while pre and pre[-1] == per[-1]:
        pre.pop()
        per = per[-1:] + per[:-1]
    return (tuple(pre), tuple(per))


class MarkovPoint(Point):
    """Stationary sample of a Markov measure; extension re-draws nothing,
    the stored generator continues the same stream deterministically."""

    def __init__(self, measure, seed: int):
        super().__init__(measure.K)
        self.measure = measure
        self.seed = int(seed)
        self._rng = np.random.default_rng(self.seed)
        cum = np.cumsum(measure.P, axis=1)
        cum[:, -1] = 1.0
        self._rows = cum.tolist()
        self._picum = np.cumsum(measure.pi)

    def _extend_to(self, n: int) -> None:
        want = max(n, 2 * self._buf.size, 256)
        have = self._buf.size
        u = self._rng.random(want - have)
        out = np.empty(want - have, dtype=np.int64)
        pos = 0
        if have == 0:
            first = int(np.searchsorted(self._picum, u[0], side="right"))
            out[0] = min(first, self.K - 1)
            pos = 1
        cur = int(out[0]) if have == 0 else int(self._buf[-1])
        rows = self._rows
        for i in range(pos, u.size):
            row = rows[cur]
            ui = u[i]
            s = 0
            while row[s] <= ui:
                s += 1
            cur = s
            out[i] = s
        self._buf = np.concatenate([self._buf, out])


class BlockLazyPoint(Point):
    """Stream computed on demand by a callable fill(have, want) -> ndarray
    of appended symbols.  Used for map images and assembled constructions."""

    def __init__(self, K: int, fill, max_depth: Optional[int] = None):
        super().__init__(K)
        self._fill = fill
        if max_depth is not None:
            self.max_depth = max_depth

    def _extend_to(self, n: int) -> None:
        while self._buf.size < n:
            chunk = np.asarray(self._fill(self._buf.size, n), dtype=np.int64)
            if chunk.size == 0:
                raise InputError("lazy backend failed to make progress")
            self._buf = np.concatenate([self._buf, chunk])


def parse_point(literal: str, K: Optional[int] = None) -> Point:
    """Build a Point from a command-line literal.

    Forms: 'prefix:00110', 'periodic:<pre>/<per>' (pre may be empty),
    'markov:<measure-file>:<seed>'.  Symbols in literals are single digits.
    """
    if ":" not in literal:
        raise InputError(f"bad point literal {literal!r}")
    kind, rest = literal.split(":", 1)

    def digits(s: str) -> list:
        if not all(c.isdigit() for c in s):
            raise InputError(f"bad symbol string {s!r} in point literal")
        return [int(c) for c in s]

    if kind == "prefix":
        sym = digits(rest)
        if not sym:
            raise InputError("prefix literal needs at least one symbol")
        k = K if K is not None else max(max(sym) + 1, 2)
        return PrefixPoint(sym, k)
    if kind == "periodic":
        if "/" not in rest:
            raise InputError("periodic literal needs '<pre>/<per>'")
        pre_s, per_s = rest.split("/", 1)
        pre, per = digits(pre_s), digits(per_s)
        if not per:
            raise InputError("periodic part must be nonempty")
        k = K if K is not None else max(max(pre + per) + 1, 2)
        return PeriodicPoint(pre, per, k)
    if kind == "markov":
        from .measures import MarkovMeasure

        if ":" not in rest:
            raise InputError("markov literal needs '<file>:<seed>'")
        path, seed_s = rest.rsplit(":", 1)
        try:
            seed = int(seed_s)
        except ValueError:
            raise InputError(f"bad seed {seed_s!r} in point literal") from None
        return MarkovPoint(MarkovMeasure.from_file(path), seed)
    raise InputError(f"unknown point literal kind {kind!r}")


# -- metric ------------------------------------------------------------


def first_mismatch(x: Point, y: Point, depth: int) -> Optional[int]:
    """Exact first index < depth where the streams differ, scanning only
    what both backends materialize; None when no mismatch is visible."""
    if same_stream(x, y):
        return None
    w = min(x.available(depth), y.available(depth))
    xa = x.prefix(w)
    ya = y.prefix(w)
    diff = np.flatnonzero(xa != ya)
    return int(diff[0]) if diff.size else None


def rho(x: Point, y: Point, lookahead: int = 64) -> Interval:
    """Distance K^-(first mismatch), resolved within the first `lookahead`
    symbols.  Exact 0 only for provably identical streams."""
    if x.K != y.K:
        raise InputError("points live over different alphabets")
    if same_stream(x, y):
        return exact(0.0)
    w = min(x.available(lookahead), y.available(lookahead))
    j = first_mismatch(x, y, lookahead)
    if j is not None:
        if j > EXP_CAP:
            return Interval(0.0, float(_pow_neg(x.K, EXP_CAP)))
        return exact(float(_pow_neg(x.K, j)))
    return Interval(0.0, float(_pow_neg(x.K, w)))


def rho_n(x: Point, y: Point, n: int, lookahead: int = 64) -> Interval:
    """max of rho over the first n shifts, with visibility capped at the
    absolute depth `lookahead` (so the slack shrinks as lookahead grows)."""
    if n < 1:
        raise InputError("rho_n needs n >= 1")
    traj = distance_trajectory(x, y, n, tail=max(lookahead - n, 0))
    return Interval(float(traj.lo.max()), float(traj.hi.max()))


@dataclass
class DistanceTrajectory:
    """d_i = rho(shift^i x, shift^i y) for i < horizon, as interval arrays.

    resolved[i] marks entries whose value is exact (lo == hi); unresolved
    entries carry [0, K^-m] with m the symbols still visible past i.
    """

    K: int
    horizon: int
    lo: np.ndarray
    hi: np.ndarray
    resolved: np.ndarray
    identical: bool = False

    def running_average(self):
        """(lo, hi) arrays of (1/n) sum_{i<n} d_i for n = 1..horizon."""
        n = np.arange(1, self.horizon + 1, dtype=float)
        return np.cumsum(self.lo) / n, np.cumsum(self.hi) / n

    def average(self, n: int) -> Interval:
        if not 1 <= n <= self.horizon:
            raise InputError("average window exceeds the trajectory horizon")
        return Interval(float(self.lo[:n].mean()), float(self.hi[:n].mean()))


def distance_trajectory(x: Point, y: Point, horizon: int, tail: int = 64) -> DistanceTrajectory:
    """Shared scan for all per-shift distances up to `horizon`.

    Both streams are materialized to horizon + tail where possible; the
    extra tail keeps late entries resolved in the generic case.
    """
    if x.K != y.K:
        raise InputError("points live over different alphabets")
    K = x.K
    if same_stream(x, y):
        z = np.zeros(horizon)
        return DistanceTrajectory(
            K, horizon, z, z.copy(), np.ones(horizon, dtype=bool), identical=True
        )
    D = min(x.available(horizon + tail), y.available(horizon + tail))
    if D < horizon:
        raise InputError(
            f"points must be materializable to the horizon ({horizon}); got {D}"
        )
    xa = x.prefix(D)
    ya = y.prefix(D)
    mism = np.flatnonzero(xa != ya)
    idx = np.searchsorted(mism, np.arange(horizon))
    has = idx < mism.size
    nxt = mism[np.minimum(idx, max(mism.size - 1, 0))] if mism.size else np.zeros(horizon, dtype=np.int64)
    gap = np.where(has, nxt - np.arange(horizon), 0)
    vis = D - np.arange(horizon)
    resolved = has & (gap <= EXP_CAP)
    val = _pow_neg(K, np.where(has, gap, vis))
    lo = np.where(resolved, val, 0.0)
    hi = val
    return DistanceTrajectory(K, horizon, lo, hi, resolved)


def avg_distance(x: Point, y: Point, n: int, lookahead: Optional[int] = None) -> Interval:
    """Mean of the first n per-shift distances.  `lookahead` is the absolute
    materialization depth (default n + 64); interval width stays below
    K^-(lookahead - n) plus accumulated sub-float-range slack."""
    if n < 1:
        raise InputError("avg_distance needs n >= 1")
    depth = lookahead if lookahead is not None else n + 64
    if depth < n:
        raise InputError("lookahead must reach at least n")
    traj = distance_trajectory(x, y, n, tail=depth - n)
    return traj.average(n)
