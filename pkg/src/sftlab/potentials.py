"""Potentials on pairs of streams and their Birkhoff sums.

A potential maps an (omega, x) pair of streams to R^d while only looking
at a bounded window of each (cylinder tables of depth k), or decays
geometrically in the agreement depth (the metric potential rho).  Partial
windows evaluate to interval boxes; everything downstream consumes those
brackets rather than pretending a value is known.

The batch evaluator word_sum_bounds is the workhorse for partition
functions and cylinder counting: given all admissible words of length n
it brackets sum_{i<n} f(shift^i omega, shift^i x) over each cylinder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError, PreconditionError, UnsupportedError
from .intervals import Box, Interval
from .points import Point, _pow_neg
from .sft import Sft

DEFAULT_CYCLE_BUDGET = 1 << 22


class Potential:
    """Base: d-dimensional, evaluated on finite prefixes as interval boxes."""

    dim: int = 1
    #: cylinder depth when finite, None for geometric-window potentials
    window: Optional[int] = None
    omega_independent: bool = False

    def eval_box(self, w_prefix, x_prefix) -> Box:
        raise NotImplementedError

    def var_bound(self, i: int) -> float:
        """Upper bound on |f(pair) - f(pair')| over pairs agreeing to depth i."""
        raise NotImplementedError

    def var_report(self, max_i: int = 64):
        bounds = [self.var_bound(i) for i in range(max_i + 1)]
        return VarReport(bounds=bounds, tail_estimate=self._var_tail(max_i))

    def _var_tail(self, max_i: int) -> float:
        return 0.0


@dataclass
class VarReport:
    bounds: list
    tail_estimate: float

    @property
    def summable(self) -> bool:
        return math.isfinite(sum(self.bounds) + self.tail_estimate)


class CylinderPotential(Potential):
    """Depth-k table: the value depends on omega|_k and x|_k only.

    Values live in a dense array indexed by big-endian window codes, so a
    partial window corresponds to a contiguous code range and interval
    evaluation is a slice reduction.
    """

    def __init__(self, depth: int, dim: int, values: np.ndarray, K: int, K_omega: int):
        if depth < 1:
            raise InputError("cylinder depth must be >= 1")
        if depth > 6:
            raise InputError("cylinder depth beyond 6 is not supported")
        self.depth = depth
        self.dim = dim
        self.K = K
        self.K_omega = K_omega
        self.window = depth
        vals = np.asarray(values, dtype=float)
        want = (K_omega**depth, K**depth, dim)
        if vals.shape != want:
            raise InputError(f"value array must have shape {want}, got {vals.shape}")
        self.values = vals
        self.omega_independent = bool(
            np.all(vals == vals[:1]) if vals.shape[0] > 1 else True
        )
        self._var_cache: dict = {}

    # -- construction ---------------------------------------------------

    @classmethod
    def from_table(cls, depth: int, dim: int, table: dict, K: int, K_omega: Optional[int] = None):
        """table maps (omega-word, x-word) tuples to value vectors; missing
        pairs default to zero."""
        if K_omega is None:
            K_omega = K
        vals = np.zeros((K_omega**depth, K**depth, dim))
        for (wi, xi), v in table.items():
            if len(wi) != depth or len(xi) != depth:
                raise InputError("table words must all have the cylinder depth")
            vals[word_code(wi, K_omega), word_code(xi, K)] = np.atleast_1d(v)
        return cls(depth, dim, vals, K, K_omega)

    @classmethod
    def from_file(cls, path, K: Optional[int] = None):
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        if not lines:
            raise InputError(f"{path}: empty potential file")
        head = _parse_kv(lines[0])
        if head.get("kind") != "cylinder":
            raise InputError(f"{path}: expected kind=cylinder header")
        try:
            depth = int(head["depth"])
            dim = int(head["dim"])
        except (KeyError, ValueError):
            raise InputError(f"{path}: header needs depth= and dim=") from None
        table = {}
        maxsym = 1
        for ln in lines[1:]:
            toks = ln.split()
            if len(toks) != 2 + dim:
                raise InputError(f"{path}: bad line {ln!r}")
            wi = tuple(int(c) for c in toks[0])
            xi = tuple(int(c) for c in toks[1])
            maxsym = max(maxsym, *(s + 1 for s in wi + xi))
            table[(wi, xi)] = np.array([float(t) for t in toks[2:]])
        k = K if K is not None else max(maxsym, 2)
        return cls.from_table(depth, dim, table, K=k, K_omega=k)

    # -- evaluation -----------------------------------------------------

    def eval_box(self, w_prefix, x_prefix) -> Box:
        k = self.depth
        wlo, whi = _code_range(w_prefix, k, self.K_omega)
        xlo, xhi = _code_range(x_prefix, k, self.K)
        block = self.values[wlo:whi, xlo:xhi]
        return Box(block.min(axis=(0, 1)), block.max(axis=(0, 1)))

    def var_bound(self, i: int) -> float:
        if i >= self.depth:
            return 0.0
        if i not in self._var_cache:
            kw = self.K_omega ** (self.depth - i)
            kx = self.K ** (self.depth - i)
            blocks = self.values.reshape(
                self.K_omega**i, kw, self.K**i, kx, self.dim
            )
            spread = blocks.max(axis=(1, 3)) - blocks.min(axis=(1, 3))
            self._var_cache[i] = float(
                np.sqrt((spread**2).sum(axis=-1)).max()
            )
        return self._var_cache[i]


class MetricPotential(Potential):
    """f(omega, x) = rho(omega, x): one-dimensional, window-free."""

    def __init__(self, K: int):
        self.K = K
        self.dim = 1
        self.window = None

    def eval_box(self, w_prefix, x_prefix) -> Box:
        w = np.asarray(w_prefix)
        x = np.asarray(x_prefix)
        m = min(w.size, x.size)
        diff = np.flatnonzero(w[:m] != x[:m])
        if diff.size:
            v = float(_pow_neg(self.K, int(diff[0])))
            return Box.point(v)
        return Box(np.zeros(1), np.array([float(_pow_neg(self.K, m))]))

    def var_bound(self, i: int) -> float:
        return float(_pow_neg(self.K, i))

    def _var_tail(self, max_i: int) -> float:
        return float(_pow_neg(self.K, max_i)) / (self.K - 1)


class AffinePotential(Potential):
    """Scalar composite <p, f - alpha> of a base potential."""

    def __init__(self, base: Potential, p, alpha):
        self.base = base
        self.p = np.atleast_1d(np.asarray(p, dtype=float))
        self.alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        if self.p.shape != (base.dim,) or self.alpha.shape != (base.dim,):
            raise InputError("p and alpha must match the base dimension")
        self.dim = 1
        self.window = base.window
        self.omega_independent = base.omega_independent

    def eval_box(self, w_prefix, x_prefix) -> Box:
        iv = self.base.eval_box(w_prefix, x_prefix).shift(-self.alpha).dot(self.p)
        return Box(np.array([iv.lo]), np.array([iv.hi]))

    def var_bound(self, i: int) -> float:
        return float(np.linalg.norm(self.p)) * self.base.var_bound(i)

    def _var_tail(self, max_i: int) -> float:
        return float(np.linalg.norm(self.p)) * self.base._var_tail(max_i)

    @classmethod
    def from_file(cls, path, K: Optional[int] = None):
        import os

        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        head = _parse_kv(lines[0]) if lines else {}
        if head.get("kind") != "affine":
            raise InputError(f"{path}: expected kind=affine header")
        try:
            base_path = head["base"]
            p = np.array([float(t) for t in head["p"].split(",")])
            alpha = np.array([float(t) for t in head["alpha"].split(",")])
        except (KeyError, ValueError):
            raise InputError(f"{path}: header needs base=, p=, alpha=") from None
        if not os.path.isabs(base_path):
            base_path = os.path.join(os.path.dirname(os.path.abspath(path)), base_path)
        return cls(load_potential(base_path, K=K), p, alpha)


def load_potential(path, K: Optional[int] = None) -> Potential:
    """Dispatch on the kind= header of a potential file."""
    with open(path) as fh:
        for ln in fh:
            ln = ln.strip()
            if ln and not ln.startswith("#"):
                head = _parse_kv(ln)
                break
        else:
            raise InputError(f"{path}: empty potential file")
    kind = head.get("kind")
    if kind == "cylinder":
        return CylinderPotential.from_file(path, K=K)
    if kind == "metric":
        if K is None:
            try:
                K = int(head["K"])
            except (KeyError, ValueError):
                raise InputError(f"{path}: metric potential needs K= or context") from None
        return MetricPotential(K)
    if kind == "affine":
        return AffinePotential.from_file(path, K=K)
    raise InputError(f"{path}: unknown potential kind {kind!r}")


def frequency_potential(K: int, symbol: int, K_omega: Optional[int] = None) -> CylinderPotential:
    """Depth-1 indicator of x_0 == symbol; independent of omega."""
    if not 0 <= symbol < K:
        raise InputError("frequency symbol out of range")
    ko = K if K_omega is None else K_omega
    vals = np.zeros((ko, K, 1))
    vals[:, symbol, 0] = 1.0
    return CylinderPotential(1, 1, vals, K, ko)


def word_code(word, K: int) -> int:
    c = 0
    for s in word:
        c = c * K + int(s)
    return c


def _code_range(prefix, k: int, K: int):
    """Code range [lo, hi) of all length-k words extending the prefix."""
    p = list(prefix)[:k]
    free = k - len(p)
    base = word_code(p, K) * (K**free)
    return base, base + K**free


def _parse_kv(line: str) -> dict:
    out = {}
    for tok in line.split():
        if "=" in tok:
            key, val = tok.split("=", 1)
            out[key] = val
    return out


# -- Birkhoff sums -----------------------------------------------------


def _omega_prefix(f: Potential, omega: Optional[Point], need: int) -> np.ndarray:
    if omega is None:
        if not f.omega_independent:
            raise InputError("this potential depends on omega; supply one")
        return np.zeros(need, dtype=np.int64)
    return omega.bounded_prefix(need)


def birkhoff_sum(
    f: Potential,
    omega: Optional[Point],
    x: Point,
    a: int,
    b: int,
    lookahead: int = 64,
) -> Box:
    """Bracket of sum_{i=a}^{b-1} f(shift^i omega, shift^i x).

    The eval window is the cylinder depth for table potentials and
    `lookahead` for the metric potential; short prefixes widen the
    bracket instead of failing.
    """
    if not 0 <= a <= b:
        raise InputError("need 0 <= a <= b")
    cums = birkhoff_prefix_sums(f, omega, x, b, lookahead=lookahead)
    lo = cums[0][b] - cums[0][a]
    hi = cums[1][b] - cums[1][a]
    return Box(lo, hi)


def birkhoff_prefix_sums(
    f: Potential,
    omega: Optional[Point],
    x: Point,
    n: int,
    lookahead: int = 64,
):
    """(cum_lo, cum_hi) arrays of shape (n+1, d): per-position bracket sums.

    Entry j brackets S_0^j; cum_lo[j] - cum_lo[a] brackets S_a^j because
    the per-position brackets are independent.
    """
    win = f.window if f.window is not None else lookahead
    depth = n - 1 + win
    wa = _omega_prefix(f, omega, depth)
    xa = x.bounded_prefix(depth)
    d = f.dim
    lo = np.zeros((n + 1, d))
    hi = np.zeros((n + 1, d))
    if isinstance(f, CylinderPotential) or (
        isinstance(f, AffinePotential) and isinstance(f.base, CylinderPotential)
    ):
        plo, phi = _cyl_position_bounds(f, wa, xa, n)
    elif isinstance(f, MetricPotential):
        plo, phi = _metric_position_bounds(f.K, wa, xa, n)
    elif isinstance(f, AffinePotential) and isinstance(f.base, MetricPotential):
        blo, bhi = _metric_position_bounds(f.base.K, wa, xa, n)
        plo, phi = _affine_transform(f, blo, bhi)
    else:
        plo = np.empty((n, d))
        phi = np.empty((n, d))
        for i in range(n):
            bx = f.eval_box(wa[i : i + win], xa[i : i + win])
            plo[i] = bx.lo
            phi[i] = bx.hi
    np.cumsum(plo, axis=0, out=lo[1:])
    np.cumsum(phi, axis=0, out=hi[1:])
    return lo, hi


def _cyl_position_bounds(f: Potential, wa: np.ndarray, xa: np.ndarray, n: int):
    base = f.base if isinstance(f, AffinePotential) else f
    k = base.depth
    d = base.dim
    lo = np.empty((n, d))
    hi = np.empty((n, d))
    full = min(wa.size, xa.size) - k + 1  # positions whose windows are complete
    full = max(min(full, n), 0)
    if full > 0:
        wc = _window_codes(wa[: full + k - 1], k, base.K_omega)
        xc = _window_codes(xa[: full + k - 1], k, base.K)
        block = base.values[wc, xc]
        lo[:full] = block
        hi[:full] = block
    for i in range(full, n):
        bx = base.eval_box(wa[i : i + k], xa[i : i + k])
        lo[i] = bx.lo
        hi[i] = bx.hi
    if isinstance(f, AffinePotential):
        return _affine_transform(f, lo, hi)
    return lo, hi


def _metric_position_bounds(K: int, wa: np.ndarray, xa: np.ndarray, n: int):
    m = min(wa.size, xa.size)
    mism = np.flatnonzero(wa[:m] != xa[:m])
    idx = np.searchsorted(mism, np.arange(n))
    has = idx < mism.size
    nxt = mism[np.minimum(idx, max(mism.size - 1, 0))] if mism.size else np.zeros(n, dtype=np.int64)
    gap = np.where(has, nxt - np.arange(n), m - np.arange(n))
    val = _pow_neg(K, gap).reshape(-1, 1)
    lo = np.where(has.reshape(-1, 1), val, 0.0)
    return lo, val.copy()


def _affine_transform(f: AffinePotential, lo: np.ndarray, hi: np.ndarray):
    cen_lo = lo - f.alpha
    cen_hi = hi - f.alpha
    pos = np.clip(f.p, 0, None)
    neg = np.clip(f.p, None, 0)
    out_lo = cen_lo @ pos + cen_hi @ neg
    out_hi = cen_hi @ pos + cen_lo @ neg
    return out_lo.reshape(-1, 1), out_hi.reshape(-1, 1)


def word_sum_bounds(f: Potential, omega: Optional[Point], words: np.ndarray):
    """Bracket sum_{i<n} f(shift^i omega, x) over x in [W] for every row W.

    Returns (lo, hi) of shape (num_words, d).  Positions whose full window
    sticks out past the word end are bracketed over all symbol completions
    (an outer bracket; admissibility of continuations only tightens it).
    """
    nw, n = words.shape
    if isinstance(f, AffinePotential):
        blo, bhi = word_sum_bounds(f.base, omega, words)
        return _affine_transform_nd(f, blo, bhi, n)
    if isinstance(f, CylinderPotential):
        return _cyl_word_sum_bounds(f, omega, words)
    if isinstance(f, MetricPotential):
        wa = _omega_prefix(f, omega, n)
        return _metric_word_sum_bounds(f.K, wa[:n], words)
    # generic fallback: per-word loop
    lo = np.zeros((nw, f.dim))
    hi = np.zeros((nw, f.dim))
    wa = _omega_prefix(f, omega, n + 64)
    for r in range(nw):
        for i in range(n):
            bx = f.eval_box(wa[i:], words[r, i:])
            lo[r] += bx.lo
            hi[r] += bx.hi
    return lo, hi


def _affine_transform_nd(f: AffinePotential, lo: np.ndarray, hi: np.ndarray, n: int):
    # the inputs are n-term sums, so the centering scales with n
    cen_lo = lo - n * f.alpha
    cen_hi = hi - n * f.alpha
    pos = np.clip(f.p, 0, None)
    neg = np.clip(f.p, None, 0)
    return (cen_lo @ pos + cen_hi @ neg).reshape(-1, 1), (
        cen_hi @ pos + cen_lo @ neg
    ).reshape(-1, 1)


def _cyl_word_sum_bounds(f: CylinderPotential, omega: Optional[Point], words: np.ndarray):
    nw, n = words.shape
    k = f.depth
    d = f.dim
    wa = _omega_prefix(f, omega, n - 1 + k)
    lo = np.zeros((nw, d))
    hi = np.zeros((nw, d))
    wcodes = _window_codes(wa, k, f.K_omega)
    # positions with a full x window are exact
    full = max(n - k + 1, 0)
    if full > 0:
        xcodes = _window_codes_2d(words, k, f.K)
        for i in range(full):
            block = f.values[wcodes[i], xcodes[:, i]]
            lo += block
            hi += block
    # trailing positions: reduce over x completions (and omega completions
    # when omega itself runs short)
    for i in range(full, n):
        s = n - i
        vmin, vmax = f.partial_tables(s)
        stub = _stub_codes(words[:, i:], f.K)
        if i + k <= wa.size:
            lo += vmin[wcodes[i], stub]
            hi += vmax[wcodes[i], stub]
        else:
            sw = max(wa.size - i, 0)
            wlo, whi = _code_range(wa[i : i + sw], k, f.K_omega)
            lo += vmin[wlo:whi, stub].min(axis=0)
            hi += vmax[wlo:whi, stub].max(axis=0)
    return lo, hi


def _window_codes(a: np.ndarray, k: int, K: int) -> np.ndarray:
    n = a.size - k + 1
    if n <= 0:
        return np.zeros(0, dtype=np.int64)
    codes = np.zeros(n, dtype=np.int64)
    for j in range(k):
        codes = codes * K + a[j : j + n]
    return codes


def _window_codes_2d(words: np.ndarray, k: int, K: int) -> np.ndarray:
    nw, n = words.shape
    cols = n - k + 1
    codes = np.zeros((nw, cols), dtype=np.int64)
    for j in range(k):
        codes = codes * K + words[:, j : j + cols]
    return codes


def _stub_codes(stubs: np.ndarray, K: int) -> np.ndarray:
    codes = np.zeros(stubs.shape[0], dtype=np.int64)
    for j in range(stubs.shape[1]):
        codes = codes * K + stubs[:, j]
    return codes


def _partial_tables(f: CylinderPotential, s: int):
    """(min, max) over completions of an x stub of length s, per omega code."""
    kx_free = f.K ** (f.depth - s)
    resh = f.values.reshape(f.K_omega**f.depth, f.K**s, kx_free, f.dim)
    return resh.min(axis=2), resh.max(axis=2)


# cache partial tables on the potential instance
def _partial_tables_cached(self: CylinderPotential, s: int):
    cache = getattr(self, "_ptab", None)
    if cache is None:
        cache = {}
        self._ptab = cache
    if s not in cache:
        cache[s] = _partial_tables(self, s)
    return cache[s]


CylinderPotential.partial_tables = _partial_tables_cached  # type: ignore[attr-defined]


def _metric_word_sum_bounds(K: int, wa: np.ndarray, words: np.ndarray):
    """Backward scan: gap to the next visible mismatch against omega.

    lo counts trailing match runs as 0 (mismatch may never come), hi
    treats the word end as a mismatch (it may come immediately).
    """
    nw, n = words.shape
    mism = words != wa[np.newaxis, :n]
    lo = np.zeros(nw)
    hi = np.zeros(nw)
    steps = np.full(nw, np.inf)
    for i in range(n - 1, -1, -1):
        steps = np.where(mism[:, i], 0.0, steps + 1.0)
        lo += np.where(np.isfinite(steps), _pow_neg(K, np.minimum(steps, 2 * EXPCAP)), 0.0)
        hi += _pow_neg(K, np.minimum(steps, n - i))
    return lo.reshape(-1, 1), hi.reshape(-1, 1)


EXPCAP = 600


# -- hypothesis checkers and orbit-average estimates -------------------


@dataclass
class SegmentCheck:
    ok: bool
    bound: float
    measured: Interval
    slack: float
    hypothesis_margin: float
    unnormalized_bound: float
    unnormalized_measured: Interval


def segment_average_bound_check(
    f: Potential,
    omega: Optional[Point],
    x: Point,
    alpha,
    eps: float,
    N: int,
    m: int,
    n: int,
    lookahead: int = 64,
) -> SegmentCheck:
    """If every running average over (N, n] stays eps-close to alpha, the
    segment average over [m, n) stays within (n+m) eps / (n-m) of alpha.

    The hypothesis is verified from the data (PreconditionError when it
    fails); both the normalized comparison and the un-normalized gap
    |S_m^n - (n-m) alpha| < (n+m) eps are reported.
    """
    if not (0 <= N <= m < n):
        raise InputError("need 0 <= N <= m < n")
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    cl, ch = birkhoff_prefix_sums(f, omega, x, n, lookahead=lookahead)
    worst = 0.0
    for j in range(N + 1, n + 1):
        dist = Box(cl[j] / j, ch[j] / j).norm_dist_to(alpha)
        worst = max(worst, dist.hi)
        if dist.hi >= eps:
            raise PreconditionError(
                f"running average at j={j} is {dist.hi:.6g} from alpha, needs < {eps}"
            )
    seg = Box(cl[n] - cl[m], ch[n] - ch[m])
    norm_meas = seg.scale(1.0 / (n - m)).norm_dist_to(alpha)
    bound = (n + m) * eps / (n - m)
    raw_meas = seg.norm_dist_to((n - m) * alpha)
    return SegmentCheck(
        ok=norm_meas.hi < bound,
        bound=bound,
        measured=norm_meas,
        slack=bound - norm_meas.hi,
        hypothesis_margin=worst,
        unnormalized_bound=(n + m) * eps,
        unnormalized_measured=raw_meas,
    )


@dataclass
class LimitSetEstimate:
    ns: np.ndarray
    averages: np.ndarray  # midpoints, shape (len(ns), d)
    widths: np.ndarray
    clusters: list  # (representative vector, radius, member count)
    cluster_radius: float
    note: str = ""


def limit_set_estimate(
    f: Potential,
    omega: Optional[Point],
    x: Point,
    horizon: int,
    cluster_radius: Optional[float] = None,
    lookahead: int = 64,
) -> LimitSetEstimate:
    """Accumulation structure of running averages S_0^n / n.

    Samples sit on a geometric ladder down from the horizon plus a dense
    tail window over the last fifth; simple single-linkage clustering at
    `cluster_radius` (default: 3x the spread over the last decade).
    """
    if horizon < 100:
        raise InputError("limit-set estimation needs horizon >= 100")
    cl, ch = birkhoff_prefix_sums(f, omega, x, horizon, lookahead=lookahead)
    ns = set()
    v = horizon
    while v >= 100:
        ns.add(v)
        v = int(math.ceil(v * 0.5))
    t0 = int(0.8 * horizon)
    stride = max(1, (horizon - t0) // 256)
    ns.update(range(t0, horizon + 1, stride))
    ns = np.array(sorted(n for n in ns if n >= 1))
    mids = np.array([(cl[n] + ch[n]) / (2.0 * n) for n in ns])
    widths = np.array([float(np.max(ch[n] - cl[n]) / n) for n in ns])
    if cluster_radius is None:
        decade = mids[ns >= horizon // 10]
        spread = 0.0
        if decade.shape[0] > 1:
            dm = decade[:, np.newaxis, :] - decade[np.newaxis, :, :]
            spread = float(np.sqrt((dm**2).sum(axis=-1)).max())
        cluster_radius = max(3.0 * spread, 1e-12)
    clusters = _single_linkage(mids, cluster_radius)
    return LimitSetEstimate(ns, mids, widths, clusters, cluster_radius)


def _single_linkage(pts: np.ndarray, radius: float) -> list:
    m = pts.shape[0]
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    diffs = pts[:, np.newaxis, :] - pts[np.newaxis, :, :]
    dist = np.sqrt((diffs**2).sum(axis=-1))
    for i in range(m):
        for j in range(i + 1, m):
            if dist[i, j] <= radius:
                parent[find(i)] = find(j)
    groups: dict = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    out = []
    for members in groups.values():
        sub = pts[members]
        rep = sub.mean(axis=0)
        rad = float(np.sqrt(((sub - rep) ** 2).sum(axis=-1)).max())
        out.append((rep, rad, len(members)))
    out.sort(key=lambda c: -c[2])
    return out


# -- achievable averages ----------------------------------------------


@dataclass
class AchievableSet:
    dim: int
    lo: np.ndarray
    hi: np.ndarray
    hull: Optional[list]  # vertex list for d <= 2, None beyond
    max_period: int
    cycle_count: int
    omega_dependent: bool = False
    budget_hit: bool = False

    @property
    def interval(self) -> Interval:
        if self.dim != 1:
            raise UnsupportedError("interval view needs a one-dimensional potential")
        return Interval(float(self.lo[0]), float(self.hi[0]))

    def boundary_margin(self, alpha) -> float:
        """Distance from alpha to the boundary; negative when outside.

        Exact for d <= 2 (hull), bounding-box approximation beyond.
        """
        a = np.atleast_1d(np.asarray(alpha, dtype=float))
        if self.dim == 1:
            return float(min(a[0] - self.lo[0], self.hi[0] - a[0]))
        if self.dim == 2 and self.hull is not None and len(self.hull) >= 3:
            return _polygon_margin(np.asarray(self.hull), a)
        return float(min(np.min(a - self.lo), np.min(self.hi - a)))


def achievable_set_estimate(
    f: Potential,
    sft: Sft,
    max_period: int,
    omega: Optional[Point] = None,
    budget: int = DEFAULT_CYCLE_BUDGET,
) -> AchievableSet:
    """Hull of periodic-orbit averages of f up to the given period.

    Omega-independent potentials enumerate cycles of the shift alone; an
    omega-dependent potential pairs cycles with free omega cycles unless a
    concrete omega stream is supplied, in which case cycle averages are
    taken against that stream's prefix and flagged as omega-dependent.
    """
    if isinstance(f, MetricPotential) or (
        isinstance(f, AffinePotential) and isinstance(f.base, MetricPotential)
    ):
        raise UnsupportedError("cycle averages are not defined for the metric potential")
    if max_period < 1 or max_period > 16:
        raise InputError("max_period must be in 1..16")
    d = f.dim
    pts = []
    count = 0
    budget_hit = False
    omega_dep = False
    for p in range(1, max_period + 1):
        try:
            cycles = _cyclic_words(sft, p)
        except Exception:
            break
        if f.omega_independent:
            wopts = [None]
        elif omega is not None:
            wopts = ["stream"]
            omega_dep = True
        else:
            wopts = list(_all_words_free(f_omega_k(f), p))
        total_here = len(cycles) * len(wopts)
        if count + total_here > budget:
            budget_hit = True
            break
        for cyc in cycles:
            xa = np.tile(cyc, 2 + (f.window or 1) // p + 1)
            for wo in wopts:
                if wo is None:
                    wa = None
                elif wo == "stream":
                    wa = omega
                else:
                    wa = PeriodicTuple(wo)
                avg = _cycle_average(f, wa, xa, p)
                pts.append(avg)
                count += 1
    if not pts:
        raise InputError("no admissible cycles found up to the requested period")
    arr = np.array(pts)
    hull = None
    if d == 2:
        hull = _monotone_chain(arr)
    return AchievableSet(
        dim=d,
        lo=arr.min(axis=0),
        hi=arr.max(axis=0),
        hull=hull,
        max_period=max_period,
        cycle_count=count,
        omega_dependent=omega_dep,
        budget_hit=budget_hit,
    )


def f_omega_k(f: Potential) -> int:
    return getattr(f, "K_omega", getattr(getattr(f, "base", None), "K_omega", 2))


class PeriodicTuple:
    """Minimal omega stand-in for cycle pairing: a repeated tuple."""

    def __init__(self, word):
        self.word = np.asarray(word, dtype=np.int64)

    def bounded_prefix(self, n: int) -> np.ndarray:
        reps = -(-n // self.word.size)
        return np.tile(self.word, reps)[:n]

    def available(self, n: int) -> int:
        return n


def _cycle_average(f: Potential, omega, xa: np.ndarray, p: int) -> np.ndarray:
    k = f.window or 1
    if omega is None:
        wa = np.zeros(p + k, dtype=np.int64)
    else:
        wa = omega.bounded_prefix(p + k)
    tot = np.zeros(f.dim)
    for i in range(p):
        bx = f.eval_box(wa[i : i + k], xa[i : i + k])
        if not bx.exact:
            raise InputError("cycle averages need fully resolved evaluations")
        tot += bx.lo
    return tot / p


def _cyclic_words(sft: Sft, p: int) -> list:
    words = sft.word_array(p)
    ok = sft.matrix[words[:, -1].astype(np.int64), words[:, 0].astype(np.int64)] == 1
    return [w.astype(np.int64) for w in words[ok]]


def _all_words_free(K: int, p: int):
    import itertools

    return itertools.product(range(K), repeat=p)


def _monotone_chain(pts: np.ndarray) -> list:
    uniq = sorted({(float(a), float(b)) for a, b in pts})
    if len(uniq) <= 2:
        return [np.array(u) for u in uniq]

    def half(seq):
        out = []
        for q in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], q) <= 0:
                out.pop()
            out.append(q)
        return out

    lower = half(uniq)
    upper = half(reversed(uniq))
    return [np.array(q) for q in lower[:-1] + upper[:-1]]


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _polygon_margin(verts: np.ndarray, q: np.ndarray) -> float:
    inside = True
    m = verts.shape[0]
    edge_d = []
    for i in range(m):
        a = verts[i]
        b = verts[(i + 1) % m]
        if _cross(a, b, q) < 0:
            inside = False
        ab = b - a
        t = float(np.clip(np.dot(q - a, ab) / max(np.dot(ab, ab), 1e-30), 0.0, 1.0))
        edge_d.append(float(np.linalg.norm(q - (a + t * ab))))
    dist = min(edge_d)
    return dist if inside else -dist
