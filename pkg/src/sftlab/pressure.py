"""Partition functions, conditional pressure, Legendre spectra.

Z_n sums, over admissible words of length n, the sup over each cylinder
of exp of the Birkhoff sum of <p, f - alpha>.  Cylinder sups are only
known as intervals, so Z_n carries a bracket; everything reported keeps
the lower and upper readings separate.

Finite n never equals the limsup.  Estimates report per-n values, an
Aitken extrapolation, and (for omega-independent potentials, where Z is
submultiplicative) the Fekete upper bound min_n (1/n) log Z_n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import BudgetError, InputError, PreconditionError
from .intervals import Interval
from .measures import MarkovMeasure
from .points import MarkovPoint, Point
from .potentials import (
    AffinePotential,
    CylinderPotential,
    MetricPotential,
    Potential,
    achievable_set_estimate,
    word_sum_bounds,
)
from .sft import DEFAULT_WORD_BUDGET, Sft


def _logsumexp(a: np.ndarray) -> float:
    m = float(np.max(a))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.exp(a - m).sum()))


@dataclass
class LogPartition:
    n: int
    log_lo: float
    log_hi: float
    word_count: int

    @property
    def normalized(self) -> Interval:
        return Interval(self.log_lo / self.n, self.log_hi / self.n)

    @property
    def mid(self) -> float:
        return 0.5 * (self.log_lo + self.log_hi) / self.n


def partition_function(
    sft: Sft,
    f: Potential,
    omega: Optional[Point],
    n: int,
    p,
    alpha,
    budget: int = DEFAULT_WORD_BUDGET,
) -> LogPartition:
    """Bracketed log Z_n for the affine weight <p, f - alpha>.

    Every admissible word contributes exp of its cylinder sup; the sup is
    bracketed by the interval Birkhoff sum over the cylinder, so the
    bracket here is sound on both sides.
    """
    if n < 1:
        raise InputError("partition function needs n >= 1")
    total = sft.count_words(n)
    if total > budget:
        raise BudgetError(
            f"enumerating {total} words of length {n} exceeds budget {budget}; "
            "reduce n or raise the budget"
        )
    g = AffinePotential(f, p, alpha) if not _is_plain_affine(f, p, alpha) else f
    words = sft.word_array(n, budget=budget)
    lo, hi = word_sum_bounds(g, omega, words)
    return LogPartition(
        n=n,
        log_lo=_logsumexp(lo[:, 0]),
        log_hi=_logsumexp(hi[:, 0]),
        word_count=int(words.shape[0]),
    )


def _is_plain_affine(f: Potential, p, alpha) -> bool:
    # caller already built the composite and passes the identity weight
    return isinstance(f, AffinePotential) and p is None and alpha is None


@dataclass
class PressureEstimate:
    ns: list
    lowers: list
    uppers: list
    extrapolated: float
    fekete_upper: Optional[float]  # min over the ladder, valid when submultiplicative

    @property
    def values(self) -> list:
        return [0.5 * (a + b) for a, b in zip(self.lowers, self.uppers)]

    @property
    def last(self) -> Interval:
        return Interval(self.lowers[-1], self.uppers[-1])


def pressure_estimate(
    sft: Sft,
    f: Potential,
    omega: Optional[Point],
    p,
    alpha,
    n_ladder: Sequence[int],
    budget: int = DEFAULT_WORD_BUDGET,
) -> PressureEstimate:
    ns = list(n_ladder)
    if ns != sorted(ns) or len(set(ns)) != len(ns):
        raise InputError("n ladder must be strictly increasing")
    lowers, uppers = [], []
    for n in ns:
        z = partition_function(sft, f, omega, n, p, alpha, budget=budget)
        lowers.append(z.normalized.lo)
        uppers.append(z.normalized.hi)
    mids = [0.5 * (a + b) for a, b in zip(lowers, uppers)]
    fek = min(uppers) if f.omega_independent else None
    return PressureEstimate(ns, lowers, uppers, _aitken(mids), fek)


def _aitken(v: list) -> float:
    if len(v) < 3:
        return v[-1]
    x0, x1, x2 = v[-3], v[-2], v[-1]
    den = (x2 - x1) - (x1 - x0)
    if abs(den) < 1e-14:
        return x2
    return x2 - (x2 - x1) ** 2 / den


@dataclass
class ConditionalPressure:
    mean: float
    stderr: float
    mean_lo: float
    mean_hi: float
    samples: np.ndarray
    n: int
    seed: int
    high_variance: bool = False


def conditional_pressure(
    sft: Sft,
    f: Potential,
    nu: Optional[MarkovMeasure],
    p,
    alpha,
    n: int,
    num_samples: int = 8,
    seed: int = 0,
    budget: int = DEFAULT_WORD_BUDGET,
) -> ConditionalPressure:
    """Monte Carlo stand-in for the nu-average of (1/n) log Z_n over omega.

    Omega-independent potentials short-circuit to a single evaluation with
    zero spread.  Otherwise each sample draws a fresh omega from nu with a
    seed derived deterministically from `seed`.
    """
    if num_samples < 1:
        raise InputError("need num_samples >= 1")
    if f.omega_independent:
        z = partition_function(sft, f, None, n, p, alpha, budget=budget)
        vals = np.full(num_samples, z.mid)
        return ConditionalPressure(
            mean=z.mid,
            stderr=0.0,
            mean_lo=z.normalized.lo,
            mean_hi=z.normalized.hi,
            samples=vals,
            n=n,
            seed=seed,
        )
    if nu is None:
        raise InputError("an omega-dependent potential needs a sampling measure")
    rng = np.random.default_rng(seed)
    sub = rng.integers(0, 2**63 - 1, size=num_samples)
    vals = np.empty(num_samples)
    los = np.empty(num_samples)
    his = np.empty(num_samples)
    for i in range(num_samples):
        omega = MarkovPoint(nu, int(sub[i]))
        z = partition_function(sft, f, omega, n, p, alpha, budget=budget)
        vals[i] = z.mid
        los[i] = z.normalized.lo
        his[i] = z.normalized.hi
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(num_samples)) if num_samples > 1 else 0.0
    return ConditionalPressure(
        mean=mean,
        stderr=stderr,
        mean_lo=float(los.mean()),
        mean_hi=float(his.mean()),
        samples=vals,
        n=n,
        seed=seed,
        high_variance=stderr > 0.05 * max(abs(mean), 0.1),
    )


@dataclass
class SearchControl:
    n: int = 12
    num_samples: int = 8
    seed: int = 0
    eta: Optional[float] = None  # interiority margin; derived from the hull if absent
    max_period: int = 8
    p_tol: float = 1e-6
    max_iter: int = 200
    budget: int = DEFAULT_WORD_BUDGET


@dataclass
class SpectrumCurve:
    alphas: np.ndarray
    p_stars: np.ndarray
    values: np.ndarray
    lowers: np.ndarray
    uppers: np.ndarray
    iterations: np.ndarray
    radii: np.ndarray
    boundary_hits: np.ndarray

    def concavity_violations(self, tol: float = 1e-6) -> int:
        """Count of interior grid points sitting below the chord of their
        neighbours by more than tol (one-dimensional alpha grids only)."""
        v = self.values
        bad = 0
        for i in range(1, len(v) - 1):
            chord = 0.5 * (v[i - 1] + v[i + 1])
            if v[i] < chord - tol:
                bad += 1
        return bad


def legendre_spectrum(
    sft: Sft,
    f: Potential,
    nu: Optional[MarkovMeasure],
    alpha_grid,
    control: Optional[SearchControl] = None,
) -> SpectrumCurve:
    """inf over p of the conditional pressure of <p, f - alpha>, per alpha.

    The search interval [-R, R] uses R = max(P0 / eta, 10) where P0 is the
    pressure at p = 0 and eta the interiority margin of alpha inside the
    achievable hull; alpha outside the hull is rejected.
    """
    c = control or SearchControl()
    alphas = np.atleast_1d(np.asarray(alpha_grid, dtype=float))
    d = f.dim
    if d == 1:
        pts = alphas.reshape(-1, 1)
    else:
        pts = alphas.reshape(-1, d)
    ach = achievable_set_estimate(f, sft, max_period=c.max_period)
    p0 = conditional_pressure(
        sft, f, nu, np.zeros(d), np.zeros(d), c.n, c.num_samples, c.seed, c.budget
    ).mean
    m = pts.shape[0]
    p_stars = np.zeros((m, d))
    values = np.empty(m)
    lowers = np.empty(m)
    uppers = np.empty(m)
    iters = np.zeros(m, dtype=int)
    radii = np.empty(m)
    hits = np.zeros(m, dtype=bool)
    for idx in range(m):
        a = pts[idx]
        margin = ach.boundary_margin(a)
        if margin <= 0:
            raise InputError(
                f"alpha {a} is not interior to the achievable hull "
                f"(margin {margin:.3g}); the spectrum needs interior alpha"
            )
        eta = c.eta if c.eta is not None else margin / 2.0
        radius = max(p0 / eta, 10.0)
        radii[idx] = radius

        cache: dict = {}

        def g(pvec) -> float:
            key = tuple(np.round(pvec, 12))
            if key not in cache:
                cache[key] = conditional_pressure(
                    sft, f, nu, np.asarray(pvec), a, c.n, c.num_samples, c.seed, c.budget
                )
            return cache[key].mean

        if d == 1:
            pstar, it = _golden_min(lambda t: g([t]), -radius, radius, c.p_tol, c.max_iter)
            pstar = np.array([pstar])
        else:
            pstar, it = _coord_descent(g, d, radius, c.p_tol, c.max_iter)
        # the counting bound: p = 0 is always admissible in the inf
        if g(np.zeros(d)) < g(pstar):
            pstar = np.zeros(d)
        best = cache[tuple(np.round(pstar, 12))]
        p_stars[idx] = pstar
        values[idx] = best.mean
        lowers[idx] = best.mean_lo
        uppers[idx] = best.mean_hi
        iters[idx] = it
        hits[idx] = bool(np.max(np.abs(pstar)) >= radius - 10 * c.p_tol)
    return SpectrumCurve(
        alphas=alphas,
        p_stars=p_stars if d > 1 else p_stars[:, 0],
        values=values,
        lowers=lowers,
        uppers=uppers,
        iterations=iters,
        radii=radii,
        boundary_hits=hits,
    )


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(g, a: float, b: float, tol: float, max_iter: int):
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = g(c), g(d)
    it = 2
    while b - a > tol and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = g(d)
        it += 1
    return 0.5 * (a + b), it


def _coord_descent(g, d: int, radius: float, tol: float, max_iter: int):
    p = np.zeros(d)
    total = 0
    for _ in range(6):
        moved = 0.0
        for j in range(d):
            def slice_fn(t, j=j):
                q = p.copy()
                q[j] = t
                return g(q)

            new, it = _golden_min(slice_fn, -radius, radius, tol, max_iter)
            total += it
            moved = max(moved, abs(new - p[j]))
            p[j] = new
        if moved < tol:
            break
    return p, total


def besicovitch_eggleston_oracle(alpha: float, K: int = 2) -> float:
    """Closed-form frequency spectrum of one symbol on the full K-shift.

    Entropy of the optimal product measure: H(alpha) plus log(K-1) spread
    over the remaining mass; the second term vanishes at K = 2.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InputError("frequency alpha must lie in [0, 1]")
    if K < 2:
        raise InputError("need K >= 2")

    def xlx(t: float) -> float:
        return 0.0 if t <= 0.0 else -t * math.log(t)

    return xlx(alpha) + xlx(1.0 - alpha) + (1.0 - alpha) * math.log(K - 1)


# -- the combinatorial ceiling for the metric potential ----------------


@dataclass
class BoundCheck:
    ok: bool
    slack: float
    value: float
    ceiling: float
    tail_allowance: float
    n: int
    p: float


def metric_pressure_bound_check(
    K: int,
    p: float,
    n: int,
    omega: Point,
    tolerance: float = 0.0,
    budget: int = DEFAULT_WORD_BUDGET,
) -> BoundCheck:
    """(1/n) log Z_n(p rho, omega) against log((K-1) e^p + 1) on the full shift.

    Grouping words by their mismatch pattern against omega gives the
    binomial ceiling; the tail allowance covers the interval upper reading
    of rho on depth-n cylinders (the unresolved geometric tail, weighted
    by |p|).  Only p < 0 keeps the per-word weight below its pattern term.
    """
    if p >= 0:
        raise PreconditionError("the binomial ceiling needs p < 0")
    if K**n > budget:
        raise BudgetError(f"{K}^{n} words exceed budget {budget}")
    s_lo, _ = _metric_cylinder_sums(K, n, omega)
    value = _logsumexp(p * s_lo) / n
    tail = abs(p) * sum(float(K) ** -i for i in range(1, n + 1)) / n
    ceiling = math.log((K - 1) * math.exp(p) + 1.0) + tail
    slack = ceiling + tolerance - value
    return BoundCheck(
        ok=slack > 0,
        slack=slack,
        value=value,
        ceiling=ceiling,
        tail_allowance=tail,
        n=n,
        p=p,
    )


@lru_cache(maxsize=2)
def _full_words(K: int, n: int) -> np.ndarray:
    """All K^n words as an int8 array, lexicographic, via digit extraction."""
    idx = np.arange(K**n, dtype=np.int64)
    out = np.empty((idx.size, n), dtype=np.int8)
    for i in range(n):
        out[:, i] = (idx // K ** (n - 1 - i)) % K
    return out


_metric_sum_cache: dict = {}


def _metric_cylinder_sums(K: int, n: int, omega: Point):
    """(S_lo, S_hi) for every full-shift word of length n against omega.

    Cached on (K, n, stream identity): the bound check sweeps p with the
    same omega, and the scan over K^n words dominates the cost.
    """
    key = (K, n, omega.identity_key)
    if key in _metric_sum_cache:
        return _metric_sum_cache[key]
    words = _full_words(K, n)
    wa = omega.bounded_prefix(n)
    if wa.size < n:
        raise InputError(f"omega must supply at least {n} symbols")
    from .potentials import _metric_word_sum_bounds

    lo, hi = _metric_word_sum_bounds(K, wa, words)
    while len(_metric_sum_cache) >= 4:
        _metric_sum_cache.pop(next(iter(_metric_sum_cache)))
    _metric_sum_cache[key] = (lo[:, 0], hi[:, 0])
    return _metric_sum_cache[key]
