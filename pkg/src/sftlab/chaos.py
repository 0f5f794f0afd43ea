"""Distributional chaos statistics for pairs of streams.

All verdicts are finite-horizon evidence, never asymptotic claims: the
liminf/limsup of raw distances become inf/sup over a tail window
(default: the last fifth of the horizon), those of running averages an
inf/sup past a burn-in, and every proportion is kept as an interval
whenever some pairwise distances are unresolved.  A cell
counts as "< eps" only when its upper reading is, and as ">= eps" only
when its lower reading is; anything else stays inconclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InputError
from .intervals import Interval
from .points import DistanceTrajectory, Point, distance_trajectory, same_stream

EVIDENCE_FOR = "evidence-for"
EVIDENCE_AGAINST = "evidence-against"
INCONCLUSIVE = "inconclusive"


@dataclass
class Thresholds:
    """Evidence levels for the pair verdicts.

    close/apart gate the Li-Yorke style statements (0 < close < apart);
    one_tol and zero_tol are slack around the F* = 1 and F = 0 readings;
    dc_gap is how far F must sit below F* (or below 1) to count.
    """

    close: float = 0.05
    apart: float = 0.3
    one_tol: float = 0.02
    zero_tol: float = 0.02
    dc_gap: float = 0.2

    def __post_init__(self):
        if not 0 < self.close < self.apart:
            raise InputError("need 0 < close < apart")


@dataclass
class DistributionalProfile:
    eps: np.ndarray
    ns: np.ndarray
    prop_lo: np.ndarray  # shape (len(eps), len(ns)): conclusive "< eps" share
    prop_hi: np.ndarray
    tail_start: int  # index into ns where the tail window begins
    F_lo: np.ndarray
    F_hi: np.ndarray
    F_star_lo: np.ndarray
    F_star_hi: np.ndarray
    inconclusive: np.ndarray

    def F(self, i: int) -> Interval:
        return Interval(float(self.F_lo[i]), float(self.F_hi[i]))

    def F_star(self, i: int) -> Interval:
        return Interval(float(self.F_star_lo[i]), float(self.F_star_hi[i]))


def default_eps_grid() -> np.ndarray:
    return np.geomspace(1e-3, 1.0, 16)


def _ladder(horizon: int, tail_fraction: float) -> np.ndarray:
    ns = {horizon}
    v = horizon
    while v >= 100:
        ns.add(v)
        v = int(math.ceil(v * 0.5))
    t0 = max(int((1.0 - tail_fraction) * horizon), 1)
    step = max(1, (horizon - t0) // 32)
    ns.update(range(t0, horizon + 1, step))
    return np.array(sorted(ns))


def distributional_profile(
    x: Point,
    y: Point,
    eps_grid=None,
    horizon: int = 10_000,
    tail_fraction: float = 0.2,
    lookahead: int = 64,
) -> DistributionalProfile:
    """Running proportions (1/n) #{i < n : d_i < eps} on a ladder of n,
    with tail-window inf/sup as the F and F* estimates."""
    if horizon < 1000:
        raise InputError("profiles need horizon >= 1000")
    traj = distance_trajectory(x, y, horizon, tail=lookahead)
    eps = np.atleast_1d(np.asarray(eps_grid if eps_grid is not None else default_eps_grid(), dtype=float))
    if np.any(eps <= 0):
        raise InputError("eps grid must be positive")
    return _profile_from_traj(traj, eps, horizon, tail_fraction)


def _profile_from_traj(
    traj: DistanceTrajectory, eps: np.ndarray, horizon: int, tail_fraction: float
) -> DistributionalProfile:
    ns = _ladder(horizon, tail_fraction)
    ne = eps.size
    prop_lo = np.empty((ne, ns.size))
    prop_hi = np.empty((ne, ns.size))
    for i, e in enumerate(eps):
        below = np.cumsum(traj.hi < e)
        not_above = np.cumsum(traj.lo < e)  # complement of conclusive ">= eps"
        prop_lo[i] = below[ns - 1] / ns
        prop_hi[i] = not_above[ns - 1] / ns
    t0 = int(np.searchsorted(ns, (1.0 - tail_fraction) * horizon))
    t0 = min(t0, ns.size - 1)
    tails_lo = prop_lo[:, t0:]
    tails_hi = prop_hi[:, t0:]
    width_tol = np.maximum(0.01, 2.0 / ns)
    return DistributionalProfile(
        eps=eps,
        ns=ns,
        prop_lo=prop_lo,
        prop_hi=prop_hi,
        tail_start=t0,
        F_lo=tails_lo.min(axis=1),
        F_hi=tails_hi.min(axis=1),
        F_star_lo=tails_lo.max(axis=1),
        F_star_hi=tails_hi.max(axis=1),
        inconclusive=(prop_hi - prop_lo) > width_tol[np.newaxis, :],
    )


@dataclass
class PairVerdict:
    ly: str
    mean_ly: str
    dc1: str
    dc2: str
    dc3: str
    margins: dict
    horizon: int
    thresholds: Thresholds
    profile: DistributionalProfile

    @property
    def flags(self) -> dict:
        return {
            "LY": self.ly,
            "meanLY": self.mean_ly,
            "DC1": self.dc1,
            "DC2": self.dc2,
            "DC3": self.dc3,
        }


def classify_pair(
    x: Point,
    y: Point,
    horizon: int = 10_000,
    thresholds: Optional[Thresholds] = None,
    eps_grid=None,
    tail_fraction: float = 0.2,
    lookahead: int = 64,
    avg_burn_in: float = 0.1,
) -> PairVerdict:
    """Finite-horizon pair classification with recorded margins.

    LY reads min/max of the raw distance over the tail window.  Running
    averages scan every ladder window past a burn-in instead: for block
    constructions the average dips at stage ends anywhere in the horizon,
    and confining those to the last fifth would miss them.  The DC flags
    come from the distributional profile.  Flag promotion keeps
    DC1 => DC2 => meanLY by construction.
    """
    th = thresholds or Thresholds()
    if horizon < 1000:
        raise InputError("classification needs horizon >= 1000")
    traj = distance_trajectory(x, y, horizon, tail=lookahead)
    eps = np.atleast_1d(
        np.asarray(eps_grid if eps_grid is not None else default_eps_grid(), dtype=float)
    )
    prof = _profile_from_traj(traj, eps, horizon, tail_fraction)

    t0 = int((1.0 - tail_fraction) * horizon)
    tail_lo = traj.lo[t0:]
    tail_hi = traj.hi[t0:]
    tail_min = Interval(float(tail_lo.min()), float(tail_hi.min()))
    tail_max = Interval(float(tail_lo.max()), float(tail_hi.max()))

    avg_lo, avg_hi = traj.running_average()
    keep = prof.ns >= max(avg_burn_in * horizon, 100)
    ns = prof.ns[keep] if np.any(keep) else prof.ns
    avg_min = Interval(float(avg_lo[ns - 1].min()), float(avg_hi[ns - 1].min()))
    avg_max = Interval(float(avg_lo[ns - 1].max()), float(avg_hi[ns - 1].max()))

    ly = _two_sided(tail_min, tail_max, th)
    mean_ly = _two_sided(avg_min, avg_max, th)

    # F* must sit at 1 across the grid for DC1/DC2
    star_all_lo = float(prof.F_star_lo.min())
    star_all_hi = float(prof.F_star_hi.min())
    star_one = _sided(
        star_all_lo >= 1.0 - th.one_tol, star_all_hi < 1.0 - th.one_tol
    )
    f_zero = _sided(
        bool(np.any(prof.F_hi <= th.zero_tol)),
        bool(np.all(prof.F_lo > th.zero_tol)),
    )
    f_gap = _sided(
        bool(np.any(prof.F_hi <= 1.0 - th.dc_gap)),
        bool(np.all(prof.F_lo > 1.0 - th.dc_gap)),
    )
    sep = _sided(
        bool(np.any(prof.F_hi + th.dc_gap <= prof.F_star_lo)),
        bool(np.all(prof.F_lo >= prof.F_star_hi - th.one_tol)),
    )

    dc1 = _conj(star_one, f_zero)
    dc2 = _conj(star_one, f_gap)
    dc3 = sep
    # promotion keeps the implication chain exact at the flag level
    if dc1 == EVIDENCE_FOR:
        dc2 = EVIDENCE_FOR
    if dc2 == EVIDENCE_FOR:
        mean_ly = EVIDENCE_FOR

    margins = {
        "tail_min": tail_min,
        "tail_max": tail_max,
        "avg_min": avg_min,
        "avg_max": avg_max,
        "F_star_floor": Interval(star_all_lo, star_all_hi),
        "F_floor": Interval(float(prof.F_lo.min()), float(prof.F_hi.min())),
    }
    return PairVerdict(
        ly=ly,
        mean_ly=mean_ly,
        dc1=dc1,
        dc2=dc2,
        dc3=dc3,
        margins=margins,
        horizon=horizon,
        thresholds=th,
        profile=prof,
    )


def _two_sided(lo_stat: Interval, hi_stat: Interval, th: Thresholds) -> str:
    """Evidence that the tail gets below `close` AND above `apart`."""
    close_ok = lo_stat.hi <= th.close
    apart_ok = hi_stat.lo >= th.apart
    if close_ok and apart_ok:
        return EVIDENCE_FOR
    close_fail = lo_stat.lo > th.close
    apart_fail = hi_stat.hi < th.apart
    if close_fail or apart_fail:
        return EVIDENCE_AGAINST
    return INCONCLUSIVE


def _sided(for_cond: bool, against_cond: bool) -> str:
    if for_cond:
        return EVIDENCE_FOR
    if against_cond:
        return EVIDENCE_AGAINST
    return INCONCLUSIVE


def _conj(a: str, b: str) -> str:
    if a == EVIDENCE_FOR and b == EVIDENCE_FOR:
        return EVIDENCE_FOR
    if a == EVIDENCE_AGAINST or b == EVIDENCE_AGAINST:
        return EVIDENCE_AGAINST
    return INCONCLUSIVE


@dataclass
class ScrambledEvidence:
    num_points: int
    verdicts: dict  # (i, j) -> PairVerdict for i < j
    horizon: int

    def fraction(self, flag: str) -> float:
        vals = [getattr(v, flag) for v in self.verdicts.values()]
        if not vals:
            return 0.0
        return sum(1 for v in vals if v == EVIDENCE_FOR) / len(vals)

    @property
    def summary(self) -> dict:
        return {k: self.fraction(k) for k in ("ly", "mean_ly", "dc1", "dc2", "dc3")}


def scrambled_evidence(
    points: Sequence[Point],
    horizon: int = 10_000,
    thresholds: Optional[Thresholds] = None,
    eps_grid=None,
    tail_fraction: float = 0.2,
) -> ScrambledEvidence:
    """All-pairs classification over a finite witness family."""
    pts = list(points)
    if len(pts) > 64:
        raise InputError("scrambled evidence caps at 64 points")
    if len(pts) < 2:
        raise InputError("need at least two points")
    verdicts = {}
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if same_stream(pts[i], pts[j]):
                v = _identical_verdict(horizon, thresholds or Thresholds())
            else:
                v = classify_pair(
                    pts[i],
                    pts[j],
                    horizon,
                    thresholds,
                    eps_grid,
                    tail_fraction,
                )
            verdicts[(i, j)] = v
    return ScrambledEvidence(len(pts), verdicts, horizon)


def _identical_verdict(horizon: int, th: Thresholds) -> PairVerdict:
    eps = default_eps_grid()
    ns = _ladder(horizon, 0.2)
    ones = np.ones((eps.size, ns.size))
    prof = DistributionalProfile(
        eps=eps,
        ns=ns,
        prop_lo=ones,
        prop_hi=ones.copy(),
        tail_start=0,
        F_lo=np.ones(eps.size),
        F_hi=np.ones(eps.size),
        F_star_lo=np.ones(eps.size),
        F_star_hi=np.ones(eps.size),
        inconclusive=np.zeros((eps.size, ns.size), dtype=bool),
    )
    z = Interval(0.0, 0.0)
    return PairVerdict(
        ly=EVIDENCE_AGAINST,
        mean_ly=EVIDENCE_AGAINST,
        dc1=EVIDENCE_AGAINST,
        dc2=EVIDENCE_AGAINST,
        dc3=EVIDENCE_AGAINST,
        margins={
            "tail_min": z,
            "tail_max": z,
            "avg_min": z,
            "avg_max": z,
            "F_star_floor": Interval(1.0, 1.0),
            "F_floor": Interval(1.0, 1.0),
        },
        horizon=horizon,
        thresholds=th,
        profile=prof,
    )
