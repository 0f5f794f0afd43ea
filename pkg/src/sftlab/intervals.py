"""Closed-interval values for quantities a finite window cannot resolve.

Scalar distances and Birkhoff sums come back as [lo, hi] pairs; an exact
value is the degenerate interval lo == hi.  Vector-valued sums use Box,
a componentwise pair of numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class Interval(NamedTuple):
    lo: float
    hi: float

    @property
    def exact(self) -> bool:
        return self.lo == self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def __add__(self, other):  # type: ignore[override]
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        return Interval(self.lo + other, self.hi + other)

    def scale(self, c: float) -> "Interval":
        if c >= 0:
            return Interval(c * self.lo, c * self.hi)
        return Interval(c * self.hi, c * self.lo)

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    def intersects(self, lo: float, hi: float) -> bool:
        return self.lo <= hi and lo <= self.hi

    def dist_to(self, v: float) -> "Interval":
        """Interval of possible |t - v| over t in self."""
        lo = 0.0 if self.contains(v) else min(abs(self.lo - v), abs(self.hi - v))
        return Interval(lo, max(abs(self.lo - v), abs(self.hi - v)))


def exact(v: float) -> Interval:
    return Interval(v, v)


def isum(items) -> Interval:
    lo = 0.0
    hi = 0.0
    for it in items:
        lo += it.lo
        hi += it.hi
    return Interval(lo, hi)


@dataclass
class Box:
    """Componentwise interval in R^d: lo[i] <= v[i] <= hi[i]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(self.hi, dtype=float))

    @classmethod
    def point(cls, v) -> "Box":
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return cls(v.copy(), v.copy())

    @classmethod
    def zeros(cls, d: int) -> "Box":
        return cls(np.zeros(d), np.zeros(d))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def exact(self) -> bool:
        return bool(np.all(self.lo == self.hi))

    @property
    def width(self) -> float:
        return float(np.max(self.hi - self.lo))

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def add(self, other: "Box") -> "Box":
        return Box(self.lo + other.lo, self.hi + other.hi)

    def shift(self, v) -> "Box":
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return Box(self.lo + v, self.hi + v)

    def scale(self, c: float) -> "Box":
        if c >= 0:
            return Box(c * self.lo, c * self.hi)
        return Box(c * self.hi, c * self.lo)

    def dot(self, p) -> Interval:
        """Interval of <p, v> over v in the box."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        lo = float(np.sum(np.where(p >= 0, p * self.lo, p * self.hi)))
        hi = float(np.sum(np.where(p >= 0, p * self.hi, p * self.lo)))
        return Interval(lo, hi)

    def norm_dist_to(self, v) -> Interval:
        """Interval of ||t - v||_2 over t in the box."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        below = np.maximum(self.lo - v, 0.0)
        above = np.maximum(v - self.hi, 0.0)
        lo = float(np.sqrt(np.sum(np.maximum(below, above) ** 2)))
        far = np.maximum(np.abs(self.lo - v), np.abs(self.hi - v))
        return Interval(lo, float(np.sqrt(np.sum(far**2))))


def box_sum(boxes, d: int) -> Box:
    out = Box.zeros(d)
    for b in boxes:
        out = out.add(b)
    return out
