"""Markov and Bernoulli measures on shift spaces.

A MarkovMeasure is a stochastic matrix P plus a stationary row vector pi;
cylinder masses are pi[w0] * prod P[wi, wi+1].  Bernoulli measures are the
special case of constant rows.  The Parry measure of an irreducible shift
is built from the Perron eigendata of its transition matrix.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InputError, StructuralError
from .sft import Sft, _as_symbols


class MarkovMeasure:
    def __init__(self, P, pi=None, sft: Sft | None = None):
        P = np.asarray(P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise InputError("transition probabilities must form a square matrix")
        if (P < 0).any():
            raise InputError("negative transition probability")
        if np.abs(P.sum(axis=1) - 1.0).max() > 1e-12:
            raise InputError("rows of P must sum to 1 (tol 1e-12)")
        self.P = P
        self.K = P.shape[0]
        if sft is not None:
            if sft.K != self.K:
                raise InputError("measure and shift have different alphabets")
            if ((P > 0) & (sft.matrix == 0)).any():
                raise InputError("P puts mass on a forbidden transition")
        self._sft = sft
        if pi is None:
            pi = _stationary(P)
        else:
            pi = np.asarray(pi, dtype=float)
            if pi.shape != (self.K,):
                raise InputError("pi has the wrong length")
            if abs(pi.sum() - 1.0) > 1e-10 or np.abs(pi @ P - pi).max() > 1e-10:
                raise InputError("pi is not a stationary distribution of P (tol 1e-10)")
        self.pi = pi
        with np.errstate(divide="ignore"):
            self._logP = np.log(P)
            self._logpi = np.log(pi)

    # -- constructors ---------------------------------------------------

    @classmethod
    def bernoulli(cls, probs) -> "MarkovMeasure":
        p = np.asarray(probs, dtype=float)
        return cls(np.tile(p, (p.size, 1)), pi=p)

    @classmethod
    def uniform(cls, K: int) -> "MarkovMeasure":
        return cls.bernoulli(np.full(K, 1.0 / K))

    @classmethod
    def parry(cls, sft: Sft) -> "MarkovMeasure":
        """Maximal-entropy Markov measure of an irreducible shift."""
        if not sft.classify().irreducible:
            raise StructuralError("Parry measure needs an irreducible matrix")
        lam, u, v = perron_eigendata(sft.matrix)
        P = sft.matrix * v[np.newaxis, :] / (lam * v[:, np.newaxis])
        pi = u * v / float(u @ v)
        return cls(P, pi=pi, sft=sft)

    @classmethod
    def from_file(cls, path, sft: Sft | None = None) -> "MarkovMeasure":
        """Read 'K' on line 1, K rows of P, then an optional pi row."""
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        if not lines:
            raise InputError(f"{path}: empty measure file")
        try:
            K = int(lines[0])
            rows = [[float(tok) for tok in ln.split()] for ln in lines[1:]]
        except ValueError:
            raise InputError(f"{path}: malformed measure file") from None
        if len(rows) not in (K, K + 1):
            raise InputError(f"{path}: expected {K} rows of P plus optional pi")
        pi = rows[K] if len(rows) == K + 1 else None
        return cls(rows[:K], pi=pi, sft=sft)

    # -- masses ---------------------------------------------------------

    def log_cylinder_mass(self, word) -> float:
        """log of the cylinder mass; -inf when the mass is zero."""
        w = _as_symbols(word)
        if w.size and (w.min() < 0 or w.max() >= self.K):
            raise InputError("symbol out of range for this measure")
        if w.size == 0:
            return 0.0
        out = float(self._logpi[w[0]])
        if w.size > 1:
            out += float(self._logP[w[:-1], w[1:]].sum())
        return out

    def cylinder_mass(self, word) -> float:
        lm = self.log_cylinder_mass(word)
        return math.exp(lm) if lm > -math.inf else 0.0

    def entropy_rate(self) -> float:
        terms = np.zeros_like(self.P)
        live = self.P > 0
        terms[live] = self.P[live] * self._logP[live]
        return float(-(self.pi @ terms.sum(axis=1)))

    def support_sft(self) -> Sft:
        return Sft((self.P > 0).astype(np.int64))

    # -- sampling -------------------------------------------------------

    def sample_word(self, length: int, rng) -> np.ndarray:
        """One stationary sample path of the chain, as an int64 array."""
        if isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(int(rng))
        out = np.empty(length, dtype=np.int64)
        if length == 0:
            return out
        cum = np.cumsum(self.P, axis=1)
        cum[:, -1] = 1.0
        u = rng.random(length)
        out[0] = np.searchsorted(np.cumsum(self.pi), u[0], side="right")
        out[0] = min(out[0], self.K - 1)
        rows = cum.tolist()
        cur = int(out[0])
        for i in range(1, length):
            row = rows[cur]
            ui = u[i]
            s = 0
            while row[s] <= ui:
                s += 1
            cur = s
            out[i] = s
        return out


def _stationary(P: np.ndarray) -> np.ndarray:
    """Stationary row vector via a deterministic least-squares solve."""
    K = P.shape[0]
    M = np.vstack([P.T - np.eye(K), np.ones((1, K))])
    b = np.zeros(K + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(M, b, rcond=None)
    pi = np.maximum(pi, 0.0)
    s = pi.sum()
    if s <= 0 or np.abs(pi / s @ P - pi / s).max() > 1e-9:
        raise StructuralError("no reliable stationary vector for this P")
    return pi / s

def perron_eigendata(A: np.ndarray, tol: float = 1e-13, max_iter: int = 100_000):
    """(Perron root, left vector, right vector) of a nonnegative matrix.

    Power iteration on A + I, all-ones starts; vectors come back positive
    and normalized to unit sum.
    """
    K = A.shape[0]
    B = np.asarray(A, dtype=float) + np.eye(K)
    v = np.ones(K)
    u = np.ones(K)
    lam = 0.0
    for _ in range(max_iter):
        v_new = B @ v
        u_new = u @ B
        lam_new = float(v_new.sum()) / float(v.sum())
        v = v_new / v_new.sum()
        u = u_new / u_new.sum()
        if abs(lam_new - lam) <= tol * max(1.0, lam_new):
            lam = lam_new
            break
        lam = lam_new
    return lam - 1.0, u, v


def quasi_bernoulli_constant(m: MarkovMeasure, max_len: int = 2) -> float:
    """Smallest c with c^-1 mu[W] mu[W'] <= mu[WW'] <= c mu[W] mu[W']
    over concatenations of positive mass, checked for |W|, |W'| <= max_len.

    For a Markov measure the extremes are hit by length-1 pairs already,
    so the value stabilizes at max_len = 2.
    """

    def support_words(length):
        # DFS over the measure's own support; avoids requiring that the
        # support matrix be a valid transition matrix on its own
        def rec(prefix):
            if len(prefix) == length:
                yield prefix
                return
            for s in range(m.K):
                if not prefix:
                    if m.pi[s] > 0:
                        yield from rec((s,))
                elif m.P[prefix[-1], s] > 0:
                    yield from rec(prefix + (s,))

        yield from rec(())

    worst = 1.0
    for la in range(1, max_len + 1):
        for lb in range(1, max_len + 1):
            for wa in support_words(la):
                la_mass = m.log_cylinder_mass(wa)
                for wb in support_words(lb):
                    joint = m.log_cylinder_mass(wa + wb)
                    if joint == -math.inf:
                        continue
                    ratio = joint - la_mass - m.log_cylinder_mass(wb)
                    worst = max(worst, math.exp(abs(ratio)))
    return worst
