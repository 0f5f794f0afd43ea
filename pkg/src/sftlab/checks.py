"""Standalone invariant suite behind `sftlab check`.

Each check is a seeded, self-contained probe of a structural identity
the rest of the package leans on.  Quick mode shrinks sizes and horizons
so the full battery stays under a few minutes; the identities themselves
are size-independent.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .entropy_est import CylinderMeasure, CylinderSetOracle, oracle_monotonicity_sample
from .errors import InputError
from .chaos import distributional_profile
from .measures import MarkovMeasure
from .moran import FrequencyLibrary, assemble_moran, build_schedule
from .points import MarkovPoint, first_mismatch
from .potentials import CylinderPotential, frequency_potential
from .pressure import partition_function
from .sft import Sft


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _sizes(quick: bool) -> dict:
    return {
        "zn": 7 if quick else 10,
        "triples": 150 if quick else 600,
        "horizon": 2000 if quick else 6000,
        "pairs": 3 if quick else 6,
        "mono": 48 if quick else 128,
    }


def _check_convexity(quick: bool, seed: int):
    """Midpoint convexity of p -> log Z_n on an even p grid.

    The per-word weight is a max of linear functions of p, so the upper
    partition reading is exactly convex; 1e-9 absorbs float noise only.
    """
    sizes = _sizes(quick)
    n = sizes["zn"]
    rng = np.random.default_rng(seed)
    row = np.round(rng.standard_normal((1, 4, 1)), 3)
    systems = [
        (Sft.full_shift(2), frequency_potential(2, 1)),
        (Sft.golden_mean(), CylinderPotential(2, 1, np.tile(row, (4, 1, 1)), 2, 2)),
    ]
    worst = 0.0
    ps = np.linspace(-3.0, 3.0, 9)
    for sft, f in systems:
        vals = [partition_function(sft, f, None, n, p, 0.0).log_hi for p in ps]
        for i in range(1, len(ps) - 1):
            gap = vals[i] - 0.5 * (vals[i - 1] + vals[i + 1])
            worst = max(worst, gap)
    return worst <= 1e-9, f"worst midpoint excess {worst:.3e}"


def _check_ultrametric(quick: bool, seed: int):
    """rho(x,z) <= max(rho(x,y), rho(y,z)) via first-mismatch indices."""
    sizes = _sizes(quick)
    depth = 128
    bad = 0
    tested = 0
    for K, mat in ((2, None), (3, None), (2, "golden")):
        sft = Sft.golden_mean() if mat else Sft.full_shift(K)
        nu = MarkovMeasure.parry(sft)
        for t in range(sizes["triples"] // 3):
            x, y, z = (
                MarkovPoint(nu, seed * 100003 + t * 3 + i) for i in range(3)
            )
            mxy = first_mismatch(x, y, depth)
            myz = first_mismatch(y, z, depth)
            mxz = first_mismatch(x, z, depth)
            if mxy is None or myz is None or mxz is None:
                continue  # unresolved at this depth; no conclusive reading
            tested += 1
            if mxz < min(mxy, myz):
                bad += 1
    return bad == 0, f"{tested} resolved triples, {bad} violations"


def _check_additivity(quick: bool, seed: int):
    """Children masses sum to the parent: Markov exactly (float), the
    Moran quotient measure exactly (rational)."""
    worst = 0.0
    golden = Sft.golden_mean()
    for m, sft, depth in (
        (MarkovMeasure.parry(golden), golden, 5),
        (MarkovMeasure.bernoulli([0.3, 0.7]), Sft.full_shift(2), 5),
    ):
        cm = CylinderMeasure.from_markov(m)
        worst = max(worst, cm.additivity_defect(sft, depth))
    if worst > 1e-12:
        return False, f"markov defect {worst:.3e}"

    full = Sft.full_shift(2)
    sched = build_schedule(16, [0.25, 0.125], ratios=[4])
    lib = FrequencyLibrary(full, 1, 0.5, 0.25)
    ms = assemble_moran(full, sched, lib)
    rng = np.random.default_rng(seed)
    x = ms.sample(seed)
    for trial in range(40):
        n = int(rng.integers(1, 24))
        w = list(x.prefix(n))
        if rng.random() < 0.5 and n > 2:
            w[int(rng.integers(0, n))] = int(rng.integers(0, 2))
        parent = ms.mass_exact(w)
        kids = sum(ms.mass_exact(w + [s]) for s in range(2))
        if parent != kids:
            return False, f"moran defect {float(parent - kids):.3e} at depth {n}"
    return True, "markov defect <= 1e-12, moran splits exact"


def _check_profile_order(quick: bool, seed: int):
    """F <= F* per eps, and lower proportions never exceed upper ones."""
    sizes = _sizes(quick)
    nu = MarkovMeasure.uniform(2)
    worst = 0.0
    for t in range(sizes["pairs"]):
        x = MarkovPoint(nu, seed * 7919 + 2 * t)
        y = MarkovPoint(nu, seed * 7919 + 2 * t + 1)
        prof = distributional_profile(x, y, horizon=sizes["horizon"])
        worst = max(worst, float((prof.F_lo - prof.F_star_lo).max()))
        worst = max(worst, float((prof.F_hi - prof.F_star_hi).max()))
        worst = max(worst, float((prof.prop_lo - prof.prop_hi).max()))
    return worst <= 1e-12, f"worst ordering excess {worst:.3e}"


def _check_oracle_monotonicity(quick: bool, seed: int):
    """Rejected words must stay rejected under extension."""
    sizes = _sizes(quick)
    full = Sft.full_shift(2)
    sched = build_schedule(16, [0.25, 0.125], ratios=[4])
    ms = assemble_moran(full, sched, FrequencyLibrary(full, 1, 0.5, 0.25))
    probes = [
        (CylinderSetOracle.first_symbol(1), Sft.golden_mean(), 8),
        (ms.oracle(), full, 10),
    ]
    total = 0
    for oracle, sft, depth in probes:
        total += oracle_monotonicity_sample(
            oracle, sft, depth, num=sizes["mono"], seed=seed
        )
    return total == 0, f"{total} extension violations"


_CHECKS = [
    ("convexity", _check_convexity),
    ("ultrametric", _check_ultrametric),
    ("additivity", _check_additivity),
    ("profile-order", _check_profile_order),
    ("oracle-monotonicity", _check_oracle_monotonicity),
]


def check_names() -> list:
    return [name for name, _ in _CHECKS]


def run_checks(names="all", quick: bool = False, seed: int = 0) -> list:
    if names in ("all", None):
        selected = _CHECKS
    else:
        wanted = [names] if isinstance(names, str) else list(names)
        table = dict(_CHECKS)
        for w in wanted:
            if w not in table:
                raise InputError(
                    f"unknown check {w!r}; choose from {', '.join(check_names())}"
                )
        selected = [(w, table[w]) for w in wanted]
    out = []
    for name, fn in selected:
        t0 = time.perf_counter()
        passed, detail = fn(quick, seed)
        out.append(CheckResult(name, passed, detail, time.perf_counter() - t0))
    return out
