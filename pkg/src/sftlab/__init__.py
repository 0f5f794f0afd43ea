"""Symbolic-dynamics lab: shifts of finite type, pair potentials,
pressure spectra, chaos statistics, blockwise transfer maps, and Moran
constructions, all at finite scale with explicit interval semantics."""

from .errors import (
    BudgetError,
    InputError,
    PreconditionError,
    SftlabError,
    StructuralError,
    UnsupportedError,
)
from .intervals import Box, Interval
from .sft import Sft, SftClassification, SpectralDecomposition, log_big
from .measures import MarkovMeasure
from .points import (
    BlockLazyPoint,
    DistanceTrajectory,
    MarkovPoint,
    PeriodicPoint,
    Point,
    PrefixPoint,
    avg_distance,
    distance_trajectory,
    first_mismatch,
    parse_point,
    rho,
    rho_n,
    same_stream,
)
from .potentials import (
    AffinePotential,
    CylinderPotential,
    MetricPotential,
    Potential,
    achievable_set_estimate,
    birkhoff_prefix_sums,
    birkhoff_sum,
    frequency_potential,
    limit_set_estimate,
    load_potential,
    segment_average_bound_check,
    word_sum_bounds,
)
from .pressure import (
    SearchControl,
    SpectrumCurve,
    besicovitch_eggleston_oracle,
    conditional_pressure,
    legendre_spectrum,
    metric_pressure_bound_check,
    partition_function,
    pressure_estimate,
)
from .entropy_est import (
    CylinderMeasure,
    CylinderSetOracle,
    distribution_principle_check,
    frostman_check,
    g_omega_counts,
    ml_set_slope_scan,
    oracle_monotonicity_sample,
    word_count_slope,
)
from .chaos import (
    Thresholds,
    classify_pair,
    distributional_profile,
    scrambled_evidence,
)
from .transfer import (
    BlockCodebook,
    check_bilipschitz,
    check_equivariance,
    check_involution,
    phi_encode,
    phi_full,
    phi_sft,
)
from .moran import (
    AllWordsLibrary,
    FrequencyLibrary,
    MoranSet,
    assemble_moran,
    build_alpha_chain,
    build_schedule,
    ml_witness,
    moran_entropy_report,
)
from .checks import run_checks

__all__ = [n for n in dir() if not n.startswith("_")]
