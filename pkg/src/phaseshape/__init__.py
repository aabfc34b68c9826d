"""Constellation design and evaluation for memoryless phase-noise channels."""

from .core import (
    ChannelParams,
    Constellation,
    derive_rng,
    eb_n0_to_n0,
    make_rng,
    n0_to_eb_n0,
    sample_channel,
    wrap_angle,
)
from .detectors import (
    AdmissibilityError,
    DetectorKind,
    decide,
    detect,
    gap_d_metric,
    likelihood_phn,
    likelihood_snr,
    lpn_d_metric,
    metric_matrix,
)
from .metrics import (
    LikelihoodKind,
    MiEstimate,
    PairwiseStats,
    QuadratureGrid,
    TransitionMatrix,
    UnionBound,
    mi_dc,
    mi_dc_best,
    mi_dd,
    metric_record,
    pairwise_error_prob,
    pairwise_stats,
    q_function,
    sep_floor,
    sep_union_bound,
    transition_matrix,
)
from .montecarlo import (
    SimReport,
    empirical_mi_dc,
    empirical_sep,
    empirical_transition_matrix,
    merge_reports,
)
from .optimize import (
    ApskConfig,
    Criterion,
    OptimizationResult,
    SearchConfig,
    apsk_realize,
    enumerate_apsk,
    objective,
    optimize_apsk,
    optimize_global,
)
from .catalog import builtin_constellation, psk, qam, spiral_qam

__version__ = "0.1.0"
