"""SIR meta-distribution analysis for Poisson cellular networks with queued
traffic, plus an independent discrete-time spatial simulator used to
cross-validate every analytical quantity."""

from .cdfgrid import CdfGrid, eta_k
from .config import AnalysisConfig, SimConfig, db_to_linear, linear_to_db
from .kernels import BACKEND
from .metadist import (
    BetaApproxResult,
    BetaParams,
    FixedPointResult,
    StabilityMode,
    avg_active_prob,
    beta_approx,
    coverage_envelope,
    delay_cdf,
    fixed_point_cdf,
    gil_pelaez_cdf,
    mgf_at,
    moment,
    stability_threshold,
)
from .simulate import (
    LinkStats,
    NetworkRealization,
    QueueState,
    build_realization,
    empirical_active_prob,
    empirical_delay_cdf,
    empirical_meta_cdf,
    generate_ppp,
    run_simulation,
    step_slot,
)
from .specfun import complex_binom, hyp2f1, z_kernel

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig",
    "SimConfig",
    "db_to_linear",
    "linear_to_db",
    "CdfGrid",
    "eta_k",
    "BACKEND",
    "hyp2f1",
    "z_kernel",
    "complex_binom",
    "FixedPointResult",
    "fixed_point_cdf",
    "mgf_at",
    "gil_pelaez_cdf",
    "avg_active_prob",
    "moment",
    "coverage_envelope",
    "BetaParams",
    "BetaApproxResult",
    "beta_approx",
    "StabilityMode",
    "stability_threshold",
    "delay_cdf",
    "generate_ppp",
    "build_realization",
    "step_slot",
    "run_simulation",
    "NetworkRealization",
    "QueueState",
    "LinkStats",
    "empirical_meta_cdf",
    "empirical_delay_cdf",
    "empirical_active_prob",
    "__version__",
]
