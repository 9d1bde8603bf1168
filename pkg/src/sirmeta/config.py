"""Scenario and numerical configuration objects.

All angles of the model are driven by three physical parameters: the SIR
decoding threshold theta (linear scale everywhere inside the library; dB
conversion happens only at the CLI/harness boundary), the per-slot Bernoulli
packet arrival probability xi, and the path-loss exponent alpha > 2.  The
remaining fields are numerical controls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class AnalysisConfig:
    """Inputs for the coverage-distribution analysis.

    theta      linear SIR threshold (>= 0; 0 short-circuits to the degenerate
               "always covered" case)
    xi         packet arrival probability per slot, in [0, 1]
    alpha      path-loss exponent, > 2 (the interference integral diverges
               otherwise)
    k_max      truncation order of the binomial series form of the transform
    omega_max  upper limit of the inversion integral
    omega_min  lower cutoff near the removable singularity at 0
    grid_size  number of points of the uniform u-grid on [0, 1]
    fp_tol     sup-norm stopping tolerance of the fixed-point iteration
    fp_max_iter  iteration cap
    tail_correction  add the analytic large-frequency tail of the inversion
               integral beyond omega_max (recommended; the transform of the
               coverage distribution decays only like omega**-delta)
    """

    theta: float
    xi: float
    alpha: float = 3.8
    k_max: int = 64
    omega_max: float = 1000.0
    omega_min: float = 1e-6
    grid_size: int = 201
    fp_tol: float = 1e-4
    fp_max_iter: int = 100
    tail_correction: bool = True

    def __post_init__(self):
        if not self.theta >= 0.0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi must be in [0, 1], got {self.xi}")
        if not self.alpha > 2.0:
            raise ValueError(f"alpha must be > 2, got {self.alpha}")
        if not 0.0 < self.omega_min < self.omega_max:
            raise ValueError("need 0 < omega_min < omega_max")
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if self.k_max < 1 or self.fp_max_iter < 1:
            raise ValueError("k_max and fp_max_iter must be positive")
        if not self.fp_tol > 0.0:
            raise ValueError("fp_tol must be positive")

    @property
    def delta(self) -> float:
        """Interference exponent 2/alpha, in (0, 1)."""
        return 2.0 / self.alpha

    def with_(self, **kwargs) -> "AnalysisConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class SimConfig:
    """Inputs for the discrete-time spatial queue simulator.

    The deployment is a square torus of side region_side.  SIR statistics of
    an interference-limited network are invariant under a joint rescaling of
    all distances, so the absolute density only controls the sample count;
    defaults give ~2000 cells per realization.

    algorithm selects how per-slot transmission outcomes are drawn:
      "conditional"  success is a Bernoulli draw with the exact per-slot
                     success probability given the current set of active
                     transmitters (Rayleigh fading integrated out in closed
                     form; statistically identical to drawing the fading,
                     because fades are independent across links and slots)
      "fading"       fresh unit-mean exponential fades are drawn for every
                     active transmitter each slot and the SIR is compared to
                     theta directly (reference path; slow at scale)

    tag_policy selects the measured user per cell:
      "uniform"  a uniformly random drawn user among those associated with
                 the cell (falls back to a uniform in-cell position when the
                 cell drew none); this reproduces the typical-user distance
                 law exactly
      "nearest"  the closest associated user (biases serving distances short
                 when several users share a cell; kept for comparison)
    """

    theta: float
    xi: float
    alpha: float = 3.8
    lambda_b: float = 1.0
    lambda_u: float = 2.0
    region_side: float = math.sqrt(2000.0)
    warmup_slots: int = 500
    measure_slots: int = 2000
    realizations: int = 200
    seed: int = 24257
    algorithm: str = "conditional"
    tag_policy: str = "uniform"
    prune_budget: float = 5e-3
    resync_every: int = 512
    min_expected_bs: float = 100.0

    def __post_init__(self):
        if not self.theta >= 0.0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi must be in [0, 1], got {self.xi}")
        if not self.alpha > 2.0:
            raise ValueError(f"alpha must be > 2, got {self.alpha}")
        if self.lambda_b <= 0 or self.lambda_u < 0 or self.region_side <= 0:
            raise ValueError("densities and region side must be positive")
        if self.expected_bs < self.min_expected_bs:
            raise ValueError(
                f"expected BS count {self.expected_bs:.1f} below the "
                f"statistical floor {self.min_expected_bs}; enlarge the "
                "region or raise lambda_b"
            )
        if self.measure_slots < 1 or self.warmup_slots < 0:
            raise ValueError("need measure_slots >= 1 and warmup_slots >= 0")
        if self.realizations < 1:
            raise ValueError("realizations must be positive")
        if self.algorithm not in ("conditional", "fading"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.tag_policy not in ("uniform", "nearest"):
            raise ValueError(f"unknown tag_policy {self.tag_policy!r}")
        if not 0.0 <= self.prune_budget < 0.05:
            raise ValueError("prune_budget must be a small nonnegative number")

    @property
    def delta(self) -> float:
        return 2.0 / self.alpha

    @property
    def expected_bs(self) -> float:
        return self.lambda_b * self.region_side**2

    @property
    def total_slots(self) -> int:
        return self.warmup_slots + self.measure_slots

    def with_(self, **kwargs) -> "SimConfig":
        return replace(self, **kwargs)


def db_to_linear(theta_db: float) -> float:
    """dB -> linear power ratio.  Applied exactly once, at the harness boundary."""
    return 10.0 ** (theta_db / 10.0)


def linear_to_db(theta: float) -> float:
    return 10.0 * math.log10(theta)
