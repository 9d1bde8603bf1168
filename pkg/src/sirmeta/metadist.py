"""Distribution of the conditional SIR coverage under queued traffic.

The central object is the CDF F of the per-link conditional coverage value
in a Poisson cellular deployment where transmitters hold queued packets and
retransmit failures.  The service rate of every queue is the coverage value
itself, which couples all queues through interference; in the mean-field
steady state the coupling closes into a fixed-point equation: the activity
moments eta_k of F feed the coverage transform, whose inversion yields the
next F.  Everything else here (moments, coverage bounds, the Beta surrogate,
stability thresholds, the mean-delay law) is derived from that fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special

from .cdfgrid import CdfGrid, activity_mixture, compress_mixture, default_grid, eta_k
from .config import AnalysisConfig
from .errors import DegenerateVarianceError, DomainError, FixedPointError
from .gilpelaez import frequency_grid, gil_pelaez_cdf, grid_inverter, invert_on_grid
from .mgf import CoverageTransform
from .specfun import z_kernel

__all__ = [
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
    "beta_cdf_grid",
    "StabilityMode",
    "stability_threshold",
    "delay_cdf",
]


def _transform(cfg: AnalysisConfig, q, w) -> CoverageTransform:
    q, w = compress_mixture(q, w)
    return CoverageTransform(cfg.theta, cfg.delta, q, w, k_max=cfg.k_max)


def _sweep(cfg: AnalysisConfig, transform: CoverageTransform) -> np.ndarray:
    """One inversion sweep: transform on the frequency grid -> raw CDF values."""
    inv = grid_inverter(cfg.omega_min, cfg.omega_max, cfg.grid_size)
    mvals = 1.0 / (1.0 + transform.values_on_axis(inv.omegas))
    tail = transform.tail_model(cfg.omega_max) if cfg.tail_correction else None
    return inv.invert(mvals, tail)


def _grid_from_raw(u: np.ndarray, raw_interior: np.ndarray) -> CdfGrid:
    full = np.concatenate(([0.0], raw_interior, [1.0]))
    return CdfGrid.from_raw(u, full)


@dataclass
class FixedPointResult:
    cdf: CdfGrid
    iterations: int
    deltas: list
    converged: bool
    dominance_margin: float  # min over iterations of min_u(F_n+1 - F_n)


def fixed_point_cdf(cfg: AnalysisConfig, seed_cdf: CdfGrid | None = None) -> FixedPointResult:
    """Solve the coverage-distribution fixed point on the u-grid.

    Starts from the no-retransmission activity seed (a point mass q = xi,
    i.e. eta_k = xi**k) and alternates transform inversion with activity
    re-extraction until the sup-norm change drops below cfg.fp_tol.  The
    iterates increase monotonically from the seed (the seed underestimates
    interference), which is recorded in dominance_margin as a diagnostic.

    Degenerate inputs short-circuit: theta = 0 or xi = 0 give coverage
    identically 1; xi = 1 is already stationary after a single sweep.

    `seed_cdf` replaces the activity seed (used to warm-start nearby
    scenarios); the dominance diagnostic is skipped in that case.

    Raises FixedPointError (carrying the last two iterates) when the cap
    cfg.fp_max_iter is reached without convergence.
    """
    u = default_grid(cfg.grid_size)
    if cfg.theta == 0.0 or cfg.xi == 0.0:
        return FixedPointResult(CdfGrid.point_mass_at_one(u), 0, [], True, 0.0)
    if cfg.xi == 1.0:
        raw = _sweep(cfg, _transform(cfg, [1.0], [1.0]))
        return FixedPointResult(_grid_from_raw(u, raw), 1, [0.0], True, 0.0)

    if seed_cdf is None:
        q, w = np.array([cfg.xi]), np.array([1.0])
        track_dominance = True
    else:
        q, w = activity_mixture(seed_cdf, cfg.xi)
        track_dominance = False

    F_prev = None
    F_prev2 = None
    deltas: list[float] = []
    margin = math.inf
    for n in range(1, cfg.fp_max_iter + 1):
        raw = _sweep(cfg, _transform(cfg, q, w))
        F = _grid_from_raw(u, raw)
        if F_prev is not None:
            diff = F.values - F_prev.values
            deltas.append(float(np.max(np.abs(diff))))
            if track_dominance:
                margin = min(margin, float(np.min(diff)))
            if deltas[-1] < cfg.fp_tol:
                return FixedPointResult(F, n, deltas, True, 0.0 if margin is math.inf else margin)
        F_prev2 = F_prev
        F_prev = F
        q, w = activity_mixture(F, cfg.xi)
    raise FixedPointError(
        f"no convergence after {cfg.fp_max_iter} iterations "
        f"(last change {deltas[-1] if deltas else math.nan:.3e})",
        last=F_prev,
        previous=F_prev2,
        distance=deltas[-1] if deltas else math.nan,
    )


def mgf_at(F_prev: CdfGrid, cfg: AnalysisConfig, s: complex) -> complex:
    """Coverage transform E[mu**s] for the activity implied by F_prev.

    Real nonnegative s uses the (terminating or guarded) binomial series and
    honors the cfg.k_max truncation contract; purely imaginary s switches to
    the exact deformed-integral representation whenever the series would
    cancel catastrophically.
    """
    q, w = activity_mixture(F_prev, cfg.xi)
    return _transform(cfg, q, w).at(s)


def avg_active_prob(F: CdfGrid, xi: float) -> float:
    """Mean fraction of occupied slots across cells: eta_1 of F."""
    if xi == 0.0:
        return 0.0
    if xi == 1.0:
        return 1.0
    return eta_k(F, xi, 1)


def moment(cfg: AnalysisConfig, m: int, F: CdfGrid) -> float:
    """m-th moment of the conditional coverage given the converged CDF.

    M_m = 1 / (1 + delta * sum_{k=1}^m C(m,k) eta_k Z(k, delta, theta));
    m = 1 is the standard coverage probability.
    """
    if m < 1:
        raise DomainError(f"moment order must be a positive integer, got {m}")
    if cfg.theta == 0.0:
        return 1.0
    total = 0.0
    for k in range(1, m + 1):
        total += (
            math.comb(m, k)
            * eta_k(F, cfg.xi, k)
            * z_kernel(k, cfg.delta, cfg.theta)
        )
    return 1.0 / (1.0 + cfg.delta * total)


def coverage_envelope(cfg: AnalysisConfig) -> tuple[float, float, float]:
    """(lower, upper, light_traffic) coverage probabilities.

    lower: all transmitters always on (worst interference); upper: no
    retransmissions (activity xi); light_traffic: first-order outage law
    1 - xi * delta * Z(1), clamped to [0, 1].
    """
    if cfg.theta == 0.0:
        return 1.0, 1.0, 1.0
    z1 = z_kernel(1, cfg.delta, cfg.theta)
    lower = 1.0 / (1.0 + cfg.delta * z1)
    upper = 1.0 / (1.0 + cfg.delta * cfg.xi * z1)
    light = min(1.0, max(0.0, 1.0 - cfg.xi * cfg.delta * z1))
    return lower, upper, light


# -- Beta surrogate ---------------------------------------------------------


@dataclass(frozen=True)
class BetaParams:
    """Mean/shape parameterization: Beta(mu*beta/(1-mu), beta)."""

    mu: float
    beta: float

    @property
    def a(self) -> float:
        return self.mu * self.beta / (1.0 - self.mu)

    @property
    def b(self) -> float:
        return self.beta


@dataclass
class BetaApproxResult:
    params: list
    final: BetaParams | None
    degenerate: bool
    iterations: int


_BETA_QUAD = np.polynomial.legendre.leggauss(64)


def _beta_activity_moment(p: BetaParams, xi: float, k: int) -> float:
    """F_beta(xi) + integral_xi^1 (xi/t)**k Beta-pdf(t) dt.

    The endpoint singularity (1-t)**(b-1) is absorbed by substituting
    t = 1 - (1-xi) * s**(1/b), which leaves a smooth integrand on (0, 1).
    """
    a, b = p.a, p.b
    head = float(special.betainc(a, b, xi))
    x, w = _BETA_QUAD
    s = 0.5 * (x + 1.0)
    ws = 0.5 * w
    t = 1.0 - (1.0 - xi) * s ** (1.0 / b)
    dens = (xi / t) ** k * t ** (a - 1.0)
    scale = (1.0 - xi) ** b / (b * special.beta(a, b))
    return head + scale * float(np.sum(ws * dens))


def beta_approx(cfg: AnalysisConfig) -> BetaApproxResult:
    """Two-moment Beta surrogate of the coverage CDF, iterated to its own
    fixed point.

    Each round maps the current Beta law to activity moments, then to the
    first two coverage moments, then back to Beta parameters by moment
    matching.  Stops when |mu_n - mu_{n-1}| + |beta_n - beta_{n-1}| /
    (1 + beta_{n-1}) < cfg.fp_tol.

    Degenerate scenarios (theta = 0 or xi = 0: coverage identically 1) are
    reported with degenerate=True instead of a Beta fit; a numerically
    non-positive matched variance raises DegenerateVarianceError.
    """
    if cfg.theta == 0.0 or cfg.xi == 0.0:
        return BetaApproxResult([], None, True, 0)
    z1 = z_kernel(1, cfg.delta, cfg.theta)
    z2 = z_kernel(2, cfg.delta, cfg.theta)
    eta1, eta2 = cfg.xi, cfg.xi**2
    seq: list[BetaParams] = []
    prev: BetaParams | None = None
    for n in range(1, cfg.fp_max_iter + 1):
        m1 = 1.0 / (1.0 + cfg.delta * eta1 * z1)
        m2 = 1.0 / (1.0 + cfg.delta * (2.0 * eta1 * z1 + eta2 * z2))
        var = m2 - m1 * m1
        if var <= 0.0 or m1 >= 1.0:
            raise DegenerateVarianceError(
                f"matched variance {var:.3e} is not positive (mu={m1:.6f})"
            )
        p = BetaParams(mu=m1, beta=(m1 - m2) * (1.0 - m1) / var)
        seq.append(p)
        if prev is not None:
            step = abs(p.mu - prev.mu) + abs(p.beta - prev.beta) / (1.0 + prev.beta)
            if step < cfg.fp_tol:
                return BetaApproxResult(seq, p, False, n)
        prev = p
        eta1 = _beta_activity_moment(p, cfg.xi, 1)
        eta2 = _beta_activity_moment(p, cfg.xi, 2)
    return BetaApproxResult(seq, prev, False, cfg.fp_max_iter)


def beta_cdf_grid(p: BetaParams, grid_size: int = 201) -> CdfGrid:
    u = default_grid(grid_size)
    vals = special.betainc(p.a, p.b, u)
    vals[-1] = 1.0
    return CdfGrid(u, vals)


# -- stability ----------------------------------------------------------------


class StabilityMode(str, Enum):
    SUFFICIENT = "sufficient"
    NECESSARY = "necessary"
    APPROXIMATE = "approximate"


def _cdf_value_at(cfg: AnalysisConfig, transform: CoverageTransform, u: float) -> float:
    omegas, weights = frequency_grid(
        cfg.omega_min, cfg.omega_max, abs(math.log(min(u, 0.99)))
    )
    mvals = 1.0 / (1.0 + transform.values_on_axis(omegas))
    tail = transform.tail_model(cfg.omega_max) if cfg.tail_correction else None
    raw = invert_on_grid(omegas, weights, mvals, np.array([u]), tail)
    return float(min(1.0, max(0.0, raw[0])))


def stability_threshold(
    cfg: AnalysisConfig,
    epsilon: float,
    mode: StabilityMode | str,
    xi_tol: float = 1e-4,
) -> float:
    """Largest arrival probability keeping the unstable-cell fraction <= epsilon.

    sufficient  uses the always-on interference field (its CDF does not
                depend on the probe, so this inverts one fixed CDF),
    necessary   uses the no-retransmission field (the CDF depends on the
                probe; solved by bisection to xi_tol),
    approximate uses the converged fixed point per probe (bisection with
                warm starts).

    Returns 1.0 when even saturated arrivals satisfy the constraint and 0.0
    when arbitrarily light traffic already violates it.
    """
    mode = StabilityMode(mode)
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon must be in [0, 1], got {epsilon}")
    if epsilon >= 1.0:
        return 1.0
    if cfg.theta == 0.0:
        return 1.0

    xi_lo = xi_tol  # probing arbitrarily close to 0 is numerically moot

    if mode is StabilityMode.SUFFICIENT:
        transform = _transform(cfg, [1.0], [1.0])

        def constraint(x: float) -> float:
            return _cdf_value_at(cfg, transform, x)

    elif mode is StabilityMode.NECESSARY:

        def constraint(x: float) -> float:
            return _cdf_value_at(cfg.with_(xi=x), _transform(cfg, [x], [1.0]), x)

    else:
        warm: dict[str, CdfGrid | None] = {"cdf": None}

        def constraint(x: float) -> float:
            res = fixed_point_cdf(cfg.with_(xi=x), seed_cdf=warm["cdf"])
            warm["cdf"] = res.cdf
            return float(res.cdf.at(x))

    if constraint(xi_lo) > epsilon:
        return 0.0
    hi_probe = 1.0 - xi_tol
    if constraint(hi_probe) <= epsilon:
        return 1.0
    lo, hi = xi_lo, hi_probe
    while hi - lo > xi_tol:
        mid = 0.5 * (lo + hi)
        if constraint(mid) <= epsilon:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def delay_cdf(cfg: AnalysisConfig, F: CdfGrid, T: float) -> float:
    """P(mean packet delay <= T) = 1 - F(xi + (1 - xi)/T), T >= 1 slots.

    T = 1 gives exactly 0 (zero-retransmission links are a null set); as
    T -> inf the value converges to 1 - F(xi), whose complement is the
    fraction of unstable cells.
    """
    if T < 1.0:
        raise DomainError(f"delay horizon must be >= 1 slot, got {T}")
    arg = cfg.xi + (1.0 - cfg.xi) / T
    return float(1.0 - F.at(arg))
