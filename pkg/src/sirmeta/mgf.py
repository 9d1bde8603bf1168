"""Imaginary-order transform of the conditional coverage distribution.

For a typical link in a Poisson deployment whose interferers transmit with
i.i.d. activity marks q (the steady-state fraction of occupied slots), the
conditional coverage value mu satisfies

    E[mu**s] = 1 / (1 + S(s)),
    S(s) = integral_1^inf (1 - E_q[(1 - q * b(w))**s]) dw,
    b(w) = theta / (theta + w**(1/delta)),

where the expectation runs over the activity mixture.  Expanding the
integrand binomially recovers the series

    S(s) = delta * sum_{k>=1} binom(s, k) * eta_k * Z(k, delta, theta),

with eta_k = E[q**k].  The series is exact but numerically explosive for
s = j*omega with moderate omega: binom(j*omega, k) grows like
exp(pi*omega/2) before the geometric kernel decay wins, so the partial sums
cancel catastrophically in double precision.  The evaluator therefore
dispatches:

* small |omega|: the series, with a cancellation guard bounding the peak
  term against the result scale;
* everything else: the defining integral pushed onto the complex ray
  w = 1 + t * exp(j*pi/4).  Along that ray Im log(1 - q*b(w)) > 0, so the
  oscillatory factor turns into exponential decay and a fixed log-spaced
  Gauss grid resolves the integral at a cost independent of omega.  The ray
  remainder beyond the last node is added in closed form from the first two
  binomial orders.

Singularities of log(1 - q*b(w)) sit at arg(w) = pi*delta with
arg(w - 1) > pi*delta, which keeps them strictly above a 45-degree ray for
every delta in (0, 1); the deformation is therefore always legitimate
(alpha up to 8, i.e. delta >= 1/4, keeps the principal branch of w**(1/delta)
clear of the negative axis along the ray).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import ConvergenceError, DomainError
from .specfun import complex_binom, z_kernel

SERIES_REL_TOL = 1e-12
SERIES_SOFT_TOL = 1e-8
PEAK_GUARD = 1e6
RAY_ANGLE = math.pi / 4.0
RAY_T_LO = 1e-7
RAY_NODES_PER_UNIT = 9
GL_ORDER = 8


@lru_cache(maxsize=64)
def _gauss_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


@lru_cache(maxsize=32)
def _ray_quadrature(theta: float, delta: float, omega_max: float):
    """Log-spaced Gauss panels on the integration ray, cached per scenario.

    Returns (w nodes, complex quadrature weights including the ray direction
    and the d w/d log t factor, endpoint w_T, b(w) at the nodes).
    """
    w_hi = (20.0 * theta * (1.0 + omega_max)) ** delta + 10.0
    t_hi = max(2.0 * w_hi, 50.0)
    x_lo, x_hi = math.log(RAY_T_LO), math.log(t_hi)
    npanels = max(10, int(math.ceil((x_hi - x_lo) * RAY_NODES_PER_UNIT / GL_ORDER)))
    xg, wg = _gauss_nodes(GL_ORDER)
    edges = np.linspace(x_lo, x_hi, npanels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    xs = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wq = (half[:, None] * wg[None, :]).ravel()
    t = np.exp(xs)
    direction = np.exp(1j * RAY_ANGLE)
    w = 1.0 + t * direction
    ray_weights = wq * t * direction
    w_end = 1.0 + t_hi * direction
    b = theta / (theta + w ** (1.0 / delta))
    return w, ray_weights, w_end, b


@lru_cache(maxsize=64)
def series_omega_limit(theta: float, delta: float) -> float:
    """Largest omega for which the binomial series is trusted in float64.

    Uses |binom(j*omega, k)| by recurrence and the geometric kernel bound
    |Z_k| <= |Z_1| * (theta/(1+theta))**(k-1); the switch point keeps the
    peak term under PEAK_GUARD so at most ~6 digits cancel.
    """
    if theta == 0.0:
        return math.inf
    x = theta / (1.0 + theta)
    z1 = abs(z_kernel(1, delta, theta))

    def peak(omega: float) -> float:
        mag = 1.0  # |binom(j omega, 0)|
        zmag = delta * z1
        best = 0.0
        for k in range(1, 4000):
            mag *= math.hypot(omega, k - 1.0) / k
            term = mag * zmag
            best = max(best, term)
            zmag *= x
            if term < best * 1e-18 and k > omega:
                break
            if best > 1e300:
                break
        return best

    lo, hi = 1.0, 400.0
    if peak(lo) > PEAK_GUARD:
        return lo
    if peak(hi) <= PEAK_GUARD:
        return hi
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if peak(mid) <= PEAK_GUARD:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class TailModel:
    """Large-frequency behavior S(j w) ~ scale * (j w)**delta + offset."""

    scale: float
    offset: complex
    delta: float
    omega_ref: float


class CoverageTransform:
    """E[mu**s] for a fixed scenario (theta, delta) and activity mixture."""

    def __init__(self, theta, delta, q_atoms, weights, k_max: int = 64):
        if theta < 0.0:
            raise DomainError("theta must be nonnegative")
        if not 0.0 < delta < 1.0:
            raise DomainError("delta must lie in (0, 1)")
        q = np.atleast_1d(np.asarray(q_atoms, dtype=float))
        w = np.atleast_1d(np.asarray(weights, dtype=float))
        if q.shape != w.shape or q.ndim != 1:
            raise ValueError("q_atoms and weights must be 1-d arrays of equal length")
        if np.any(q < 0.0) or np.any(q > 1.0) or np.any(w < 0.0):
            raise ValueError("activity atoms must lie in [0,1] with nonnegative weights")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        order = np.argsort(q, kind="stable")  # ascending: kernel break point
        self.theta = float(theta)
        self.delta = float(delta)
        self.q = q[order]
        self.w = w[order]
        self.k_max = int(k_max)
        self._z = np.empty(0)

    # -- series ------------------------------------------------------------

    def _z_table(self, upto: int) -> np.ndarray:
        if len(self._z) < upto:
            start = len(self._z)
            more = [z_kernel(k, self.delta, self.theta) for k in range(start + 1, upto + 1)]
            self._z = np.concatenate([self._z, np.asarray(more)])
        return self._z

    def eta(self, k: int) -> float:
        return float(np.sum(self.w * self.q**k))

    def series_sum(self, s: complex, k_cap: int | None = None):
        """Partial binomial series with cancellation diagnostics.

        Returns (S, converged, peak_over_result, first k with relative term
        below SERIES_REL_TOL or k_cap).
        """
        if self.theta == 0.0:
            return 0.0 + 0.0j, True, 0.0, 0
        s = complex(s)
        cap = k_cap if k_cap is not None else max(self.k_max, int(6 * abs(s)) + 80)
        z = self._z_table(cap)
        total = 0.0 + 0.0j
        binom = complex(1.0)
        qpow = np.ones_like(self.q)
        peak = 0.0
        converged = False
        used = cap
        for k in range(1, cap + 1):
            binom *= (s - (k - 1)) / k
            qpow = qpow * self.q
            term = binom * float(np.sum(self.w * qpow)) * self.delta * z[k - 1]
            total += term
            peak = max(peak, abs(term))
            if k >= 2 and abs(term) <= SERIES_REL_TOL * max(abs(total), 1e-300):
                converged = True
                used = k
                break
        scale = max(abs(total), 1e-3)
        return total, converged, peak / scale, used

    # -- contour -----------------------------------------------------------

    def contour_values(self, omegas: np.ndarray) -> np.ndarray:
        """S(j*omega) for positive omegas via the deformed integral."""
        omegas = np.asarray(omegas, dtype=float)
        if np.any(omegas <= 0.0):
            raise DomainError("contour evaluation needs omega > 0")
        om_scale = max(float(omegas.max()), 1.0)
        wn, rayw, w_end, b = _ray_quadrature(self.theta, self.delta, om_scale)
        L = np.log(1.0 - self.q[None, :] * b[:, None])
        core = kernels.transform_sums(
            np.ascontiguousarray(L.real),
            np.ascontiguousarray(L.imag),
            self.w,
            np.ascontiguousarray(rayw),
            omegas,
        )
        # closed-form ray remainder beyond w_end, first two binomial orders
        inv = 1.0 / self.delta
        th = self.theta

        def jpow(m):
            p = m * inv
            return w_end ** (1.0 - p) / (p - 1.0)

        j1 = th * jpow(1) - th**2 * jpow(2) + th**3 * jpow(3)
        j2 = th**2 * jpow(2) - 2.0 * th**3 * jpow(3)
        e1 = self.eta(1)
        e2 = self.eta(2)
        svec = 1j * omegas
        return core + svec * e1 * j1 - svec * (svec - 1.0) / 2.0 * e2 * j2

    # -- dispatch ----------------------------------------------------------

    def values_on_axis(self, omegas: np.ndarray) -> np.ndarray:
        """S(j*omega) on a positive frequency grid (hybrid dispatch)."""
        omegas = np.asarray(omegas, dtype=float)
        out = np.empty(len(omegas), dtype=complex)
        limit = series_omega_limit(self.theta, self.delta)
        low = omegas <= limit
        for i in np.flatnonzero(low):
            val, ok, peak, _ = self.series_sum(1j * omegas[i])
            if ok and peak <= PEAK_GUARD:
                out[i] = val
            else:
                low[i] = False
        hi = ~low
        if hi.any():
            out[hi] = self.contour_values(omegas[hi])
        return out

    def mgf_on_axis(self, omegas: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + self.values_on_axis(omegas))

    def at(self, s: complex) -> complex:
        """E[mu**s] at a single point (real s >= 0 or s on the imaginary axis)."""
        s = complex(s)
        if s == 0:
            return complex(1.0)
        if self.theta == 0.0:
            return complex(1.0)
        if s.imag == 0.0:
            if s.real < 0.0:
                raise DomainError("transform defined for Re(s) >= 0")
            if s.real == int(s.real):
                # binomial series terminates at k = s
                k = int(s.real)
                z = self._z_table(k)
                total = 0.0
                for i in range(1, k + 1):
                    total += (
                        complex_binom(complex(k), i).real
                        * self.eta(i)
                        * self.delta
                        * z[i - 1]
                    )
                return complex(1.0 / (1.0 + total))
            val, ok, peak, used = self.series_sum(s, k_cap=self.k_max)
            if not ok:
                tail_term = abs(val) * SERIES_SOFT_TOL
                raise ConvergenceError(
                    f"series truncation unconverged at k_max={self.k_max} "
                    f"(last relative term above {SERIES_SOFT_TOL}); "
                    f"residual scale {tail_term:.2e}"
                )
            return 1.0 / (1.0 + val)
        if s.real != 0.0:
            val, ok, peak, _ = self.series_sum(s)
            if ok and peak <= PEAK_GUARD:
                return 1.0 / (1.0 + val)
            raise DomainError(
                "off-axis complex exponents are supported only in the "
                "series-convergent regime"
            )
        om = s.imag
        if om < 0.0:
            return np.conj(self.at(1j * (-om)))
        val = self.values_on_axis(np.array([om]))[0]
        return 1.0 / (1.0 + val)

    def tail_model(self, omega_ref: float) -> TailModel:
        """Fit S ~ scale*(j w)**delta + offset at a reference frequency."""
        eqd = float(np.sum(self.w * self.q**self.delta))
        scale = self.theta**self.delta * eqd * math.gamma(1.0 - self.delta)
        s_ref = self.contour_values(np.array([omega_ref]))[0]
        offset = s_ref - scale * (1j * omega_ref) ** self.delta
        return TailModel(scale=scale, offset=offset, delta=self.delta, omega_ref=omega_ref)
