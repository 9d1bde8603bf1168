"""Gridded CDFs on [0, 1] and the activity-moment machinery built on them.

A CdfGrid stores a nondecreasing function on a strictly increasing u-grid
that includes both endpoints, with F(1) = 1.  Distributions with an atom at
exactly 1 (for instance the no-arrivals case, where the coverage value is
identically 1) are represented as a jump at the final grid point; the
Stieltjes rules below honor that convention by placing the final cell's
increment at t = 1 rather than at the cell midpoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def default_grid(grid_size: int = 201) -> np.ndarray:
    return np.linspace(0.0, 1.0, grid_size)


def isotonic_projection(y: np.ndarray) -> np.ndarray:
    """L2 projection onto the nondecreasing cone (pool adjacent violators)."""
    vals: list[float] = []
    counts: list[int] = []
    for v in y:
        v = float(v)
        c = 1
        while vals and vals[-1] > v:
            v = (vals[-1] * counts[-1] + v * c) / (counts[-1] + c)
            c += counts.pop()
            vals.pop()
        vals.append(v)
        counts.append(c)
    return np.repeat(vals, counts)


@dataclass(frozen=True)
class CdfGrid:
    u_points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u_points, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "u_points", u)
        object.__setattr__(self, "values", v)
        if u.ndim != 1 or u.shape != v.shape or len(u) < 2:
            raise ValueError("u_points and values must be 1-d arrays of equal length >= 2")
        if not (np.all(np.diff(u) > 0) and u[0] == 0.0 and u[-1] == 1.0):
            raise ValueError("u_points must increase strictly from 0 to 1")
        if np.any(np.diff(v) < -1e-12):
            raise ValueError("values must be nondecreasing")
        if np.any(v < -1e-12) or np.any(v > 1.0 + 1e-12):
            raise ValueError("values must lie in [0, 1]")
        if abs(v[-1] - 1.0) > 1e-12:
            raise ValueError("a proper CDF must reach 1 at u = 1")

    def at(self, u) -> np.ndarray | float:
        """Monotone piecewise-linear interpolation."""
        return np.interp(u, self.u_points, self.values)

    def sup_distance(self, other: "CdfGrid") -> float:
        """Kolmogorov-Smirnov style sup |self - other| on the common grid."""
        if np.array_equal(self.u_points, other.u_points):
            return float(np.max(np.abs(self.values - other.values)))
        return float(np.max(np.abs(self.values - other.at(self.u_points))))

    def resample(self, u_points: np.ndarray) -> "CdfGrid":
        return CdfGrid(u_points, self.at(u_points))

    @staticmethod
    def from_raw(u_points: np.ndarray, raw: np.ndarray) -> "CdfGrid":
        """Clamp, pin endpoints and project raw inversion output onto a CDF."""
        v = np.clip(np.asarray(raw, dtype=float), 0.0, 1.0)
        v = isotonic_projection(v)
        v = np.clip(v, 0.0, 1.0)
        v[0] = 0.0
        v[-1] = 1.0
        v = np.maximum.accumulate(v)
        return CdfGrid(u_points, v)

    @staticmethod
    def from_samples(samples: np.ndarray, u_points: np.ndarray) -> "CdfGrid":
        """Empirical (step) CDF of the samples evaluated on the grid."""
        s = np.sort(np.asarray(samples, dtype=float))
        v = np.searchsorted(s, u_points, side="right") / len(s)
        v[-1] = 1.0
        return CdfGrid(u_points, v)

    @staticmethod
    def point_mass_at_one(u_points: np.ndarray) -> "CdfGrid":
        v = np.zeros_like(u_points)
        v[-1] = 1.0
        return CdfGrid(u_points, v)


def activity_mixture(F: CdfGrid, xi: float) -> tuple[np.ndarray, np.ndarray]:
    """Discretize the steady-state activity marks implied by a coverage CDF.

    A cell whose conditional coverage is t transmits in a fraction
    q = min(1, xi / t) of slots.  Integrating q**k against F(dt) gives the
    activity moments; this helper returns atoms (q_i, w_i), sum w_i = 1, so
    that eta_k = sum_i w_i q_i**k reproduces the midpoint Stieltjes rule:

      * weight F(xi) at q = 1 (cells at or below the arrival rate saturate),
      * each grid increment above xi at its interval midpoint,
      * the final increment at t = 1 exactly (atom-at-one convention).
    """
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"xi must be in [0, 1], got {xi}")
    u = F.u_points
    v = F.values
    if xi >= 1.0:
        return np.array([1.0]), np.array([1.0])
    f_xi = float(F.at(xi))
    qs = [1.0]
    ws = [f_xi]
    last = len(u) - 2
    for i in range(len(u) - 1):
        hi = u[i + 1]
        if hi <= xi:
            continue
        lo = max(u[i], xi)
        dv = (v[i + 1] - (f_xi if u[i] < xi else v[i]))
        if dv <= 0.0:
            continue
        t_mid = 1.0 if i == last else 0.5 * (lo + hi)
        qs.append(min(1.0, xi / t_mid))
        ws.append(dv)
    q = np.asarray(qs)
    w = np.asarray(ws)
    total = w.sum()
    if total <= 0.0:
        return np.array([1.0]), np.array([1.0])
    return q, w / total


def compress_mixture(
    q: np.ndarray, w: np.ndarray, max_atoms: int = 64
) -> tuple[np.ndarray, np.ndarray]:
    """Merge mixture atoms into at most max_atoms equal-mass bins.

    Bins are mass-weighted means, so the first moment is preserved exactly
    and higher moments to second order in the within-bin spread; used to
    bound the per-frequency cost of the transform integral.  Atoms are
    returned sorted ascending (the compiled kernel exploits that the decay
    exponent grows with q to break out of saturated bins early).
    """
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    order = np.argsort(q, kind="stable")
    q = q[order]
    w = w[order]
    if len(q) <= max_atoms:
        return q, w
    cum = np.cumsum(w)
    edges = np.searchsorted(cum, np.linspace(0.0, cum[-1], max_atoms + 1)[1:-1], side="left")
    edges = np.unique(np.concatenate(([0], edges + 1, [len(q)])))
    qs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        mass = w[a:b].sum()
        if mass <= 0.0:
            continue
        qs.append(float(np.sum(q[a:b] * w[a:b]) / mass))
        ws.append(float(mass))
    return np.asarray(qs), np.asarray(ws)


def eta_k(F: CdfGrid, xi: float, k: int) -> float:
    """k-th activity moment F(xi) + integral_xi^1 (xi/t)**k F(dt).

    Lies in [F(xi), 1], is nonincreasing in k and tends to F(xi) as k grows.
    """
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    q, w = activity_mixture(F, xi)
    return float(np.sum(w * q**k))
