"""Numerically robust special functions for the interference analysis.

Three building blocks are needed by every closed-form expression in the
package:

* the Gauss hypergeometric function 2F1(a, b; c; z) restricted to real
  z <= 0 (the only arguments that arise, via z = -theta),
* the interference kernel
      Z(k, delta, theta) = (-1)**(k+1) * theta**k / (k - delta)
                           * 2F1(k, k - delta; k - delta + 1; -theta),
  which equals (-1)**(k+1) / delta * integral_1^inf (theta /
  (theta + v**(1/delta)))**k dv, and
* generalized binomial coefficients binom(z, k) with complex upper argument.

The kernel is always evaluated from transformed series with positive terms
(or a large-theta connection formula), never from the defining integral: the
integral is reserved for test oracles.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .errors import ConvergenceError, DomainError

SERIES_TOL = 1e-12
SERIES_CAP = 500


def _gauss_series(a: float, b: float, c: float, x: float, cap: int = SERIES_CAP) -> float:
    """Plain Gauss series sum_n (a)_n (b)_n / ((c)_n n!) x**n for |x| < 1."""
    term = 1.0
    total = 1.0
    for n in range(cap):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * x
        total += term
        if abs(term) <= SERIES_TOL * abs(total):
            return total
    raise ConvergenceError(
        f"2F1 series did not converge within {cap} terms "
        f"(a={a}, b={b}, c={c}, x={x})"
    )


def _hyp2f1_inverse_argument(a: float, b: float, c: float, z: float) -> float:
    """Connection formula in 1/z for z << -1, valid when a - b is not an integer.

    2F1(a,b;c;z) = G1 * (-z)**-a * 2F1(a, 1-c+a; 1-b+a; 1/z)
                 + G2 * (-z)**-b * 2F1(b, 1-c+b; 1-a+b; 1/z)
    with gamma-function prefactors G1, G2 evaluated in log space.
    """
    out = 0.0
    for p, q in ((a, b), (b, a)):
        # G = Gamma(c) Gamma(q - p) / (Gamma(q) Gamma(c - p))
        sign = 1.0
        logg = 0.0
        for arg, upper in ((c, True), (q - p, True), (q, False), (c - p, False)):
            if arg <= 0.0 and arg == round(arg):
                raise DomainError(
                    f"gamma pole in 1/z connection formula (argument {arg})"
                )
            g, s = gammaln(arg), 1.0
            if arg < 0.0:
                # reflection: Gamma(x) = pi / (sin(pi x) Gamma(1 - x))
                s = math.copysign(1.0, math.sin(math.pi * arg))
                g = math.log(math.pi / abs(math.sin(math.pi * arg))) - gammaln(1.0 - arg)
            logg += g if upper else -g
            sign *= s if upper else s
        f = _gauss_series(p, 1.0 - c + p, 1.0 - q + p, 1.0 / z)
        out += sign * math.exp(logg - p * math.log(-z)) * f
    return out


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric 2F1(a, b; c; z) for real z <= 0.

    The direct series is used for small |z|; for z <= -0.5 the argument is
    mapped to z/(z-1) in (0, 2/3] by the Pfaff transformation
    2F1(a,b;c;z) = (1-z)**-a 2F1(a, c-b; c; z/(z-1)); for z < -2 (where the
    Pfaff argument creeps toward 1) the 1/z connection formula is preferred
    whenever a - b is not an integer.

    Raises DomainError for invalid c or positive z, ConvergenceError if no
    expansion reaches tolerance within the term cap.
    """
    if c <= 0.0 and c == round(c):
        raise DomainError(f"c must not be a nonpositive integer, got {c}")
    if z > 0.0:
        raise DomainError(f"only z <= 0 is supported, got {z}")
    if z == 0.0:
        return 1.0
    if z > -0.5:
        return _gauss_series(a, b, c, z)
    if z >= -2.0:
        x = z / (z - 1.0)
        return (1.0 - z) ** (-a) * _gauss_series(a, c - b, c, x)
    ab = a - b
    if abs(ab - round(ab)) > 1e-8:
        return _hyp2f1_inverse_argument(a, b, c, z)
    # degenerate a - b: fall back to the Pfaff series with an enlarged cap;
    # the argument z/(z-1) is in (2/3, 1) so convergence is slow but sure
    x = z / (z - 1.0)
    cap = max(SERIES_CAP, int(60.0 / (1.0 - x)))
    return (1.0 - z) ** (-a) * _gauss_series(a, c - b, c, x, cap=cap)


def z_kernel(k: int, delta: float, theta: float) -> float:
    """Interference kernel Z(k, delta, theta).

    Sign alternates with the parity of k; Z(k, delta, 0) = 0.  Internally the
    hypergeometric factor is fused with theta**k so no intermediate over- or
    underflows:

      |Z| = x**k / (k - delta) * sum_n x**n (k)_n / (k - delta + 1)_n,
      x = theta / (1 + theta)                       (positive-term series)

    except for k well below a large theta, where the series is long and the
    1/z connection formula gives

      |Z| = theta**delta Gamma(delta) Gamma(k - delta) / Gamma(k)
            - (1/delta) 2F1(k, delta; 1 + delta; -1/theta).
    """
    if k < 1:
        raise DomainError(f"series index k must be >= 1, got {k}")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie strictly inside (0, 1), got {delta}")
    if theta < 0.0:
        raise DomainError(f"theta must be nonnegative, got {theta}")
    if theta == 0.0:
        return 0.0
    sign = 1.0 if k % 2 == 1 else -1.0
    if theta > 2.0 and k <= 0.5 * theta:
        head = theta**delta * math.exp(
            math.lgamma(delta) + gammaln(k - delta) - gammaln(k)
        )
        return sign * (head - _gauss_series(k, delta, 1.0 + delta, -1.0 / theta) / delta)
    x = theta / (1.0 + theta)
    cap = max(SERIES_CAP, int(60.0 / (1.0 - x)))
    term = 1.0
    total = 1.0
    for n in range(cap):
        term *= x * (k + n) / (k - delta + 1.0 + n)
        total += term
        if term <= SERIES_TOL * total:
            break
    else:
        raise ConvergenceError(
            f"kernel series did not converge (k={k}, delta={delta}, theta={theta})"
        )
    # x**k can underflow for huge k; the kernel is genuinely negligible there
    return sign * math.exp(k * math.log(x)) / (k - delta) * total


def z_kernel_table(k_max: int, delta: float, theta: float) -> np.ndarray:
    """Z(k, delta, theta) for k = 1..k_max as a float array."""
    return np.array([z_kernel(k, delta, theta) for k in range(1, k_max + 1)])


def complex_binom(z: complex, k: int) -> complex:
    """Generalized binomial coefficient binom(z, k) = z(z-1)...(z-k+1)/k!.

    Total function of (z, k >= 0); exact for k = 0 and 1.
    """
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    out = complex(1.0)
    for i in range(k):
        out *= (z - i) / (i + 1.0)
    return out
