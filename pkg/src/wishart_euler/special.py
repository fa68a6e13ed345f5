"""Scalar special functions: incomplete gamma, Gaussian tail moments,
terminating 1F1, chi-square tails, and the constant factors of the central
Euler-characteristic formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EPS = 1e-15
MAX_ITER = 100_000


class DomainError(ValueError):
    pass


def log_gamma(x: float) -> float:
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"log_gamma needs x > 0, got {x!r}")
    return math.lgamma(x)


def _lower_series(a: float, x: float) -> float:
    # P(a, x) by the power series; use for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_cf(a: float, x: float) -> float:
    # Q(a, x) by the Lentz continued fraction; use for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def upper_gamma_regularized(shape: float, x: float) -> float:
    """Q(shape, x) = Gamma(shape, x) / Gamma(shape)."""
    if not shape > 0:
        raise DomainError(f"shape must be positive, got {shape!r}")
    if math.isnan(x) or x < 0:
        raise DomainError(f"x must be nonnegative, got {x!r}")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < shape + 1.0:
        return min(1.0, max(0.0, 1.0 - _lower_series(shape, x)))
    return min(1.0, max(0.0, _upper_cf(shape, x)))


def lower_gamma_regularized(shape: float, x: float) -> float:
    """P(shape, x) = 1 - Q(shape, x), accurate when it is small."""
    if not shape > 0:
        raise DomainError(f"shape must be positive, got {shape!r}")
    if math.isnan(x) or x < 0:
        raise DomainError(f"x must be nonnegative, got {x!r}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < shape + 1.0:
        return min(1.0, max(0.0, _lower_series(shape, x)))
    return min(1.0, max(0.0, 1.0 - _upper_cf(shape, x)))


def gaussian_tail_u(s: float, k: float, x: float) -> float:
    """u(s, k, x) = integral over [x, inf) of exp(-s t^2 / 2) t^(2k) dt."""
    if not s > 0:
        raise DomainError(f"s must be positive, got {s!r}")
    if k < 0:
        raise DomainError(f"k must be nonnegative, got {k!r}")
    if math.isnan(x) or x < 0:
        raise DomainError(f"x must be nonnegative, got {x!r}")
    a = k + 0.5
    q = upper_gamma_regularized(a, 0.5 * s * x * x)
    if q == 0.0:
        return 0.0
    return 0.5 * math.exp(math.lgamma(a) + a * math.log(2.0 / s)) * q


def hyp1f1_coefficients(m: int, n: int) -> list[float]:
    """Coefficients of the polynomial 1F1(-(m-1), 1+n-m; z), ascending in z."""
    if m < 1 or n < m:
        raise DomainError(f"need n >= m >= 1, got m={m}, n={n}")
    coeffs = [1.0]
    c = 1.0
    for j in range(m - 1):
        c *= (j - (m - 1)) / ((1 + n - m + j) * (j + 1))
        coeffs.append(c)
    return coeffs


def hyp1f1_terminating(m: int, n: int, z: float) -> float:
    coeffs = hyp1f1_coefficients(m, n)
    return math.fsum(c * z**j for j, c in enumerate(coeffs))


@dataclass(frozen=True)
class EulerConstants:
    """The five constant factors, kept as logarithms of their magnitudes.

    Individually c1 and c4 leave double range around m = n = 30 even though
    their product does not, so the product is formed in log space.
    """

    log_c: tuple[float, float, float, float, float]
    sign: float

    def _c(self, i):
        v = math.exp(self.log_c[i]) if self.log_c[i] < 709 else math.inf
        return -v if i == 4 and self.sign < 0 else v

    c1 = property(lambda self: self._c(0))
    c2 = property(lambda self: self._c(1))
    c3 = property(lambda self: self._c(2))
    c4 = property(lambda self: self._c(3))
    c5 = property(lambda self: self._c(4))

    @property
    def product(self) -> float:
        return self.sign * math.exp(math.fsum(self.log_c))


def euler_constants(m: int, n: int, s: float) -> EulerConstants:
    """Constant factors of the central scalar-covariance Euler formula.

    c5 carries (-1)^(m-1), so the product is negative for even m; with the
    alternating 1F1 coefficients the resulting expectation is positive in
    every case. For m = n = 3 the product is 2 sqrt(2/pi) sqrt(s).
    """
    if m < 2 or n < m:
        raise DomainError(f"need n >= m >= 2, got m={m}, n={n}")
    if not s > 0:
        raise DomainError(f"s must be positive, got {s!r}")
    lg = math.lgamma
    log_pi = math.log(math.pi)
    log2 = math.log(2.0)

    log_c1 = -log2 - 0.5 * n * m * (math.log(2 * math.pi) - math.log(s))
    log_c2 = 2 * log2 + 0.5 * (m + n) * log_pi - lg(m / 2) - lg(n / 2)
    # 1/((m-1)! 2^(m-1) 2^(m-1)) * vol O(m-1) * vol V_{m-1}(R^{n-1})
    log_c3 = (
        -math.log(math.factorial(m - 1)) - 2 * (m - 1) * log2
        + (m - 1) * log2 + sum(0.5 * k * log_pi - lg(k / 2) for k in range(1, m))
        + (m - 1) * log2 + 0.5 * (m - 1) * (n - 1 - (m - 2) / 2) * log_pi
        - sum(lg((n - 1) / 2 - (i - 1) / 2) for i in range(1, m))
    )
    log_c4 = (-0.5 * (m * m - 1) - 0.5 * (n - m) * (m - 1)) * math.log(s / 2)
    log_c5 = sum(lg(1 + i / 2) + lg(1.5 + (n - m) / 2 + (i - 1) / 2) - lg(1.5) for i in range(1, m))
    sign = -1.0 if (m - 1) % 2 else 1.0
    return EulerConstants((log_c1, log_c2, log_c3, log_c4, log_c5), sign)


def chisq_sf(df: int, x: float) -> float:
    if df < 1 or int(df) != df:
        raise DomainError(f"df must be a positive integer, got {df!r}")
    if math.isnan(x) or x < 0:
        raise DomainError(f"x must be nonnegative, got {x!r}")
    return upper_gamma_regularized(df / 2.0, x / 2.0)


def noncentral_chisq_sf(df: int, ncp: float, x: float) -> float:
    """Survival function of the noncentral chi-square as a Poisson mixture.

    Summation starts at the Poisson mode and walks outward in both directions
    until the remaining Poisson mass on each side is below 1e-15.
    """
    if df < 1 or int(df) != df:
        raise DomainError(f"df must be a positive integer, got {df!r}")
    if math.isnan(ncp) or ncp < 0:
        raise DomainError(f"ncp must be nonnegative, got {ncp!r}")
    if math.isnan(x) or x < 0:
        raise DomainError(f"x must be nonnegative, got {x!r}")
    if ncp == 0 or x == 0:
        return chisq_sf(df, x)
    lam = ncp / 2.0
    k0 = int(math.floor(lam))

    def weight(k):
        return math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1)) if lam > 0 else float(k == 0)

    w0 = weight(k0)
    terms = [w0 * chisq_sf(df + 2 * k0, x)]
    # upward; the mass beyond k is at most w * lam / (k + 1 - lam) once k + 1 > lam
    w = w0
    k = k0
    while k - k0 < MAX_ITER:
        k += 1
        w *= lam / k
        terms.append(w * chisq_sf(df + 2 * k, x))
        if k + 1 > lam and w * lam / (k + 1 - lam) < 1e-15:
            break
    # downward; the mass below k is at most w * k / (lam - k)
    w = w0
    k = k0
    while k > 0:
        w *= k / lam
        k -= 1
        terms.append(w * chisq_sf(df + 2 * k, x))
        if w * k / (lam - k) < 1e-15:
            break
    return min(1.0, max(0.0, math.fsum(terms)))


def chisq_tail_asymptotic(df: int, b: float, x: float) -> float:
    """Order-of-magnitude envelope of P(chi2(df; b^2) >= x) for large x."""
    if not x > 0:
        raise DomainError(f"x must be positive, got {x!r}")
    if b == 0:
        return x ** ((df - 2) / 2) * math.exp(-x / 2)
    return x ** ((df - 3) / 4) * math.exp(-x / 2 + b * math.sqrt(x))
