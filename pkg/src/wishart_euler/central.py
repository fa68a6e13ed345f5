"""Closed-form expected Euler characteristic for a central Wishart matrix
with scalar covariance ``I_m / s``, and its large-x asymptotics.

The expectation is ``prod(c) * int_x^inf exp(-s t^2/2) t^(n-m) 1F1(-(m-1), 1+n-m; s t^2) dt``.
The integrand is a polynomial times a Gaussian, so every term reduces to
:func:`~wishart_euler.special.gaussian_tail_u` with half-integer order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .special import (
    DomainError,
    euler_constants,
    gaussian_tail_u,
    hyp1f1_coefficients,
    lower_gamma_regularized,
    hyp1f1_terminating,
    upper_gamma_regularized,
)

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class CentralSpec:
    m: int
    n: int
    s: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or int(self.n) != self.n:
            raise DomainError("m and n must be integers")
        if self.m < 2 or self.n < self.m:
            raise DomainError(f"need n >= m >= 2, got m={self.m}, n={self.n}")
        if not (self.s > 0 and math.isfinite(self.s)):
            raise DomainError(f"s must be positive, got {self.s!r}")


def _log_half_moment(s: float, k: float) -> float:
    # log of u(s, k, 0) = Gamma(k + 1/2) (2/s)^(k + 1/2) / 2
    a = k + 0.5
    return math.log(0.5) + math.lgamma(a) + a * math.log(2.0 / s)


def _check_x(x):
    if math.isnan(x) or x < 0:
        raise DomainError(f"x must be nonnegative, got {x!r}")


def expected_euler_central(spec: CentralSpec, x: float) -> float:
    _check_x(x)
    m, n, s = spec.m, spec.n, spec.s
    if math.isinf(x):
        return 0.0
    consts = euler_constants(m, n, s)
    log_prod = math.fsum(consts.log_c)
    y = 0.5 * s * x * x
    upper, lower, weights = [], [], []
    for j, a in enumerate(hyp1f1_coefficients(m, n)):
        k = (n - m) / 2 + j
        w = consts.sign * math.copysign(1.0, a) * math.exp(
            log_prod + math.log(abs(a)) + j * math.log(s) + _log_half_moment(s, k))
        weights.append(w)
        upper.append(w * upper_gamma_regularized(k + 0.5, y))
        lower.append(w * lower_gamma_regularized(k + 0.5, y))
    # The x = 0 terms sum to the Euler characteristic of the sphere product,
    # so near the origin E(0) - sum(w P) avoids cancelling O(1) terms.
    if math.fsum(map(abs, lower)) < math.fsum(map(abs, upper)):
        return (1 - (-1) ** m) / 2 - math.fsum(lower)
    return math.fsum(upper)


def expected_euler_central_m3n3(s: float, x: float) -> float:
    """m = n = 3 fast path: 2 sqrt(2/pi) sqrt(s) (u0 - 2 s u1 + s^2/2 u2)."""
    if not s > 0:
        raise DomainError(f"s must be positive, got {s!r}")
    _check_x(x)
    u0 = gaussian_tail_u(s, 0, x)
    u1 = gaussian_tail_u(s, 1, x)
    u2 = gaussian_tail_u(s, 2, x)
    return 2.0 * SQRT_2_OVER_PI * math.sqrt(s) * math.fsum([u0, -2.0 * s * u1, 0.5 * s * s * u2])


def expected_euler_central_density(spec: CentralSpec, x: float) -> float:
    """Minus the x-derivative of :func:`expected_euler_central`."""
    _check_x(x)
    m, n, s = spec.m, spec.n, spec.s
    prod = euler_constants(m, n, s).product
    return prod * math.exp(-0.5 * s * x * x) * x ** (n - m) * hyp1f1_terminating(m, n, s * x * x)


def tail_asymptotic_leading(spec: CentralSpec, x: float, normalization: str = "exact") -> float:
    """Leading large-x term ``C (r)^(m+n-3) exp(-r^2/2)`` with ``r = sqrt(s) x``.

    ``normalization="exact"`` uses ``C = sqrt(pi) / (2^((m+n-3)/2) Gamma(m/2) Gamma(n/2))``,
    which is the top-degree term of the closed form. ``"literal"`` uses the
    power ``(m+n-5)/2`` in the denominator instead, which is twice as large.

    The ``sqrt(s)`` rescaling is exact: the constant product scales as
    ``s^((n-m+1)/2)``, which combines with the top 1F1 term into a function of
    ``sqrt(s) x`` alone.
    """
    if not x > 0:
        raise DomainError(f"x must be positive, got {x!r}")
    m, n = spec.m, spec.n
    if normalization == "exact":
        power = (m + n - 3) / 2
    elif normalization == "literal":
        power = (m + n - 5) / 2
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    r = math.sqrt(spec.s) * x
    log_c = 0.5 * math.log(math.pi) - power * math.log(2.0) - math.lgamma(m / 2) - math.lgamma(n / 2)
    return math.exp(log_c + (m + n - 3) * math.log(r) - 0.5 * r * r)


def approximation_error_asymptotic(spec: CentralSpec, x: float, exponent_mode: str = "symmetric") -> float:
    """Asymptotic envelope of E[chi] - Pr(lambda_1 >= x^2); always <= 0.

    ``exponent_mode="symmetric"`` uses the power ``x^(2(m+n-5))``;
    ``"literal"`` uses ``x^(2(2m-5))``. They coincide when m = n.
    """
    if not x > 0:
        raise DomainError(f"x must be positive, got {x!r}")
    m, n = spec.m, spec.n
    if exponent_mode == "symmetric":
        power = 2 * (m + n - 5)
    elif exponent_mode == "literal":
        power = 2 * (m + m - 5)
    else:
        raise ValueError(f"unknown exponent mode {exponent_mode!r}")
    r = math.sqrt(spec.s) * x
    log_mag = -math.lgamma(m - 1) - math.lgamma(n - 1) + power * math.log(r) - r * r
    return -math.exp(log_mag)
