"""Expected Euler characteristic of the excursion set for a 2x2 non-central
Wishart model, by deterministic quadrature over (sigma, b, theta, phi).

A 2x2 matrix is written ``A = sigma g h^T + b G H^T`` with
``g = (cos t, sin t)``, ``G = (-sin t, cos t)`` and likewise ``h``, ``H``
from phi. With diagonal inverse covariance ``(s1, s2)`` and lower-triangular
mean ``M``, the density of ``A`` is ``s1 s2 / (2 pi)^2 exp(-R/2)`` and

    E[chi] = 1/2 int_x^inf dsigma int_R db int_0^2pi dtheta int_0^2pi dphi
             (sigma^2 - b^2) s1 s2 / (2 pi)^2 exp(-R/2).

For fixed angles R is a positive definite quadratic in (sigma, b), so the
default route integrates b over the real line and sigma over [x, inf) in
closed form and leaves a smooth periodic integrand in the angles for the
trapezoidal rule. A plain 4-d tensor rule (Gauss-Legendre in sigma and b on
a truncated box) is kept as an independent route.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

MAX_ORDER = 1024


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class Params2x2:
    s1: float
    s2: float
    m11: float = 0.0
    m21: float = 0.0
    m22: float = 0.0

    def __post_init__(self):
        vals = (self.s1, self.s2, self.m11, self.m21, self.m22)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("parameters must be finite")
        if self.s1 <= 0 or self.s2 <= 0:
            raise ValueError("s1 and s2 must be positive")
        if self.m11 < 0 or self.m22 < 0:
            raise ValueError("m11 and m22 must be nonnegative")

    @property
    def mean(self) -> np.ndarray:
        return np.array([[self.m11, 0.0], [self.m21, self.m22]])

    @property
    def scales(self) -> np.ndarray:
        return np.array([self.s1, self.s2])

    @property
    def mean_norm(self) -> float:
        return math.sqrt(self.m11**2 + self.m21**2 + self.m22**2)


@dataclass(frozen=True)
class QuadratureSpec:
    """Controls for :func:`expected_euler_2x2`.

    ``n_angle`` is the starting trapezoid order per angle. ``n_sigma``,
    ``n_b``, ``sigma_max`` and ``b_max`` only matter for ``method="gl"``:
    starting Gauss-Legendre orders (doubled until successive values differ
    by at most ``tol``, up to 1024) and truncation radii, which default to
    :func:`truncation_radius`.
    """

    tol: float = 1e-6
    n_angle: int = 64
    n_sigma: int = 32
    n_b: int = 64
    sigma_max: float | None = None
    b_max: float | None = None
    workers: int = 1
    method: str = "analytic"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if min(self.n_angle, self.n_sigma, self.n_b) < 4:
            raise ValueError("quadrature orders must be at least 4")
        if self.n_angle % 2:
            raise ValueError("n_angle must be even")
        for r in (self.sigma_max, self.b_max):
            if r is not None and not r > 0:
                raise ValueError("truncation radii must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.method not in ("analytic", "gl"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    converged: bool
    n_sigma: int
    n_b: int
    n_angle: int
    radius: float

    def __float__(self):
        return self.value


def matrix_from_coords(sigma, b, theta, phi) -> np.ndarray:
    """``A = sigma g h^T + b G H^T`` as a 2x2 array (last two axes)."""
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    a11 = b * st * sp + sigma * ct * cp
    a12 = sigma * ct * sp - b * st * cp
    a21 = sigma * st * cp - b * ct * sp
    a22 = b * ct * cp + sigma * st * sp
    return np.stack([np.stack([a11, a12], -1), np.stack([a21, a22], -1)], -2)


def _trig_R(sigma, b, ct, st, cp, sp, p: Params2x2):
    a11 = b * st * sp + sigma * ct * cp
    a12 = sigma * ct * sp - b * st * cp
    a21 = sigma * st * cp - b * ct * sp
    a22 = b * ct * cp + sigma * st * sp
    return (p.s1 * (a11 - p.m11) ** 2 + p.s2 * (a21 - p.m21) ** 2
            + p.s1 * a12**2 + p.s2 * (a22 - p.m22) ** 2)


def integrand_R(sigma, b, theta, phi, p: Params2x2):
    """Quadratic form ``tr((A - M)^T Sigma^-1 (A - M))`` in the (sigma, b, theta, phi) chart."""
    return _trig_R(sigma, b, np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi), p)


def integrand_R_rational(sigma, b, s, t, p: Params2x2):
    """R with ``sin = 2s/(1+s^2)``, ``cos = (1-s^2)/(1+s^2)`` for theta (and t for phi)."""
    ds = 1.0 + s * s
    dt = 1.0 + t * t
    return _trig_R(sigma, b, (1.0 - s * s) / ds, 2.0 * s / ds, (1.0 - t * t) / dt, 2.0 * t / dt, p)


def euler_char_exact_2x2(sigma: float, b: float, x: float) -> int:
    """Euler characteristic of the excursion set at level x for singular values sigma, b."""
    d = sigma * sigma - b * b
    sgn = (d > 0) - (d < 0)
    return int((sigma >= x) * sgn + (b >= x) * (-sgn))


def _tail_bound(p: Params2x2, rho: float) -> float:
    # Integrand magnitude outside the disc r = sqrt(sigma^2 + b^2) >= rho, using
    # R >= s_min (|A|_F - |M|_F)^2 and |A|_F = r; the angle integrals contribute (2 pi)^2.
    smin = min(p.s1, p.s2)
    mu = p.mean_norm
    f = lambda r: r**3 * math.exp(-0.5 * smin * (r - mu) ** 2)
    val, _ = integrate.quad(f, rho, math.inf, epsabs=0, epsrel=1e-8, limit=200)
    return math.pi * p.s1 * p.s2 * val


def truncation_radius(p: Params2x2, tol: float) -> float:
    """Radius beyond which the discarded mass is at most ``tol / 10``.

    The search starts at ``|M|_F sqrt(s_max/s_min)``; the Gaussian part is
    then grown until the envelope from :func:`_tail_bound` drops below the
    budget.
    """
    smin, smax = min(p.s1, p.s2), max(p.s1, p.s2)
    base = p.mean_norm * math.sqrt(smax / smin)
    budget = tol / 10.0
    g = lambda d: math.log(_tail_bound(p, base + d) + 1e-320) - math.log(budget)
    hi = math.sqrt(2.0 * max(math.log(1.0 / budget), 1.0) / smin) + 1.0
    while g(hi) > 0:
        hi *= 1.5
    if g(0.0) <= 0:
        return base
    return base + optimize.brentq(g, 0.0, hi, xtol=1e-6)


def _gl(n: int, a: float, b: float):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


class _AngleGrid:
    """Per-angle coefficients of R as a quadratic form in (sigma, b):

    ``R = P sigma^2 + 2 Q sigma b + T b^2 - 2 U sigma - 2 V b + W``.
    """

    def __init__(self, p: Params2x2, ct, st, cp, sp, weight):
        # a_ij = sigma * alpha_ij + b * beta_ij
        alpha = [ct * cp, ct * sp, st * cp, st * sp]
        beta = [st * sp, -st * cp, -ct * sp, ct * cp]
        sc = [p.s1, p.s1, p.s2, p.s2]
        mu = [p.m11, 0.0, p.m21, p.m22]
        self.P = sum(s * a * a for s, a in zip(sc, alpha))
        self.Q = sum(s * a * c for s, a, c in zip(sc, alpha, beta))
        self.T = sum(s * c * c for s, c in zip(sc, beta))
        self.U = sum(s * a * m for s, a, m in zip(sc, alpha, mu))
        self.V = sum(s * c * m for s, c, m in zip(sc, beta, mu))
        self.W = sum(s * m * m for s, m in zip(sc, mu))
        self.weight = np.broadcast_to(np.asarray(weight, dtype=float), self.P.shape)

    @classmethod
    def periodic(cls, p: Params2x2, n_angle: int) -> "_AngleGrid":
        ang = 2.0 * math.pi * np.arange(n_angle) / n_angle
        th, ph = np.meshgrid(ang, ang, indexing="ij")
        th, ph = th.ravel(), ph.ravel()
        return cls(p, np.cos(th), np.sin(th), np.cos(ph), np.sin(ph), (2.0 * math.pi / n_angle) ** 2)

    @classmethod
    def rational(cls, p: Params2x2, n: int) -> "_AngleGrid":
        sv, sw = _rational_nodes(n)
        S, T = np.meshgrid(sv, sv, indexing="ij")
        S, T = S.ravel(), T.ravel()
        ds, dt = 1.0 + S * S, 1.0 + T * T
        # d(theta) = 2 ds / (1 + s^2); the 1/(1+s^2) factor is already in sw
        w = 4.0 * np.outer(sw, sw).ravel()
        return cls(p, (1.0 - S * S) / ds, 2.0 * S / ds, (1.0 - T * T) / dt, 2.0 * T / dt, w)

    def take(self, idx) -> "_AngleGrid":
        g = _AngleGrid.__new__(_AngleGrid)
        for k in ("P", "Q", "T", "U", "V", "W", "weight"):
            v = getattr(self, k)
            setattr(g, k, v[idx] if np.ndim(v) else v)
        return g

    def angle_sums(self, sigma: float, bs: np.ndarray) -> np.ndarray:
        """Weighted angle sums of exp(-R/2) for each b at fixed sigma."""
        bcol = bs[:, None]
        R = (sigma * sigma) * self.P + (2.0 * sigma) * bcol * self.Q + (bcol * bcol) * self.T \
            - (2.0 * sigma) * self.U - 2.0 * bcol * self.V + self.W
        return np.exp(-0.5 * R) @ self.weight

    def sigma_b_integral(self, x: float) -> np.ndarray:
        """Closed-form ``int_x^inf dsigma int_R db (sigma^2 - b^2) exp(-R/2)`` per angle node.

        Completing the square in b leaves ``sqrt(2 pi / T) (sigma^2 - mu_b^2 - 1/T)``
        with ``mu_b = (V - Q sigma) / T``, times a Gaussian in sigma with
        precision ``alpha = P - Q^2/T``; the sigma moments reduce to erfc.
        """
        P, Q, T, U, V, W = self.P, self.Q, self.T, self.U, self.V, self.W
        alpha = P - Q * Q / T
        beta = U - Q * V / T
        gamma = W - V * V / T
        # sigma^2 - mu_b^2 - 1/T = a2 sigma^2 + a1 sigma + a0
        a2 = 1.0 - (Q / T) ** 2
        a1 = 2.0 * V * Q / (T * T)
        a0 = -(V / T) ** 2 - 1.0 / T
        c = beta / alpha
        d = x - c
        # exp(-(alpha sigma^2 - 2 beta sigma + gamma)/2) at sigma = x; >= 0 by positivity of R
        expo = 0.5 * (alpha * x * x - 2.0 * beta * x + gamma)
        y = np.sqrt(0.5 * alpha) * d
        ex = np.exp(-expo)
        tail = np.where(
            y > 0,
            special.erfcx(np.where(y > 0, y, 0.0)) * ex,
            special.erfc(np.where(y > 0, 0.0, y)) * np.exp(-0.5 * (gamma - beta * c)),
        )
        i0 = np.sqrt(0.5 * math.pi / alpha) * tail  # int (1)
        i1 = ex / alpha  # int (sigma - c)
        i2 = d * ex / alpha + i0 / alpha  # int (sigma - c)^2
        # re-expand the polynomial around c
        m0 = a2 * c * c + a1 * c + a0
        m1 = 2.0 * a2 * c + a1
        return np.sqrt(2.0 * math.pi / T) * (a2 * i2 + m1 * i1 + m0 * i0)


def _integrate_gl(grid: _AngleGrid, sig_nodes, sig_w, b_nodes, b_w):
    total = []
    for sg, ws in zip(sig_nodes, sig_w):
        f = grid.angle_sums(sg, b_nodes)
        total.append(ws * float(((sg * sg - b_nodes * b_nodes) * b_w) @ f))
    return math.fsum(total)


def _angle_blocks(n_nodes: int, block: int = 4096):
    return [slice(i, min(i + block, n_nodes)) for i in range(0, n_nodes, block)]


def _integrate_analytic(grid: _AngleGrid, x: float, workers: int) -> float:
    # fixed angle blocks reduced in block order, so workers do not change the bits
    n = grid.P.shape[0]
    blocks = _angle_blocks(n)
    fn = lambda sl: math.fsum(grid.take(sl).sigma_b_integral(x) * grid.weight[sl])
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(fn, blocks))
    else:
        parts = [fn(sl) for sl in blocks]
    return math.fsum(parts)


PREFACTOR = 0.5 / (2.0 * math.pi) ** 2


def _check_x(x):
    if math.isnan(x) or x < 0:
        raise ValueError(f"x must be nonnegative, got {x!r}")


def expected_euler_2x2(p: Params2x2, x: float, q: QuadratureSpec | None = None) -> QuadratureResult:
    """E[chi(M_x)] for the 2x2 model.

    With ``q.method == "analytic"`` (default) the sigma and b integrals are
    done in closed form per angle node and the angle grid is doubled until
    the trapezoid rule on the even subgrid agrees with the full grid to
    ``q.tol``. ``"gl"`` is the plain 4-d tensor rule (Gauss-Legendre in
    sigma and b on the truncated box), refined by doubling both orders.
    """
    q = q or QuadratureSpec()
    _check_x(x)
    if q.method == "gl":
        return _expected_euler_2x2_gl(p, x, q)
    pref = PREFACTOR * p.s1 * p.s2
    n = q.n_angle
    prev = pref * _integrate_analytic(_AngleGrid.periodic(p, n // 2), x, q.workers)
    while True:
        full = pref * _integrate_analytic(_AngleGrid.periodic(p, n), x, q.workers)
        err = abs(full - prev)
        if err <= q.tol or 2 * n > MAX_ORDER:
            return QuadratureResult(full, err, err <= q.tol, 0, 0, n, math.inf)
        prev = full
        n *= 2


def _expected_euler_2x2_gl(p: Params2x2, x: float, q: QuadratureSpec) -> QuadratureResult:
    radius = truncation_radius(p, q.tol)
    sig_max = max(q.sigma_max or radius, radius)
    b_max = max(q.b_max or radius, radius)
    if x >= sig_max:
        return QuadratureResult(0.0, q.tol / 10, True, 0, 0, q.n_angle, radius)
    grid = _AngleGrid.periodic(p, q.n_angle)
    pref = PREFACTOR * p.s1 * p.s2
    ns, nb = q.n_sigma, q.n_b
    prev = None
    while True:
        sn, sw = _gl(ns, x, sig_max)
        bn, bw = _gl(nb, -b_max, b_max)
        full = pref * _integrate_gl(grid, sn, sw, bn, bw)
        if prev is not None:
            err = abs(full - prev)
            if err <= q.tol or 2 * max(ns, nb) > MAX_ORDER:
                return QuadratureResult(full, err, err <= q.tol, ns, nb, q.n_angle, radius)
        prev = full
        ns, nb = 2 * ns, 2 * nb


def _rational_nodes(n: int):
    """Nodes/weights for int_R g(s) / (1 + s^2) ds as int_{-1}^{1} [g(s) + g(1/s)] / (1 + s^2) ds."""
    if n % 2:
        raise ValueError("rational rule order must be even (s = 0 is excluded)")
    u, w = np.polynomial.legendre.leggauss(n)
    w = w / (1.0 + u * u)
    return np.concatenate([u, 1.0 / u]), np.concatenate([w, w])


def rational_integrand(sigma, b, s, t, p: Params2x2):
    """Integrand of the rational-chart form of the expectation."""
    R = integrand_R_rational(sigma, b, s, t, p)
    return p.s1 * p.s2 * (sigma**2 - b**2) / ((1 + s * s) * (1 + t * t)) * np.exp(-0.5 * R) / (2 * math.pi**2)


def expected_euler_2x2_rational(p: Params2x2, x: float, q: QuadratureSpec | None = None,
                                n_rational: int = 96) -> QuadratureResult:
    """Same expectation in the rational chart ``sin = 2s/(1+s^2)``:

        1/(2 pi^2) int_x^inf dsigma int_R db int_R ds int_R dt
            s1 s2 (sigma^2 - b^2) / ((1+s^2)(1+t^2)) exp(-R~/2).

    The s and t integrals fold ``|s| > 1`` onto ``[-1, 1]`` through ``s -> 1/s``
    and use Gauss-Legendre there, so no trigonometric function is evaluated.
    The rule order is doubled until successive values agree to ``q.tol``.
    """
    q = q or QuadratureSpec()
    _check_x(x)
    pref = p.s1 * p.s2 / (2.0 * math.pi**2) / 4.0  # the 4 undoes the d(theta) factor in the weights
    n = n_rational
    prev = pref * _integrate_analytic(_AngleGrid.rational(p, n), x, q.workers)
    while True:
        n *= 2
        full = pref * _integrate_analytic(_AngleGrid.rational(p, n), x, q.workers)
        err = abs(full - prev)
        if err <= q.tol or 2 * n > MAX_ORDER:
            return QuadratureResult(full, err, err <= q.tol, 0, 0, n, math.inf)
        prev = full


def region_integral(p: Params2x2, x: float, region: str, n: int = 64, n_angle: int = 64,
                    radius: float | None = None) -> float:
    """The expectation integrand over ``{sigma > x, b > x}`` split by ``sigma > b``
    (``region="sigma_gt_b"``) or ``sigma < b`` (``"sigma_lt_b"``).
    """
    if region not in ("sigma_gt_b", "sigma_lt_b"):
        raise ValueError(f"unknown region {region!r}")
    rho = radius or truncation_radius(p, 1e-10)
    if x >= rho:
        return 0.0
    grid = _AngleGrid.periodic(p, n_angle)
    on, ow = _gl(n, x, rho)
    total = []
    for outer, wo in zip(on, ow):
        inn, wi = _gl(n, x, outer)
        if region == "sigma_gt_b":
            # sigma = outer, b in [x, sigma]
            f = grid.angle_sums(outer, inn)
            total.append(wo * float(((outer**2 - inn**2) * wi) @ f))
        else:
            # b = outer, sigma in [x, b]
            f = np.array([grid.angle_sums(sg, np.array([outer]))[0] for sg in inn])
            total.append(wo * float(((inn**2 - outer**2) * wi) @ f))
    return PREFACTOR * p.s1 * p.s2 * math.fsum(total)
