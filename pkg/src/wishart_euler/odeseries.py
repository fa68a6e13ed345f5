"""Exact power-series solutions of linear ODEs with polynomial coefficients and
the extrapolation functions built from them.

An ODE ``sum_i c_i(x) f^(i)(x) = 0`` of rank r is stored as r + 1 coefficient
polynomials over Q. Series are built at ordinary points with
:class:`fractions.Fraction` arithmetic and evaluated with mpmath at a chosen
binary precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

DEFAULT_TERMS = 2000
MEMORY_BUDGET_WORDS = 10**8
MAX_PRECISION_BITS = 4096


class OdeError(ValueError):
    pass


class SingularPointError(OdeError):
    pass


class SingularSystemError(OdeError):
    pass


class ConvergenceRangeError(OdeError):
    pass


def to_fraction(v) -> Fraction:
    """Exact rational from an int, Fraction, or string like ``"3/7"`` / ``"0.125"``."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, bool):
        raise OdeError(f"not a rational: {v!r}")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise OdeError(f"not a rational: {v!r}") from e
    if isinstance(v, mpmath.mpf):
        return mpf_to_fraction(v)
    raise OdeError(f"expected an exact rational, got {type(v).__name__} {v!r}")


def mpf_to_fraction(x: mpmath.mpf) -> Fraction:
    """The binary rational an mpf holds, exactly."""
    x = mpmath.mpf(x)
    if not mpmath.isfinite(x):
        raise OdeError(f"not a finite value: {x}")
    sign, man, exp, _ = x._mpf_
    man = -int(man) if sign else int(man)
    exp = int(exp)
    return Fraction(man * 2**exp) if exp >= 0 else Fraction(man, 2**-exp)


def _trim(poly):
    poly = list(poly)
    while poly and poly[-1] == 0:
        poly.pop()
    return tuple(poly)


@dataclass(frozen=True)
class OdeSpec:
    """``sum_{i=0}^{rank} coeffs[i](x) f^(i)(x) = 0``; coefficient lists ascend in degree."""

    rank: int
    coeffs: tuple
    var: str = "x"

    def __post_init__(self):
        if self.rank < 1:
            raise OdeError("rank must be positive")
        if len(self.coeffs) != self.rank + 1:
            raise OdeError(f"rank {self.rank} needs {self.rank + 1} coefficient polynomials, got {len(self.coeffs)}")
        coeffs = tuple(_trim(to_fraction(c) for c in poly) for poly in self.coeffs)
        if not coeffs[-1]:
            raise OdeError("leading coefficient polynomial is identically zero")
        object.__setattr__(self, "coeffs", coeffs)

    def leading_at(self, x: Fraction) -> Fraction:
        return _poly_eval(self.coeffs[-1], x)

    def to_dict(self) -> dict:
        return {"rank": self.rank, "var": self.var,
                "coeffs": [[str(c) for c in poly] for poly in self.coeffs]}


def parse_ode(text: str) -> OdeSpec:
    """Read an ODE from JSON text: ``{"rank": r, "coeffs": [[...], ...], "var": "x"}``.

    Coefficients may be integers or rational strings such as ``"-1/3"``;
    JSON floats are read from their decimal text, never through binary floats.
    """
    try:
        d = json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as e:
        raise OdeError(f"malformed ODE file: {e}") from e
    if not isinstance(d, dict) or "rank" not in d or "coeffs" not in d:
        raise OdeError("ODE file needs fields 'rank' and 'coeffs'")
    if not isinstance(d["coeffs"], list) or not all(isinstance(p, list) for p in d["coeffs"]):
        raise OdeError("'coeffs' must be a list of lists")
    rank = d["rank"]
    if not isinstance(rank, int) or isinstance(rank, bool):
        raise OdeError("'rank' must be an integer")
    return OdeSpec(rank, tuple(tuple(p) for p in d["coeffs"]), str(d.get("var", "x")))


def _poly_eval(poly, x):
    acc = Fraction(0)
    for c in reversed(poly):
        acc = acc * x + c
    return acc


def shift_poly(poly, c: Fraction):
    """Coefficients of ``poly(c + t)`` in t (repeated synthetic division)."""
    a = list(poly)
    n = len(a)
    for k in range(n):
        for j in range(n - 2, k - 1, -1):
            a[j] += c * a[j + 1]
    return tuple(a)


def _words(q: Fraction) -> int:
    return (q.numerator.bit_length() + q.denominator.bit_length()) // 64 + 2


@dataclass(frozen=True)
class SeriesSolution:
    center: Fraction
    coefficients: tuple
    ode: OdeSpec = field(repr=False)

    @property
    def n_terms(self) -> int:
        return len(self.coefficients)


def series_solution(ode: OdeSpec, center, init, n_terms: int = DEFAULT_TERMS,
                    memory_budget: int = MEMORY_BUDGET_WORDS) -> SeriesSolution:
    """Truncated series ``sum_k a_k (x - center)^k`` with ``a_0..a_{r-1} = init``.

    ``init`` are Taylor coefficients, i.e. ``f^(i)(center) / i!``.
    Writing each coefficient polynomial around the center as ``sum_d p_{i,d} t^d``,
    the t^N coefficient of the residual is

        sum_{i,d} p_{i,d} (N-d+i)! / (N-d)! a_{N-d+i} = 0,

    and the only term with index N + r is ``i = r, d = 0``, which gives a_{N+r}.
    """
    center = to_fraction(center)
    r = ode.rank
    init = [to_fraction(v) for v in init]
    if len(init) != r:
        raise OdeError(f"need {r} initial values, got {len(init)}")
    if n_terms < r:
        raise OdeError(f"n_terms must be at least the rank {r}")
    lead = ode.leading_at(center)
    if lead == 0:
        raise SingularPointError(f"{center} is a singular point of the ODE")
    shifted = [shift_poly(p, center) for p in ode.coeffs]
    terms = [(i, d, c) for i, poly in enumerate(shifted) for d, c in enumerate(poly)
             if c != 0 and not (i == r and d == 0)]
    a = list(init)
    words = sum(_words(v) for v in a)
    for N in range(n_terms - r):
        acc = Fraction(0)
        for i, d, c in terms:
            k = N - d
            if k < 0:
                continue
            ff = math.perm(k + i, i)  # (k+i)! / k!
            acc += c * ff * a[k + i]
        nxt = -acc / (lead * math.perm(N + r, r))
        a.append(nxt)
        words += _words(nxt)
        if words > memory_budget:
            raise MemoryError(f"series exceeded the budget of {memory_budget} rational words at term {N + r}")
    return SeriesSolution(center, tuple(a), ode)


def residual_coefficients(sol: SeriesSolution) -> list[Fraction]:
    """Taylor coefficients (orders 0..N-r) of the ODE applied to the truncated series.

    Built by explicit polynomial products, independently of the recurrence in
    :func:`series_solution`; every entry is exactly zero for a valid solution.
    """
    a = sol.coefficients
    N = len(a) - 1
    r = sol.ode.rank
    top = N - r
    res = [Fraction(0)] * (top + 1)
    for i, poly in enumerate(sol.ode.coeffs):
        p = shift_poly(poly, sol.center)
        # i-th derivative of the truncated series
        der = [a[k + i] * math.perm(k + i, i) for k in range(N - i + 1)]
        for d, c in enumerate(p):
            if c == 0:
                continue
            for k, v in enumerate(der):
                if d + k > top:
                    break
                res[d + k] += c * v
    return res


def _mp(q: Fraction):
    return mpmath.mpf(q.numerator) / q.denominator


def evaluate_series(sol: SeriesSolution, x, precision_bits: int = 256):
    """Horner evaluation at ``x``; returns ``(value, last_term)``.

    ``last_term`` is the largest of ``|a_k (x - c)^k|`` over the last
    ``max(rank, 2)`` retained terms, so that a run of zero coefficients
    (as in cos) does not hide a non-convergent tail.
    """
    with mpmath.workprec(precision_bits):
        t = _mp(to_fraction(x)) if not isinstance(x, mpmath.mpf) else mpmath.mpf(x)
        t = t - _mp(sol.center)
        acc = mpmath.mpf(0)
        for c in reversed(sol.coefficients):
            acc = acc * t + (_mp(c) if c else 0)
        n = len(sol.coefficients)
        tail = max(sol.ode.rank, 2)
        last = mpmath.mpf(0)
        for k in range(max(0, n - tail), n):
            c = sol.coefficients[k]
            if c:
                last = max(last, abs(_mp(c) * t**k))
        return +acc, +last


def radius_estimate(sol: SeriesSolution) -> float:
    """Cauchy-Hadamard estimate ``1 / max |a_k|^(1/k)`` over the last quarter of terms."""
    n = len(sol.coefficients)
    if n < 100:
        raise OdeError("radius_estimate needs at least 100 terms")
    best = -math.inf
    for k in range(n - n // 4, n):
        c = sol.coefficients[k]
        if c == 0 or k == 0:
            continue
        log_abs = math.log(abs(c.numerator)) - math.log(c.denominator)
        best = max(best, log_abs / k)
    if best == -math.inf:
        return math.inf
    return math.exp(-best)


def _solve_exact(F, b):
    """Gaussian elimination over Q; raises on a zero pivot."""
    n = len(b)
    A = [list(row) + [bj] for row, bj in zip(F, b)]
    for col in range(n):
        piv = max(range(col, n), key=lambda i: abs(A[i][col]))
        if A[piv][col] == 0:
            raise SingularSystemError("extrapolation system is singular")
        A[col], A[piv] = A[piv], A[col]
        for i in range(col + 1, n):
            f = A[i][col] / A[col][col]
            if f:
                for j in range(col, n + 1):
                    A[i][j] -= f * A[col][j]
    t = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        s = A[i][n] - sum(A[i][j] * t[j] for j in range(i + 1, n))
        t[i] = s / A[i][i]
    return t


@dataclass(frozen=True)
class ExtrapolationModel:
    basis: tuple
    t: tuple
    ref_points: tuple
    ref_values: tuple
    precision_bits: int
    residual: float
    condition: float

    def evaluate(self, x, precision_bits: int | None = None):
        """``(sum_i t_i f_i(x), max_i |t_i| * last_term_i)``."""
        bits = precision_bits or self.precision_bits
        with mpmath.workprec(bits):
            total = mpmath.mpf(0)
            indicator = mpmath.mpf(0)
            for ti, f in zip(self.t, self.basis):
                v, last = evaluate_series(f, x, bits)
                total += _mp(ti) * v
                indicator = max(indicator, abs(_mp(ti)) * last)
            return +total, +indicator

    def rationalize(self, max_denominator: int) -> "ExtrapolationModel":
        """Copy with each t_i replaced by its best rational approximation."""
        t = tuple(ti.limit_denominator(max_denominator) for ti in self.t)
        return ExtrapolationModel(self.basis, t, self.ref_points, self.ref_values,
                                  self.precision_bits, self.residual, self.condition)

    def combined_coefficients(self) -> tuple:
        """Exact series coefficients of the fitted function; needs a common center."""
        centers = {f.center for f in self.basis}
        if len(centers) != 1:
            raise OdeError("combined coefficients need all basis series at one center")
        n = min(f.n_terms for f in self.basis)
        return tuple(sum(ti * f.coefficients[k] for ti, f in zip(self.t, self.basis)) for k in range(n))


def fit_extrapolation(ode: OdeSpec, centers, ref_points, ref_values, inits=None,
                      n_terms: int = DEFAULT_TERMS, precision_bits: int = 256,
                      max_precision_bits: int = MAX_PRECISION_BITS) -> ExtrapolationModel:
    """Fit ``f = sum_i t_i f_i`` to reference values ``f(p_j) = b_j``.

    ``f_i`` is the series at ``centers[i]`` with initial vector ``inits[i]``
    (default: the i-th unit vector). The matrix ``f_i(p_j)`` is evaluated at
    ``precision_bits``, its entries are taken as the exact binary rationals
    they round to, and the system is solved over Q. When the growth factor
    ``max |t_i f_i(p_j)| / max |b_j|`` exceeds ``2^(bits/2)`` the precision is
    doubled, up to ``max_precision_bits``.
    """
    r = ode.rank
    centers = [to_fraction(c) for c in centers]
    ref_points = [to_fraction(p) for p in ref_points]
    ref_values = [to_fraction(v) for v in ref_values]
    if not len(centers) == len(ref_points) == len(ref_values) == r:
        raise OdeError(f"need exactly {r} centers, reference points and values")
    if len(set(ref_points)) != r:
        raise SingularSystemError("reference points must be pairwise distinct")
    if inits is None:
        inits = [[int(i == j) for j in range(r)] for i in range(r)]
    basis = tuple(series_solution(ode, c, init, n_terms) for c, init in zip(centers, inits))

    bits = precision_bits
    while True:
        with mpmath.workprec(bits):
            F = []
            for pj in ref_points:
                row = []
                for f in basis:
                    v, last = evaluate_series(f, pj, bits)
                    if last > mpmath.mpf(2) ** (-bits // 2) * max(1, abs(v)):
                        raise ConvergenceRangeError(
                            f"reference point {pj} is outside the convergence range of the series at {f.center}")
                    row.append(mpf_to_fraction(v))
                F.append(row)
        t = _solve_exact(F, ref_values)
        bmax = max(abs(v) for v in ref_values) or Fraction(1)
        growth = max(abs(ti * Fji) for row in F for ti, Fji in zip(t, row)) / bmax
        if growth <= Fraction(2) ** (bits // 2):
            break
        if 2 * bits > max_precision_bits:
            raise SingularSystemError(f"extrapolation system is ill-conditioned (growth {float(growth):.3g}) "
                                      f"at {bits} bits")
        bits *= 2
    model = ExtrapolationModel(basis, tuple(t), tuple(ref_points), tuple(ref_values), bits, 0.0, float(growth))
    with mpmath.workprec(bits):
        resid = max(abs(model.evaluate(pj, bits)[0] - _mp(bj)) for pj, bj in zip(ref_points, ref_values))
    return ExtrapolationModel(basis, tuple(t), tuple(ref_points), tuple(ref_values), bits, float(resid), float(growth))
