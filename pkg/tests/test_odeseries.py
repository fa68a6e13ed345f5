import json
import math
import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from wishart_euler.odeseries import (
    ConvergenceRangeError,
    OdeError,
    OdeSpec,
    SingularPointError,
    SingularSystemError,
    evaluate_series,
    fit_extrapolation,
    mpf_to_fraction,
    parse_ode,
    radius_estimate,
    residual_coefficients,
    series_solution,
    shift_poly,
)
from wishart_euler.special import hyp1f1_terminating

HARMONIC = OdeSpec(2, ((1,), (0,), (1,)))
# z f'' + (1 - 2z) f' + 4 f = 0, solved by 1 - 4z + 2z^2
CONFLUENT = OdeSpec(2, ((4,), (1, -2), (0, 1)))
GEOMETRIC = OdeSpec(1, ((-1,), (1, -1)))
AIRY = OdeSpec(2, ((0, -1), (0,), (1,)))
# Gauss equation with a = -1, b = 2, c = 3: solved by 1 - 2 sigma / 3
GAUSS = OdeSpec(2, ((2,), (3, -2), (0, 1, -1)))
LEGENDRE2 = OdeSpec(2, ((6,), (0, -2), (1, 0, -1)))

SUITE = [
    (HARMONIC, 0, [1, 0]),
    (HARMONIC, Fraction(1, 3), [2, Fraction(-1, 7)]),
    (CONFLUENT, Fraction(1, 2), [Fraction(-1, 2), 0]),
    (GEOMETRIC, 0, [1]),
    (AIRY, Fraction(-1, 2), [1, 1]),
    (GAUSS, Fraction(1, 2), [Fraction(2, 3), Fraction(-2, 3)]),
    (LEGENDRE2, Fraction(1, 5), [Fraction(3, 4), Fraction(-1, 2)]),
]


def confluent_poly(z):
    return 1 - 4 * z + 2 * z * z


def test_parse_harmonic():
    ode = parse_ode('{"rank": 2, "coeffs": [[1], [0], [1]], "var": "t"}')
    assert ode.rank == 2 and ode.var == "t"
    assert ode.coeffs == ((1,), (), (1,))


def test_parse_rationals_exact():
    ode = parse_ode('{"rank": 1, "coeffs": [["1/3", 0.1], ["-2/7"]]}')
    assert ode.coeffs[0] == (Fraction(1, 3), Fraction(1, 10))
    assert parse_ode(json.dumps(ode.to_dict())) == ode


@pytest.mark.parametrize("text", [
    '{"rank": 2, "coeffs": [[1], [0], []]}',
    '{"rank": 2, "coeffs": [[1], [0], [0, 0]]}',
    '{"rank": 2, "coeffs": [[1], [1]]}',
    '{"rank": 1, "coeffs": [["x"], [1]]}',
    '{"coeffs": [[1], [1]]}',
    'not json',
])
def test_parse_rejects(text):
    with pytest.raises(OdeError):
        parse_ode(text)


def test_shift_poly():
    # (x^2 + 1) at x = 1 + t is 2 + 2t + t^2
    assert shift_poly((1, 0, 1), Fraction(1)) == (2, 2, 1)


def test_cosine_coefficients():
    a = series_solution(HARMONIC, 0, [1, 0], 10).coefficients
    assert a == tuple(Fraction((-1) ** (k // 2), math.factorial(k)) if k % 2 == 0 else 0 for k in range(10))


def test_confluent_terminates():
    z0 = Fraction(1, 2)
    init = [confluent_poly(z0), -4 + 4 * z0]
    a = series_solution(CONFLUENT, z0, init, 60).coefficients
    assert a[:3] == (Fraction(-1, 2), -2, 2)
    assert all(c == 0 for c in a[3:])


def test_gauss_polynomial_solution():
    a = series_solution(GAUSS, Fraction(1, 2), [Fraction(2, 3), Fraction(-2, 3)], 40).coefficients
    assert all(c == 0 for c in a[2:])


@pytest.mark.parametrize("ode,center,init", SUITE)
def test_residual_exactly_zero(ode, center, init):
    sol = series_solution(ode, center, init, 120)
    assert all(c == 0 for c in residual_coefficients(sol))


@settings(max_examples=25, deadline=None)
@given(st.fractions(-2, 2, max_denominator=50), st.fractions(-3, 3, max_denominator=20),
       st.fractions(-3, 3, max_denominator=20))
def test_residual_zero_random_centers(center, f0, f1):
    sol = series_solution(AIRY, center, [f0, f1], 60)
    assert all(c == 0 for c in residual_coefficients(sol))


def test_residual_detects_corruption():
    sol = series_solution(HARMONIC, 0, [1, 0], 20)
    bad = type(sol)(sol.center, sol.coefficients[:5] + (sol.coefficients[5] + 1,) + sol.coefficients[6:], sol.ode)
    assert any(c != 0 for c in residual_coefficients(bad))


def test_canonical_basis_identity():
    for i in range(2):
        sol = series_solution(AIRY, Fraction(1, 3), [int(i == j) for j in range(2)], 30)
        assert sol.coefficients[:2] == tuple(int(i == j) for j in range(2))


def test_singular_center_rejected():
    with pytest.raises(SingularPointError):
        series_solution(CONFLUENT, 0, [1, 0], 10)
    with pytest.raises(SingularPointError):
        series_solution(GEOMETRIC, 1, [1], 10)


def test_memory_budget():
    with pytest.raises(MemoryError):
        series_solution(AIRY, Fraction(1, 3), [1, 1], 400, memory_budget=100)


def test_evaluate_cosine():
    sol = series_solution(HARMONIC, 0, [1, 0], 200)
    v, last = evaluate_series(sol, 1, 256)
    with mpmath.workprec(256):
        assert abs(v - mpmath.cos(1)) < mpmath.mpf(10) ** -50
    assert last < mpmath.mpf(10) ** -50


def test_last_term_flags_far_point():
    sol = series_solution(HARMONIC, 0, [1, 0], 200)
    _, last = evaluate_series(sol, 100, 256)
    assert last > 1


def test_terminating_series_exact_anywhere():
    z0 = Fraction(1, 2)
    sol = series_solution(CONFLUENT, z0, [confluent_poly(z0), -2], 50)
    for z in (Fraction(7), Fraction(-123, 4)):
        v, last = evaluate_series(sol, z, 128)
        assert mpf_to_fraction(v) == confluent_poly(z)
        assert last == 0


def test_radius_estimates():
    assert radius_estimate(series_solution(GEOMETRIC, 0, [1], 400)) == pytest.approx(1, rel=0.05)
    assert radius_estimate(series_solution(HARMONIC, 0, [1, 0], 400)) >= 10
    z0 = Fraction(1, 2)
    assert radius_estimate(series_solution(CONFLUENT, z0, [confluent_poly(z0), -2], 200)) == math.inf
    with pytest.raises(OdeError):
        radius_estimate(series_solution(GEOMETRIC, 0, [1], 50))


def half_pi():
    with mpmath.workprec(400):
        return mpf_to_fraction(mpmath.pi / 2)


def test_fit_sine():
    model = fit_extrapolation(HARMONIC, [0, Fraction(1, 10)], [0, half_pi()], [0, 1], n_terms=400)
    assert model.residual <= 2.0 ** (-model.precision_bits / 2)
    with mpmath.workprec(400):
        pi6 = mpf_to_fraction(mpmath.pi / 6)
    assert float(model.evaluate(pi6)[0]) == pytest.approx(0.5, abs=1e-10)


def test_fit_confluent_recovers_polynomial():
    pts = [Fraction(1, 4), Fraction(3, 4)]
    model = fit_extrapolation(CONFLUENT, [Fraction(1, 2)] * 2, pts, [confluent_poly(p) for p in pts], n_terms=300)
    # common center: the fitted combination is the polynomial itself
    exact = model.rationalize(10**6).combined_coefficients()
    assert exact[:3] == (Fraction(-1, 2), -2, 2)
    assert all(c == 0 for c in exact[3:])
    rng = random.Random(11)
    for _ in range(20):
        z = rng.uniform(0.2, 0.8)
        assert abs(float(model.evaluate(Fraction(z))[0]) - hyp1f1_terminating(3, 3, 2 * z)) < 1e-13


def test_fit_duplicate_points_singular():
    with pytest.raises(SingularSystemError):
        fit_extrapolation(HARMONIC, [0, Fraction(1, 10)], [1, 1], [0, 1], n_terms=100)


def test_fit_dependent_basis_singular():
    # the same basis function twice makes the matrix exactly singular
    with pytest.raises(SingularSystemError):
        fit_extrapolation(HARMONIC, [0, 0], [0, 1], [0, 1], inits=[[1, 0], [1, 0]], n_terms=100)


def test_fit_outside_range():
    with pytest.raises(ConvergenceRangeError):
        fit_extrapolation(GEOMETRIC, [0], [Fraction(3, 2)], [1], n_terms=200)


def test_fit_arity():
    with pytest.raises(OdeError):
        fit_extrapolation(HARMONIC, [0], [0], [0])
