import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from wishart_euler.central import (
    CentralSpec,
    approximation_error_asymptotic,
    expected_euler_central,
    expected_euler_central_density,
    expected_euler_central_m3n3,
    tail_asymptotic_leading,
)
from wishart_euler.special import DomainError


def test_m3n3_fast_path_agrees():
    for s in [0.5, 1.0, 2.0]:
        for x in [0.0, 0.7, 2.0, 4.5]:
            assert expected_euler_central_m3n3(s, x) == pytest.approx(
                expected_euler_central(CentralSpec(3, 3, s), x), rel=1e-12, abs=1e-15)


def test_verified_values():
    # quadrature-confirmed; see the acceptance suite for the published values
    spec = CentralSpec(3, 3, 1.0)
    assert expected_euler_central(spec, 3) == pytest.approx(0.21542851983628447, rel=1e-12)
    assert expected_euler_central(spec, 4) == pytest.approx(0.01612296957545247, rel=1e-12)
    assert expected_euler_central(spec, 5) == pytest.approx(0.0003573859866799901, rel=1e-12)


@pytest.mark.parametrize("m,n", [(2, 2), (3, 3), (3, 5), (4, 4), (5, 8)])
def test_value_at_zero(m, n):
    # E[chi] at the bottom of the range is the Euler characteristic of the product of spheres
    assert expected_euler_central(CentralSpec(m, n, 1.3), 1e-9) == pytest.approx((1 - (-1) ** m) / 2, abs=1e-7)


@pytest.mark.parametrize("m,n,s", [(2, 2, 1), (3, 5, 0.5), (4, 6, 2)])
def test_density_integrates_to_tail(m, n, s):
    spec = CentralSpec(m, n, s)
    val, _ = integrate.quad(lambda t: expected_euler_central_density(spec, t), 1.5, np.inf, epsabs=1e-13)
    assert val == pytest.approx(expected_euler_central(spec, 1.5), rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 4), st.floats(0.2, 5), st.floats(0.1, 6))
def test_scaling_in_s(m, extra, s, x):
    # E depends on (s, x) only through sqrt(s) x
    n = m + extra
    a = expected_euler_central(CentralSpec(m, n, s), x)
    b = expected_euler_central(CentralSpec(m, n, 1.0), math.sqrt(s) * x)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-14)


def test_infinite_x_and_domain():
    assert expected_euler_central(CentralSpec(3, 3), math.inf) == 0.0
    with pytest.raises(DomainError):
        expected_euler_central(CentralSpec(3, 3), -1.0)
    with pytest.raises(DomainError):
        CentralSpec(3, 2)
    with pytest.raises(DomainError):
        CentralSpec(3, 3, 0.0)


def test_tail_monotone_large_case():
    # below the bulk edge the alternating sum oscillates; beyond it the tail is monotone
    spec = CentralSpec(10, 12, 1.0)
    vals = [expected_euler_central(spec, x) for x in np.linspace(6, 9, 30)]
    assert all(a > b > 0 for a, b in zip(vals, vals[1:]))


def test_asymptote_ratio_tends_to_one():
    spec = CentralSpec(3, 3, 1.0)
    r = [expected_euler_central(spec, x) / tail_asymptotic_leading(spec, x) for x in (6, 10, 20)]
    assert abs(r[2] - 1) < abs(r[1] - 1) < abs(r[0] - 1)
    assert r[2] == pytest.approx(1, abs=0.01)


def test_literal_normalization_is_double():
    spec = CentralSpec(3, 4, 1.0)
    assert tail_asymptotic_leading(spec, 5, "literal") == pytest.approx(2 * tail_asymptotic_leading(spec, 5))


def test_delta_modes():
    sq = CentralSpec(4, 4, 1.0)
    assert approximation_error_asymptotic(sq, 3, "literal") == approximation_error_asymptotic(sq, 3)
    rect = CentralSpec(3, 5, 1.0)
    assert approximation_error_asymptotic(rect, 3, "literal") != approximation_error_asymptotic(rect, 3)
    assert approximation_error_asymptotic(rect, 3) < 0
    with pytest.raises(ValueError):
        approximation_error_asymptotic(rect, 3, "other")


def test_x5_against_high_precision_integral():
    # independent of the incomplete gamma path: integrate the density in mpmath
    import mpmath

    spec = CentralSpec(3, 3, 1.0)
    with mpmath.workdps(30):
        c = 2 * mpmath.sqrt(2 / mpmath.pi)
        f = lambda t: c * mpmath.exp(-t * t / 2) * (1 - 2 * t * t + t**4 / 2)
        ref = mpmath.quad(f, [5, 10, mpmath.inf])
    assert expected_euler_central(spec, 5.0) == pytest.approx(float(ref), rel=1e-12)
    assert abs(float(ref) - 0.000357386) < 1e-9
