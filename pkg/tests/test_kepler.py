from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqcentre.errors import DomainError
from eqcentre.kepler import (
    bessel_j,
    beta_of_e,
    centre_bessel_series,
    centre_coefficient_c1,
    centre_exact,
    invert_c1,
    sin_coefficient_lstsq,
    solve_kepler,
    solve_kepler_array,
    true_anomaly_from_E,
    wrap_pi,
)

# Independent 40-digit evaluations (mpmath root finding and series).
J1_OF_0_1 = 0.049937526036241998
BETA_0549 = 0.027470714872820874
BETA_01 = 0.050125628933800453
E_OF_M1_E01 = 1.0885977523978936
CENTRE_M1_E01 = 0.17946926269976870
V_OF_E_1_08868 = 1.1795550771770873
C1_0549 = 0.10975865872294950
GRID = np.arange(0.0, 2 * math.pi + 1e-12, 0.01)


def _bisect_kepler(M, e):
    lo, hi = M - e - 1e-3, M + e + 1e-3
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - e * math.sin(mid) - M > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def test_bessel_examples():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(3, 0.0) == 0.0
    assert bessel_j(1, 0.1) == pytest.approx(J1_OF_0_1, abs=1e-15)


@pytest.mark.parametrize("x", [0.05, 0.1, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_bessel_recurrence(n, x):
    assert bessel_j(n - 1, x) + bessel_j(n + 1, x) == pytest.approx(2 * n / x * bessel_j(n, x), abs=1e-10)


def test_beta_examples():
    assert beta_of_e(0.0) == 0.0
    assert beta_of_e(0.0549) == pytest.approx(BETA_0549, abs=1e-15)
    assert beta_of_e(0.1) == pytest.approx(BETA_01, abs=1e-15)


def test_series_examples():
    assert np.all(centre_bessel_series(0.0, GRID) == 0.0)
    assert float(centre_bessel_series(0.0549, math.pi / 2)) == pytest.approx(float(centre_exact(math.pi / 2, 0.0549)), abs=1e-8)
    assert float(centre_bessel_series(0.1, 1.0)) == pytest.approx(CENTRE_M1_E01, abs=1e-10)


@pytest.mark.parametrize("e", [0.01, 0.0549, 0.1, 0.2])
def test_series_matches_exact_on_grid(e):
    assert np.max(np.abs(centre_bessel_series(e, GRID, 12, 12) - centre_exact(GRID, e))) < 1e-8


def test_c1_examples():
    assert centre_coefficient_c1(0.0) == 0.0
    assert centre_coefficient_c1(0.0549) == pytest.approx(C1_0549, abs=1e-15)
    assert centre_coefficient_c1(0.0547705) == pytest.approx(0.1095, abs=1e-7)


def test_invert_c1_examples():
    assert invert_c1(0.0) == 0.0
    assert invert_c1(0.1095) == pytest.approx(0.0547705, abs=1e-6)
    assert invert_c1(centre_coefficient_c1(0.2)) == pytest.approx(0.2, abs=1e-10)
    with pytest.raises(DomainError):
        invert_c1(-0.1)
    with pytest.raises(DomainError):
        invert_c1(centre_coefficient_c1(0.99) + 1e-6)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.99, exclude_max=True))
def test_invert_c1_round_trip(e):
    assert invert_c1(centre_coefficient_c1(e)) == pytest.approx(e, abs=1e-10)


def test_solver_examples():
    assert solve_kepler(0.0, 0.3) == 0.0
    assert solve_kepler(math.pi, 0.3) == pytest.approx(math.pi, abs=1e-15)
    assert solve_kepler(1.0, 0.1) == pytest.approx(E_OF_M1_E01, abs=1e-13)
    assert solve_kepler(1.0, 0.1) == pytest.approx(_bisect_kepler(1.0, 0.1), abs=1e-13)


def test_solver_keeps_branch():
    M = 1.0 + 6 * math.pi
    assert solve_kepler(M, 0.1) == pytest.approx(E_OF_M1_E01 + 6 * math.pi, abs=1e-12)


@settings(max_examples=500, deadline=None)
@given(st.floats(-10 * math.pi, 10 * math.pi), st.floats(0.0, 0.99))
def test_solver_residual(M, e):
    E = solve_kepler(M, e)
    assert abs(E - e * math.sin(E) - M) < 1e-12
    assert abs(E - M) <= e + 1e-12


def test_solver_array_matches_scalar():
    rng = np.random.default_rng(7)
    M = rng.uniform(-10 * math.pi, 10 * math.pi, 2000)
    e = 0.7
    E = solve_kepler_array(M, e)
    assert np.max(np.abs(E - np.array([solve_kepler(m, e) for m in M]))) < 1e-12


def test_true_anomaly_examples():
    assert true_anomaly_from_E(0.0, 0.5) == 0.0
    assert float(true_anomaly_from_E(math.pi, 0.5)) == pytest.approx(math.pi, abs=1e-15)
    assert float(true_anomaly_from_E(1.08868, 0.1)) == pytest.approx(V_OF_E_1_08868, abs=1e-12)


def test_true_anomaly_is_continuous():
    E = np.linspace(-4 * math.pi, 4 * math.pi, 5001)
    v = true_anomaly_from_E(E, 0.3)
    assert np.all(np.diff(v) > 0)


def test_centre_exact_examples():
    assert np.all(centre_exact(GRID, 0.0) == 0.0)
    assert float(centre_exact(math.pi, 0.2)) == pytest.approx(0.0, abs=1e-12)
    assert float(centre_exact(1.0, 0.1)) == pytest.approx(CENTRE_M1_E01, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.floats(-20.0, 20.0), st.floats(0.0, 0.9))
def test_centre_exact_is_odd(M, e):
    assert float(centre_exact(-M, e)) == pytest.approx(-float(centre_exact(M, e)), abs=1e-12)


@pytest.mark.parametrize("k", range(-4, 5))
@pytest.mark.parametrize("e", [0.05, 0.3, 0.8])
def test_centre_exact_zeros(k, e):
    assert abs(float(centre_exact(k * math.pi, e))) < 1e-10


@pytest.mark.parametrize("e", [0.01, 0.0549, 0.1])
def test_first_order_coefficient(e):
    M = GRID[GRID < 2 * math.pi]
    assert sin_coefficient_lstsq(M, centre_exact(M, e)) == pytest.approx(centre_coefficient_c1(e), abs=2e-4)
