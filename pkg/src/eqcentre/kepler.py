"""Keplerian oracles for the equation of the centre.

``centre_exact`` (Kepler solve plus anomaly conversion) is the reference used
throughout; ``centre_bessel_series`` is the classical Bessel expansion and
``centre_coefficient_c1`` its leading sin M coefficient.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, NumericError

TWO_PI = 2.0 * math.pi
DEFAULT_TRUNCATION = (12, 12)


def _check_e(e: float) -> None:
    if not 0.0 <= e < 1.0:
        raise DomainError(f"eccentricity must satisfy 0 <= e < 1, got {e!r}")


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind J_n(x) for integer n, by power series.

    Negative orders use J_{-n}(x) = (-1)^n J_n(x). Terms are summed until
    their magnitude drops below 1e-18 (past the largest term).
    """
    if n < 0:
        return (-1) ** (-n) * bessel_j(-n, x)
    if abs(x) > 30.0:
        raise DomainError(f"series regime requires |x| <= 30, got {x!r}")
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    k = 0
    neg_q = -half * half
    while True:
        k += 1
        term *= neg_q / (k * (n + k))
        total += term
        if abs(term) < 1e-18 and k > abs(half):
            return total


def beta_of_e(e: float) -> float:
    """(1 - sqrt(1 - e^2)) / e, evaluated as e / (1 + sqrt(1 - e^2))."""
    _check_e(e)
    return e / (1.0 + math.sqrt(1.0 - e * e))


def centre_series_coefficients(e: float, S: int = 12, P: int = 12) -> np.ndarray:
    """Coefficients a_s of sin(sM), s = 1..S, in the Bessel expansion."""
    _check_e(e)
    if S < 1 or P < 0:
        raise DomainError("truncation requires S >= 1 and P >= 0")
    beta = beta_of_e(e)
    coeffs = np.zeros(S)
    for s in range(1, S + 1):
        x = s * e
        inner = bessel_j(s, x)
        for p in range(1, P + 1):
            inner += beta**p * (bessel_j(s - p, x) + bessel_j(s + p, x))
        coeffs[s - 1] = 2.0 * inner / s
    return coeffs


def centre_bessel_series(e: float, M, S: int = 12, P: int = 12):
    """Truncated Bessel series for v - M; ``M`` may be a scalar or an array."""
    coeffs = centre_series_coefficients(e, S, P)
    M_arr = np.asarray(M, dtype=float)
    s = np.arange(1, S + 1)
    result = np.sin(np.multiply.outer(M_arr, s)) @ coeffs
    return float(result) if M_arr.ndim == 0 else result


def centre_coefficient_c1(e: float) -> float:
    """Leading coefficient 2e - e^3/4 + 5e^5/96 + 107e^7/4608."""
    if not e < 1.0:
        raise DomainError(f"eccentricity must be < 1, got {e!r}")
    e2 = e * e
    return e * (2.0 + e2 * (-0.25 + e2 * (5.0 / 96.0 + e2 * 107.0 / 4608.0)))


C1_MAX = centre_coefficient_c1(0.99)


def invert_c1(coeff: float, tol: float = 1e-12) -> float:
    """Eccentricity whose leading coefficient equals ``coeff`` (bisection)."""
    if not 0.0 <= coeff < C1_MAX:
        raise DomainError(f"coefficient {coeff!r} outside [0, {C1_MAX:.6f})")
    if coeff == 0.0:
        return 0.0
    lo, hi = 0.0, 0.99
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if centre_coefficient_c1(mid) < coeff:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def wrap_pi(angle):
    """Wrap into (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), TWO_PI)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


def solve_kepler(M: float, e: float, tol: float = 1e-12) -> float:
    """Eccentric anomaly E with E - e sin E = M (Newton, bisection fallback).

    The solve happens on M wrapped into (-pi, pi]; the result is shifted back
    onto the branch of the input M.
    """
    _check_e(e)
    if not tol > 0:
        raise DomainError("tolerance must be positive")
    Mr = wrap_pi(M)
    E = Mr + e * math.sin(Mr)
    for _ in range(50):
        f = E - e * math.sin(E) - Mr
        if abs(f) < tol:
            # one polishing step keeps the residual far below tol
            E1 = E - f / (1.0 - e * math.cos(E))
            if abs(E1 - e * math.sin(E1) - Mr) <= abs(f):
                E = E1
            return E + (M - Mr)
        E -= f / (1.0 - e * math.cos(E))
    lo, hi = Mr - e, Mr + e
    for _ in range(200):
        E = 0.5 * (lo + hi)
        f = E - e * math.sin(E) - Mr
        if abs(f) < tol:
            return E + (M - Mr)
        if f < 0:
            lo = E
        else:
            hi = E
    raise NumericError(f"Kepler solve failed for M={M!r}, e={e!r}")


def solve_kepler_array(M, e, tol: float = 1e-12) -> np.ndarray:
    """Vectorised :func:`solve_kepler` over arrays of M (and e)."""
    M = np.asarray(M, dtype=float)
    e = np.broadcast_to(np.asarray(e, dtype=float), M.shape)
    if np.any((e < 0) | (e >= 1)):
        raise DomainError("eccentricity must satisfy 0 <= e < 1")
    Mr = np.asarray(wrap_pi(M), dtype=float)
    E = Mr + e * np.sin(Mr)
    for _ in range(50):
        f = E - e * np.sin(E) - Mr
        active = np.abs(f) >= tol
        if not active.any():
            break
        E = np.where(active, E - f / (1.0 - e * np.cos(E)), E)
    f = E - e * np.sin(E) - Mr
    E1 = E - f / (1.0 - e * np.cos(E))
    f1 = E1 - e * np.sin(E1) - Mr
    better = np.abs(f1) <= np.abs(f)
    E = np.where(better, E1, E)
    f = np.where(better, f1, f)
    bad = ~(np.abs(f) < tol)
    if bad.any():
        lo, hi = Mr[bad] - e[bad], Mr[bad] + e[bad]
        eb, Mb = e[bad], Mr[bad]
        Eb = 0.5 * (lo + hi)
        for _ in range(200):
            Eb = 0.5 * (lo + hi)
            fb = Eb - eb * np.sin(Eb) - Mb
            if np.all(np.abs(fb) < tol):
                break
            lo = np.where(fb < 0, Eb, lo)
            hi = np.where(fb < 0, hi, Eb)
        else:
            raise NumericError("vectorised Kepler solve failed to converge")
        E = E.copy()
        E[bad] = Eb
    return E + (M - Mr)


def true_anomaly_from_E(E, e: float):
    """True anomaly from eccentric anomaly, continuous across revolutions."""
    _check_e(e)
    E_arr = np.asarray(E, dtype=float)
    if e == 0.0:
        return float(E_arr) if E_arr.ndim == 0 else E_arr.copy()
    v = 2.0 * np.arctan2(math.sqrt(1.0 + e) * np.sin(E_arr / 2), math.sqrt(1.0 - e) * np.cos(E_arr / 2))
    # true and eccentric anomaly always lie within pi of each other
    v = v + TWO_PI * np.round((E_arr - v) / TWO_PI)
    return float(v) if E_arr.ndim == 0 else v


def centre_exact(M, e: float):
    """v - M from an exact Kepler solve; scalar or array ``M``."""
    _check_e(e)
    # the residual is 2pi-periodic, so work on the reduced anomaly and avoid
    # the rounding of restoring the branch
    M_arr = np.asarray(wrap_pi(np.asarray(M, dtype=float)), dtype=float)
    if M_arr.ndim == 0:
        E = solve_kepler(float(M_arr), e, 1e-13)
        return true_anomaly_from_E(E, e) - float(M_arr)
    E = solve_kepler_array(M_arr, e, 1e-13)
    return true_anomaly_from_E(E, e) - M_arr


def sin_coefficient_lstsq(M, y) -> float:
    """Least-squares coefficient of a single sin(M) regressor."""
    s = np.sin(np.asarray(M, dtype=float))
    return float(np.dot(s, y) / np.dot(s, s))
