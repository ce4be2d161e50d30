"""Phi-function calculus and expm1-stable coefficient algebra.

phi_0(h) = e^h and phi_{k+1}(h) = (phi_k(h) - 1/k!) / h, with phi_k(0) = 1/k!,
equivalently phi_{k+1}(h) = integral_0^1 e^{(1-tau) h} tau^k / k! dtau.

These weights turn exponentially weighted polynomial integrals into closed
forms, and the square-root combinations below are the staged-noise
coefficients of the multi-stage stochastic solvers, rearranged so that every
subtraction goes through expm1 and stays accurate down to h ~ 1e-300.
"""

import math

import numpy as np

from .errors import ConfigError, DomainError

MAX_ORDER = 8
MAX_ABS_H = 50.0

# Upward recursion from e^h loses roughly log10(k! / h^k) digits, so below
# this cutoff the direct Taylor series (exact to ~1e-16 there) is used.
_SERIES_CUTOFF = 3.0
_SERIES_TERMS = 60


def _phi_series(k: int, h: float) -> float:
    # sum_{j>=0} h^j / (k+j)!  -- factorially convergent for |h| < cutoff
    term = 1.0 / math.factorial(k)
    acc = term
    for j in range(1, _SERIES_TERMS):
        term *= h / (k + j)
        acc += term
        if abs(term) <= 1e-20 * abs(acc):
            break
    return acc


def phi(k: int, h: float) -> float:
    """Evaluate phi_k(h) for 0 <= k <= 8 and |h| <= 50."""
    if not isinstance(k, (int, np.integer)) or not 0 <= k <= MAX_ORDER:
        raise DomainError(f"phi order k={k!r} outside 0..{MAX_ORDER}")
    h = float(h)
    if not math.isfinite(h) or abs(h) > MAX_ABS_H:
        raise DomainError(f"phi argument h={h!r} outside |h| <= {MAX_ABS_H}")
    if k == 0:
        return math.exp(h)
    if h == 0.0:
        return 1.0 / math.factorial(k)
    if k == 1:
        return math.expm1(h) / h
    if abs(h) < _SERIES_CUTOFF:
        return _phi_series(k, h)
    val = math.expm1(h) / h
    for j in range(1, k):
        val = (val - 1.0 / math.factorial(j)) / h
    return val


def weighted_poly_integral(k: int, lam_s: float, lam_t: float) -> float:
    """integral_{lam_s}^{lam_t} e^{-lam} (lam - lam_s)^k / k! dlam.

    Closed form e^{-lam_t} h^{k+1} phi_{k+1}(h) with h = lam_t - lam_s.
    """
    lam_s = float(lam_s)
    lam_t = float(lam_t)
    if not (math.isfinite(lam_s) and math.isfinite(lam_t)):
        raise DomainError("lambda endpoints must be finite")
    h = lam_t - lam_s
    return math.exp(-lam_t) * h ** (k + 1) * phi(k + 1, h)


def sqrt_exp_diff(a: float, b: float) -> float:
    """sqrt(e^a - e^b) for a >= b, computed without cancellation."""
    if b > a:
        raise DomainError(f"sqrt(e^a - e^b) needs a >= b, got a={a}, b={b}")
    if a == b:
        return 0.0
    return math.exp(0.5 * b) * math.sqrt(math.expm1(a - b))


def stable_expm1_combination(h, r1, r2, z):
    """Three-stage noise combination with expm1-stable coefficients.

    Returns sqrt(e^{2h} - e^{2 r2 h}) z1 + sqrt(e^{2 r2 h} - e^{2 r1 h}) z2
    + sqrt(e^{2 r1 h} - 1) z3, with every radicand factored as
    e^{smaller} * expm1(difference).
    """
    if not 0.0 < r1 < r2 < 1.0:
        raise ConfigError(f"stage fractions must satisfy 0 < r1 < r2 < 1, got {r1}, {r2}")
    h = float(h)
    if h < 0.0:
        raise DomainError("noise combination requires h >= 0")
    z1, z2, z3 = (np.asarray(zi, dtype=float) for zi in z)
    if h == 0.0:
        return np.zeros_like(z1)
    c1 = sqrt_exp_diff(2.0 * h, 2.0 * r2 * h)
    c2 = sqrt_exp_diff(2.0 * r2 * h, 2.0 * r1 * h)
    c3 = math.sqrt(math.expm1(2.0 * r1 * h))
    return c1 * z1 + c2 * z2 + c3 * z3
