"""Regularized incomplete beta function and the F distribution built on it."""

from __future__ import annotations

import math

_EPS = 1e-16
_TINY = 1e-300
_MAX_TERMS = 10_000


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz evaluation."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_TERMS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _front(a: float, b: float, x: float, y: float) -> float:
    log_bt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
              + a * math.log(x) + b * math.log(y))
    return math.exp(log_bt)


def _check_beta_args(a: float, b: float, x: float) -> None:
    for v in (a, b, x):
        if not math.isfinite(v):
            raise ValueError("betainc arguments must be finite")
    if a <= 0 or b <= 0:
        raise ValueError("betainc requires a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError("betainc requires 0 <= x <= 1")


def _betainc_both(a: float, b: float, x: float, y: float) -> tuple[float, float]:
    """``(I_x(a, b), 1 - I_x(a, b))`` with ``y = 1 - x`` supplied exactly by the caller."""
    if x == 0.0:
        return 0.0, 1.0
    if y == 0.0:
        return 1.0, 0.0
    front = _front(a, b, x, y)
    # the fraction converges fast only below the mean; reflect otherwise
    if x < (a + 1.0) / (a + b + 2.0):
        lower = front * _betacf(a, b, x) / a
        return lower, 1.0 - lower
    upper = front * _betacf(b, a, y) / b
    return 1.0 - upper, upper


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    _check_beta_args(a, b, x)
    return _betainc_both(a, b, x, 1.0 - x)[0]


def betaincc(a: float, b: float, x: float) -> float:
    """Complement 1 - I_x(a, b)."""
    _check_beta_args(a, b, x)
    return _betainc_both(a, b, x, 1.0 - x)[1]


def _check_f_args(x: float, d1: float, d2: float) -> None:
    for v in (x, d1, d2):
        if not math.isfinite(v):
            raise ValueError("f distribution arguments must be finite")
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    if d1 < 1 or d2 < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {d1}, {d2}")


def f_cdf(x: float, d1: float, d2: float) -> float:
    """CDF of the F(d1, d2) distribution at ``x``."""
    _check_f_args(x, d1, d2)
    if x == 0:
        return 0.0
    denom = d1 * x + d2
    return _betainc_both(d1 / 2.0, d2 / 2.0, d1 * x / denom, d2 / denom)[0]


def f_sf(x: float, d1: float, d2: float) -> float:
    """Upper tail 1 - F_cdf, accurate for tiny p-values."""
    _check_f_args(x, d1, d2)
    if x == 0:
        return 1.0
    denom = d1 * x + d2
    return _betainc_both(d1 / 2.0, d2 / 2.0, d1 * x / denom, d2 / denom)[1]
