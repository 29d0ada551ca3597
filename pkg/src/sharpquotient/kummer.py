"""Kummer's confluent hypergeometric function M(b, mu, z) = 1F1(b; mu; z) for real z >= 0.

Two evaluation paths are used:

* the power series, summed with Neumaier compensation, for ``z <= z_max``;
* the leading large-``z`` asymptotic series for ``z > z_max``.  It is only
  ever formed in the damped combination ``exp(-z) * M``, which stays finite
  for every ``z`` that a half-line quadrature visits.

Cancellation is never hidden: if the compensated sum is smaller than
``CANCEL_RATIO`` times the sum of absolute terms a :class:`PrecisionError`
is raised.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PoleError, PrecisionError

Z_MAX = 60.0
CANCEL_RATIO = 1e-10
_SERIES_STOP = 1e-16
_ASYM_STOP = 1e-17
_MAX_TERMS = 20000
_LOG_OVERFLOW = 700.0


@dataclass(frozen=True)
class KummerParams:
    b: float
    mu: float
    z_max: float = Z_MAX

    def __post_init__(self):
        if not self.z_max > 0:
            raise ValueError("z_max must be positive")


def _is_nonpos_int(v: float) -> bool:
    return v <= 0 and v == math.floor(v)


def terminates(b: float, mu: float) -> bool:
    """True when the series is a polynomial that ends before any pole."""
    if not _is_nonpos_int(b):
        return False
    if _is_nonpos_int(mu):
        return b > mu
    return True


def check_pole(b: float, mu: float) -> None:
    if _is_nonpos_int(mu) and not terminates(b, mu):
        raise PoleError(f"1F1({b}; {mu}; z): mu is a nonpositive integer and the series does not terminate first")


def _as_array(z):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or not np.all(np.isfinite(z)):
        raise ValueError("Kummer evaluation requires finite z >= 0")
    return z


def _check_cancellation(total, abs_sum, b, mu):
    bad = np.abs(total) < CANCEL_RATIO * abs_sum
    if np.any(bad):
        ratio = float(np.max(abs_sum[bad] / np.maximum(np.abs(total[bad]), 1e-300)))
        raise PrecisionError(
            f"1F1({b}; {mu}; z): catastrophic cancellation, sum|terms|/|sum| = {ratio:.3g}"
        )


def _polynomial(b: float, mu: float, z: np.ndarray, damped: bool, strict: bool = True) -> np.ndarray:
    """Terminating series, degree ``-b``.  Damped form is summed in log space."""
    n = int(-b)
    coeffs = [1.0]
    for k in range(n):
        coeffs.append(coeffs[-1] * (b + k) / ((mu + k) * (k + 1)))
    if damped:
        with np.errstate(divide="ignore"):
            logz = np.log(z)
        terms = [math.copysign(1.0, c) * np.exp(math.log(abs(c)) + k * logz - z)
                 if k else np.exp(-z)
                 for k, c in enumerate(coeffs)]
    else:
        terms = [c * z**k for k, c in enumerate(coeffs)]
    terms = np.array(terms)
    total = np.array([math.fsum(col) for col in terms.reshape(len(coeffs), -1).T]).reshape(z.shape)
    abs_sum = np.sum(np.abs(terms), axis=0)
    nz = abs_sum > 0
    if strict:
        _check_cancellation(total[nz], abs_sum[nz], b, mu)
    return total


def _series(b: float, mu: float, z: np.ndarray, strict: bool = True) -> np.ndarray:
    """Compensated power series; stops after three consecutive negligible
    terms inside the region where terms are decreasing."""
    term = np.ones_like(z)
    s = np.ones_like(z)
    comp = np.zeros_like(z)
    abs_sum = np.ones_like(z)
    quiet = np.zeros(z.shape, dtype=int)
    k = 0
    while True:
        ratio = (b + k) * z / ((mu + k) * (k + 1))
        term = term * ratio
        t = s + term
        comp += np.where(np.abs(s) >= np.abs(term), (s - t) + term, (term - t) + s)
        s = t
        abs_sum += np.abs(term)
        k += 1
        decreasing = np.abs((b + k) * z) < np.abs((mu + k) * (k + 1))
        small = (np.abs(term) <= _SERIES_STOP * np.abs(s + comp)) & decreasing
        quiet = np.where(small, quiet + 1, 0)
        if np.all(quiet >= 3):
            break
        if k > _MAX_TERMS:
            raise PrecisionError(f"1F1({b}; {mu}; z): series did not converge in {_MAX_TERMS} terms")
    total = s + comp
    if strict:
        _check_cancellation(total, abs_sum, b, mu)
    return total


def _gamma_sign(x: float) -> float:
    if x > 0:
        return 1.0
    return -1.0 if math.ceil(-x) % 2 else 1.0


def _asymptotic_damped(b: float, mu: float, z: np.ndarray):
    """``exp(-z) M(b, mu, z)`` from the large-z expansion.

    Returns None when the expansion cannot deliver full precision at the
    smallest requested z (terms start growing first, or the exponentially
    small companion series is not negligible).
    """
    if _is_nonpos_int(b) or _is_nonpos_int(mu):
        return None
    zmin = float(np.min(z))
    log_pref = math.lgamma(mu) - math.lgamma(b)
    sign = _gamma_sign(mu) * _gamma_sign(b)
    # size of the neglected exp(-z) z^{-b} Gamma(mu)/Gamma(mu-b) contribution, relative
    if not _is_nonpos_int(mu - b):
        log_other = math.lgamma(mu) - math.lgamma(mu - b) - zmin - b * math.log(zmin)
        log_main = log_pref + (b - mu) * math.log(zmin)
        if log_other - log_main > math.log(_ASYM_STOP):
            return None
    u = np.ones_like(z)
    total = np.ones_like(z)
    k = 0
    prev = np.inf
    while True:
        u = u * ((mu - b + k) * (1 - b + k) / ((k + 1) * z))
        k += 1
        total = total + u
        size = float(np.max(np.abs(u) / np.abs(total)))
        if size <= _ASYM_STOP:
            break
        if size > prev or k > 500:
            return None
        prev = size
    return sign * np.exp(log_pref + (b - mu) * np.log(z)) * total


def _damped(b: float, mu: float, z: np.ndarray, z_max: float, strict: bool = True) -> np.ndarray:
    check_pole(b, mu)
    if terminates(b, mu):
        return _polynomial(b, mu, z, damped=True, strict=strict)
    out = np.empty_like(z)
    lo = z <= z_max
    if np.any(lo):
        out[lo] = _series(b, mu, z[lo], strict) * np.exp(-z[lo])
    hi = ~lo
    if np.any(hi):
        zh = z[hi]
        asym = _asymptotic_damped(b, mu, zh)
        if asym is None:
            if np.max(zh) > _LOG_OVERFLOW:
                raise PrecisionError(
                    f"1F1({b}; {mu}; z): no accurate path for z up to {np.max(zh):.3g}"
                )
            asym = _series(b, mu, zh, strict) * np.exp(-zh)
        out[hi] = asym
    return out


def _undamped(b: float, mu: float, z: np.ndarray, z_max: float) -> np.ndarray:
    check_pole(b, mu)
    if terminates(b, mu):
        return _polynomial(b, mu, z, damped=False)
    out = np.empty_like(z)
    lo = z <= z_max
    if np.any(lo):
        out[lo] = _series(b, mu, z[lo])
    hi = ~lo
    if np.any(hi):
        with np.errstate(over="ignore"):
            out[hi] = _damped(b, mu, z[hi], z_max) * np.exp(z[hi])
    if not np.all(np.isfinite(out)):
        raise PrecisionError(f"1F1({b}; {mu}; z) overflows double precision")
    return out


def _ret(z_in, arr):
    return float(arr) if np.ndim(z_in) == 0 else arr


def m_eval(p: KummerParams, z):
    """Value of ``1F1(b; mu; z)``; scalar in, scalar out.

    >>> m_eval(KummerParams(2.0, 2.0), 1.0)  # doctest: +ELLIPSIS
    2.718281828459...
    """
    za = _as_array(z)
    return _ret(z, _undamped(p.b, p.mu, za.reshape(-1), p.z_max).reshape(za.shape))


def m_damped(p: KummerParams, z, strict: bool = True):
    """``exp(-z) * 1F1(b; mu; z)``, finite for all z >= 0 the asymptotic path covers.

    With ``strict=False`` cancellation is not reported; the result is then
    accurate relative to the size of the largest series term, which is what
    a quadrature integrand needs near a sign change.
    """
    za = _as_array(z)
    return _ret(z, _damped(p.b, p.mu, za.reshape(-1), p.z_max, strict).reshape(za.shape))


def m_derivatives(p: KummerParams, z):
    """``(w, w', w'')`` through the contiguous relations
    ``w' = (b/mu) M(b+1, mu+1)`` and ``w'' = b(b+1)/(mu(mu+1)) M(b+2, mu+2)``."""
    b, mu = p.b, p.mu
    w = m_eval(p, z)
    if b == 0:
        zero = 0.0 * np.asarray(w)
        return w, _ret(z, zero), _ret(z, zero)
    w1 = (b / mu) * np.asarray(m_eval(KummerParams(b + 1, mu + 1, p.z_max), z))
    if b + 1 == 0:
        w2 = 0.0 * w1
    else:
        w2 = (b * (b + 1) / (mu * (mu + 1))) * np.asarray(m_eval(KummerParams(b + 2, mu + 2, p.z_max), z))
    return w, _ret(z, w1), _ret(z, w2)


def damped_derivatives(p: KummerParams, z, strict: bool = True):
    """``(F, F', F'')`` for ``F(z) = exp(-z) M(b, mu, z)``.

    Uses Kummer's transformation ``F(z) = M(mu-b, mu, -z)``, whose
    derivatives are again damped Kummer functions with only the
    denominator parameter shifted::

        F'  = -(mu-b)/mu                     * exp(-z) M(b, mu+1, z)
        F'' = (mu-b)(mu-b+1)/(mu(mu+1))       * exp(-z) M(b, mu+2, z)

    No subtraction of nearly equal quantities occurs at large z.
    """
    b, mu = p.b, p.mu
    F = np.asarray(m_damped(p, z, strict))
    c1 = mu - b
    if c1 == 0:
        zero = 0.0 * F
        return _ret(z, F), _ret(z, zero), _ret(z, zero)
    F1 = -(c1 / mu) * np.asarray(m_damped(KummerParams(b, mu + 1, p.z_max), z, strict))
    c2 = c1 * (c1 + 1) / (mu * (mu + 1))
    F2 = c2 * np.asarray(m_damped(KummerParams(b, mu + 2, p.z_max), z, strict)) if c2 else 0.0 * F
    return _ret(z, F), _ret(z, F1), _ret(z, F2)


def ode_residual(p: KummerParams, z):
    """``z w'' + (mu - z) w' - b w``; vanishes for the Kummer solution."""
    w, w1, w2 = (np.asarray(v) for v in m_derivatives(p, z))
    za = np.asarray(z, dtype=float)
    return _ret(z, za * w2 + (p.mu - za) * w1 - p.b * w)


def residual_scale(p: KummerParams, z):
    """Magnitude scale ``(1 + |w| + |w'| + |w''|)(1 + z)`` for the residual contract."""
    w, w1, w2 = (np.asarray(v) for v in m_derivatives(p, z))
    za = np.asarray(z, dtype=float)
    return _ret(z, (1 + np.abs(w) + np.abs(w1) + np.abs(w2)) * (1 + za))
