"""Double-exponential quadrature for integrals over (0, inf) and finite intervals.

Integrands may behave like ``x**p`` (p > -1) at the origin and must decay at
infinity (exponentially or algebraically).  The default ``"split"`` scheme uses
tanh-sinh on (0, split] and exp-sinh on [split, inf).  The alternative
``"expsinh"`` scheme maps all of (0, inf) with a single ``x = exp(pi/2 sinh t)``
and serves as an independent node family for cross-checks.

Integrands are called with a 1-D array of nodes and may return either an
array of the same length or an ``(n, m)`` array holding ``m`` integrands that
are integrated together.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, NonConvergence

_HALF_PI = 0.5 * math.pi
_COARSE_STEP = 0.5
_MIN_LEVELS = 3
_T_CAP = 7.0
_LOG_XMAX = 700.0


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    abs_floor: float = 1e-15
    split: float = 1.0
    max_refinements: int = 12
    tail_cut: float = 1e-18
    scheme: str = "split"

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not self.split > 0:
            raise ValueError("split must be positive")
        if self.max_refinements < 1:
            raise ValueError("max_refinements must be >= 1")
        if self.scheme not in ("split", "expsinh"):
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True)
class IntegralResult:
    value: float | np.ndarray
    err_estimate: float | np.ndarray
    refinements_used: int


# Each map takes an array of t and returns (x, dx/dt).

def _tanh_sinh(a: float, b: float):
    width = b - a

    def m(t):
        u = np.pi * np.sinh(t)
        with np.errstate(over="ignore"):
            lo = 1.0 / (1.0 + np.exp(u))      # fraction of the way from b back to a
            hi = 1.0 / (1.0 + np.exp(-u))     # fraction of the way from a to b
        x = np.where(t < 0, a + width * hi, b - width * lo)
        w = width * hi * lo * np.pi * np.cosh(t)
        return x, w

    return m


def _exp_sinh(a: float):
    def m(t):
        u = _HALF_PI * np.sinh(t)
        e = np.exp(np.minimum(u, _LOG_XMAX))
        x = a + e
        w = e * _HALF_PI * np.cosh(t)
        ok = u <= _LOG_XMAX
        return np.where(ok, x, np.inf), np.where(ok, w, np.inf)

    return m


def _as_columns(vals, n):
    vals = np.asarray(vals, dtype=float)
    if vals.ndim == 0:
        vals = np.full(n, float(vals))
    return vals.reshape(n, -1)


class _Piece:
    """One mapped sub-range with its truncation window in t."""

    def __init__(self, h, mapping, spec):
        self.h = h
        self.map = mapping
        self.spec = spec
        self.lo, self.hi = self._window()

    def eval(self, t):
        x, w = self.map(t)
        if np.any(~np.isfinite(x)) or np.any(x <= 0):
            raise NonConvergence("quadrature node left the representable range")
        vals = _as_columns(self.h(x), t.size)
        if not np.all(np.isfinite(vals)):
            bad = x[~np.all(np.isfinite(vals), axis=1)]
            raise DomainError(f"integrand is not finite at x = {bad[:3]}")
        with np.errstate(over="ignore"):
            out = w[:, None] * vals
        if not np.all(np.isfinite(out)):
            raise NonConvergence("weighted integrand overflows; the integral is unbounded")
        return out

    def _probe(self, t):
        x, w = self.map(np.array([t]))
        if not (np.isfinite(x[0]) and x[0] > 0 and np.isfinite(w[0])):
            return None
        if w[0] == 0:
            return None
        return self.eval(np.array([t]))[0]

    def _window(self):
        centre = self._probe(0.0)
        if centre is None:
            raise NonConvergence("centre node is not representable")
        peak = np.abs(centre)
        ends = []
        for direction in (-1.0, 1.0):
            quiet = 0
            k = 0
            while True:
                k += 1
                t = direction * k * _COARSE_STEP
                if abs(t) > _T_CAP:
                    raise NonConvergence("integrand tail not resolved before the node range ran out")
                term = self._probe(t)
                if term is None:
                    if quiet >= 1:
                        t -= direction * _COARSE_STEP
                        break
                    raise NonConvergence("integrand tail not resolved before the node range ran out")
                mag = np.abs(term)
                peak = np.maximum(peak, mag)
                small = np.all((mag == 0) | (mag <= self.spec.tail_cut * peak))
                quiet = quiet + 1 if small else 0
                if quiet >= 2:
                    break
            ends.append(t)
        return ends[0], ends[1]

    def level_sum(self, level: int) -> np.ndarray:
        """Trapezoid sum over the nodes that are new at ``level``."""
        step = _COARSE_STEP / 2**level
        j_lo = math.ceil(self.lo / step - 1e-9)
        j_hi = math.floor(self.hi / step + 1e-9)
        j = np.arange(j_lo, j_hi + 1)
        if level > 0:
            j = j[j % 2 == 1]
        if j.size == 0:
            return 0.0
        return step * self.eval(j * step).sum(axis=0)


def _refine(pieces, spec: QuadratureSpec, scalar: bool) -> IntegralResult:
    total = sum(p.level_sum(0) for p in pieces)
    prev = None
    for level in range(1, spec.max_refinements + 1):
        new = sum(p.level_sum(level) for p in pieces)
        prev, total = total, 0.5 * total + new
        err = np.abs(total - prev)
        tol = np.maximum(spec.rel_tol * np.abs(total), spec.abs_floor)
        if level >= _MIN_LEVELS - 1 and np.all(err <= tol):
            if scalar:
                return IntegralResult(float(total[0]), float(err[0]), level)
            return IntegralResult(total, err, level)
    raise NonConvergence(
        f"no agreement after {spec.max_refinements} refinements (difference {np.max(err):.3g})"
    )


def _is_scalar_output(h) -> bool:
    probe = np.asarray(h(np.array([1.0, 2.0])), dtype=float)
    return probe.ndim <= 1


def integrate_halfline(h: Callable[[np.ndarray], np.ndarray],
                       spec: QuadratureSpec = QuadratureSpec()) -> IntegralResult:
    """Integrate ``h`` over (0, inf).

    Parameters
    ----------
    h : callable
        Vectorised integrand, see module docstring.  Never called at x = 0.
    spec : QuadratureSpec

    Returns
    -------
    IntegralResult
        ``err_estimate`` is the difference between the last two refinement
        levels, which for double-exponential rules is very conservative.

    Raises
    ------
    NonConvergence
        Levels never agree, or a tail decays too slowly to be truncated.
    DomainError
        ``h`` returned a non-finite value at a node.
    """
    scalar = _is_scalar_output(h)
    if spec.scheme == "split":
        pieces = [_Piece(h, _tanh_sinh(0.0, spec.split), spec), _Piece(h, _exp_sinh(spec.split), spec)]
    else:
        pieces = [_Piece(h, _exp_sinh(0.0), spec)]
    return _refine(pieces, spec, scalar)


def integrate_interval(h: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                       spec: QuadratureSpec = QuadratureSpec()) -> IntegralResult:
    """tanh-sinh over [a, b] with 0 < a < b; endpoint singularities allowed."""
    if not 0 <= a < b:
        raise ValueError("need 0 <= a < b")
    return _refine([_Piece(h, _tanh_sinh(a, b), spec)], spec, _is_scalar_output(h))
