"""Quadratic forms of the weighted quotient, norms, residual identities and boundary probes.

For a function f on (0, inf) and parameters (mu, eps) the three integrals are::

    A = int (f'')^2 x^(mu+1)
    B = int (x^2 (f')^2 - eps f^2) x^(mu-1)
    D = int (f')^2 x^mu

and the quotient is A*B/D^2.  All integrands are built here as explicit
products and handed to :func:`integrate_halfline`; powers of x are split
evenly between the two factors of each square so that no intermediate
overflows at extreme nodes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial import Polynomial

from .errors import (DegenerateDenominator, DivergenceSuspected, DomainError,
                     NonCanonicalWarning, NonConvergence)
from .problem import ProblemParams, derive
from .quadrature import QuadratureSpec, integrate_halfline, integrate_interval


@dataclass(frozen=True)
class FunctionTriple:
    """Evaluator ``x -> (f, f', f'')`` on positive reals (arrays in, arrays out)."""

    func: Callable[[np.ndarray], tuple]
    label: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        f, f1, f2 = self.func(x)
        return (np.broadcast_to(np.asarray(f, float), x.shape),
                np.broadcast_to(np.asarray(f1, float), x.shape),
                np.broadcast_to(np.asarray(f2, float), x.shape))

    def rescaled(self, c: float) -> "FunctionTriple":
        """The triple of ``x -> f(c x)``."""
        def func(x):
            f, f1, f2 = self(c * np.asarray(x, dtype=float))
            return f, c * f1, c * c * f2
        return FunctionTriple(func, f"{self.label} at {c}*x")

    def scaled(self, k: float) -> "FunctionTriple":
        def func(x):
            f, f1, f2 = self(x)
            return k * f, k * f1, k * f2
        return FunctionTriple(func, f"{k}*{self.label}")

    def consistency_error(self, xs, rel_step: float = 1e-5) -> float:
        """Largest relative mismatch between f', f'' and centred differences of f, f'.

        Each mismatch is measured against the magnitude of the derivative or,
        near its zeros, of ``|f|/x`` and ``|f'|/x``.
        """
        worst = 0.0
        for x in np.atleast_1d(np.asarray(xs, dtype=float)):
            h = rel_step * max(1.0, x)
            h = min(h, 0.5 * x)
            fp, f1p, _ = self(np.array([x + h]))
            fm, f1m, _ = self(np.array([x - h]))
            f0, f1, f2 = self(np.array([x]))
            d1 = (fp - fm) / (2 * h)
            d2 = (f1p - f1m) / (2 * h)
            scale1 = max(abs(f1[0]), abs(d1[0]), abs(f0[0]) / x, 1e-300)
            scale2 = max(abs(f2[0]), abs(d2[0]), abs(f1[0]) / x, 1e-300)
            worst = max(worst, abs(d1[0] - f1[0]) / scale1, abs(d2[0] - f2[0]) / scale2)
        return worst


def poly_exp(coeffs, rate: float = 1.0, power: int = 0, label: str | None = None) -> FunctionTriple:
    """``f(x) = x**power * p(x) * exp(-rate x)`` with ``p`` given by ascending coefficients."""
    q = Polynomial([0.0] * power + list(coeffs))
    q1 = q.deriv()
    q2 = q1.deriv()
    a = float(rate)
    d1 = q1 - a * q
    d2 = q2 - 2 * a * q1 + a * a * q

    def func(x):
        e = np.exp(-a * x)
        return q(x) * e, d1(x) * e, d2(x) * e

    return FunctionTriple(func, label or f"x^{power}*poly{list(np.round(coeffs, 6))}*exp(-{a}x)")


def from_expression(expr: str, label: str | None = None) -> FunctionTriple:
    """Triple from a sympy expression in ``x``, differentiated symbolically.

    >>> t = from_expression("x*exp(-x)")
    >>> [float(v[0]) for v in t([1.0])]  # doctest: +ELLIPSIS
    [0.367879..., 0.0, -0.367879...]
    """
    import sympy

    x = sympy.Symbol("x", positive=True)
    try:
        e = sympy.sympify(expr, locals={"x": x})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ValueError(f"cannot parse {expr!r}: {exc}") from exc
    extra = e.free_symbols - {x}
    if extra:
        raise ValueError(f"expression may only depend on x, found {sorted(map(str, extra))}")
    fns = [sympy.lambdify(x, d, modules="numpy") for d in (e, sympy.diff(e, x), sympy.diff(e, x, 2))]

    def func(xs):
        return tuple(fn(xs) for fn in fns)

    return FunctionTriple(func, label or str(e))


def min_power(mu: float) -> int:
    """Smallest power m such that ``x**m * exp(-x)`` lies in the energy space for this mu."""
    if mu > 0:
        return 0
    return math.floor(1.0 - mu / 2.0) + 1


def builtin_functions(mu: float) -> list[FunctionTriple]:
    """A few fixed polynomial-times-exponential test functions admissible for ``mu``."""
    m = min_power(mu)
    return [
        poly_exp([1.0], 1.0, m, label=f"x^{m} exp(-x)"),
        poly_exp([1.0, 1.0], 1.0, m, label=f"x^{m} (1+x) exp(-x)"),
        poly_exp([1.0, -0.5, 0.25], 0.5, m, label=f"x^{m} (1-x/2+x^2/4) exp(-x/2)"),
        poly_exp([0.3, 1.0, 0.0, -0.2], 2.0, m, label=f"x^{m} (0.3+x-0.2x^3) exp(-2x)"),
    ]


@dataclass(frozen=True)
class FormValues:
    A: float
    B: float
    D: float
    norm_sq: float
    err: float


@dataclass(frozen=True)
class ResidualCoefficients:
    alpha: float
    beta: float
    gamma: float


def _wsq(v, logx, p):
    """``(v * x**p)**2`` formed in log space: exact zeros stay zero, no inf*0."""
    with np.errstate(divide="ignore", over="ignore"):
        return np.exp(2.0 * (np.log(np.abs(v)) + p * logx))


def _integrate(h, spec, what):
    try:
        return integrate_halfline(h, spec)
    except NonConvergence as exc:
        raise DivergenceSuspected(f"{what}: {exc}") from exc


def form_values(triple: FunctionTriple, params: ProblemParams,
                spec: QuadratureSpec = QuadratureSpec()) -> FormValues:
    """A, B, D and the squared energy norm, integrated in one pass.

    B is integrated as the single combined integrand, never as a difference
    of two separately computed integrals.
    """
    mu, eps = params.mu, params.eps

    def h(x):
        f, f1, f2 = triple(x)
        lx = np.log(x)
        a = _wsq(f2, lx, 0.5 * (mu + 1))
        f1sq = _wsq(f1, lx, 0.5 * (mu - 1))
        fsq = _wsq(f, lx, 0.5 * (mu - 1))
        b = _wsq(f1, lx, 0.5 * (mu + 1)) - eps * fsq
        d = _wsq(f1, lx, 0.5 * mu)
        n = a + _wsq(f1, lx, 0.5 * (mu + 1)) + f1sq + fsq
        return np.stack([a, b, d, n], axis=1)

    r = _integrate(h, spec, f"forms of {triple.label}")
    A, B, D, N = (float(v) for v in r.value)
    return FormValues(A=A, B=B, D=D, norm_sq=N, err=float(np.sum(r.err_estimate)))


def norm_prime_sq(triple: FunctionTriple, params: ProblemParams,
                  spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Squared norm of the larger space: the ``(f')^2 x^(mu-1)`` term is replaced by ``(f')^2 x^mu``."""
    mu = params.mu

    def h(x):
        f, f1, f2 = triple(x)
        lx = np.log(x)
        return (_wsq(f2, lx, 0.5 * (mu + 1)) + _wsq(f1, lx, 0.5 * (mu + 1))
                + _wsq(f1, lx, 0.5 * mu) + _wsq(f, lx, 0.5 * (mu - 1)))

    return _integrate(h, spec, f"primed norm of {triple.label}").value


def residual_lhs(triple: FunctionTriple, params: ProblemParams, coeffs: ResidualCoefficients,
                 spec: QuadratureSpec = QuadratureSpec()) -> float:
    """``int (x f'' + alpha x f' + beta f' + gamma f)^2 x^(mu-1) dx``."""
    mu = params.mu
    al, be, ga = coeffs.alpha, coeffs.beta, coeffs.gamma

    def h(x):
        f, f1, f2 = triple(x)
        return _wsq(x * f2 + al * x * f1 + be * f1 + ga * f, np.log(x), 0.5 * (mu - 1))

    return _integrate(h, spec, f"residual of {triple.label}").value


def expansion_integrals(triple: FunctionTriple, params: ProblemParams,
                        spec: QuadratureSpec = QuadratureSpec()) -> dict[str, float]:
    """The separate integrals that appear once the square is expanded and the
    cross terms are integrated by parts."""
    mu = params.mu

    def h(x):
        f, f1, f2 = triple(x)
        lx = np.log(x)
        with np.errstate(divide="ignore", over="ignore"):
            cross = np.sign(f1 * f) * np.exp(np.log(np.abs(f1)) + np.log(np.abs(f)) + (mu - 1) * lx)
        return np.stack([
            _wsq(f2, lx, 0.5 * (mu + 1)),        # A
            _wsq(f1, lx, 0.5 * (mu + 1)),        # (x f')^2 x^(mu-1)
            _wsq(f1, lx, 0.5 * (mu - 1)),        # f'^2 x^(mu-1)
            _wsq(f, lx, 0.5 * (mu - 1)),         # f^2 x^(mu-1)
            _wsq(f1, lx, 0.5 * mu),              # D
            cross,                               # f' f x^(mu-1)
        ], axis=1)

    r = _integrate(h, spec, f"expansion of {triple.label}")
    keys = ("A", "x2f1sq", "f1sq", "fsq", "D", "f1f")
    return dict(zip(keys, (float(v) for v in r.value)))


def expanded_residual(terms: dict[str, float], params: ProblemParams,
                      coeffs: ResidualCoefficients) -> float:
    """Ten-term form of :func:`residual_lhs` after integration by parts."""
    mu = params.mu
    al, be, ga = coeffs.alpha, coeffs.beta, coeffs.gamma
    t = terms
    return (t["A"] + al * al * t["x2f1sq"] + be * be * t["f1sq"] + ga * ga * t["fsq"]
            + 2 * al * be * t["D"]
            - al * (mu + 1) * t["D"] - be * mu * t["f1sq"] - 2 * ga * t["D"]
            - 2 * ga * mu * t["f1f"] - al * ga * mu * t["fsq"] + 2 * be * ga * t["f1f"])


def is_canonical_b(params: ProblemParams, b: float) -> bool:
    d = derive(params)
    tol = 1e-12 * max(1.0, abs(params.mu))
    return abs(b - d.b_minus) <= tol or abs(b - d.b_plus) <= tol


def g_alpha(triple: FunctionTriple, params: ProblemParams, alpha: float, b: float,
            spec: QuadratureSpec = QuadratureSpec(), values: FormValues | None = None) -> float:
    """``alpha^2 B - alpha (mu + 1 - 2b) D + A``.

    For ``b`` a root of ``b (mu - b) = eps`` this equals the residual with
    ``beta = mu``, ``gamma = (mu - b) alpha``.  Other ``b`` are accepted with a
    :class:`NonCanonicalWarning`.
    """
    if not is_canonical_b(params, b):
        warnings.warn(f"b={b} is not a root of b(mu-b)=eps", NonCanonicalWarning, stacklevel=2)
    v = values if values is not None else form_values(triple, params, spec)
    return alpha * alpha * v.B - alpha * (params.mu + 1 - 2 * b) * v.D + v.A


class IdentityCheck(NamedTuple):
    """``rel_gap`` divides by ``max(|lhs|, |g|, 1e-12)``; ``term_scale`` is
    ``|alpha^2 B| + |alpha (mu+1-2b) D| + |A|``, the size of what cancels in g."""
    lhs: float
    g: float
    gap: float
    rel_gap: float
    term_scale: float = float("nan")

    @property
    def scaled_gap(self) -> float:
        return abs(self.gap) / max(abs(self.lhs), abs(self.g), self.term_scale, 1e-300)


def identity_check(triple: FunctionTriple, params: ProblemParams, alpha: float, b: float,
                   spec: QuadratureSpec = QuadratureSpec(), values: FormValues | None = None) -> IdentityCheck:
    v = values if values is not None else form_values(triple, params, spec)
    lhs = residual_lhs(triple, params, ResidualCoefficients(alpha, params.mu, (params.mu - b) * alpha), spec)
    g = g_alpha(triple, params, alpha, b, spec, v)
    gap = lhs - g
    scale = abs(alpha * alpha * v.B) + abs(alpha * (params.mu + 1 - 2 * b) * v.D) + abs(v.A)
    return IdentityCheck(lhs, g, gap, abs(gap) / max(abs(lhs), abs(g), 1e-12), scale)


def identity_gap(triple: FunctionTriple, params: ProblemParams, alpha: float, b: float,
                 spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Residual minus g(alpha) with ``beta = mu`` and ``gamma = (mu - b) alpha``."""
    return identity_check(triple, params, alpha, b, spec).gap


def quotient(triple: FunctionTriple, params: ProblemParams,
             spec: QuadratureSpec = QuadratureSpec(), values: FormValues | None = None) -> float:
    v = values if values is not None else form_values(triple, params, spec)
    if not v.D > v.err:
        raise DegenerateDenominator(f"D={v.D:.3g} is within quadrature error {v.err:.3g}")
    return v.A * v.B / (v.D * v.D)


class LimitTable(NamedTuple):
    x: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    G3: np.ndarray


def limit_probe(triple: FunctionTriple, params: ProblemParams, xs) -> LimitTable:
    """``(f')^2 x^(mu+1)``, ``(f')^2 x^mu`` and ``f^2 x^mu`` at each probe point."""
    x = np.asarray(xs, dtype=float)
    if np.any(x <= 0):
        raise ValueError("probe points must be positive")
    mu = params.mu
    f, f1, _ = triple(x)
    lx = np.log(x)
    g1 = _wsq(f1, lx, 0.5 * (mu + 1))
    g2 = _wsq(f1, lx, 0.5 * mu)
    g3 = _wsq(f, lx, 0.5 * mu)
    table = LimitTable(x, g1, g2, g3)
    if not all(np.all(np.isfinite(c)) for c in table[1:]):
        raise DomainError("non-finite value in limit probe")
    return table


# A function in the larger space whose (f')^2 x^(mu-1) integral diverges (mu = 0).
# Constructed for demonstration; f = x * log(1 + 1/x)^(-1/2) * exp(-x), so that
# near the origin f' ~ |log x|^(-1/2) and (f')^2 / x is not integrable.

def flaw_witness() -> FunctionTriple:
    def func(x):
        # with L = log(1 + 1/x) and L' = -1/(x(x+1)), arranged so that no
        # intermediate carries more than one factor 1/x
        L = np.log1p(1.0 / x)
        xp1 = x + 1.0
        u = L ** -0.5
        g = x * u
        dg = u + 0.5 * L ** -1.5 / xp1
        d2g = (L ** -1.5 / (x * xp1)
               + L ** -2.5 * (0.75 - 0.5 * L * (2 * x + 1.0)) / (x * xp1 * xp1))
        e = np.exp(-x)
        return g * e, (dg - g) * e, (d2g - 2 * dg + g) * e

    return FunctionTriple(func, "constructed witness x*log(1+1/x)^(-1/2)*exp(-x)")


class FlawDemo(NamedTuple):
    deltas: np.ndarray
    primed_terms: np.ndarray      # int_delta^1 of the terms of ||f||'^2
    missing_term: np.ndarray      # int_delta^1 (f')^2 x^(mu-1)


def flaw_demo(spec: QuadratureSpec = QuadratureSpec(), ks=range(1, 13)) -> FlawDemo:
    """Partial integrals over [10^-k, 1] for the witness at mu = 0.

    The primed-norm terms settle while ``int (f')^2 / x`` keeps growing (like
    log log(1/delta)).  Integration runs in ``u = -log x`` to keep nodes away
    from underflow.
    """
    tri = flaw_witness()

    def h(u):
        x = np.exp(-u)
        f, f1, f2 = tri(x)
        primed = (x * f2 * f2 + x * f1 * f1 + f1 * f1 + f * f / x) * x
        missing = f1 * f1
        return np.stack([primed, missing], axis=1)

    deltas = np.array([10.0 ** -k for k in ks])
    out = np.array([integrate_interval(h, 0.0, -math.log(d), spec).value for d in deltas])
    return FlawDemo(deltas, out[:, 0], out[:, 1])
