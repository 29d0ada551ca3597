"""Closed-form extremisers built from Kummer's function, and checks around them.

For ``mu > 0`` the extremiser is ``C exp(-lam x) M(b, mu, lam x)``; for ``mu < 0``
it is ``C (lam x)^(1-mu) exp(-lam x) M(b+1-mu, 2-mu, lam x)``, always with
``b = b_minus``.  Both are assembled from damped Kummer evaluations so that the
algebraic tail (``f ~ x^(b-mu)``) is represented without overflow.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import BranchError, DegenerateDenominator, DomainError, MembershipWarning, PoleError
from .forms import FunctionTriple, FormValues, form_values
from .kummer import KummerParams, damped_derivatives, m_damped, terminates
from .problem import ProblemParams, derive
from .quadrature import QuadratureSpec, integrate_interval

MU_POSITIVE = "mu_positive"
MU_NEGATIVE = "mu_negative"


@dataclass(frozen=True)
class ExtremiserSpec:
    branch: str
    C: float
    lam: float
    params: ProblemParams
    b: float = field(default=float("nan"))

    @classmethod
    def for_params(cls, params: ProblemParams, lam: float = 1.0, C: float = 1.0,
                   branch: str | None = None) -> "ExtremiserSpec":
        auto = MU_POSITIVE if params.mu > 0 else MU_NEGATIVE
        return cls(branch or auto, C, lam, params, derive(params).b_minus)

    def __post_init__(self):
        mu = self.params.mu
        if mu == 0:
            raise BranchError("no extremiser family for mu = 0")
        if self.branch not in (MU_POSITIVE, MU_NEGATIVE):
            raise BranchError(f"unknown branch {self.branch!r}")
        if (self.branch == MU_POSITIVE) != (mu > 0):
            raise BranchError(f"branch {self.branch} does not match mu = {mu}")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.C == 0:
            raise ValueError("C must be nonzero")
        if math.isnan(self.b):
            object.__setattr__(self, "b", derive(self.params).b_minus)

    @property
    def kummer(self) -> KummerParams:
        """Parameters of the Kummer factor actually evaluated."""
        mu, b = self.params.mu, self.b
        if self.branch == MU_POSITIVE:
            return KummerParams(b, mu)
        return KummerParams(b + 1 - mu, 2 - mu)

    @property
    def membership_doubtful(self) -> bool:
        return derive(self.params).s == 0.0 and not terminates(self.kummer.b, self.kummer.mu)


def build(spec: ExtremiserSpec) -> FunctionTriple:
    """The extremiser as a :class:`FunctionTriple` (derivatives assembled analytically)."""
    if spec.membership_doubtful:
        warnings.warn(
            f"eps = mu^2/4 for mu={spec.params.mu}: the Kummer series does not terminate and "
            "f ~ x^(-mu/2) at infinity, so f is probably outside the energy space",
            MembershipWarning, stacklevel=2)
    kp = spec.kummer
    lam, C = spec.lam, spec.C
    mu = spec.params.mu

    if spec.branch == MU_POSITIVE:
        def func(x):
            t = lam * np.asarray(x, dtype=float)
            F, F1, F2 = damped_derivatives(kp, t, strict=False)
            return C * F, C * lam * F1, C * lam * lam * F2
        label = f"{C}*exp(-{lam}x)*1F1({spec.b:.6g}; {mu:.6g}; {lam}x)"
    else:
        # g(t) = t^r exp(-t) M(b+1-mu, r+1, t) with r = 1-mu.  Writing
        # exp(-t) M(a', r+1, t) = M(r+1-a', r+1, -t) and using
        # d/dt [t^(c-1) M(a, c, -t)] = (c-1) t^(c-2) M(a, c-1, -t) twice:
        #   g'  = r t^(r-1)          exp(-t) M(b-mu,   r,   t)
        #   g'' = r (r-1) t^(r-2)    exp(-t) M(b-mu-1, r-1, t)
        # The product rule would cancel the leading tails when b = mu.
        r = 1.0 - mu
        b = spec.b
        k1 = KummerParams(b - mu, r)
        k2 = KummerParams(b - mu - 1, r - 1)

        def func(x):
            t = lam * np.asarray(x, dtype=float)
            lt = np.log(t)
            g = np.exp(r * lt) * m_damped(kp, t, strict=False)
            g1 = r * np.exp((r - 1) * lt) * m_damped(k1, t, strict=False)
            g2 = r * (r - 1) * np.exp((r - 2) * lt) * m_damped(k2, t, strict=False)
            return C * g, C * lam * g1, C * lam * lam * g2
        label = f"{C}*({lam}x)^{r:.6g}*exp(-{lam}x)*1F1({kp.b:.6g}; {kp.mu:.6g}; {lam}x)"

    return FunctionTriple(func, label)


def lambda_of(triple: FunctionTriple, params: ProblemParams,
              spec: QuadratureSpec = QuadratureSpec(), values: FormValues | None = None) -> float:
    """Double root ``((s+1)/2) D / B`` of g(alpha) in the equality case."""
    v = values if values is not None else form_values(triple, params, spec)
    if not v.B > v.err:
        raise DegenerateDenominator(f"B={v.B:.3g} is within quadrature error {v.err:.3g}")
    s = derive(params).s
    return 0.5 * (s + 1.0) * v.D / v.B


class ResidualTable(NamedTuple):
    x: np.ndarray
    residual: np.ndarray
    scale: np.ndarray

    @property
    def scaled(self) -> np.ndarray:
        return np.abs(self.residual) / np.where(self.scale > 0, self.scale, 1.0)


def euler_lagrange_residual(triple: FunctionTriple, params: ProblemParams, lam: float, xs) -> ResidualTable:
    """Pointwise ``x f'' + lam x f' + mu f' + (mu - b) lam f`` with ``b = b_minus``.

    ``scale`` is the sum of the absolute values of the four terms.
    """
    x = np.asarray(xs, dtype=float)
    if np.any(x <= 0):
        raise ValueError("probe points must be positive")
    mu = params.mu
    b = derive(params).b_minus
    f, f1, f2 = triple(x)
    terms = (x * f2, lam * x * f1, mu * f1, (mu - b) * lam * f)
    res = sum(terms)
    scale = sum(np.abs(t) for t in terms)
    if not (np.all(np.isfinite(res)) and np.all(np.isfinite(scale))):
        raise DomainError("non-finite value in Euler-Lagrange residual")
    return ResidualTable(x, res, scale)


def near_zero_slope(triple: FunctionTriple, lo: float = 1e-6, hi: float = 1e-4) -> float:
    """Log-log slope of |f| between two small arguments."""
    f, _, _ = triple(np.array([lo, hi]))
    return float((math.log(abs(f[1])) - math.log(abs(f[0]))) / (math.log(hi) - math.log(lo)))


@dataclass
class GrowthReport:
    mu: float
    eps: float
    kind: str
    cutoffs: list = field(default_factory=list)
    partial_integrals: list = field(default_factory=list)
    predicted_exponent: float | None = None
    fitted_exponent: float | None = None
    monotone: bool | None = None
    ill_posed: str | None = None


def rejected_solution_evidence(params: ProblemParams, lam: float = 1.0,
                               spec: QuadratureSpec = QuadratureSpec(),
                               ks=range(1, 7)) -> GrowthReport:
    """Partial integrals showing why the second Kummer solution is discarded.

    For ``mu > 0`` this integrates ``(d^2/dt^2 [exp(-t) psi(t)])^2 t^(mu+1)``
    over ``[delta, 1]`` with ``psi(t) = t^(1-mu) M(b+1-mu, 2-mu, t)``; the
    integrand behaves like ``t^(-1-mu)`` so the integrals grow like
    ``delta^(-mu)``.  For ``mu < 0`` it integrates ``(exp(-t) M(b, mu, t))^2
    t^(mu-1)`` over ``[delta, 1]``: ``M(b, mu, 0) = 1`` makes the integrand
    ``~ t^(mu-1)`` and the integrals grow like ``delta^mu``.  The variable
    ``lam`` only rescales t and is kept for interface symmetry.

    Never raises; an ill-posed parameter pair is reported in ``ill_posed``.
    """
    mu, eps = params.mu, params.eps
    b = derive(params).b_minus
    deltas = [10.0 ** -k for k in ks]
    if mu == 0:
        return GrowthReport(mu, eps, "none", ill_posed="mu = 0 has no extremiser family")
    if mu == 1:
        return GrowthReport(mu, eps, "none", ill_posed="mu = 1: the two Kummer solutions coincide")

    if mu > 0:
        kind = "second_derivative_of_rejected_solution"
        kp = KummerParams(b + 1 - mu, 2 - mu)
        r = 1.0 - mu

        def h(u):
            t = np.exp(-u)
            G, G1, G2 = damped_derivatives(kp, t)
            g2 = t ** (r - 2) * (r * (r - 1) * G + 2 * r * t * G1 + t * t * G2)
            return g2 * g2 * t ** (mu + 1) * t
        predicted = -mu
    else:
        kind = "weighted_mass_of_rejected_solution"
        kp = KummerParams(b, mu)

        def h(u):
            t = np.exp(-u)
            F, _, _ = damped_derivatives(kp, t)
            return F * F * t ** (mu - 1) * t
        predicted = mu

    report = GrowthReport(mu, eps, kind, predicted_exponent=predicted)
    try:
        vals = [integrate_interval(h, 0.0, -math.log(d), spec).value for d in deltas]
    except PoleError as exc:
        report.ill_posed = str(exc)
        return report
    report.cutoffs = deltas
    report.partial_integrals = vals
    report.monotone = all(b2 > b1 for b1, b2 in zip(vals, vals[1:]))
    # slope over the last two decades: log I ~ predicted * log delta
    if len(vals) >= 2 and vals[-1] > 0 and vals[-2] > 0:
        report.fitted_exponent = (math.log(vals[-1]) - math.log(vals[-2])) / (
            math.log(deltas[-1]) - math.log(deltas[-2]))
    return report
