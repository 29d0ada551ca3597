"""Problem parameters ``(mu, eps)`` and the quantities derived from them."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import AdmissibilityError

# |eps - mu^2/4| below this (times max(1, mu^2)) is the boundary case s = 0
BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class ProblemParams:
    mu: float
    eps: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.eps)):
            raise ValueError(f"non-finite parameters mu={self.mu!r}, eps={self.eps!r}")

    @property
    def eps_max(self) -> float:
        return 0.25 * self.mu * self.mu

    def is_boundary(self) -> bool:
        return abs(self.eps - self.eps_max) <= BOUNDARY_RTOL * max(1.0, self.mu * self.mu)

    def check(self) -> "ProblemParams":
        if self.eps > self.eps_max and not self.is_boundary():
            raise AdmissibilityError(
                f"eps={self.eps!r} exceeds mu^2/4={self.eps_max!r} for mu={self.mu!r}"
            )
        return self


@dataclass(frozen=True)
class DerivedParams:
    s: float
    b_minus: float
    b_plus: float
    sharp_const: float

    @property
    def linear_coeff_minus(self) -> float:
        """Coefficient ``mu + 1 - 2*b_minus`` of the linear term in g(alpha)."""
        return self.s + 1.0

    @property
    def linear_coeff_plus(self) -> float:
        return 1.0 - self.s


def discriminant_root(params: ProblemParams) -> float:
    """``sqrt(mu^2 - 4 eps)``, exactly zero on the boundary."""
    params.check()
    if params.is_boundary():
        return 0.0
    return math.sqrt(max(0.0, params.mu * params.mu - 4.0 * params.eps))


def sharp_constant(params: ProblemParams) -> float:
    s = discriminant_root(params)
    return 0.25 * (s + 1.0) ** 2


def derive(params: ProblemParams) -> DerivedParams:
    """Roots of ``b^2 - mu*b + eps = 0`` and the sharp constant ``(s+1)^2/4``.

    The root that would suffer cancellation is recovered from the product
    ``b_minus * b_plus = eps`` so both satisfy Vieta's relations to rounding.

    Raises
    ------
    AdmissibilityError
        If ``eps > mu^2/4``.
    """
    s = discriminant_root(params)
    mu, eps = params.mu, params.eps
    if s == 0.0:
        b_minus = b_plus = 0.5 * mu
    elif mu > 0:
        b_plus = 0.5 * (mu + s)
        b_minus = eps / b_plus
    elif mu < 0:
        b_minus = 0.5 * (mu - s)
        b_plus = eps / b_minus
    else:
        b_minus, b_plus = -0.5 * s, 0.5 * s
    return DerivedParams(s=s, b_minus=b_minus, b_plus=b_plus, sharp_const=0.25 * (s + 1.0) ** 2)
