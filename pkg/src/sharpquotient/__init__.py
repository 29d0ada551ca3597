"""Numerical verification of a sharp weighted interpolation inequality on the half-line.

The quotient ``A*B/D^2`` with

* ``A = int (f'')^2 x^(mu+1)``
* ``B = int (x^2 f'^2 - eps f^2) x^(mu-1)``
* ``D = int f'^2 x^mu``

is bounded below by ``(sqrt(mu^2 - 4 eps) + 1)^2 / 4`` for ``eps <= mu^2/4``.
"""
__version__ = "0.1.0"

from .errors import (AdmissibilityError, BranchError, DegenerateDenominator, DivergenceSuspected,
                     DomainError, MembershipWarning, NonCanonicalWarning, NonConvergence,
                     NotConvergedWarning, PoleError, PrecisionError)
from .problem import DerivedParams, ProblemParams, derive, sharp_constant

__all__ = [
    "AdmissibilityError", "BranchError", "DegenerateDenominator", "DerivedParams",
    "DivergenceSuspected", "DomainError", "MembershipWarning", "NonCanonicalWarning",
    "NonConvergence", "NotConvergedWarning", "PoleError", "PrecisionError", "ProblemParams",
    "derive", "sharp_constant",
]
