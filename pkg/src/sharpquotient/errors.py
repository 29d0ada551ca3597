"""Exception and warning types raised across the package."""


class AdmissibilityError(ValueError):
    """Parameters violate ``eps <= mu**2 / 4``."""


class PoleError(ArithmeticError):
    """Kummer series hits a pole (nonpositive integer denominator parameter)."""


class PrecisionError(ArithmeticError):
    """A computed value would carry an unacceptable rounding error."""


class NonConvergence(ArithmeticError):
    """Quadrature refinement did not settle, or the tail could not be resolved."""


class DomainError(ValueError):
    """An integrand or probe returned a non-finite value."""


class DivergenceSuspected(ArithmeticError):
    """A constituent integral failed to converge; the function is likely outside the space."""


class DegenerateDenominator(ZeroDivisionError):
    """A denominator is zero within its quadrature error."""


class BranchError(ValueError):
    """Extremiser branch does not match the sign of ``mu`` (or ``mu == 0``)."""


class MembershipWarning(UserWarning):
    """The constructed function is probably not in the weighted energy space."""


class NonCanonicalWarning(UserWarning):
    """``b`` is neither root of ``b*(mu - b) = eps``."""


class NotConvergedWarning(UserWarning):
    """Every minimiser restart stopped at ``max_iters`` with a large gradient."""
