import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sharpquotient.errors import DomainError, NonConvergence
from sharpquotient.quadrature import QuadratureSpec, integrate_halfline, integrate_interval

SCHEMES = [QuadratureSpec(), QuadratureSpec(scheme="expsinh")]


@pytest.mark.parametrize("spec", SCHEMES, ids=["split", "expsinh"])
@pytest.mark.parametrize("h, exact", [
    (lambda x: x**3 * np.exp(-2 * x), 0.375),
    (lambda x: np.exp(-x * x), 0.5 * math.sqrt(math.pi)),
    (lambda x: x**-0.5 * np.exp(-x), math.sqrt(math.pi)),
    (lambda x: x**8 * np.exp(-x / 2), math.factorial(8) * 2.0**9),
    (lambda x: 1.0 / (1.0 + x * x), 0.5 * math.pi),
    (lambda x: x**2.5 * np.exp(-3 * x), math.gamma(3.5) / 3**3.5),
])
def test_known_integrals(spec, h, exact):
    res = integrate_halfline(h, spec)
    assert res.value == pytest.approx(exact, rel=1e-12)
    assert res.err_estimate <= 1e-9 * abs(exact)
    assert res.refinements_used >= 2


@given(st.floats(-0.9, 12.0), st.floats(0.1, 8.0))
def test_gamma_moments_property(p, a):
    res = integrate_halfline(lambda x: x**p * np.exp(-a * x))
    assert res.value == pytest.approx(math.gamma(p + 1) / a ** (p + 1), rel=1e-9)


def test_split_point_does_not_matter():
    h = lambda x: x**1.5 * np.exp(-x) / (1 + x)  # noqa: E731
    vals = [integrate_halfline(h, QuadratureSpec(split=s)).value for s in (0.1, 1.0, 7.0)]
    assert max(vals) - min(vals) <= 1e-12 * abs(vals[0])


def test_vector_valued_integrand():
    def h(x):
        return np.stack([np.exp(-x), x * np.exp(-x), x**2 * np.exp(-x)], axis=1)
    res = integrate_halfline(h)
    np.testing.assert_allclose(res.value, [1.0, 1.0, 2.0], rtol=1e-13)
    assert res.value.shape == (3,)


@pytest.mark.parametrize("h", [lambda x: np.ones_like(x), lambda x: 1.0 / x, lambda x: 1.0 / (1.0 + x)])
def test_divergent_integrals_raise(h):
    with pytest.raises(NonConvergence):
        integrate_halfline(h)


def test_nan_integrand_raises_domain_error():
    with pytest.raises(DomainError):
        integrate_halfline(lambda x: np.where(x > 3.0, np.nan, np.exp(-x)))


def test_interval():
    assert integrate_interval(lambda x: np.log(x), 0.0, 1.0).value == pytest.approx(-1.0, rel=1e-13)
    assert integrate_interval(lambda x: x**-0.5, 0.0, 4.0).value == pytest.approx(4.0, rel=1e-12)
    with pytest.raises(ValueError):
        integrate_interval(lambda x: x, 2.0, 1.0)


def test_refinement_cap():
    spec = QuadratureSpec(max_refinements=1)
    with pytest.raises(NonConvergence):
        integrate_halfline(lambda x: np.exp(-x) * np.cos(40 * x) ** 2, spec)


@pytest.mark.parametrize("kwargs", [{"rel_tol": 0.0}, {"split": -1.0}, {"max_refinements": 0},
                                    {"scheme": "gauss"}])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        QuadratureSpec(**kwargs)
