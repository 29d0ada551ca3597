import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import PolyExp, forms as exact_forms, residual as exact_residual
from sharpquotient.errors import DegenerateDenominator, DivergenceSuspected, NonCanonicalWarning
from sharpquotient.forms import (FunctionTriple, ResidualCoefficients, builtin_functions,
                                 expanded_residual, expansion_integrals, flaw_demo, flaw_witness,
                                 form_values, from_expression, g_alpha, identity_check, limit_probe,
                                 min_power, norm_prime_sq, poly_exp, quotient, residual_lhs)
from sharpquotient.problem import ProblemParams, derive

# (coeffs, rate, power, mu, eps) -> A, B, D, quotient from exact Gamma moments.
GAMMA_CASES = [
    (([1.0], 1.0, 0), (2.0, 0.0), (0.375, 0.375, 0.25, 2.25)),
    (([1.0], 1.0, 0), (3.0, 2.0), (0.75, 0.25, 0.375, 4 / 3)),
    (([1.0, 1.0], 1.0, 0), (0.5, -1.0),
     (0.16156002551332620426, 2.6290222333532173238, 0.29374550093332037138, 4.9225)),
    (([1.0, -0.5, 0.25], 0.5, 2), (0.0, 0.0), (41.25, 417.0, 56.0, 5.4850924744897959184)),
    (([0.3, 1.0, 0.0, -0.2], 2.0, 2), (-1.0, 0.25),
     (0.27808593749999999874, 0.045249023437500000307, 0.075087890624999998383, 2.2317648325026348373)),
    (([1.0], 1.0, 3), (-2.5, 1.5625),
     (3.447837817204847859, 0.25702731331665532495, 0.86654922775329509556, 1.1801565642056880207)),
    (([1.0, 1.0], 1.0, 2), (-1.0, 0.0), (2.625, 2.125, 1.875, 1.5866666666666666667)),
]


@pytest.mark.parametrize("fn, mu_eps, expected", GAMMA_CASES)
def test_forms_against_gamma_closed_forms(fn, mu_eps, expected):
    coeffs, rate, power = fn
    p = ProblemParams(*mu_eps)
    v = form_values(poly_exp(coeffs, rate, power), p)
    A, B, D, Q = expected
    assert v.A == pytest.approx(A, rel=1e-12)
    assert v.B == pytest.approx(B, rel=1e-12)
    assert v.D == pytest.approx(D, rel=1e-12)
    assert quotient(poly_exp(coeffs, rate, power), p, values=v) == pytest.approx(Q, rel=1e-12)


@pytest.mark.parametrize("fn, mu, abg, expected", [
    (([1.0], 1.0, 0), 2.0, (1.0, 2.0, 2.0), 0.0),
    (([1.0, 1.0], 1.0, 0), 3.0, (-0.7, 1.5, 0.4), 6.6062499999999995781),
    (([0.3, 1.0, 0.0, -0.2], 2.0, 2), -1.0, (2.0, -1.0, 0.5), 0.14072753906250000561),
])
def test_residual_against_gamma_closed_forms(fn, mu, abg, expected):
    f = poly_exp(*fn)
    got = residual_lhs(f, ProblemParams(mu, 0.0), ResidualCoefficients(*abg))
    assert got == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_combined_b_integrand_equals_difference_of_parts():
    f = poly_exp([1.0, 2.0], 1.5)
    p = ProblemParams(2.0, 0.7)
    t = expansion_integrals(f, p)
    assert form_values(f, p).B == pytest.approx(t["x2f1sq"] - 0.7 * t["fsq"], rel=1e-12)


random_fn = st.tuples(
    st.lists(st.floats(-2.0, 2.0), min_size=1, max_size=4).filter(lambda c: abs(c[0]) > 0.05),
    st.floats(0.3, 3.0),
)


@given(random_fn, st.floats(0.5, 6.0), st.floats(0.0, 1.0), st.floats(-3.0, 3.0), st.floats(-3.0, 3.0),
       st.floats(-3.0, 3.0))
def test_expansion_matches_square_property(fn, mu, frac, al, be, ga):
    coeffs, rate = fn
    p = ProblemParams(mu, frac * mu * mu / 4)
    f = poly_exp(coeffs, rate)
    c = ResidualCoefficients(al, be, ga)
    lhs = residual_lhs(f, p, c)
    rhs = expanded_residual(expansion_integrals(f, p), p, c)
    ref = float(exact_residual(PolyExp.from_list(coeffs, rate), mu, al, be, ga))
    assert lhs == pytest.approx(ref, rel=1e-9, abs=1e-12)
    assert rhs == pytest.approx(ref, rel=1e-7, abs=1e-9 * (1 + abs(al) + abs(be) + abs(ga)) ** 2)


@given(random_fn, st.sampled_from([-1.0, 0.0, 0.7, 2.0, 4.5]), st.floats(0.0, 1.0),
       st.floats(-3.0, 3.0), st.booleans())
def test_identity_property(fn, mu, frac, alpha, use_plus):
    coeffs, rate = fn
    eps = frac * mu * mu / 4 if mu else -frac
    p = ProblemParams(mu, eps)
    d = derive(p)
    b = d.b_plus if use_plus else d.b_minus
    f = poly_exp(coeffs, rate, min_power(mu))
    ic = identity_check(f, p, alpha, b)
    # measured against the size of the terms of g: at an equality case (eps = 0,
    # b = 0, f = e^-x, alpha = 1) both sides are 0 and only rounding is left
    assert ic.scaled_gap <= 1e-8


@given(random_fn, st.floats(0.5, 6.0), st.floats(0.0, 1.0), st.sampled_from([0.5, 2.0, 3.7]))
def test_scale_invariance_property(fn, mu, frac, c):
    coeffs, rate = fn
    p = ProblemParams(mu, frac * mu * mu / 4)
    f = poly_exp(coeffs, rate)
    assert quotient(f.rescaled(c), p) == pytest.approx(quotient(f, p), rel=1e-9)


@given(random_fn, st.floats(0.5, 6.0), st.floats(0.0, 1.0))
def test_inequality_property(fn, mu, frac):
    coeffs, rate = fn
    p = ProblemParams(mu, frac * mu * mu / 4)
    assert quotient(poly_exp(coeffs, rate), p) >= derive(p).sharp_const * (1 - 1e-10)


@given(random_fn, st.floats(0.5, 6.0), st.floats(-5.0, 1.0))
def test_forms_against_oracle_property(fn, mu, frac):
    coeffs, rate = fn
    eps = frac * mu * mu / 4
    A, B, D = (float(v) for v in exact_forms(PolyExp.from_list(coeffs, rate), mu, eps))
    v = form_values(poly_exp(coeffs, rate), ProblemParams(mu, eps))
    assert (v.A, v.D) == pytest.approx((A, D), rel=1e-10)
    assert v.B == pytest.approx(B, rel=1e-9)


def test_amplitude_does_not_change_quotient():
    f = poly_exp([1.0, 0.5], 1.0)
    p = ProblemParams(1.5, 0.2)
    assert quotient(f.scaled(-3.0), p) == pytest.approx(quotient(f, p), rel=1e-13)


def test_g_alpha_closed_form():
    f = poly_exp([1.0])
    p = ProblemParams(3.0, 2.0)
    # alpha^2 B - alpha (mu + 1 - 2b) D + A with A = 3/4, B = 1/4, D = 3/8, b = 1
    assert g_alpha(f, p, 1.0, 1.0) == pytest.approx(0.25, rel=1e-13)
    ic = identity_check(f, p, 1.0, 1.0)
    assert ic.lhs == pytest.approx(0.25, rel=1e-12)


def test_g_alpha_warns_for_other_b():
    with pytest.warns(NonCanonicalWarning):
        g_alpha(poly_exp([1.0]), ProblemParams(3.0, 2.0), 1.0, 1.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        g_alpha(poly_exp([1.0]), ProblemParams(3.0, 2.0), 1.0, 2.0)


def test_identity_relative_gap_floor():
    # e^-x is the equality case for mu = 2, eps = 0 at alpha = 1: both sides vanish
    ic = identity_check(poly_exp([1.0]), ProblemParams(2.0, 0.0), 1.0, 0.0)
    assert abs(ic.lhs) < 1e-15 and abs(ic.g) < 1e-15
    assert ic.scaled_gap < 1e-14


def test_zero_function_has_degenerate_denominator():
    zero = FunctionTriple(lambda x: (0 * x, 0 * x, 0 * x), "zero")
    with pytest.raises(DegenerateDenominator):
        quotient(zero, ProblemParams(1.0, 0.0))


@pytest.mark.parametrize("fn", [
    lambda x: (np.ones_like(x), 0 * x, 0 * x),
    lambda x: (1 / (1 + x), -1 / (1 + x) ** 2, 2 / (1 + x) ** 3),
])
def test_functions_outside_the_space(fn):
    with pytest.raises(DivergenceSuspected), np.errstate(over="ignore"):
        form_values(FunctionTriple(fn), ProblemParams(2.0, 0.5))


@pytest.mark.parametrize("mu", [-2.5, -1.0, 0.0, 0.5, 3.0])
def test_builtin_functions_are_admissible(mu):
    p = ProblemParams(mu, 0.0 if mu else -0.5)
    for f in builtin_functions(mu):
        v = form_values(f, p)
        assert v.D > 0 and v.A > 0 and np.isfinite(v.norm_sq)
        assert f.consistency_error([0.3, 1.0, 4.0]) < 1e-8


def test_primed_norm_dominates_plain_parts():
    f = poly_exp([1.0, 0.3], 1.0)
    p = ProblemParams(1.0, 0.0)
    v = form_values(f, p)
    assert norm_prime_sq(f, p) > v.A


def test_from_expression():
    f = from_expression("x**2*exp(-x)")
    v = form_values(f, ProblemParams(2.0, 0.0))
    ref = exact_forms(PolyExp({2: 1}, 1), 2, 0)
    assert (v.A, v.B, v.D) == pytest.approx([float(r) for r in ref], rel=1e-12)
    with pytest.raises(ValueError):
        from_expression("x*y")
    with pytest.raises(ValueError):
        from_expression("exp(")


def test_limit_probe_closed_form():
    t = limit_probe(poly_exp([1.0]), ProblemParams(2.0, 0.0), [1e-6, 1.0])
    # f = e^-x: G1 = f'^2 x^3, G2 = f'^2 x^2, G3 = f^2 x^2
    e = np.exp(-2 * t.x)
    np.testing.assert_allclose(t.G1, e * t.x**3, rtol=1e-13)
    np.testing.assert_allclose(t.G2, e * t.x**2, rtol=1e-13)
    np.testing.assert_allclose(t.G3, e * t.x**2, rtol=1e-13)


def test_flaw_witness_separates_the_norms():
    demo = flaw_demo()
    primed_steps = np.diff(demo.primed_terms)
    missing_steps = np.diff(demo.missing_term)
    # the primed terms converge: increments shrink geometrically
    assert np.all(primed_steps > 0) and primed_steps[-1] < 1e-4
    assert demo.primed_terms[-1] == pytest.approx(0.6222, abs=2e-4)
    # the missing term keeps growing like log log(1/delta)
    assert np.all(missing_steps > 0)
    loglog = np.diff(np.log(np.log(1 / demo.deltas)))
    assert missing_steps[-1] / loglog[-1] == pytest.approx(1.0, abs=0.1)
    assert flaw_witness().consistency_error([0.01, 0.5, 3.0]) < 1e-5


def test_oracle_self_check():
    # the Gamma oracle reproduces one hand-computed value: int x^2 e^-2x = 1/4
    assert mp.almosteq(exact_forms(PolyExp({0: 1}, 1), 2, 0)[2], mp.mpf(1) / 4)
