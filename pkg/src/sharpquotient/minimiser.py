"""Direct minimisation of ``A*B/D^2`` over a finite trial space.

The trial space is spanned by ``x^k exp(-scale*x)``, ``k < K`` (multiplied by
``x^(1-mu)`` when ``mu < 0``).  Two parametrisations of that span are offered:

* ``"laguerre"`` (default): ``L_k(2*scale*x) exp(-scale*x)``, well conditioned;
* ``"monomial"``: ``x^k exp(-scale*x)`` itself, the textbook form.

Gram matrices are computed exactly with generalised Gauss-Laguerre rules
(every integrand is a polynomial times ``x^p exp(-2*scale*x)``) and
cross-checked against the double-exponential quadrature used elsewhere.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar
from scipy.special import eval_genlaguerre, roots_genlaguerre

from .errors import (BranchError, DegenerateDenominator, DivergenceSuspected, NonConvergence,
                     NotConvergedWarning, PrecisionError)
from .extremiser import MU_NEGATIVE, MU_POSITIVE
from .problem import ProblemParams, derive
from .quadrature import QuadratureSpec, integrate_halfline

K_MAX = 24
CROSS_CHECK_TOL = 1e-9
BASIS_KINDS = ("laguerre", "monomial")


@dataclass(frozen=True)
class BasisModel:
    """Trial space description and its Gram matrices.

    ``gram_B`` combines ``int x^(mu+1) f_i' f_j'`` and ``-eps int x^(mu-1) f_i f_j``.
    ``cross_check_error`` is the largest mismatch between the two assembly
    paths, relative to ``sqrt(S_ii S_jj)`` with ``S`` the Gram matrix of the
    positive part of each form.
    """
    K: int
    branch: str
    scale: float
    gram_A: np.ndarray
    gram_B: np.ndarray
    gram_D: np.ndarray
    params: ProblemParams
    kind: str = "laguerre"
    cross_check_error: float | None = None
    condition_D: float = field(default=float("nan"))


class _Parts(NamedTuple):
    """Polynomial factors ``Q_j`` with ``f^(j) = x^(e_j) Q_j(x) exp(-scale x)``."""
    q0: np.ndarray
    q1: np.ndarray
    q2: np.ndarray


def _poly_and_derivs(kind: str, K: int, scale: float, x: np.ndarray):
    n = x.size
    P = np.zeros((n, K))
    P1 = np.zeros((n, K))
    P2 = np.zeros((n, K))
    if kind == "laguerre":
        y = 2 * scale * x
        for k in range(K):
            P[:, k] = eval_genlaguerre(k, 0, y)
            if k >= 1:
                P1[:, k] = -2 * scale * eval_genlaguerre(k - 1, 1, y)
            if k >= 2:
                P2[:, k] = 4 * scale * scale * eval_genlaguerre(k - 2, 2, y)
    else:
        for k in range(K):
            P[:, k] = x**k
            if k >= 1:
                P1[:, k] = k * x ** (k - 1)
            if k >= 2:
                P2[:, k] = k * (k - 1) * x ** (k - 2)
    return P, P1, P2


def _parts(kind: str, K: int, scale: float, mu: float, x: np.ndarray) -> _Parts:
    P, P1, P2 = _poly_and_derivs(kind, K, scale, x)
    s = scale
    d1 = P1 - s * P
    d2 = P2 - 2 * s * P1 + s * s * P
    if mu > 0:
        return _Parts(P, d1, d2)
    r = 1.0 - mu
    X = x[:, None]
    return _Parts(P, r * P + X * d1, r * (r - 1) * P + 2 * r * X * d1 + X * X * d2)


def _exponents(mu: float) -> dict[str, float]:
    """Power of x multiplying ``Q_i Q_j`` in each Gram integrand."""
    if mu > 0:
        return {"A": mu + 1, "B1": mu + 1, "B0": mu - 1, "D": mu}
    return {"A": -mu - 1, "B1": 1 - mu, "B0": 1 - mu, "D": -mu}


_PART_OF = {"A": 2, "B1": 1, "B0": 0, "D": 1}


def _gauss_laguerre_grams(kind, K, scale, mu):
    n = K + 4
    grams = {}
    for key, p in _exponents(mu).items():
        y, w = roots_genlaguerre(n, p)
        x = y / (2 * scale)
        U = _parts(kind, K, scale, mu, x)[_PART_OF[key]]
        grams[key] = (2 * scale) ** (-p - 1) * (U.T * w) @ U
    return grams


def _quadrature_grams(kind, K, scale, mu, spec, norms):
    """Same Gram matrices by double-exponential quadrature.  Columns are
    divided by ``norms[key]`` during integration so every entry is O(1)."""
    iu = np.triu_indices(K)
    m = iu[0].size
    expo = _exponents(mu)
    keys = list(expo)

    def h(x):
        with np.errstate(over="ignore", invalid="ignore"):
            parts = _parts(kind, K, scale, mu, x)
            env = np.exp(-2 * scale * x)
            cols = []
            for key in keys:
                U = parts[_PART_OF[key]] / norms[key]
                w = np.where(env > 0, np.exp(expo[key] * np.log(x)) * env, 0.0)
                prod = U[:, iu[0]] * U[:, iu[1]]
                cols.append(np.where(w[:, None] > 0, prod * w[:, None], 0.0))
        return np.concatenate(cols, axis=1)

    try:
        res = integrate_halfline(h, spec)
    except NonConvergence as exc:
        raise DivergenceSuspected(f"Gram quadrature failed: {exc}") from exc
    vals = np.asarray(res.value)
    grams = {}
    for j, key in enumerate(keys):
        G = np.zeros((K, K))
        G[iu] = vals[j * m:(j + 1) * m]
        grams[key] = (G + np.triu(G, 1).T) * np.outer(norms[key], norms[key])
    return grams


def _relative_mismatch(G1, G2, S):
    d = np.sqrt(np.abs(np.diag(S)))
    denom = np.outer(d, d)
    denom[denom == 0] = 1.0
    return float(np.max(np.abs(G1 - G2) / denom))


def build_basis(params: ProblemParams, K: int, scale: float = 1.0,
                spec: QuadratureSpec = QuadratureSpec(), kind: str = "laguerre",
                cross_check: bool = True) -> BasisModel:
    """Assemble the Gram matrices of A, B and D on the K-dimensional trial space.

    Parameters
    ----------
    params : ProblemParams
        Must satisfy ``mu != 0`` and be admissible.
    K : int
        Basis size, ``1 <= K <= 24``.
    scale : float
        Rate of the exponential envelope.
    spec : QuadratureSpec
        Used for the independent quadrature cross-check.
    kind : {"laguerre", "monomial"}
    cross_check : bool
        Recompute every entry with double-exponential quadrature and require
        agreement to ``1e-9``.

    Raises
    ------
    BranchError
        ``mu == 0``.
    DivergenceSuspected
        The cross-check quadrature does not converge.
    PrecisionError
        The two assembly paths disagree.
    """
    params.check()
    mu, eps = params.mu, params.eps
    if mu == 0:
        raise BranchError("no trial family for mu = 0")
    if not 1 <= K <= K_MAX:
        raise ValueError(f"K must lie in [1, {K_MAX}], got {K}")
    if not scale > 0:
        raise ValueError("scale must be positive")
    if kind not in BASIS_KINDS:
        raise ValueError(f"unknown basis kind {kind!r}")

    g = _gauss_laguerre_grams(kind, K, scale, mu)
    A = g["A"]
    B = g["B1"] - eps * g["B0"]
    D = g["D"]
    err = None
    if cross_check:
        norms = {k: np.sqrt(np.maximum(np.abs(np.diag(v)), 1e-300)) for k, v in g.items()}
        q = _quadrature_grams(kind, K, scale, mu, replace(spec, abs_floor=max(spec.abs_floor, 1e-13)), norms)
        SB = g["B1"] + abs(eps) * g["B0"]
        err = max(_relative_mismatch(A, q["A"], A),
                  _relative_mismatch(B, q["B1"] - eps * q["B0"], SB),
                  _relative_mismatch(D, q["D"], D))
        if err > CROSS_CHECK_TOL:
            raise PrecisionError(f"Gram cross-check mismatch {err:.3g} exceeds {CROSS_CHECK_TOL}")
    sym = lambda M: 0.5 * (M + M.T)  # noqa: E731
    A, B, D = sym(A), sym(B), sym(D)
    branch = MU_POSITIVE if mu > 0 else MU_NEGATIVE
    return BasisModel(K, branch, float(scale), A, B, D, params, kind, err, float(np.linalg.cond(D)))


# ---------------------------------------------------------------------------
# objective

def quotient_value(model: BasisModel, c) -> float:
    """``F(c) = (c'Ac)(c'Bc)/(c'Dc)^2``."""
    c = np.asarray(c, dtype=float)
    a, b, d = c @ model.gram_A @ c, c @ model.gram_B @ c, c @ model.gram_D @ c
    return float(a * b / (d * d))


def quotient_gradient(model: BasisModel, c) -> np.ndarray:
    """Gradient of :func:`quotient_value` in the coefficients (not projected)."""
    c = np.asarray(c, dtype=float)
    Ac, Bc, Dc = model.gram_A @ c, model.gram_B @ c, model.gram_D @ c
    a, b, d = c @ Ac, c @ Bc, c @ Dc
    return 2 * (b * Ac + a * Bc) / d**2 - 4 * a * b * Dc / d**3


@dataclass
class MinimiseOptions:
    restarts: int = 8
    max_iters: int = 20000
    grad_tol: float = 1e-6
    seed: int = 42


@dataclass
class MinimisationResult:
    """Best value found and where.

    ``grad_norm`` is the norm of the gradient of ``log F`` on the sphere
    ``c'Dc = 1`` (whitened coordinates), which is scale free.
    """
    value: float
    coefficients: np.ndarray
    restarts_used: int
    converged: bool
    grad_norm: float = float("nan")
    iterations: int = 0


class _Whitened:
    """``D = L L'``; in ``y = L'c`` the constraint is ``|y| = 1``."""

    def __init__(self, model: BasisModel):
        try:
            self.L = np.linalg.cholesky(model.gram_D)
        except np.linalg.LinAlgError as exc:
            raise DegenerateDenominator("Gram matrix of D is not positive definite; reduce K") from exc
        solve = lambda M: scipy.linalg.solve_triangular(self.L, M, lower=True)  # noqa: E731
        At = solve(solve(model.gram_A).T)
        Bt = solve(solve(model.gram_B).T)
        self.A = 0.5 * (At + At.T)
        self.B = 0.5 * (Bt + Bt.T)

    def to_c(self, y):
        return scipy.linalg.solve_triangular(self.L.T, y, lower=False)

    def to_y(self, c):
        return self.L.T @ c

    def log_f(self, y):
        a, b = y @ self.A @ y, y @ self.B @ y
        if not (a > 0 and b > 0):
            raise PrecisionError(f"nonpositive form on the trial space (A={a:.3g}, B={b:.3g})")
        return math.log(a) + math.log(b), a, b

    def grad(self, y, a, b):
        # gradient of log a + log b - 2 log|y|^2, already tangent at |y| = 1
        return 2 * (self.A @ y) / a + 2 * (self.B @ y) / b - 4 * y

    def direction(self, y, a, b, g):
        """Search direction in the tangent space of the sphere at ``y``.

        The metric is the Riemannian Hessian of ``log F`` when that is
        positive definite on the tangent space (Newton step).  Otherwise it
        is ``M = A/a + B/b``: at step length 1/2 that is one inverse-iteration
        step on ``M y = 2 y``, whose normalised fixed points are the critical
        points.
        """
        Ay, By = self.A @ y, self.B @ y
        M = self.A / a + self.B / b
        H = 2 * M - 4 * np.outer(Ay, Ay) / a**2 - 4 * np.outer(By, By) / b**2
        P = np.eye(y.size) - np.outer(y, y)
        H = P @ H @ P - 4 * P + np.outer(y, y)
        try:
            p = scipy.linalg.solve(0.5 * (H + H.T), g, assume_a="pos")
            if g @ p > 0:
                return p - (y @ p) * y
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            pass
        p = scipy.linalg.solve(M, g, assume_a="pos")
        return p - (y @ p) * y


def _descend(w: _Whitened, y, max_iters, grad_tol):
    y = y / np.linalg.norm(y)
    lf, a, b = w.log_f(y)
    g = w.grad(y, a, b)
    gn = np.linalg.norm(g)
    it = 0
    while gn > grad_tol and it < max_iters:
        it += 1
        p = w.direction(y, a, b, g)
        slope = g @ p
        t = 1.0
        while True:
            z = y - t * p
            z /= np.linalg.norm(z)
            lz, az, bz = w.log_f(z)
            if lz <= lf - 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-20:
                return y, lf, gn, it
        y, lf, a, b = z, lz, az, bz
        g = w.grad(y, a, b)
        gn = np.linalg.norm(g)
    return y, lf, gn, it


def minimise_quotient(model: BasisModel, opts: MinimiseOptions = MinimiseOptions(),
                      initial=None) -> MinimisationResult:
    """Minimise F over ``c != 0`` by projected gradient descent on ``c'Dc = 1``.

    Random starts are Gaussian directions normalised in the D metric, drawn
    from ``numpy.random.default_rng(opts.seed)``.  ``initial`` (coefficients,
    possibly shorter than K and then zero padded) is tried before them.

    Warns
    -----
    NotConvergedWarning
        No start reached ``grad_tol`` within ``max_iters``; the best value
        is still returned with ``converged=False``.
    """
    w = _Whitened(model)
    rng = np.random.default_rng(opts.seed)
    starts = []
    if initial is not None:
        c0 = np.zeros(model.K)
        c0[:len(initial)] = initial
        starts.append(w.to_y(c0))
    starts.extend(rng.standard_normal(model.K) for _ in range(opts.restarts))
    if not starts:
        raise ValueError("need at least one start")

    best = None
    total_iters = 0
    any_converged = False
    for y0 in starts:
        y, lf, gn, it = _descend(w, np.asarray(y0, dtype=float), opts.max_iters, opts.grad_tol)
        total_iters += it
        any_converged |= gn <= opts.grad_tol
        if best is None or lf < best[1]:
            best = (y, lf, gn)
    y, _, gn = best
    c = w.to_c(y)
    converged = bool(any_converged)
    if not converged:
        warnings.warn(f"no restart reached grad_tol={opts.grad_tol:g} in {opts.max_iters} iterations "
                      f"(best gradient {gn:.3g})", NotConvergedWarning, stacklevel=2)
    return MinimisationResult(quotient_value(model, c), c, len(starts), converged, float(gn), total_iters)


def eigen_certificate(model: BasisModel) -> float:
    """Global minimum of F on the trial space, by a route independent of descent.

    Since ``min_alpha (alpha*b + a/alpha) = 2 sqrt(ab)`` for ``a, b > 0``,
    ``min F = (1/4) (min_alpha lambda_min(alpha B + A/alpha; D))^2``; the
    outer minimum is one-dimensional.
    """
    A, B, D = model.gram_A, model.gram_B, model.gram_D

    def h(la):
        al = math.exp(la)
        return scipy.linalg.eigh(al * B + A / al, D, eigvals_only=True, subset_by_index=[0, 0])[0]

    grid = np.linspace(-25.0, 25.0, 201)
    vals = [h(v) for v in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    r = minimize_scalar(h, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    m = min(r.fun, vals[i])
    return 0.25 * m * m


class SweepRow(NamedTuple):
    K: int
    value: float
    converged: bool
    certificate: float


def convergence_sweep(params: ProblemParams, K_list, scale: float = 1.0,
                      spec: QuadratureSpec = QuadratureSpec(),
                      opts: MinimiseOptions = MinimiseOptions(), kind: str = "laguerre",
                      cross_check: bool = True) -> list[SweepRow]:
    """Minimum over nested trial spaces, one row per K.

    Each K after the first also starts from the previous optimum (the spans
    are nested), so values never increase along an increasing ``K_list``.
    """
    rows = []
    prev = None
    for K in K_list:
        model = build_basis(params, K, scale, spec, kind, cross_check)
        init = prev if prev is not None and len(prev) <= K else None
        res = minimise_quotient(model, opts, init)
        rows.append(SweepRow(K, res.value, res.converged, eigen_certificate(model)))
        prev = res.coefficients
    return rows


def sharp_gap(params: ProblemParams, value: float) -> float:
    """``value - sharp_const``; nonnegative up to rounding for any trial function."""
    return value - derive(params).sharp_const
