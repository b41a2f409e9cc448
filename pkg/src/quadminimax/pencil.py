"""Affine matrix pencils for the intersection of two quadratic forms.

For forms ``f_i, f_j`` the Lagrangian ``f_i - lambda (f_i - f_j)`` is stationary
where ``M(lambda) beta = C(lambda)`` with

    M(lambda) = A_i - lambda (A_i - A_j),   C(lambda) = b_i - lambda (b_i - b_j)

(the sign in front of lambda flips when ``f_i`` has non-positive weights).
Substituting ``beta(lambda) = M^{-1} C`` into ``g = f_i - f_j`` and clearing
the denominator gives the polynomial ``det(M)^2 g(beta(lambda))`` whose real
roots parameterize the candidate intersection points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import poly
from .errors import (DegenerateInstance, DimensionMismatch, IdenticalForms,
                     NearSingular, TooManySingularNodes)
from .poly import Polynomial
from .risk import TAU_ACTIVE, QuadraticForm, SignClass, eval_form, gradient

TAU_SING = 1e-10
TAU_LIN = 1e-7
TAU_GAP = 1e-7


@dataclass(frozen=True)
class MatrixPencil:
    M0: np.ndarray
    M1: np.ndarray
    C0: np.ndarray
    C1: np.ndarray
    source: tuple = (0, 1)
    sign_class: SignClass = SignClass.NON_NEGATIVE

    @property
    def p(self) -> int:
        return self.C0.size

    @property
    def sigma(self) -> int:
        """Coefficient of ``lambda (A_i - A_j)`` in ``M(lambda)``."""
        return -1 if self.sign_class is SignClass.NON_NEGATIVE else 1

    def M(self, lam: float) -> np.ndarray:
        return self.M0 + lam * self.M1

    def C(self, lam: float) -> np.ndarray:
        return self.C0 + lam * self.C1

    def radius(self) -> float:
        """Natural lambda scale: where ``lambda M1`` becomes comparable to ``M0``."""
        n1 = np.linalg.norm(self.M1)
        if n1 == 0.0:
            return 1.0
        return float(np.clip(np.linalg.norm(self.M0) / n1, 1.0, 1e3))


def build_pencil(qf_i: QuadraticForm, qf_j: QuadraticForm, i: int = 0,
                 j: int = 1) -> MatrixPencil:
    if qf_i.p != qf_j.p:
        raise DimensionMismatch("forms have different dimensions")
    sigma = -1.0 if qf_i.sign_class is SignClass.NON_NEGATIVE else 1.0
    dA = qf_i.A - qf_j.A
    db = qf_i.b - qf_j.b
    return MatrixPencil(M0=qf_i.A.copy(), M1=sigma * dA, C0=qf_i.b.copy(), C1=sigma * db,
                        source=(i, j), sign_class=qf_i.sign_class)


def det_poly(pencil: MatrixPencil) -> Polynomial:
    """``lambda -> det(M0 + lambda M1)`` by interpolation at p+1 Chebyshev nodes."""
    p = pencil.p
    nodes = poly.chebyshev_nodes(p + 1, pencil.radius())
    vals = [np.linalg.det(pencil.M(x)) for x in nodes]
    return poly.interpolate_poly(nodes, vals, p)


def singularity_guard(M: np.ndarray, tau: float = TAU_SING) -> bool:
    """True when ``|det M| > tau * ||M||^p`` (Frobenius norm)."""
    p = M.shape[0]
    nrm = np.linalg.norm(M)
    if nrm == 0.0:
        return False
    sign, logdet = np.linalg.slogdet(M)
    return sign != 0 and logdet > np.log(tau) + p * np.log(nrm)


def beta_of_lambda(pencil: MatrixPencil, lam: float, tau: float = TAU_SING) -> np.ndarray:
    M = pencil.M(lam)
    if not singularity_guard(M, tau):
        raise NearSingular(lam)
    return np.linalg.solve(M, pencil.C(lam))


def ptilde_value(pencil: MatrixPencil, qf_i: QuadraticForm, qf_j: QuadraticForm,
                 lam: float, tau: float = TAU_SING) -> float:
    """Direct evaluation of ``det(M(lambda))^2 g(beta(lambda))``."""
    beta = beta_of_lambda(pencil, lam, tau)
    det = np.linalg.det(pencil.M(lam))
    return det * det * (eval_form(qf_i, beta) - eval_form(qf_j, beta))


def forms_identical(qf_i: QuadraticForm, qf_j: QuadraticForm, rtol: float = 1e-12) -> bool:
    scale = 1.0 + max(np.abs(qf_i.A).max(), np.abs(qf_i.b).max(), abs(qf_i.c))
    return (np.abs(qf_i.A - qf_j.A).max() <= rtol * scale
            and np.abs(qf_i.b - qf_j.b).max() <= rtol * scale
            and abs(qf_i.c - qf_j.c) <= rtol * scale)


def forms_proportional(qf_i: QuadraticForm, qf_j: QuadraticForm, rtol: float = 1e-10) -> bool:
    """``(A_j, b_j) = t (A_i, b_i)`` for a scalar t: the forms share their level sets."""
    u = np.concatenate([qf_i.A.ravel(), qf_i.b])
    v = np.concatenate([qf_j.A.ravel(), qf_j.b])
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return True
    return nu * nv - abs(float(u @ v)) <= rtol * nu * nv


def _scalar_crossings(qf_i: QuadraticForm, qf_j: QuadraticForm) -> list:
    """Real solutions of ``g(beta) = 0`` for p = 1."""
    a = float(qf_i.A[0, 0] - qf_j.A[0, 0])
    b = float(qf_i.b[0] - qf_j.b[0])
    c = qf_i.c - qf_j.c
    P = Polynomial([c, -2.0 * b, a]).trim(1e-14)
    if P.degree < 1:
        return []
    return [np.array([r]) for r in poly.real_companion_roots(P)]


def gap_changes_sign(qf_i: QuadraticForm, qf_j: QuadraticForm, rtol: float = 1e-12) -> bool:
    """Whether ``g = f_i - f_j`` takes both signs on R^p (so ``{g = 0}`` separates)."""
    D = qf_i.A - qf_j.A
    d = qf_i.b - qf_j.b
    e = qf_i.c - qf_j.c
    scale = 1.0 + np.abs(D).max() + np.abs(d).max() + abs(e)
    evals, evecs = np.linalg.eigh(D)
    tol = rtol * scale
    if evals.max() > tol and evals.min() < -tol:
        return True
    sign = 1.0 if evals.max() > tol else (-1.0 if evals.min() < -tol else 0.0)
    dd = evecs.T @ d
    null = np.abs(evals) <= tol
    if np.any(np.abs(dd[null]) > tol):
        return True  # linear part along the kernel: unbounded both ways
    if sign == 0.0:
        return False  # constant gap
    # definite on the range: the extreme value is e - d^T D^+ d
    ext = e - float(np.sum(dd[~null] ** 2 / evals[~null]))
    return sign * ext < -tol


def ptilde(pencil: MatrixPencil, qf_i: QuadraticForm, qf_j: QuadraticForm,
           tau: float = TAU_SING, eps_trim: float = poly.EPS_TRIM) -> Polynomial:
    """Interpolate ``det(M)^2 g(beta(lambda))`` with degree bound ``2p + 2``.

    Nodes where ``M(lambda)`` trips the singularity guard are skipped; if the
    first 2p+3 Chebyshev nodes are not all clean a 10x oversampled node set is
    used instead.
    """
    if forms_identical(qf_i, qf_j):
        raise IdenticalForms(f"forms {pencil.source} coincide; their gap vanishes identically")
    p = pencil.p
    bound = 2 * p + 2
    rho = pencil.radius()

    def sample(nodes):
        xs, vs, scales = [], [], []
        for x in nodes:
            try:
                beta = beta_of_lambda(pencil, x, tau)
            except NearSingular:
                continue
            det = np.linalg.det(pencil.M(x))
            fi, fj = eval_form(qf_i, beta), eval_form(qf_j, beta)
            xs.append(x)
            vs.append(det * det * (fi - fj))
            scales.append(det * det * (1.0 + abs(fi) + abs(fj)))
        return np.array(xs), np.array(vs), np.array(scales)

    xs, vs, scales = sample(poly.chebyshev_nodes(bound + 1, rho))
    if xs.size < bound + 1:
        xs, vs, scales = sample(poly.chebyshev_nodes(10 * (bound + 1), rho))
        if xs.size < bound + 1:
            raise TooManySingularNodes(
                f"only {xs.size} clean nodes for degree bound {bound}")
    if np.all(np.abs(vs) <= 1e-11 * scales):
        raise DegenerateInstance(
            f"gap of forms {pencil.source} vanishes along the whole stationary curve")
    return poly.interpolate_poly(xs, vs, bound, eps_trim)


@dataclass
class Tolerances:
    tau_active: float = TAU_ACTIVE
    tau_sing: float = TAU_SING
    tau_lin: float = TAU_LIN
    tau_gap: float = TAU_GAP
    eps_trim: float = poly.EPS_TRIM

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class IntersectionSolveResult:
    """Stationary points of ``f_i`` on ``{f_i = f_j}``.

    ``lambdas``/``betas`` hold every root that passed the residual and gap
    checks; ``argmin`` indexes those minimizing ``f_i`` among them.
    """

    pair: tuple
    lambdas: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    argmin: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    ptilde: Optional[Polynomial] = None
    root_search: Optional[poly.RootSearch] = None
    flags: list = field(default_factory=list)

    @property
    def argmin_betas(self) -> list:
        return [self.betas[k] for k in self.argmin]

    def to_dict(self) -> dict:
        return {
            "pair": [self.pair[0] + 1, self.pair[1] + 1],
            "ptilde": None if self.ptilde is None else self.ptilde.coeffs.tolist(),
            "root_method": None if self.root_search is None else self.root_search.method,
            "root_notes": [] if self.root_search is None else list(self.root_search.notes),
            "lambdas": [None if math.isnan(x) else float(x) for x in self.lambdas],
            "betas": [b.tolist() for b in self.betas],
            "argmin": list(self.argmin),
            "rejected": [{"lambda": float(l), "reason": r} for l, r in self.rejected],
            "residuals": list(self.residuals),
            "flags": list(self.flags),
        }


def stationarity_residual(qf_i: QuadraticForm, qf_j: QuadraticForm, lam: float,
                          beta: np.ndarray) -> float:
    """``||grad f_i + sigma lambda grad g|| / (1 + ||grad f_i||)`` for the pencil sign sigma."""
    sigma = -1.0 if qf_i.sign_class is SignClass.NON_NEGATIVE else 1.0
    gi = gradient(qf_i, beta)
    gg = gi - gradient(qf_j, beta)
    return float(np.linalg.norm(gi + sigma * lam * gg) / (1.0 + np.linalg.norm(gi)))


def polish_root(h, lam: float, room: float) -> float:
    """Refine a root of P~ on the gap ``h(lambda) = g(beta(lambda))`` itself.

    Near a pole of ``beta(lambda)`` the interpolated P~ fixes lambda only to about
    1e-8 while ``beta`` moves by much more; Brent's method on ``h`` in the
    smallest bracket ``lambda +- w`` (``w <= room``) showing a sign change
    removes that error.  Returns ``lam`` unchanged when no bracket is found.
    """
    try:
        h0 = h(lam)
    except NearSingular:
        return lam
    if h0 == 0.0:
        return lam
    w = 1e-13 * (1.0 + abs(lam))
    while w <= room:
        try:
            lo, hi = h(lam - w), h(lam + w)
        except NearSingular:
            return lam
        for a, fa, b, fb in ((lam - w, lo, lam, h0), (lam, h0, lam + w, hi)):
            if fa * fb < 0.0:
                return float(brentq(h, a, b, xtol=1e-16, rtol=1e-15, maxiter=200))
        w *= 4.0
    return lam


def intersection_candidates(qf_i: QuadraticForm, qf_j: QuadraticForm, i: int = 0,
                            j: int = 1, tol: Optional[Tolerances] = None,
                            bisections: int = poly.DEFAULT_BISECTIONS,
                            budget: int = poly.INTERVAL_BUDGET) -> IntersectionSolveResult:
    tol = tol or Tolerances()
    result = IntersectionSolveResult(pair=(i, j))
    pencil = build_pencil(qf_i, qf_j, i, j)
    try:
        P = ptilde(pencil, qf_i, qf_j, tol.tau_sing, tol.eps_trim)
    except IdenticalForms:
        result.flags.append("IdenticalForms")
        return result
    result.ptilde = P
    if forms_proportional(qf_i, qf_j):
        # {f_i = f_j} is a level set on which f_i is constant: stationary points are not
        # isolated and the pencil is singular exactly there
        result.flags.append("ProportionalForms")
        if pencil.p == 1:
            for beta in _scalar_crossings(qf_i, qf_j):
                fi = eval_form(qf_i, beta)
                result.lambdas.append(math.nan)
                result.betas.append(beta)
                result.residuals.append({"linear": 0.0, "gap": float(fi - eval_form(qf_j, beta))})
            if result.betas:
                vals = np.array([eval_form(qf_i, b) for b in result.betas])
                cut = vals.min() + tol.tau_active * (1.0 + abs(vals.min()))
                result.argmin = [int(k) for k in np.flatnonzero(vals <= cut)]
            else:
                result.flags.append("NoIntersection")
            return result
    if P.degree < 1:
        result.flags.append("NonAttainedInfimum" if gap_changes_sign(qf_i, qf_j)
                            else "NoIntersection")
        return result

    def direct(lam):
        return ptilde_value(pencil, qf_i, qf_j, lam, tol.tau_sing)

    def gap_along(lam):
        beta = beta_of_lambda(pencil, lam, tol.tau_sing)
        return eval_form(qf_i, beta) - eval_form(qf_j, beta)

    search = poly.find_real_roots(P, bisections, budget, evaluator=direct)
    result.root_search = search
    roots = list(search.roots)
    for k, lam in enumerate(roots):
        others = [abs(lam - x) for n, x in enumerate(roots) if n != k]
        room = min(0.25 * min(others, default=1.0), 1e-4 * (1.0 + abs(lam)))
        roots[k] = polish_root(gap_along, lam, room)
    for lam in roots:
        try:
            beta = beta_of_lambda(pencil, lam, tol.tau_sing)
        except NearSingular:
            result.rejected.append((lam, "near_singular"))
            continue
        C = pencil.C(lam)
        res = np.linalg.norm(pencil.M(lam) @ beta - C)
        fi = eval_form(qf_i, beta)
        gap = fi - eval_form(qf_j, beta)
        if res > tol.tau_lin * (1.0 + np.linalg.norm(C)):
            result.rejected.append((lam, "linear_residual"))
            continue
        if abs(gap) > tol.tau_gap * (1.0 + abs(fi)):
            result.rejected.append((lam, "gap_residual"))
            continue
        result.lambdas.append(float(lam))
        result.betas.append(beta)
        result.residuals.append({"linear": float(res), "gap": float(gap)})
    if result.betas:
        vals = np.array([eval_form(qf_i, b) for b in result.betas])
        best = vals.min()
        cut = best + tol.tau_active * (1.0 + abs(best))
        result.argmin = [int(k) for k in np.flatnonzero(vals <= cut)]
    else:
        if search.roots:
            result.flags.append("AllRootsRejected")
        if gap_changes_sign(qf_i, qf_j):
            result.flags.append("NonAttainedInfimum")
        else:
            result.flags.append("NoIntersection")
    return result
