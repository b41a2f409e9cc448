"""Dense real univariate polynomials and real-root isolation.

Coefficients are stored in ascending order ``e_0, ..., e_d``.  The root
pipeline follows the grid-then-bisect scheme: a Lagrange radius bounds the
real roots, a Rump-type separation bound sizes a uniform grid, sign changes
give brackets and each bracket is bisected.  When the separation bound makes
the grid infeasible (or disagrees with a Sturm count) the brackets come from
Sturm-driven adaptive subdivision instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateInstance, IsolationBudgetExceeded

EPS_TRIM = 1e-9
EPS_ZERO = 1e-13
INTERVAL_BUDGET = 10**6
DEFAULT_BISECTIONS = 60
# widen the Lagrange radius so roots sitting exactly on +-R fall strictly inside
_RADIUS_PAD = 1e-6


class Polynomial:
    """Real polynomial with ascending coefficients; Horner evaluation."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[float] = (0.0,)):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
        if c.size == 0:
            c = np.zeros(1)
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else np.zeros(1)
        self.coeffs = c

    @property
    def degree(self) -> int:
        """Degree; the zero polynomial has degree -1."""
        return -1 if self.is_zero() else self.coeffs.size - 1

    @property
    def leading(self) -> float:
        return float(self.coeffs[-1])

    def is_zero(self) -> bool:
        return self.coeffs.size == 1 and self.coeffs[0] == 0.0

    def __call__(self, x):
        return eval_poly(self, x)

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()!r})"

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(
            np.all(self.coeffs == other.coeffs))

    def __hash__(self):
        return hash(tuple(self.coeffs))

    def _lift(self, other):
        return other if isinstance(other, Polynomial) else Polynomial([other])

    def __add__(self, other):
        other = self._lift(other)
        n = max(self.coeffs.size, other.coeffs.size)
        out = np.zeros(n)
        out[: self.coeffs.size] += self.coeffs
        out[: other.coeffs.size] += other.coeffs
        return Polynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self.coeffs)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        return Polynomial(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def scale_variable(self, rho: float) -> "Polynomial":
        """The polynomial ``x -> P(rho * x)``."""
        return Polynomial(self.coeffs * rho ** np.arange(self.coeffs.size))

    def trim(self, eps: float = EPS_TRIM) -> "Polynomial":
        """Drop leading coefficients below ``eps * max|coeff|``."""
        return trim(self, eps)


def trim(P: Polynomial, eps: float = EPS_TRIM) -> Polynomial:
    c = P.coeffs
    top = np.abs(c).max()
    if top == 0.0:
        return Polynomial([0.0])
    keep = np.flatnonzero(np.abs(c) > eps * top)
    return Polynomial(c[: keep[-1] + 1])


def eval_poly(P: Polynomial, x):
    """Horner evaluation; ``x`` may be a scalar or an array."""
    c = P.coeffs
    x = np.asarray(x)
    acc = np.full(x.shape, c[-1], dtype=np.result_type(x.dtype, float))
    for coef in c[-2::-1]:
        acc = acc * x + coef
    return acc.item() if acc.ndim == 0 else acc


def derivative(P: Polynomial) -> Polynomial:
    c = P.coeffs
    if c.size == 1:
        return Polynomial([0.0])
    return Polynomial(c[1:] * np.arange(1, c.size))


def poly_divmod(P: Polynomial, Q: Polynomial):
    """Euclidean division ``P = q Q + r`` with ``deg r < deg Q``."""
    if Q.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    r = P.coeffs.astype(float).copy()
    d = Q.coeffs
    dq = d.size - 1
    if r.size - 1 < dq:
        return Polynomial([0.0]), Polynomial(r)
    q = np.zeros(r.size - dq)
    for k in range(r.size - 1, dq - 1, -1):
        coef = r[k] / d[-1]
        q[k - dq] = coef
        r[k - dq: k + 1] -= coef * d
        r[k] = 0.0
    return Polynomial(q), Polynomial(r[:dq] if dq > 0 else [0.0])


def sylvester_matrix(P: Polynomial, Q: Polynomial) -> np.ndarray:
    m, n = P.degree, Q.degree
    size = m + n
    S = np.zeros((size, size))
    p_desc = P.coeffs[::-1]
    q_desc = Q.coeffs[::-1]
    for r in range(n):
        S[r, r: r + m + 1] = p_desc
    for r in range(m):
        S[n + r, r: r + n + 1] = q_desc
    return S


def _log_resultant(P: Polynomial, Q: Polynomial):
    if P.is_zero() or Q.is_zero():
        raise ValueError("resultant of the zero polynomial is undefined")
    if P.degree == 0 and Q.degree == 0:
        return 1.0, 0.0
    if P.degree == 0:
        return math.copysign(1.0, P.leading) ** Q.degree, Q.degree * math.log(abs(P.leading))
    if Q.degree == 0:
        return math.copysign(1.0, Q.leading) ** P.degree, P.degree * math.log(abs(Q.leading))
    sign, logabs = np.linalg.slogdet(sylvester_matrix(P, Q))
    return float(sign), float(logabs)


def sylvester_resultant(P: Polynomial, Q: Polynomial) -> float:
    """Determinant of the Sylvester matrix of ``P`` and ``Q``."""
    sign, logabs = _log_resultant(P, Q)
    return 0.0 if sign == 0 else sign * math.exp(logabs)


def _log_discriminant(P: Polynomial):
    d = P.degree
    if d < 1:
        raise ValueError("discriminant needs degree >= 1")
    if d == 1:
        return 1.0, 0.0
    sign, logabs = _log_resultant(P, derivative(P))
    if sign == 0:
        return 0.0, -math.inf
    sign *= (-1) ** (d * (d - 1) // 2) * math.copysign(1.0, P.leading)
    return sign, logabs - math.log(abs(P.leading))


def discriminant(P: Polynomial) -> float:
    """``(-1)^(d(d-1)/2) Res(P, P') / e_d``."""
    sign, logabs = _log_discriminant(P)
    return 0.0 if sign == 0 else sign * math.exp(logabs)


def lagrange_root_bound(P: Polynomial) -> float:
    """``max(1, sum_{u<d} |e_u / e_d|)``: every real root lies in ``[-R, R]``."""
    if P.degree < 1:
        raise ValueError("root bound needs degree >= 1")
    c = P.coeffs
    return max(1.0, float(np.abs(c[:-1] / c[-1]).sum()))


def is_squarefree(P: Polynomial, rtol: float = 1e-10) -> bool:
    """Numerical test that ``gcd(P, P')`` is constant, via the Sturm remainder chain."""
    if P.degree < 2:
        return P.degree >= 0
    chain = sturm_sequence(P, rtol=rtol)
    return chain[-1].degree == 0


def log_rump_separation(P: Polynomial) -> float:
    """Natural log of the separation bound

        Delta = (1 v |e_d|)^(d(ln d + 1)) |D(P)| (2d)^(d-1) / s^(d(ln d + 3)),

    with ``D`` the discriminant and ``s = sum |e_u|``.
    """
    d = P.degree
    if d < 2:
        raise ValueError("separation bound needs degree >= 2")
    sign, log_disc = _log_discriminant(P)
    if sign == 0 or not is_squarefree(P):
        raise DegenerateInstance("zero discriminant: polynomial has a repeated root")
    s = float(np.abs(P.coeffs).sum())
    ld = math.log(d)
    return (d * (ld + 1.0) * math.log(max(1.0, abs(P.leading)))
            + log_disc + (d - 1) * math.log(2 * d) - d * (ld + 3.0) * math.log(s))


def rump_separation(P: Polynomial) -> float:
    """Lower bound on the distance between distinct roots (may underflow to 0)."""
    return math.exp(log_rump_separation(P))


@dataclass(frozen=True)
class RootBracket:
    lo: float
    hi: float
    sign_lo: int
    sign_hi: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.sign_lo * self.sign_hi >= 0:
            raise ValueError("bracket endpoints must have opposite signs")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _sign(v: float) -> int:
    return (v > 0) - (v < 0)


def _brackets_from_grid(P: Polynomial, xs: np.ndarray, zero_tol: float,
                        eta: float) -> tuple:
    """Sign-change brackets over sorted grid ``xs``; returns (brackets, n_zero_hits)."""
    vals = eval_poly(P, xs)
    zero = np.abs(vals) <= zero_tol
    if zero.any():
        # split each zero endpoint into x - eta, x + eta so that a simple root there is
        # captured by its own tiny bracket
        extra = np.concatenate([xs[zero] - eta, xs[zero] + eta])
        xs = np.sort(np.concatenate([xs[~zero], extra]))
        vals = eval_poly(P, xs)
    s = np.sign(vals)
    idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    out = [RootBracket(float(xs[i]), float(xs[i + 1]), int(s[i]), int(s[i + 1]))
           for i in idx]
    return out, int(zero.sum())


def isolate_real_roots(P: Polynomial, radius: float, step: float,
                       budget: int = INTERVAL_BUDGET) -> list:
    """Uniform-grid isolation on ``[-radius, radius]`` with spacing at most ``step``.

    The grid has ``2 * ceil(radius / step)`` intervals.  A grid point where
    ``|P| <= 1e-13 * sum|e_u|`` triggers one shift of the grid by ``step / 7``;
    if a hit remains it is treated as a root and bracketed tightly.
    """
    if P.degree < 1:
        return []
    if not step > 0:
        raise IsolationBudgetExceeded(math.inf, budget)
    m = 2 * math.ceil(radius / step)
    if m > budget:
        raise IsolationBudgetExceeded(m, budget)
    s = float(np.abs(P.coeffs).sum())
    zero_tol = EPS_ZERO * s
    h = 2.0 * radius / m
    xs = np.linspace(-radius, radius, m + 1)
    vals = eval_poly(P, xs)
    if np.any(np.abs(vals) <= zero_tol):
        xs = np.concatenate([[-radius - h], xs + step / 7.0])
    brackets, _ = _brackets_from_grid(P, xs, zero_tol, eta=h * 1e-6)
    return brackets


def sturm_sequence(P: Polynomial, rtol: float = 1e-10) -> list:
    """Sturm chain ``P, P', -rem(P, P'), ...`` with positive rescaling of each term.

    A remainder whose coefficients are all below ``rtol`` times the scale of
    its dividend is treated as zero, which ends the chain.
    """
    chain = [Polynomial(P.coeffs / np.abs(P.coeffs).max())]
    dP = derivative(P)
    if dP.is_zero():
        return chain
    chain.append(Polynomial(dP.coeffs / np.abs(dP.coeffs).max()))
    while chain[-1].degree > 0:
        _, r = poly_divmod(chain[-2], chain[-1])
        scale = max(np.abs(chain[-2].coeffs).max(), np.abs(chain[-1].coeffs).max())
        if np.abs(r.coeffs).max() <= rtol * scale:
            break
        r = trim(r, 1e-14)
        chain.append(Polynomial(-r.coeffs / np.abs(r.coeffs).max()))
    return chain


def _variations(chain: list, x: float) -> int:
    signs = [_sign(eval_poly(q, x)) for q in chain]
    signs = [s for s in signs if s != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def sturm_count(P: Polynomial, lo: float, hi: float, chain: Optional[list] = None) -> int:
    """Number of distinct real roots in ``(lo, hi]`` for squarefree ``P``."""
    if P.degree < 1:
        return 0
    chain = chain or sturm_sequence(P)
    return _variations(chain, lo) - _variations(chain, hi)


def sturm_isolate(P: Polynomial, radius: float, max_depth: int = 200) -> list:
    """Adaptive subdivision of ``(-radius, radius]`` until each piece holds <= 1 root."""
    if P.degree < 1:
        return []
    chain = sturm_sequence(P)
    s = float(np.abs(P.coeffs).sum())
    zero_tol = EPS_ZERO * s
    out = []
    stack = [(-radius, radius, sturm_count(P, -radius, radius, chain), 0)]
    while stack:
        lo, hi, cnt, depth = stack.pop()
        if cnt <= 0:
            continue
        if cnt == 1 or depth >= max_depth:
            flo, fhi = eval_poly(P, lo), eval_poly(P, hi)
            if abs(fhi) <= zero_tol:
                # root (numerically) at the right end of (lo, hi]
                eta = (hi - lo) * 1e-6
                a, b = hi - eta, hi + eta
                fa, fb = eval_poly(P, a), eval_poly(P, b)
                if _sign(fa) * _sign(fb) < 0:
                    out.append(RootBracket(a, b, _sign(fa), _sign(fb)))
                    continue
                # small but not a root at hi: keep subdividing
            elif _sign(flo) * _sign(fhi) < 0:
                out.append(RootBracket(lo, hi, _sign(flo), _sign(fhi)))
                continue
            if depth >= max_depth:
                continue
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            continue
        left = sturm_count(P, lo, mid, chain)
        stack.append((mid, hi, cnt - left, depth + 1))
        stack.append((lo, mid, left, depth + 1))
    out.sort(key=lambda br: br.lo)
    return out


def bisect(P, bracket: RootBracket, max_iter: int = DEFAULT_BISECTIONS,
           tol: float = 0.0, polish: bool = True) -> float:
    """Bisect ``max_iter`` times (or until ``hi - lo <= tol``) and return the midpoint.

    ``P`` is a Polynomial or any real callable that is continuous on the
    bracket.  For a Polynomial one Newton step is then tried and kept only if
    it lands inside the final bracket.
    """
    f = P if callable(P) else (lambda x: eval_poly(P, x))
    lo, hi = bracket.lo, bracket.hi
    slo = bracket.sign_lo
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        sm = _sign(f(mid))
        if sm == 0:
            return mid
        if sm == slo:
            lo = mid
        else:
            hi = mid
    est = 0.5 * (lo + hi)
    if polish and isinstance(P, Polynomial):
        dval = eval_poly(derivative(P), est)
        if dval != 0.0:
            cand = est - eval_poly(P, est) / dval
            if lo <= cand <= hi:
                est = cand
    return est


def companion_matrix(P: Polynomial) -> np.ndarray:
    d = P.degree
    if d < 1:
        raise ValueError("companion matrix needs degree >= 1")
    c = P.coeffs / P.leading
    C = np.zeros((d, d))
    C[1:, :-1] = np.eye(d - 1)
    C[:, -1] = -c[:-1]
    return C


def companion_roots(P: Polynomial) -> np.ndarray:
    """All complex roots, as eigenvalues of the companion matrix."""
    if P.degree < 1:
        return np.zeros(0, dtype=complex)
    return np.linalg.eigvals(companion_matrix(P)).astype(complex)


def real_companion_roots(P: Polynomial, imag_tol: float = 1e-8) -> np.ndarray:
    r = companion_roots(P)
    keep = np.abs(r.imag) <= imag_tol * (1.0 + np.abs(r))
    return np.sort(r[keep].real)


def interpolate_poly(nodes, values, degree: int, eps_trim: float = EPS_TRIM) -> Polynomial:
    """Degree-<=``degree`` interpolant (least squares with surplus nodes).

    The fit is done in the variable ``x / max|node|`` so that the Vandermonde
    system stays well conditioned, and trimmed there before rescaling.
    """
    nodes = np.asarray(nodes, dtype=float).reshape(-1)
    values = np.asarray(values, dtype=float).reshape(-1)
    if nodes.size != values.size:
        raise ValueError("nodes and values differ in length")
    order = np.sort(nodes)
    if np.any(np.diff(order) <= 1e-14 * (1.0 + np.abs(order[1:]))):
        raise ValueError("duplicate interpolation nodes")
    if nodes.size < degree + 1:
        raise ValueError(f"need at least {degree + 1} nodes, got {nodes.size}")
    rho = float(np.abs(nodes).max()) or 1.0
    V = np.vander(nodes / rho, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, values, rcond=None)
    scaled = trim(Polynomial(coef), eps_trim)
    return scaled.scale_variable(1.0 / rho)


def chebyshev_nodes(count: int, radius: float = 1.0) -> np.ndarray:
    k = np.arange(count)
    return radius * np.cos((2 * k + 1) * np.pi / (2 * count))


@dataclass
class RootSearch:
    """Outcome of the full real-root pipeline for one polynomial."""

    roots: list
    brackets: list
    radius: float
    method: str
    log_delta: Optional[float] = None
    intervals: Optional[int] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"roots": list(self.roots), "radius": self.radius, "method": self.method,
                "log_delta": self.log_delta, "intervals": self.intervals,
                "notes": list(self.notes)}


def find_real_roots(P: Polynomial, bisections: int = DEFAULT_BISECTIONS,
                    budget: int = INTERVAL_BUDGET,
                    evaluator: Optional[Callable[[float], float]] = None) -> RootSearch:
    """Real roots of a squarefree polynomial: radius, grid or Sturm brackets, bisection.

    ``evaluator`` optionally supplies a more accurate evaluation of the same
    function (used when ``P`` was itself obtained by interpolation); it is
    used for bisection inside every bracket whose endpoint signs it confirms.
    """
    d = P.degree
    if d < 1:
        return RootSearch([], [], 0.0, "none")
    R = lagrange_root_bound(P)
    radius = R * (1.0 + _RADIUS_PAD) + _RADIUS_PAD
    notes = []
    log_delta = None
    intervals = None
    if d == 1:
        f0, f1 = eval_poly(P, -radius), eval_poly(P, radius)
        brackets = [RootBracket(-radius, radius, _sign(f0), _sign(f1))]
        method = "linear"
    else:
        log_delta = log_rump_separation(P)  # raises on repeated roots
        brackets = None
        delta = math.exp(log_delta)
        if delta > 0.0:
            step = delta * (1.0 + 1e-3)  # the grid uses Delta + eps with eps = 1e-3 Delta
            try:
                intervals = 2 * math.ceil(radius / step)
                brackets = isolate_real_roots(P, radius, step, budget)
                method = "grid"
            except IsolationBudgetExceeded:
                notes.append(f"grid of {intervals} intervals exceeds budget {budget}")
        else:
            notes.append("separation bound underflows")
        if brackets is not None:
            expected = sturm_count(P, -radius, radius)
            if expected != len(brackets):
                notes.append(f"grid found {len(brackets)} brackets, Sturm count {expected}")
                brackets = None
        if brackets is None:
            brackets = sturm_isolate(P, radius)
            method = "sturm"
    roots = []
    for br in brackets:
        f = None
        if evaluator is not None:
            try:
                if _sign(evaluator(br.lo)) == br.sign_lo and _sign(evaluator(br.hi)) == br.sign_hi:
                    f = evaluator
            except Exception:  # evaluator undefined at an endpoint: bisect P itself
                f = None
        if f is None:
            roots.append(bisect(P, br, bisections))
        else:
            try:
                roots.append(bisect(f, br, bisections))
            except Exception:
                roots.append(bisect(P, br, bisections))
    return RootSearch(roots, brackets, radius, method, log_delta, intervals, notes)
