"""Brute-force minimizers of ``max_i f_i`` used only to validate the solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import OracleUnavailable
from .risk import QuadraticForm, SignClass, eval_max, eval_max_batch, gradient

MAX_GRID_DIM = 3
MAX_LATTICE_POINTS = 10_000_000


@dataclass
class OracleResult:
    beta: np.ndarray
    value: float
    method: str  # "Grid" | "Subgradient"
    resolution: Optional[int] = None
    spacing: Optional[float] = None  # final lattice step per axis
    steps: Optional[int] = None
    levels: int = 0
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"beta": self.beta.tolist(), "value": self.value, "method": self.method,
                "resolution": self.resolution, "spacing": self.spacing, "steps": self.steps,
                "levels": self.levels, "flags": list(self.flags)}


def default_radius(qfs: Sequence[QuadraticForm]) -> float:
    """``2 * max ||A_i^{-1} b_i|| + 1`` over forms with an invertible quadratic part."""
    norms = []
    for q in qfs:
        try:
            norms.append(float(np.linalg.norm(np.linalg.solve(q.A, q.b))))
        except np.linalg.LinAlgError:
            continue
    return 2.0 * max(norms, default=0.0) + 1.0


def resolution_bound(qfs: Sequence[QuadraticForm], beta, spacing: float) -> float:
    """Worst increase of every ``f_i`` over a lattice cell around ``beta``.

    The nearest lattice point lies within ``r = spacing * sqrt(p) / 2``, where
    ``|f_i(beta + d) - f_i(beta)| <= ||grad f_i(beta)|| r + ||A_i|| r^2``; hence
    a lattice minimum can exceed the true minimum by at most this amount.
    """
    beta = np.asarray(beta, dtype=float)
    r = spacing * math.sqrt(beta.size) / 2.0
    return max(float(np.linalg.norm(gradient(q, beta))) * r + float(np.linalg.norm(q.A, 2)) * r * r
               for q in qfs)


def _scan(qfs, lo, hi, resolution, chunk=1 << 18):
    pts_per_axis = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
    p = len(lo)
    total = resolution ** p
    best_val, best_idx = math.inf, -1
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        sub = np.stack(np.unravel_index(idx, (resolution,) * p), axis=1)
        pts = np.stack([pts_per_axis[a][sub[:, a]] for a in range(p)], axis=1)
        vals = eval_max_batch(qfs, pts)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_idx = float(vals[k]), int(idx[k])
    sub = np.unravel_index(best_idx, (resolution,) * p)
    beta = np.array([pts_per_axis[a][sub[a]] for a in range(p)])
    on_edge = any(s == 0 or s == resolution - 1 for s in sub)
    return beta, best_val, on_edge


def grid_minimize(qfs: Sequence[QuadraticForm], box=None, resolution: int = 2001,
                  refine: int = 0, refine_resolution: int = 21, refine_span: float = 5.0,
                  expand: int = 3) -> OracleResult:
    """Exhaustive lattice search on ``box`` (list of per-axis ``(lo, hi)``).

    ``refine`` extra levels re-grid ``best +- refine_span * h`` with
    ``refine_resolution`` points per axis (h halves per level by default); a refined box whose best point lands on its edge is
    recentred at the same size instead of shrunk.  If the coarse best lies on
    the outer boundary the box is doubled up to ``expand`` times before a
    ``BoundaryHit`` flag is raised.
    """
    p = qfs[0].p
    if p > MAX_GRID_DIM:
        raise OracleUnavailable(f"grid oracle limited to p <= {MAX_GRID_DIM}, got p={p}")
    if resolution ** p > MAX_LATTICE_POINTS:
        raise OracleUnavailable(f"{resolution}^{p} lattice points exceed the cost guard")
    if box is None:
        R = default_radius(qfs)
        box = [(-R, R)] * p
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    if np.any(hi <= lo):
        raise ValueError("box must have lo < hi on every axis")
    flags = []
    for attempt in range(expand + 1):
        beta, val, edge = _scan(qfs, lo, hi, resolution)
        if not edge:
            break
        if attempt == expand:
            flags.append("BoundaryHit")
            break
        mid, half = 0.5 * (lo + hi), hi - lo
        lo, hi = mid - half, mid + half
    h = (hi - lo) / (resolution - 1)
    levels = 0
    for _ in range(refine):
        half = refine_span * h
        for _recentre in range(50):
            b2, v2, edge = _scan(qfs, beta - half, beta + half, refine_resolution)
            moved = v2 < val
            if moved:
                beta, val = b2, v2
            if not (edge and moved):
                break
        h = 2.0 * half / (refine_resolution - 1)
        levels += 1
    value, _ = eval_max(qfs, beta)
    return OracleResult(beta, value, "Grid", resolution=resolution, spacing=float(h.max()),
                        levels=levels, flags=flags)


def subgradient_minimize(qfs: Sequence[QuadraticForm], start=None, steps: int = 10_000,
                         step_rule: str = "sqrt", alpha0: Optional[float] = None) -> OracleResult:
    """Normalized subgradient descent ``beta <- beta - a_t g / ||g||``.

    ``step_rule`` is ``"sqrt"`` (``a_t = a_0 / sqrt(t)``) or ``"constant"``.
    Only valid when every form is NonNegative, so that the maximum is convex.
    """
    if any(q.sign_class is not SignClass.NON_NEGATIVE for q in qfs):
        raise OracleUnavailable("subgradient oracle needs every row NonNegative (convex max)")
    if step_rule not in ("sqrt", "constant"):
        raise ValueError(f"unknown step rule {step_rule!r}")
    p = qfs[0].p
    if start is None:
        centres = []
        for q in qfs:
            try:
                centres.append(np.linalg.solve(q.A, q.b))
            except np.linalg.LinAlgError:
                pass
        start = np.mean(centres, axis=0) if centres else np.zeros(p)
    beta = np.array(start, dtype=float).reshape(p)
    if alpha0 is None:
        alpha0 = default_radius(qfs) / 50.0
    best_beta, (best_val, _) = beta.copy(), eval_max(qfs, beta)
    As = np.array([q.A for q in qfs])
    bs = np.array([q.b for q in qfs])
    cs = np.array([q.c for q in qfs])
    for t in range(1, steps + 1):
        vals = np.einsum("i,kij,j->k", beta, As, beta) - 2.0 * bs @ beta + cs
        k = int(np.argmax(vals))
        if vals[k] < best_val:
            best_val, best_beta = float(vals[k]), beta.copy()
        g = 2.0 * (As[k] @ beta - bs[k])
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        a = alpha0 / math.sqrt(t) if step_rule == "sqrt" else alpha0
        beta = beta - a * g / gn
    value, _ = eval_max(qfs, best_beta)
    return OracleResult(best_beta, float(value), "Subgradient", steps=steps)


def epigraph_minimize(qfs: Sequence[QuadraticForm], start) -> OracleResult:
    """SLSQP on ``min t  s.t.  f_i(beta) <= t``, started at ``start``.

    Local, so a global oracle only for a convex max; used to polish the grid and
    subgradient results, which can stop short inside flat kink valleys.
    """
    if any(q.sign_class is not SignClass.NON_NEGATIVE for q in qfs):
        raise OracleUnavailable("epigraph polish needs every row NonNegative (convex max)")
    p = qfs[0].p
    As = np.array([q.A for q in qfs])
    bs = np.array([q.b for q in qfs])
    cs = np.array([q.c for q in qfs])
    beta0 = np.asarray(start, dtype=float).reshape(p)
    x0 = np.concatenate([beta0, [eval_max(qfs, beta0)[0]]])

    def cons(x):
        b = x[:p]
        return x[p] - (np.einsum("i,kij,j->k", b, As, b) - 2.0 * bs @ b + cs)

    def cons_jac(x):
        g = 2.0 * (np.einsum("kij,j->ki", As, x[:p]) - bs)
        return np.hstack([-g, np.ones((len(qfs), 1))])

    res = optimize.minimize(lambda x: x[p], x0, jac=lambda x: np.eye(p + 1)[p],
                            constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
                            method="SLSQP", options={"ftol": 1e-15, "maxiter": 1000})
    beta = res.x[:p]
    value, _ = eval_max(qfs, beta)
    if value > x0[p]:
        beta, value = beta0, x0[p]
    return OracleResult(np.array(beta), float(value), "Epigraph", steps=int(res.nit))


# default lattice sizes per dimension, for convex (zoomed) and mixed-sign (plain) checks
ZOOM_RESOLUTION = {1: 401, 2: 101, 3: 31}
PLAIN_RESOLUTION = {1: 8001, 2: 2001, 3: 201}


def convex_oracle(qfs: Sequence[QuadraticForm]) -> list:
    """Independent results for a convex max: zoomed grid (p <= 3), subgradient from the
    centroid of inflexion points, subgradient warm-started at the grid point, and an
    epigraph SLSQP polish of the best of these."""
    p = qfs[0].p
    out = []
    if p <= MAX_GRID_DIM:
        g = grid_minimize(qfs, resolution=ZOOM_RESOLUTION[p], refine=40)
        out.append(g)
    out.append(subgradient_minimize(qfs))
    if out[0].method == "Grid":
        a0 = 1e-3 * (1.0 + float(np.linalg.norm(out[0].beta)))
        warm = subgradient_minimize(qfs, start=out[0].beta, alpha0=a0, steps=5000)
        warm.method = "Grid+Subgradient"
        out.append(warm)
    best = min(out, key=lambda o: o.value)
    out.append(epigraph_minimize(qfs, best.beta))
    return out


@dataclass
class OracleCheck:
    solver_value: float
    oracle_value: float
    value_gap: float
    tolerance: float
    set_distance: float
    distance_tolerance: Optional[float]
    oracles: list
    passed: bool

    def to_dict(self) -> dict:
        return {"solver_value": self.solver_value, "oracle_value": self.oracle_value,
                "value_gap": self.value_gap, "tolerance": self.tolerance,
                "set_distance": self.set_distance,
                "distance_tolerance": self.distance_tolerance,
                "oracles": [o.to_dict() for o in self.oracles], "passed": self.passed}


def oracle_check(qfs: Sequence[QuadraticForm], solver_value: float, chosen_betas,
                 value_rtol: float = 1e-5, distance_tol: float = 1e-3) -> OracleCheck:
    """Compare a solver result with the applicable oracles.

    Convex instances: the solver must be no worse than any oracle (up to
    ``value_rtol``), within ``value_rtol`` of the best one, and its chosen set
    within ``distance_tol`` of the best oracle point.  Mixed-sign instances
    (p <= 3): a plain lattice; the lattice minimum may exceed the true one by
    at most the resolution bound at the solver point.
    """
    from .solver import set_distance

    convex = all(q.sign_class is SignClass.NON_NEGATIVE for q in qfs)
    p = qfs[0].p
    scale = 1.0 + abs(solver_value)
    if convex:
        res = convex_oracle(qfs)
        best = min(res, key=lambda o: o.value)
        tol = value_rtol * scale
        worst_excess = max(solver_value - o.value for o in res)
        gap = solver_value - best.value
        dist = set_distance(chosen_betas, [best.beta])
        passed = worst_excess <= tol and abs(gap) <= tol and dist <= distance_tol
        return OracleCheck(solver_value, best.value, gap, tol, dist, distance_tol, res, passed)
    if p > MAX_GRID_DIM:
        raise OracleUnavailable(
            f"no applicable oracle: mixed-sign instance with p={p} exceeds the grid cost guard")
    R = default_radius(qfs)
    if chosen_betas:
        R = max(R, 1.5 * max(float(np.abs(b).max()) for b in chosen_betas) + 1.0)
    g = grid_minimize(qfs, box=[(-R, R)] * p, resolution=PLAIN_RESOLUTION[p])
    bound = max((resolution_bound(qfs, b, g.spacing) for b in chosen_betas), default=math.inf)
    tol = bound + 1e-9 * scale
    gap = solver_value - g.value
    dist = set_distance(chosen_betas, [g.beta])
    # the solver may not sit above the lattice, and the lattice may not be far above the solver
    passed = gap <= 1e-9 * scale and -gap <= tol
    return OracleCheck(solver_value, g.value, gap, tol, dist, None, [g], passed)
