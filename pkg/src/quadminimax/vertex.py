"""Candidates where three or more forms are simultaneously active.

A local minimizer of ``max_i f_i`` with active set ``S`` satisfies

    sum_{i in S} mu_i grad f_i(beta) = 0,  mu >= 0,  sum mu_i = 1,
    f_i(beta) = f_{i'}(beta) for i, i' in S.

With ``mu_{i_0} = 1 - sum_r nu_r`` this is a square system of quadratic
equations in ``(beta, nu)`` (p + |S| - 1 unknowns).  All isolated solutions
are found by a total-degree homotopy ``(1 - t) gamma G(z) + t F(z)`` from the
start system ``z_e^2 = 1``; real solutions with ``mu >= 0`` are candidates.
For ``|S| = 2`` the same system is the pencil stationarity condition, which
the tests use as a cross-check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .risk import QuadraticForm, eval_form, gradient

# fixed seed for the random gamma: candidate sets must be reproducible run to run
_GAMMA_SEED = 20240917


@dataclass
class QuadraticSystem:
    """Equations ``z Q_e z + L_e . z + c_e = 0`` for e = 1..N, z in C^N."""

    Q: np.ndarray  # (N, N, N), each Q[e] symmetric
    L: np.ndarray  # (N, N)
    c: np.ndarray  # (N,)

    @property
    def size(self) -> int:
        return self.c.size

    def normalized(self) -> "QuadraticSystem":
        scale = np.maximum.reduce([np.abs(self.Q).reshape(self.size, -1).max(axis=1),
                                   np.abs(self.L).max(axis=1), np.abs(self.c)])
        scale = np.where(scale > 0, scale, 1.0)
        return QuadraticSystem(self.Q / scale[:, None, None], self.L / scale[:, None],
                               self.c / scale)

    def F(self, z: np.ndarray) -> np.ndarray:
        return np.einsum("eab,pa,pb->pe", self.Q, z, z) + z @ self.L.T + self.c

    def J(self, z: np.ndarray) -> np.ndarray:
        return 2.0 * np.einsum("eab,pb->pea", self.Q, z) + self.L[None, :, :]


@dataclass
class HomotopyReport:
    paths: int
    finished: int
    at_infinity: int
    failed: int
    steps: int = 0
    solutions: np.ndarray = field(repr=False, default=None)


class _Homogenized:
    """Target and start systems in projective coordinates ``w = (w_0, z)``.

    A random complex affine patch ``a . w = 1`` keeps every path bounded;
    solutions at infinity show up as ``w_0 -> 0``.
    """

    def __init__(self, system: QuadraticSystem, rng):
        N = system.size
        Qh = np.zeros((N, N + 1, N + 1))
        Qh[:, 1:, 1:] = system.Q
        Qh[:, 0, 1:] = 0.5 * system.L
        Qh[:, 1:, 0] = 0.5 * system.L
        Qh[:, 0, 0] = system.c
        Gh = np.zeros_like(Qh)
        for e in range(N):
            Gh[e, e + 1, e + 1] = 1.0
            Gh[e, 0, 0] = -1.0
        self.Qh, self.Gh = Qh, Gh
        self.gamma = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
        self.a = rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1)

    def parts(self, w, t):
        tt = t[:, None]
        Fw = np.einsum("eab,pa,pb->pe", self.Qh, w, w)
        Gw = np.einsum("eab,pa,pb->pe", self.Gh, w, w)
        JF = 2.0 * np.einsum("eab,pb->pea", self.Qh, w)
        JG = 2.0 * np.einsum("eab,pb->pea", self.Gh, w)
        H = np.concatenate([(1.0 - tt) * self.gamma * Gw + tt * Fw,
                            (w @ self.a - 1.0)[:, None]], axis=1)
        Jw = (1.0 - t)[:, None, None] * self.gamma * JG + t[:, None, None] * JF
        Jw = np.concatenate([Jw, np.broadcast_to(self.a, (w.shape[0], 1, w.shape[1]))], axis=1)
        Ht = np.concatenate([Fw - self.gamma * Gw, np.zeros((w.shape[0], 1))], axis=1)
        return H, Jw, Ht

    def velocity(self, w, t):
        _, Jw, Ht = self.parts(w, t)
        return -_solve_batch(Jw, Ht)


def _solve_batch(J, r):
    """Batched solve; rows whose matrix is singular come back as NaN."""
    try:
        return np.linalg.solve(J, r[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.full(r.shape, np.nan, dtype=complex)
        for k in range(r.shape[0]):
            try:
                out[k] = np.linalg.solve(J[k], r[k])
            except np.linalg.LinAlgError:
                pass
        return out


def track_paths(system: QuadraticSystem, seed: int = _GAMMA_SEED,
                max_steps: int = 3000) -> HomotopyReport:
    """Track all 2^N total-degree paths to ``t = 1`` in lockstep (vectorised)."""
    N = system.size
    hom = _Homogenized(system, np.random.default_rng(seed))
    start = np.array(list(itertools.product([1.0, -1.0], repeat=N)), dtype=complex)
    w = np.concatenate([np.ones((start.shape[0], 1)), start], axis=1)
    w = w / (w @ hom.a)[:, None]
    P = w.shape[0]
    t = np.zeros(P)
    h = np.full(P, 0.05)
    streak = np.zeros(P, dtype=int)
    status = np.zeros(P, dtype=int)  # 0 running, 1 finished, 3 failed
    steps = 0
    for steps in range(1, max_steps + 1):
        run = np.flatnonzero(status == 0)
        if run.size == 0:
            break
        wr, tr = w[run], t[run]
        hr = np.minimum(h[run], 1.0 - tr)
        with np.errstate(all="ignore"):
            k1 = hom.velocity(wr, tr)
            k2 = hom.velocity(wr + 0.5 * hr[:, None] * k1, tr + 0.5 * hr)
            k3 = hom.velocity(wr + 0.5 * hr[:, None] * k2, tr + 0.5 * hr)
            k4 = hom.velocity(wr + hr[:, None] * k3, tr + hr)
            wp = wr + (hr[:, None] / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            tn = tr + hr
            ok = np.isfinite(wp).all(axis=1)
            wc = np.where(ok[:, None], wp, wr)
            conv = np.zeros(run.size, dtype=bool)
            for it in range(3):
                H, Jw, _ = hom.parts(wc, tn)
                dw = _solve_batch(Jw, H)
                wc = wc - dw
                ndw = np.linalg.norm(dw, axis=1)
                conv |= (ndw <= 1e-10 * np.linalg.norm(wc, axis=1)) & np.isfinite(wc).all(axis=1)
                if it == 0:
                    ok &= ndw <= 0.05 * (1e-8 + np.linalg.norm(wp - wr, axis=1))
        good = ok & conv
        gi, bi = run[good], run[~good]
        w[gi] = wc[good]
        t[gi] = tn[good]
        streak[gi] += 1
        grow = gi[streak[gi] >= 3]
        h[grow] = np.minimum(2.0 * h[grow], 0.2)
        streak[grow] = 0
        h[bi] *= 0.5
        streak[bi] = 0
        status[gi[t[gi] >= 1.0]] = 1
        status[bi[h[bi] < 1e-13]] = 3
    status[status == 0] = 3
    # paths that stall close to t = 1 with w_0 -> 0 are heading to infinity
    w0 = np.abs(w[:, 0]) / np.linalg.norm(w, axis=1)
    finite = (status == 1) & (w0 > 1e-8)
    infinite = ((status == 1) & ~finite) | ((status == 3) & (t > 0.9) & (w0 < 1e-3))
    failed = (status == 3) & ~infinite
    with np.errstate(all="ignore"):
        sols = w[finite, 1:] / w[finite, :1]
        for _ in range(6):
            dz = _solve_batch(system.J(sols), system.F(sols))
            sols = np.where(np.isfinite(dz), sols - dz, sols)
    return HomotopyReport(P, int(finite.sum()), int(infinite.sum()), int(failed.sum()),
                          steps, sols)


def kkt_system(qfs: Sequence[QuadraticForm], S: Sequence[int], scale: float = 1.0):
    """Quadratic KKT system for active set ``S`` in unknowns ``(beta / scale, nu)``."""
    S = list(S)
    s = len(S)
    p = qfs[S[0]].p
    N = p + s - 1
    Q = np.zeros((N, N, N))
    L = np.zeros((N, N))
    c = np.zeros(N)
    f0 = qfs[S[0]]
    A0, b0 = f0.A * scale, f0.b
    # half-gradient rows: (A_0 beta - b_0) + sum_r nu_r ((A_r - A_0) beta - (b_r - b_0))
    for l in range(p):
        L[l, :p] = A0[l]
        c[l] = -b0[l]
        for r, idx in enumerate(S[1:]):
            dA = (qfs[idx].A - f0.A)[l] * scale
            db = (qfs[idx].b - f0.b)[l]
            v = p + r
            Q[l, v, :p] += 0.5 * dA
            Q[l, :p, v] += 0.5 * dA
            L[l, v] = -db
    # gap rows: f_0(beta) - f_r(beta) = 0
    for r, idx in enumerate(S[1:]):
        e = p + r
        D = (f0.A - qfs[idx].A) * scale * scale
        Q[e, :p, :p] = D
        L[e, :p] = -2.0 * (f0.b - qfs[idx].b) * scale
        c[e] = f0.c - qfs[idx].c
    return QuadraticSystem(Q, L, c)


@dataclass
class VertexCandidate:
    beta: np.ndarray
    active: tuple
    mu: np.ndarray
    gap_residual: float
    stationarity_residual: float


@dataclass
class VertexSolveResult:
    active: tuple
    candidates: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    paths: Optional[HomotopyReport] = None

    def to_dict(self) -> dict:
        return {
            "active": [i + 1 for i in self.active],
            "paths": None if self.paths is None else {
                "total": self.paths.paths, "finite": self.paths.finished,
                "at_infinity": self.paths.at_infinity, "failed": self.paths.failed},
            "betas": [c.beta.tolist() for c in self.candidates],
            "mu": [c.mu.tolist() for c in self.candidates],
            "rejected": list(self.rejected),
        }


def _real_newton(system, x, iters=6):
    for _ in range(iters):
        try:
            dx = np.linalg.solve(system.J(x[None, :])[0], system.F(x[None, :])[0])
        except np.linalg.LinAlgError:
            break
        x = x - dx
        if np.linalg.norm(dx) <= 1e-15 * (1.0 + np.linalg.norm(x)):
            break
    return x


def vertex_candidates(qfs: Sequence[QuadraticForm], S: Sequence[int], tau_gap: float = 1e-7,
                      tau_mu: float = 1e-7, imag_tol: float = 1e-6,
                      seed: int = _GAMMA_SEED) -> VertexSolveResult:
    """All real KKT points for active set ``S`` (|S| >= 2) with ``mu >= -tau_mu``."""
    S = tuple(S)
    out = VertexSolveResult(active=S)
    p = qfs[S[0]].p
    scale = 1.0
    for i in S:
        try:
            scale = max(scale, float(np.linalg.norm(np.linalg.solve(qfs[i].A, qfs[i].b))))
        except np.linalg.LinAlgError:
            pass
    system = kkt_system(qfs, S, scale).normalized()
    rep = track_paths(system, seed=seed)
    out.paths = rep
    seen = []
    for zc in rep.solutions:
        if not np.isfinite(zc).all():
            continue
        if np.abs(zc.imag).max() > imag_tol * (1.0 + np.abs(zc).max()):
            continue
        x = _real_newton(system, zc.real.copy())
        if any(np.linalg.norm(x - y) <= 1e-8 * (1.0 + np.linalg.norm(y)) for y in seen):
            continue
        seen.append(x)
        beta = x[:p] * scale
        nu = x[p:]
        mu = np.concatenate([[1.0 - nu.sum()], nu])
        if mu.min() < -tau_mu:
            out.rejected.append({"beta": beta.tolist(), "reason": "negative_multiplier"})
            continue
        vals = np.array([eval_form(qfs[i], beta) for i in S])
        gap = float(np.abs(vals - vals[0]).max())
        if gap > tau_gap * (1.0 + np.abs(vals).max()):
            out.rejected.append({"beta": beta.tolist(), "reason": "gap_residual"})
            continue
        grads = np.array([gradient(qfs[i], beta) for i in S])
        stat = float(np.linalg.norm(mu @ grads) / (1.0 + np.abs(mu) @ np.linalg.norm(grads, axis=1)))
        if stat > 1e-6:
            out.rejected.append({"beta": beta.tolist(), "reason": "stationarity_residual"})
            continue
        out.candidates.append(VertexCandidate(beta, S, mu, gap, stat))
    out.candidates.sort(key=lambda c: tuple(c.beta))
    return out
