"""Shifted structural equation model simulator.

Each observation solves ``(I - B) v = eps + A`` for the stacked vector
``v = (Y, X_1, ..., X_p)``: a fresh random coefficient matrix ``B`` and noise
``eps`` per draw, and a shift ``A`` in R^{p+1} per environment.  The target is
coordinate 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DegenerateInstance
from .moments import SampleMatrix

DET_GUARD = 1e-8
RETRY_CAP = 100


@dataclass
class CoefficientSampler:
    """Distribution of B: ``mean + scale * N(0, 1)`` entrywise (``scale = 0`` is a point mass)."""

    mean: np.ndarray
    scale: float = 0.0
    # zero the diagonal of every draw (no self-loops)
    zero_diagonal: bool = False

    def __post_init__(self):
        self.mean = np.atleast_2d(np.asarray(self.mean, dtype=float))
        if self.mean.shape[0] != self.mean.shape[1]:
            raise ConfigError("coefficient mean must be square")
        if self.scale < 0:
            raise ConfigError("coefficient scale must be nonnegative")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        B = np.broadcast_to(self.mean, (n, self.dim, self.dim)).copy()
        if self.scale > 0:
            B += self.scale * rng.standard_normal((n, self.dim, self.dim))
        if self.zero_diagonal:
            idx = np.arange(self.dim)
            B[:, idx, idx] = 0.0
        return B

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale,
                "zero_diagonal": self.zero_diagonal}


@dataclass
class NoiseSpec:
    """``eps = L z`` with ``z`` i.i.d. standard normal (``kind="normal"``), Student-t
    with ``df`` degrees of freedom scaled to unit variance (``kind="t"``), or zero."""

    kind: str = "normal"
    cov: Optional[np.ndarray] = None  # (p+1)x(p+1); identity when None
    df: float = 5.0

    def __post_init__(self):
        if self.kind not in ("normal", "t", "zero"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if self.cov is not None:
            self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if self.kind == "t" and self.df <= 2:
            raise ConfigError("t noise needs df > 2 for a finite variance")

    def sample(self, rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros((n, dim))
        if self.kind == "normal":
            z = rng.standard_normal((n, dim))
        else:
            z = rng.standard_t(self.df, (n, dim)) / math.sqrt(self.df / (self.df - 2.0))
        if self.cov is None:
            return z
        return z @ np.linalg.cholesky(self.cov).T

    def to_dict(self) -> dict:
        return {"kind": self.kind, "cov": None if self.cov is None else self.cov.tolist(),
                "df": self.df}


@dataclass
class SemSpec:
    p: int
    coefficients: CoefficientSampler
    noise: NoiseSpec
    shifts: list
    seed: int = 0
    zero_target_shift: bool = False
    # random shifts: A = A_i * xi with xi ~ N(1, shift_jitter^2) per draw; 0 keeps A_i fixed
    shift_jitter: float = 0.0
    det_guard: float = DET_GUARD
    retry_cap: int = RETRY_CAP

    def __post_init__(self):
        d = self.p + 1
        if self.coefficients.dim != d:
            raise ConfigError(f"B must be {d}x{d} for p={self.p}")
        if self.noise.cov is not None and self.noise.cov.shape != (d, d):
            raise ConfigError(f"noise covariance must be {d}x{d}")
        shifts = [np.array(a, dtype=float).reshape(-1) for a in self.shifts]
        for i, a in enumerate(shifts):
            if a.size != d:
                raise ConfigError(f"shift {i + 1} has length {a.size}, expected p+1={d}")
            if self.zero_target_shift:
                a[0] = 0.0
        self.shifts = shifts

    @property
    def k(self) -> int:
        return len(self.shifts)

    def to_dict(self) -> dict:
        return {"p": self.p, "coefficients": self.coefficients.to_dict(),
                "noise": self.noise.to_dict(), "shifts": [a.tolist() for a in self.shifts],
                "seed": self.seed, "zero_target_shift": self.zero_target_shift,
                "shift_jitter": self.shift_jitter}

    @classmethod
    def from_dict(cls, d: dict) -> "SemSpec":
        p = int(d["p"])
        co = d.get("coefficients", {})
        coeffs = CoefficientSampler(mean=co.get("mean", np.zeros((p + 1, p + 1))),
                                    scale=float(co.get("scale", 0.0)),
                                    zero_diagonal=bool(co.get("zero_diagonal", False)))
        no = d.get("noise", {})
        noise = NoiseSpec(kind=no.get("kind", "normal"), cov=no.get("cov"),
                          df=float(no.get("df", 5.0)))
        return cls(p=p, coefficients=coeffs, noise=noise, shifts=d["shifts"],
                   seed=int(d.get("seed", 0)), zero_target_shift=bool(d.get("zero_target_shift", False)),
                   shift_jitter=float(d.get("shift_jitter", 0.0)))


@dataclass(frozen=True)
class ShiftClassSample:
    """The probe shift ``c * A_i`` (|c| <= 1, so it is dominated by ``A_i``)."""

    base_index: int
    c: float

    def __post_init__(self):
        if abs(self.c) > 1.0:
            raise ConfigError(f"probe scaling |c| = {abs(self.c)} exceeds 1")

    def shift(self, spec: SemSpec) -> np.ndarray:
        return self.c * spec.shifts[self.base_index]


def c_grid_probes(k: int, grid: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0)) -> list:
    return [ShiftClassSample(i, float(c)) for i in range(k) for c in grid]


@dataclass
class _Draws:
    inv_noise: np.ndarray  # (I - B)^{-1} eps, shape (n, p+1)
    inv_shift: np.ndarray  # (I - B)^{-1} A_base, shape (n, p+1)


def _sample_B(spec: SemSpec, rng, n):
    d = spec.p + 1
    B = spec.coefficients.sample(rng, n)
    M = np.eye(d) - B
    for _ in range(spec.retry_cap):
        bad = np.abs(np.linalg.det(M)) < spec.det_guard
        if not bad.any():
            return M
        M[bad] = np.eye(d) - spec.coefficients.sample(rng, int(bad.sum()))
    raise DegenerateInstance(f"I - B stayed singular after {spec.retry_cap} resamples")


def _draws(spec: SemSpec, shift: np.ndarray, n: int, rng) -> _Draws:
    d = spec.p + 1
    M = _sample_B(spec, rng, n)
    eps = spec.noise.sample(rng, n, d)
    A = np.broadcast_to(shift, (n, d))
    if spec.shift_jitter > 0:
        A = A * (1.0 + spec.shift_jitter * rng.standard_normal((n, 1)))
    rhs = np.stack([eps, A], axis=2)  # (n, d, 2)
    sol = np.linalg.solve(M, rhs)
    return _Draws(sol[:, :, 0], sol[:, :, 1])


def environment_rng(spec: SemSpec, index: int) -> np.random.Generator:
    """Independent, reproducible stream for environment ``index``."""
    child = np.random.SeedSequence(spec.seed).spawn(index + 1)[index]
    return np.random.default_rng(child)


def _to_samples(v: np.ndarray) -> SampleMatrix:
    return SampleMatrix(X=v[:, 1:], y=v[:, 0])


def simulate_environment(spec: SemSpec, shift, n: int,
                         rng: Optional[np.random.Generator] = None) -> SampleMatrix:
    """``n`` draws of ``(Y, X)`` under shift ``shift`` (length p+1)."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    shift = np.asarray(shift, dtype=float).reshape(-1)
    if shift.size != spec.p + 1:
        raise ConfigError(f"shift has length {shift.size}, expected {spec.p + 1}")
    if spec.zero_target_shift:
        shift = shift.copy()
        shift[0] = 0.0
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    dr = _draws(spec, shift, n, rng)
    return _to_samples(dr.inv_noise + dr.inv_shift)


def simulate_environments(spec: SemSpec, n: int) -> list:
    """One sample set per configured shift, each from its own seeded stream."""
    return [simulate_environment(spec, a, n, environment_rng(spec, i))
            for i, a in enumerate(spec.shifts)]


@dataclass
class WorstRiskReport:
    probes: list
    base: list
    max_probe_risk: float
    max_base_risk: float
    slack: float
    se: float  # SE used in the one-sided bound
    cross_terms: list = field(default_factory=list)
    passed: bool = False

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("probes", "base", "max_probe_risk", "max_base_risk",
                                             "slack", "se", "cross_terms", "passed")}


def _risk(res2: np.ndarray):
    n = res2.size
    return float(res2.mean()), float(res2.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0


def worst_risk_probe(spec: SemSpec, beta, probes: Sequence[ShiftClassSample], n: int,
                     z: float = 3.0) -> WorstRiskReport:
    """Monte Carlo check that no probe in the scaling family beats the base maximum.

    Probes of base shift ``i`` reuse the draws of ``B`` and ``eps`` of base ``i``
    (common random numbers), so ``c = 1`` reproduces the base risk exactly.
    """
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.size != spec.p:
        raise ConfigError(f"beta has length {beta.size}, expected {spec.p}")
    u = np.concatenate([[1.0], -beta])
    base, cross, cache = [], [], {}
    for i, a in enumerate(spec.shifts):
        dr = _draws(spec, a, n, environment_rng(spec, i))
        re, ra = dr.inv_noise @ u, dr.inv_shift @ u
        cache[i] = (re, ra)
        risk, se = _risk((re + ra) ** 2)
        base.append({"base": i, "risk": risk, "se": se})
        ct, ct_se = _risk(2.0 * re * ra)
        cross.append({"base": i, "cross": ct, "se": ct_se,
                      "within_bound": abs(ct) <= z * ct_se})
    out = []
    for pr in probes:
        re, ra = cache[pr.base_index]
        risk, se = _risk((re + pr.c * ra) ** 2)
        out.append({"base": pr.base_index, "c": pr.c, "risk": risk, "se": se})
    top = max(base, key=lambda r: r["risk"])
    best_probe = max(out, key=lambda r: r["risk"]) if out else {"risk": -math.inf, "se": 0.0}
    se = math.hypot(top["se"], best_probe["se"])
    passed = best_probe["risk"] <= top["risk"] + z * se
    return WorstRiskReport(out, base, best_probe["risk"], top["risk"],
                           top["risk"] - best_probe["risk"], se, cross, bool(passed))
