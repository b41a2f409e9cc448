"""Affine combinations of quadratic risks as explicit quadratic forms.

Each combination is ``f_i(beta) = kappa_i + sum_u w_i(u) R_u(beta)`` with
``R_u(beta) = y2_u - 2 beta.Z_u + beta G_u beta``, so it is stored as
``(A, b, c)`` with ``f_i(beta) = beta A beta - 2 beta.b + c``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .moments import EnvironmentMoments

TAU_ACTIVE = 1e-9


class SignClass(str, enum.Enum):
    NON_NEGATIVE = "NonNegative"
    NON_POSITIVE = "NonPositive"

    @property
    def sign(self) -> int:
        return 1 if self is SignClass.NON_NEGATIVE else -1


def _row_sign_class(row: np.ndarray, index: int) -> SignClass:
    if np.all(row >= 0) and np.any(row > 0):
        return SignClass.NON_NEGATIVE
    if np.all(row <= 0) and np.any(row < 0):
        return SignClass.NON_POSITIVE
    raise ConfigError(
        f"weight row {index + 1} must be all >= 0 with one > 0, or all <= 0 with one < 0;"
        f" got {row.tolist()}")


@dataclass(frozen=True)
class WeightScheme:
    """The m affine combinations: weights ``w`` (m x k) and intercepts ``kappa``."""

    w: np.ndarray
    kappa: np.ndarray

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.w, dtype=float))
        kappa = np.asarray(self.kappa, dtype=float).reshape(-1)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ConfigError("weights must be a nonempty m x k matrix")
        if kappa.size != w.shape[0]:
            raise ConfigError(
                f"{w.shape[0]} weight rows but {kappa.size} intercepts")
        if not (np.isfinite(w).all() and np.isfinite(kappa).all()):
            raise ConfigError("weights and intercepts must be finite")
        for i, k in enumerate(kappa):
            if k < 0:
                raise ConfigError(f"intercept {i + 1} is negative ({k})")
        classes = tuple(_row_sign_class(row, i) for i, row in enumerate(w))
        if SignClass.NON_NEGATIVE not in classes:
            raise ConfigError("at least one weight row must be NonNegative")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "_classes", classes)

    @property
    def m(self) -> int:
        return self.w.shape[0]

    @property
    def k(self) -> int:
        return self.w.shape[1]

    @property
    def sign_classes(self) -> tuple:
        return self._classes

    @classmethod
    def classic(cls, k: int) -> "WeightScheme":
        """The per-environment maximum: ``m = k``, identity weights, zero intercepts."""
        return cls(w=np.eye(k), kappa=np.zeros(k))


@dataclass(frozen=True)
class QuadraticForm:
    A: np.ndarray
    b: np.ndarray
    c: float
    sign_class: SignClass = SignClass.NON_NEGATIVE

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape != (b.size, b.size):
            raise DimensionMismatch(f"A has shape {A.shape} but b has length {b.size}")
        if np.abs(A - A.T).max() > 1e-12 * (1.0 + np.abs(A).max()):
            raise DimensionMismatch("A must be symmetric")
        object.__setattr__(self, "A", 0.5 * (A + A.T))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "sign_class", SignClass(self.sign_class))

    @property
    def p(self) -> int:
        return self.b.size

    def __call__(self, beta):
        return eval_form(self, beta)

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist(), "c": self.c,
                "sign_class": self.sign_class.value}

    @classmethod
    def from_dict(cls, d: dict) -> "QuadraticForm":
        return cls(A=d["A"], b=d["b"], c=d["c"],
                   sign_class=d.get("sign_class", "NonNegative"))


def build_quadratic_form(scheme: WeightScheme, row: int,
                         envs: Sequence[EnvironmentMoments]) -> QuadraticForm:
    if len(envs) != scheme.k:
        raise DimensionMismatch(f"scheme has k={scheme.k} but {len(envs)} environments given")
    p = envs[0].p
    if any(e.p != p for e in envs):
        raise DimensionMismatch("environments disagree on the covariate dimension")
    w = scheme.w[row]
    A = sum(w[u] * envs[u].G for u in range(scheme.k))
    b = sum(w[u] * envs[u].Z for u in range(scheme.k))
    c = scheme.kappa[row] + sum(w[u] * envs[u].y2 for u in range(scheme.k))
    return QuadraticForm(A=A, b=b, c=c, sign_class=scheme.sign_classes[row])


def build_forms(scheme: WeightScheme, envs: Sequence[EnvironmentMoments]) -> list:
    return [build_quadratic_form(scheme, i, envs) for i in range(scheme.m)]


def _as_beta(qf: QuadraticForm, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 0:
        beta = beta.reshape(1)
    if beta.shape[-1] != qf.p:
        raise DimensionMismatch(f"beta has length {beta.shape[-1]}, expected {qf.p}")
    return beta


def eval_form(qf: QuadraticForm, beta):
    """``beta A beta - 2 beta.b + c``; ``beta`` may be a batch of shape (..., p)."""
    beta = _as_beta(qf, beta)
    quad = np.einsum("...i,ij,...j->...", beta, qf.A, beta)
    val = quad - 2.0 * (beta @ qf.b) + qf.c
    return float(val) if np.ndim(val) == 0 else val


def eval_max(qfs: Sequence[QuadraticForm], beta, tau: float = TAU_ACTIVE):
    """Return ``(max_i f_i(beta), active index set)``.

    An index is active when it lies within ``tau * (1 + |max|)`` of the maximum.
    """
    if not qfs:
        raise ValueError("need at least one quadratic form")
    values = np.array([eval_form(q, beta) for q in qfs])
    top = float(values.max())
    tol = tau * (1.0 + abs(top))
    active = frozenset(int(i) for i in np.flatnonzero(values >= top - tol))
    return top, active


def eval_max_batch(qfs: Sequence[QuadraticForm], betas: np.ndarray) -> np.ndarray:
    """Vectorised ``max_i f_i`` over the rows of ``betas``."""
    out = eval_form(qfs[0], betas)
    for q in qfs[1:]:
        out = np.maximum(out, eval_form(q, betas))
    return out


def eval_gap(qf_i: QuadraticForm, qf_j: QuadraticForm, beta) -> float:
    return eval_form(qf_i, beta) - eval_form(qf_j, beta)


def gradient(qf: QuadraticForm, beta) -> np.ndarray:
    """``2 (A beta - b)``."""
    beta = _as_beta(qf, beta)
    return 2.0 * (beta @ qf.A - qf.b)
