"""Random test instances (population moments and weight schemes)."""

from __future__ import annotations

import numpy as np

from .moments import EnvironmentMoments
from .risk import WeightScheme, build_forms


def random_moments(rng: np.random.Generator, p: int, jitter: float = 0.1) -> EnvironmentMoments:
    """Moments of a random (p+1)-dim second-moment matrix, positive definite."""
    L = rng.normal(size=(p + 1, p + 1))
    block = L @ L.T / (p + 1) + jitter * np.eye(p + 1)
    return EnvironmentMoments(block[:p, :p], block[:p, p], block[p, p])


def random_nonnegative_scheme(rng: np.random.Generator, k: int, m: int) -> WeightScheme:
    w = rng.uniform(0.0, 1.0, size=(m, k))
    w[w < 0.3] = 0.0
    w[np.arange(m), rng.integers(0, k, m)] += 0.5
    return WeightScheme(w, rng.uniform(0.0, 1.0, m))


def random_mixed_scheme(rng: np.random.Generator, k: int, m: int) -> WeightScheme:
    """At least one NonNegative and one NonPositive row (m >= 2, k >= 2)."""
    if m < 2 or k < 2:
        raise ValueError("a mixed scheme needs m >= 2 and k >= 2")
    signs = np.ones(m)
    n_neg = int(rng.integers(1, m))
    signs[rng.permutation(m)[:n_neg]] = -1.0
    # dense rows: sparse rows of opposite sign on one environment give proportional forms
    w = rng.uniform(0.2, 1.0, size=(m, k))
    # concave rows get smaller weights and larger intercepts so that they bind
    w = np.where(signs[:, None] > 0, w, -0.3 * w)
    kappa = np.where(signs > 0, rng.uniform(0.0, 1.0, m), rng.uniform(0.5, 2.5, m))
    return WeightScheme(w, kappa)


def random_instance(rng: np.random.Generator, p: int, k: int, m: int, mixed: bool = False):
    """Return ``(forms, moments, scheme)``."""
    envs = [random_moments(rng, p) for _ in range(k)]
    scheme = random_mixed_scheme(rng, k, m) if mixed else random_nonnegative_scheme(rng, k, m)
    return build_forms(scheme, envs), envs, scheme
