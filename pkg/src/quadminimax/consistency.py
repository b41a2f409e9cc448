"""Monte Carlo convergence of the plug-in estimator to the population argmin set.

Samples are jointly normal with second-moment matrix ``[[G, Z], [Z^T, y2]]``
(mean zero), so their population moments equal the declared ones exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateInstance
from .moments import EnvironmentMoments, SampleMatrix, compute_moments
from .risk import WeightScheme, build_forms
from .solver import SolverOptions, set_distance, solve

DEFAULT_SCHEDULE = (100, 1000, 10000)


@dataclass
class ConsistencyExperiment:
    name: str
    population: list  # EnvironmentMoments, one per environment
    scheme: WeightScheme
    schedule: tuple = DEFAULT_SCHEDULE
    replications: int = 20
    seed: int = 0
    sampler: str = "normal"  # or "t" (unit-variance Student-t, df=5)
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.sampler not in ("normal", "t"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if len(self.population) != self.scheme.k:
            raise ValueError("one population moment set per environment is required")


def _root(block: np.ndarray) -> np.ndarray:
    """Symmetric square root; works for semi-definite blocks."""
    vals, vecs = np.linalg.eigh(block)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_environment(moments: EnvironmentMoments, n: int, rng: np.random.Generator,
                       sampler: str = "normal") -> SampleMatrix:
    """Draw ``n`` rows of ``(X, Y)`` with second-moment matrix ``moments.block()``."""
    d = moments.p + 1
    if sampler == "normal":
        z = rng.standard_normal((n, d))
    else:
        df = 5.0
        z = rng.standard_t(df, (n, d)) / np.sqrt(df / (df - 2.0))
    v = z @ _root(moments.block()).T
    return SampleMatrix(X=v[:, :moments.p], y=v[:, moments.p])


@dataclass
class ConsistencyPoint:
    n: int
    median_distance: float
    median_eps_size: float
    median_chosen: float
    distances: list
    chosen_sizes: list
    eps_sizes: list
    degenerate: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ConsistencyCurve:
    name: str
    reference: list  # population argmin betas
    points: list

    def to_rows(self) -> list:
        return [{"fixture": self.name, "n": pt.n, "median_distance": pt.median_distance,
                 "median_eps_size": pt.median_eps_size, "median_chosen": pt.median_chosen,
                 "degenerate": pt.degenerate} for pt in self.points]

    @property
    def strictly_decreasing(self) -> bool:
        d = [pt.median_distance for pt in self.points]
        return all(b < a for a, b in zip(d, d[1:]))


def reference_set(exp: ConsistencyExperiment) -> list:
    qfs = build_forms(exp.scheme, exp.population)
    return solve(qfs, exp.options).chosen_betas


def run_consistency(exp: ConsistencyExperiment) -> ConsistencyCurve:
    ref = reference_set(exp)
    streams = np.random.SeedSequence(exp.seed).spawn(len(exp.schedule) * exp.replications)
    points = []
    for a, n in enumerate(exp.schedule):
        dists, chosen, esz, degen = [], [], [], 0
        for r in range(exp.replications):
            rng = np.random.default_rng(streams[a * exp.replications + r])
            envs = [compute_moments(sample_environment(m, n, rng, exp.sampler))
                    for m in exp.population]
            try:
                rep = solve(build_forms(exp.scheme, envs), exp.options)
            except DegenerateInstance:
                degen += 1
                dists.append(np.inf)
                chosen.append(0)
                esz.append(0)
                continue
            dists.append(set_distance(rep.epsilon_betas, ref))
            chosen.append(len(rep.chosen))
            esz.append(len(rep.epsilon_set))
        points.append(ConsistencyPoint(int(n), float(np.median(dists)), float(np.median(esz)),
                                       float(np.median(chosen)), [float(x) for x in dists],
                                       chosen, esz, degen))
    return ConsistencyCurve(exp.name, [b.tolist() for b in ref], points)


def _env(G, Z, y2):
    return EnvironmentMoments(G=np.atleast_2d(G), Z=np.atleast_1d(Z), y2=y2)


def classic_two_env(**kw) -> ConsistencyExperiment:
    """p=1; the minimizer is the crossing beta = (3 - sqrt 3)/2 of the two risks."""
    pop = [_env(1.0, 0.5, 1.0), _env(2.0, 2.0, 2.5)]
    return ConsistencyExperiment("classic_two_env", pop, WeightScheme.classic(2), **kw)


def classic_triple_point(**kw) -> ConsistencyExperiment:
    """p=2, three environments whose risks meet at a single point (three forms active)."""
    centres = [np.array([0.0, 0.0]), np.array([2.0, 0.0]), np.array([1.0, 1.5])]
    pop = [_env(np.eye(2), c, float(c @ c) + 0.5) for c in centres]
    return ConsistencyExperiment("classic_triple_point", pop, WeightScheme.classic(3), **kw)


def mixed_weights(**kw) -> ConsistencyExperiment:
    """p=1, k=2, m=3 with intercepts and one NonPositive row."""
    pop = [_env(1.0, 0.5, 1.0), _env(2.0, 2.0, 2.5)]
    scheme = WeightScheme(w=np.array([[1.0, 0.0], [0.5, 0.5], [-0.2, 0.0]]),
                          kappa=np.array([0.0, 0.3, 1.2]))
    return ConsistencyExperiment("mixed_weights", pop, scheme, **kw)


def shipped_fixtures(**kw) -> list:
    return [classic_two_env(**kw), classic_triple_point(**kw), mixed_weights(**kw)]
