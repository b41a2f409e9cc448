"""JSON run configuration for the command-line entry point."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import poly
from .errors import ConfigError
from .moments import CsvSchema, EnvironmentMoments, compute_moments, load_environment_csv
from .pencil import Tolerances
from .risk import WeightScheme
from .solver import MODES, SolverOptions
from .vertex import _GAMMA_SEED

_ENV_KEYS = {"csv", "target", "covariates", "moments"}
_TOP_KEYS = {"environments", "weights", "intercepts", "epsilon", "mode", "tolerances",
             "bisection", "seed"}
_TOL_KEYS = set(Tolerances().to_dict())


@dataclass
class EnvironmentSource:
    """Either a CSV file (path, target, covariate columns) or inline moments."""

    csv: Optional[str] = None
    target: Optional[str] = None
    covariates: Optional[list] = None
    moments: Optional[dict] = None

    def load(self, base: Path) -> EnvironmentMoments:
        if self.moments is not None:
            return EnvironmentMoments.from_dict(self.moments)
        path = Path(self.csv)
        if not path.is_absolute():
            path = base / path
        schema = CsvSchema(self.target, tuple(self.covariates))
        return compute_moments(load_environment_csv(path, schema))

    def to_dict(self) -> dict:
        if self.moments is not None:
            return {"moments": self.moments}
        return {"csv": self.csv, "target": self.target, "covariates": list(self.covariates)}


@dataclass
class RunConfig:
    environments: list
    weights: np.ndarray
    intercepts: np.ndarray
    epsilon: Optional[float] = None
    mode: str = "complete"
    tolerances: Tolerances = field(default_factory=Tolerances)
    bisections: int = poly.DEFAULT_BISECTIONS
    interval_budget: int = poly.INTERVAL_BUDGET
    seed: int = _GAMMA_SEED
    base_dir: Path = field(default=Path("."), repr=False)

    @property
    def scheme(self) -> WeightScheme:
        return WeightScheme(self.weights, self.intercepts)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(mode=self.mode, epsilon=self.epsilon, tolerances=self.tolerances,
                             bisections=self.bisections, interval_budget=self.interval_budget,
                             seed=self.seed)

    def load_moments(self) -> list:
        return [src.load(self.base_dir) for src in self.environments]

    def to_dict(self) -> dict:
        return {"environments": [e.to_dict() for e in self.environments],
                "weights": self.weights.tolist(), "intercepts": self.intercepts.tolist(),
                "epsilon": self.epsilon, "mode": self.mode,
                "tolerances": self.tolerances.to_dict(),
                "bisection": {"c_n": self.bisections, "interval_budget": self.interval_budget},
                "seed": self.seed}


def _env_source(d, idx) -> EnvironmentSource:
    if not isinstance(d, dict):
        raise ConfigError(f"environment {idx + 1} must be an object")
    extra = set(d) - _ENV_KEYS
    if extra:
        raise ConfigError(f"environment {idx + 1}: unknown keys {sorted(extra)}")
    if "moments" in d:
        return EnvironmentSource(moments=d["moments"])
    for key in ("csv", "target", "covariates"):
        if key not in d:
            raise ConfigError(f"environment {idx + 1}: missing {key!r}")
    if not d["covariates"]:
        raise ConfigError(f"environment {idx + 1}: covariates must be nonempty")
    return EnvironmentSource(csv=str(d["csv"]), target=str(d["target"]),
                             covariates=[str(c) for c in d["covariates"]])


def parse_config(d: dict, base_dir=".") -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(d) - _TOP_KEYS
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    envs = d.get("environments")
    if not envs:
        raise ConfigError("config needs a nonempty 'environments' list")
    sources = [_env_source(e, i) for i, e in enumerate(envs)]
    k = len(sources)
    weights = np.asarray(d.get("weights", np.eye(k)), dtype=float)
    if weights.ndim != 2:
        raise ConfigError("weights must be an m x k matrix")
    if weights.shape[1] != k:
        raise ConfigError(f"weights have {weights.shape[1]} columns but {k} environments")
    intercepts = np.asarray(d.get("intercepts", np.zeros(weights.shape[0])), dtype=float)
    tol_over = d.get("tolerances", {}) or {}
    bad = set(tol_over) - _TOL_KEYS
    if bad:
        raise ConfigError(f"unknown tolerance keys {sorted(bad)}")
    tol = Tolerances(**{k_: float(v) for k_, v in tol_over.items()})
    bis = d.get("bisection", {}) or {}
    mode = d.get("mode", "complete")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    eps = d.get("epsilon")
    if eps is not None and float(eps) < 0:
        raise ConfigError("epsilon must be >= 0")
    cfg = RunConfig(environments=sources, weights=weights, intercepts=intercepts,
                    epsilon=None if eps is None else float(eps), mode=mode, tolerances=tol,
                    bisections=int(bis.get("c_n", poly.DEFAULT_BISECTIONS)),
                    interval_budget=int(bis.get("interval_budget", poly.INTERVAL_BUDGET)),
                    seed=int(d.get("seed", _GAMMA_SEED)), base_dir=Path(base_dir))
    cfg.scheme  # validates sign classes and intercepts
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(d, base_dir=path.parent)
