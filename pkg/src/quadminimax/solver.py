"""Candidate enumeration and selection for ``min_beta max_i f_i(beta)``.

Candidates, in order:

* inflexion points ``A_i^{-1} b_i`` (one form active),
* stationary points of ``f_i`` on ``{f_i = f_j}`` for pairs ``i < j`` (pencil roots;
  every root in ``mode="complete"``, only the roots minimizing ``f_i`` in ``mode="pairwise"``),
* KKT points with three or more forms active (``mode="complete"`` only).

The last group is not part of the pairwise construction, but for ``m >= 3``
the minimizer can sit where three forms meet (a positive-measure event), so
the default mode adds it.  ``mode="pairwise"`` keeps the pairwise construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from . import poly
from .errors import (DegenerateInstance, IsolationBudgetExceeded, NoAdmissibleCandidate,
                     SingularForm)
from .pencil import (Tolerances, forms_identical, intersection_candidates,
                     singularity_guard)
from .risk import QuadraticForm, eval_max, gradient
from .vertex import _GAMMA_SEED, vertex_candidates

MODES = ("complete", "pairwise")
DEDUP_RTOL = 1e-8


def inflexion_point(qf: QuadraticForm, tau: float = 1e-10) -> np.ndarray:
    """Stationary point ``A^{-1} b`` of a single form."""
    if not singularity_guard(qf.A, tau):
        raise SingularForm("form has a singular quadratic part; inflexion point undefined")
    return np.linalg.solve(qf.A, qf.b)


@dataclass
class SolverOptions:
    mode: str = "complete"
    epsilon: Optional[float] = None  # default 1e-6 * (1 + |min|)
    tolerances: Tolerances = field(default_factory=Tolerances)
    bisections: int = poly.DEFAULT_BISECTIONS
    interval_budget: int = poly.INTERVAL_BUDGET
    max_active: Optional[int] = None  # largest vertex active set; default p + 1
    seed: int = _GAMMA_SEED

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "epsilon": self.epsilon,
                "tolerances": self.tolerances.to_dict(), "bisections": self.bisections,
                "interval_budget": self.interval_budget, "max_active": self.max_active,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SolverOptions":
        d = dict(d)
        tol = Tolerances(**d.pop("tolerances", {}))
        return cls(tolerances=tol, **d)


def _source_label(src: dict) -> str:
    kind = src["kind"]
    if kind == "inflexion":
        return f"Inflexion({src['i'] + 1})"
    if kind == "intersection":
        return f"Intersection({src['i'] + 1},{src['j'] + 1},{src['lambda']!r})"
    return "Vertex(" + ",".join(str(i + 1) for i in src["active"]) + ")"


def _defining(src: dict) -> tuple:
    if src["kind"] == "inflexion":
        return (src["i"],)
    if src["kind"] == "intersection":
        return (src["i"], src["j"])
    return tuple(src["active"])


def _src_to_json(src: dict) -> dict:
    out = {"kind": src["kind"], "label": _source_label(src)}
    if src["kind"] == "inflexion":
        out["i"] = src["i"] + 1
    elif src["kind"] == "intersection":
        out.update(i=src["i"] + 1, j=src["j"] + 1, **{"lambda": src["lambda"]})
    else:
        out.update(active=[i + 1 for i in src["active"]], mu=list(src["mu"]))
    return out


def _src_from_json(d: dict) -> dict:
    if d["kind"] == "inflexion":
        return {"kind": "inflexion", "i": d["i"] - 1}
    if d["kind"] == "intersection":
        return {"kind": "intersection", "i": d["i"] - 1, "j": d["j"] - 1,
                "lambda": d["lambda"]}
    return {"kind": "vertex", "active": tuple(i - 1 for i in d["active"]),
            "mu": tuple(d["mu"])}


@dataclass
class CandidatePoint:
    """One candidate with provenance.

    ``source`` is the primary source; ``sources`` lists every construction
    that produced (numerically) the same point.  Indices are 0-based here and
    1-based in the JSON form.
    """

    beta: np.ndarray
    source: dict
    f_value: float
    active_set: frozenset
    admissible: bool
    sources: list = field(default_factory=list)

    @property
    def label(self) -> str:
        return _source_label(self.source)

    def to_dict(self) -> dict:
        return {"beta": [float(x) for x in self.beta], "source": _src_to_json(self.source),
                "f_value": float(self.f_value),
                "active": sorted(i + 1 for i in self.active_set),
                "admissible": bool(self.admissible),
                "sources": [_src_to_json(s) for s in self.sources]}

    @classmethod
    def from_dict(cls, d: dict) -> "CandidatePoint":
        return cls(beta=np.array(d["beta"], dtype=float), source=_src_from_json(d["source"]),
                   f_value=float(d["f_value"]),
                   active_set=frozenset(i - 1 for i in d["active"]),
                   admissible=bool(d["admissible"]),
                   sources=[_src_from_json(s) for s in d.get("sources", [])])


def _make_candidate(qfs, beta, src, tau_active) -> CandidatePoint:
    value, active = eval_max(qfs, beta, tau_active)
    adm = any(i in active for i in _defining(src))
    return CandidatePoint(np.asarray(beta, dtype=float), src, value, active, adm, [src])


def dedup_candidates(cands: Sequence[CandidatePoint], rtol: float = DEDUP_RTOL) -> list:
    """Merge candidates closer than ``rtol * (1 + ||beta||)``.

    The merged point keeps the coordinates of its earliest member; its primary
    source is the earliest admissible source (or the earliest one if none is
    admissible), and it is admissible when any member is.
    """
    merged: list = []
    for c in cands:
        for m in merged:
            if np.linalg.norm(c.beta - m.beta) <= rtol * (1.0 + np.linalg.norm(m.beta)):
                m.sources.extend(c.sources)
                if c.admissible and not m.admissible:
                    m.admissible = True
                    m.source = c.source
                break
        else:
            merged.append(CandidatePoint(c.beta, c.source, c.f_value, c.active_set,
                                         c.admissible, list(c.sources)))
    return merged


def _distinct_representatives(qfs) -> list:
    reps = []
    for i, q in enumerate(qfs):
        if not any(forms_identical(qfs[r], q) for r in reps):
            reps.append(i)
    return reps


def assemble_candidates(qfs: Sequence[QuadraticForm], options: Optional[SolverOptions] = None,
                        diagnostics: Optional[dict] = None) -> list:
    """The ordered, deduplicated candidate list (see module docstring)."""
    options = options or SolverOptions()
    tol = options.tolerances
    diag = diagnostics if diagnostics is not None else {}
    diag.setdefault("inflexions", [])
    diag.setdefault("pairs", [])
    diag.setdefault("vertices", [])
    diag.setdefault("warnings", [])
    m = len(qfs)
    raw = []
    for i, q in enumerate(qfs):
        try:
            beta = inflexion_point(q, tol.tau_sing)
        except SingularForm as exc:
            diag["inflexions"].append({"i": i + 1, "status": "SingularForm"})
            diag["warnings"].append(f"form {i + 1}: {exc}")
            continue
        diag["inflexions"].append({"i": i + 1, "status": "ok"})
        raw.append(_make_candidate(qfs, beta, {"kind": "inflexion", "i": i}, tol.tau_active))
    for i, j in itertools.combinations(range(m), 2):
        try:
            res = intersection_candidates(qfs[i], qfs[j], i, j, tol, options.bisections,
                                          options.interval_budget)
        except (DegenerateInstance, IsolationBudgetExceeded) as exc:
            diag["pairs"].append({"pair": [i + 1, j + 1], "error": type(exc).__name__,
                                  "message": str(exc)})
            diag["warnings"].append(f"pair ({i + 1},{j + 1}): {type(exc).__name__}: {exc}")
            continue
        diag["pairs"].append(res.to_dict())
        if "ProportionalForms" in res.flags and qfs[i].p > 1 \
                and qfs[i].sign_class is not qfs[j].sign_class:
            diag["warnings"].append(
                f"pair ({i + 1},{j + 1}): proportional forms of opposite sign; their crossing"
                " is a continuum and the argmin may not be a finite set")
        # the argmin of f_i over the crossings can be a point where f_i is not the max
        # while another crossing is the minimizer, so complete mode keeps every root
        keep = res.argmin if options.mode == "pairwise" else range(len(res.betas))
        for k in keep:
            lam = res.lambdas[k]
            src = {"kind": "intersection", "i": i, "j": j,
                   "lambda": None if math.isnan(lam) else float(lam)}
            raw.append(_make_candidate(qfs, res.betas[k], src, tol.tau_active))
    if options.mode == "complete" and m >= 3:
        p = qfs[0].p
        top = options.max_active or (p + 1)
        reps = _distinct_representatives(qfs)
        for s in range(3, min(len(reps), top) + 1):
            for S in itertools.combinations(reps, s):
                vr = vertex_candidates(qfs, S, tau_gap=tol.tau_gap, seed=options.seed)
                diag["vertices"].append(vr.to_dict())
                if vr.paths is not None and vr.paths.failed:
                    diag["warnings"].append(
                        f"active set {[x + 1 for x in S]}: {vr.paths.failed} homotopy paths failed")
                for vc in vr.candidates:
                    src = {"kind": "vertex", "active": tuple(S),
                           "mu": tuple(float(x) for x in vc.mu)}
                    cand = _make_candidate(qfs, vc.beta, src, tol.tau_active)
                    cand.admissible = set(S) <= cand.active_set
                    raw.append(cand)
    return dedup_candidates(raw)


@dataclass
class SolutionReport:
    candidates: list
    chosen: list
    epsilon_set: list
    min_value: float
    epsilon: float
    diagnostics: dict = field(default_factory=dict)
    options: Optional[SolverOptions] = None

    @property
    def chosen_betas(self) -> list:
        return [self.candidates[k].beta for k in self.chosen]

    @property
    def epsilon_betas(self) -> list:
        return [self.candidates[k].beta for k in self.epsilon_set]

    def to_dict(self) -> dict:
        return {"candidates": [c.to_dict() for c in self.candidates],
                "chosen": list(self.chosen), "epsilon_set": list(self.epsilon_set),
                "min_value": self.min_value, "epsilon": self.epsilon,
                "diagnostics": self.diagnostics,
                "options": None if self.options is None else self.options.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "SolutionReport":
        opts = d.get("options")
        return cls(candidates=[CandidatePoint.from_dict(c) for c in d["candidates"]],
                   chosen=list(d["chosen"]), epsilon_set=list(d["epsilon_set"]),
                   min_value=d["min_value"], epsilon=d["epsilon"],
                   diagnostics=d.get("diagnostics", {}),
                   options=None if opts is None else SolverOptions.from_dict(opts))


def select(candidates: Sequence[CandidatePoint], epsilon: Optional[float] = None,
           tau_active: float = 1e-9, diagnostics: Optional[dict] = None) -> SolutionReport:
    """Pick the admissible argmins and the epsilon-set."""
    adm = [k for k, c in enumerate(candidates) if c.admissible]
    if not adm:
        raise NoAdmissibleCandidate(
            f"none of {len(candidates)} candidates is admissible", diagnostics=diagnostics)
    best = min(candidates[k].f_value for k in adm)
    cut = best + tau_active * (1.0 + abs(best))
    eps = 1e-6 * (1.0 + abs(best)) if epsilon is None else float(epsilon)
    chosen = [k for k in adm if candidates[k].f_value <= cut]
    eset = [k for k in adm if candidates[k].f_value <= best + eps or k in chosen]
    return SolutionReport(list(candidates), chosen, eset, float(best), eps,
                          diagnostics if diagnostics is not None else {})


def solve(qfs: Sequence[QuadraticForm], options: Optional[SolverOptions] = None) -> SolutionReport:
    options = options or SolverOptions()
    if not qfs:
        raise ValueError("need at least one quadratic form")
    diag: dict = {}
    cands = assemble_candidates(qfs, options, diag)
    try:
        report = select(cands, options.epsilon, options.tolerances.tau_active, diag)
    except NoAdmissibleCandidate as exc:
        exc.partial = SolutionReport(cands, [], [], math.nan, math.nan, diag, options)
        raise
    report.options = options
    return report


def hull_distance(qfs: Sequence[QuadraticForm], beta, active) -> float:
    """Distance from 0 to conv{grad f_i(beta) : i in active}, relative to the gradient scale."""
    grads = np.array([gradient(qfs[i], beta) for i in sorted(active)]).T
    scale = 1.0 + np.linalg.norm(grads, axis=0).max()
    G = grads / scale
    w = 1e3
    Aug = np.vstack([G, w * np.ones((1, G.shape[1]))])
    rhs = np.concatenate([np.zeros(G.shape[0]), [w]])
    mu, _ = nnls(Aug, rhs)
    mu = mu / mu.sum()
    return float(np.linalg.norm(G @ mu))


# ---------------------------------------------------------------- set metrics

def point_set_distance(x, E) -> float:
    """``d(x, E) = inf_{y in E} ||x - y||``; +inf for empty E."""
    E = [np.atleast_1d(np.asarray(e, dtype=float)) for e in E]
    if not E:
        return math.inf
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(min(np.linalg.norm(x - e) for e in E))


def set_distance(A, B) -> float:
    """``1{|A| != |B|} + sum_a d(a, B) + sum_b d(b, A)``."""
    A, B = list(A), list(B)
    out = 0.0 if len(A) == len(B) else 1.0
    if not A and not B:
        return out
    if not A or not B:
        return math.inf
    out += sum(point_set_distance(a, B) for a in A)
    out += sum(point_set_distance(b, A) for b in B)
    return float(out)


@dataclass
class OneToOneDiagnostics:
    passed: bool
    medians: list
    monotone: bool
    close_pairs: list


def asymptotic_one_to_one_check(sequence, S, delta: float) -> OneToOneDiagnostics:
    """Empirical check of asymptotic one-to-one convergence of ``S_n`` to ``S``.

    ``sequence`` holds, per n in increasing order, either one finite set or a
    list of replicated sets.  Passes when the median of ``max_{s in S_n} d(s, S)``
    is nonincreasing along the sequence and points of the last sets are
    pairwise more than ``delta`` apart.
    """
    medians = []
    last = []
    for entry in sequence:
        reps = entry if entry and isinstance(entry[0], (list, tuple)) else [entry]
        dev = [max((point_set_distance(s, S) for s in rep), default=0.0) for rep in reps]
        medians.append(float(np.median(dev)))
        last = reps
    monotone = all(b <= a + 1e-15 for a, b in zip(medians, medians[1:]))
    close = []
    for r, rep in enumerate(last):
        for a, b in itertools.combinations(range(len(rep)), 2):
            gap = float(np.linalg.norm(np.asarray(rep[a], float) - np.asarray(rep[b], float)))
            if gap <= delta:
                close.append({"replication": r, "pair": (a, b), "distance": gap})
    return OneToOneDiagnostics(monotone and not close, medians, monotone, close)
