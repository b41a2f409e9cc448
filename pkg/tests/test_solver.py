import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadminimax.consistency import classic_triple_point
from quadminimax.errors import NoAdmissibleCandidate, SingularForm
from quadminimax.instances import random_instance, random_moments
from quadminimax.risk import QuadraticForm, WeightScheme, build_forms, eval_max
from quadminimax import solver as sv
from quadminimax.solver import SolverOptions, solve


def qf(A, b, c):
    return QuadraticForm(np.atleast_2d(A), np.atleast_1d(b), c)


CLASSIC = [qf(1.0, 0.0, 0.0), qf(1.0, 2.0, 4.0)]


def test_inflexion_examples():
    assert np.allclose(sv.inflexion_point(qf(np.eye(2), [2.0, -1.0], 0)), [2, -1])
    assert np.allclose(sv.inflexion_point(qf(np.diag([2.0, 4.0]), [2.0, 4.0], 0)), [1, 1])
    with pytest.raises(SingularForm):
        sv.inflexion_point(qf(np.zeros((2, 2)), [0.0, 0.0], 0))


def test_classic_candidates():
    cands = sv.assemble_candidates(CLASSIC)
    by_beta = {round(float(c.beta[0]), 9): c for c in cands}
    assert set(by_beta) == {0.0, 2.0, 1.0}
    assert not by_beta[0.0].admissible and not by_beta[2.0].admissible
    assert by_beta[1.0].admissible and by_beta[1.0].f_value == pytest.approx(1.0)
    # inflexions come first, then intersections
    assert [c.source["kind"] for c in cands] == ["inflexion", "inflexion", "intersection"]


def test_single_form():
    rep = solve([qf(2.0, 2.0, 3.0)])
    assert len(rep.candidates) == 1 and rep.candidates[0].admissible
    assert rep.chosen_betas[0] == pytest.approx([1.0]) and rep.min_value == pytest.approx(1.0)


def test_offset_pair_reports_second_inflexion():
    rep = solve([qf(1.0, 0.0, 0.0), qf(1.0, 0.0, 1.0)])
    assert len(rep.chosen) == 1
    c = rep.candidates[rep.chosen[0]]
    assert c.label == "Inflexion(2)" and c.beta[0] == 0 and c.f_value == 1


def test_classic_select():
    rep = solve(CLASSIC, SolverOptions(epsilon=0.5))
    assert rep.min_value == pytest.approx(1.0, abs=1e-9)
    assert [rep.candidates[k].beta[0] for k in rep.chosen] == [pytest.approx(1.0, abs=1e-9)]
    assert rep.epsilon_set == rep.chosen
    wide = solve(CLASSIC, SolverOptions(epsilon=10.0))
    assert wide.epsilon_set == wide.chosen
    assert rep.epsilon == 0.5


def test_identical_forms_dedup():
    rep = solve([qf(1.0, 0.0, 0.0), qf(1.0, 0.0, 0.0)])
    assert len(rep.candidates) == 1 and rep.chosen == [0]
    assert len(rep.candidates[0].sources) == 2


def test_default_epsilon():
    rep = solve(CLASSIC)
    assert rep.epsilon == pytest.approx(1e-6 * 2)


def test_triangle_needs_vertex_stage():
    exp = classic_triple_point()
    qfs = build_forms(exp.scheme, exp.population)
    rep = solve(qfs)
    assert len(rep.chosen) == 1
    c = rep.candidates[rep.chosen[0]]
    assert c.source["kind"] == "vertex" and c.beta == pytest.approx([1.0, 5 / 12])
    with pytest.raises(NoAdmissibleCandidate) as info:
        solve(qfs, SolverOptions(mode="pairwise"))
    assert info.value.partial is not None and info.value.partial.candidates


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(mode="fast")
    with pytest.raises(ValueError):
        SolverOptions(epsilon=-1)


def test_report_roundtrip():
    rep = solve(CLASSIC)
    d = json.loads(json.dumps(rep.to_dict()))
    back = sv.SolutionReport.from_dict(d)
    assert back.to_dict() == d
    assert back.chosen == rep.chosen and back.min_value == rep.min_value


def test_point_set_distance_examples():
    assert sv.point_set_distance([1.0], [[1.0], [2.0]]) == 0
    assert sv.point_set_distance(0.0, [3.0, -1.0]) == 1
    assert sv.point_set_distance(0.0, []) == math.inf


def test_set_distance_examples():
    assert sv.set_distance([[1.0]], [[1.0]]) == 0
    assert sv.set_distance([[0.0]], [[0.0], [3.0]]) == 4
    assert sv.set_distance([[1.0]], [[2.0]]) == 2
    assert sv.set_distance([], []) == 0
    assert sv.set_distance([], [[1.0]]) == math.inf


def test_one_to_one_examples():
    S = [np.array([0.0]), np.array([1.0])]
    ok = sv.asymptotic_one_to_one_check([S, S, S], S, 0.5)
    assert ok.passed and ok.close_pairs == []
    bad = [np.array([0.0]), np.array([0.01]), np.array([1.0])]
    res = sv.asymptotic_one_to_one_check([S, bad], S, 0.05)
    assert not res.passed and res.close_pairs[0]["pair"] == (0, 1)


def test_one_to_one_shrinking_noise():
    rng = np.random.default_rng(3)
    S = [np.array([0.0, 0.0]), np.array([2.0, 1.0])]
    seq = [[[s + rng.normal(scale=1 / n, size=2) for s in S] for _ in range(10)]
           for n in (10, 100, 1000)]
    assert sv.asymptotic_one_to_one_check(seq, S, 0.5).passed


def _random_nonneg(seed, p=None, k=None, m=None):
    rng = np.random.default_rng(seed)
    p = p or int(rng.integers(1, 4))
    k = k or int(rng.integers(1, 5))
    m = m or int(rng.integers(1, 5))
    return random_instance(rng, p, k, m)


@settings(max_examples=25)
@given(st.integers(0, 2**31))
def test_chosen_points_are_first_order_optimal(seed):
    qfs, _, _ = _random_nonneg(seed)
    rep = solve(qfs)
    for k in rep.chosen:
        c = rep.candidates[k]
        assert sv.hull_distance(qfs, c.beta, c.active_set) <= 1e-5


@settings(max_examples=25)
@given(st.integers(0, 2**31))
def test_classic_unique_minimizer(seed):
    rng = np.random.default_rng(seed)
    p, k = int(rng.integers(1, 4)), int(rng.integers(1, 5))
    envs = [random_moments(rng, p) for _ in range(k)]
    rep = solve(build_forms(WeightScheme.classic(k), envs))
    assert len(rep.chosen) == 1


@settings(max_examples=20)
@given(st.integers(0, 2**31))
def test_row_permutation_invariance(seed):
    qfs, envs, scheme = _random_nonneg(seed)
    perm = np.random.default_rng(seed + 1).permutation(scheme.m)
    other = build_forms(WeightScheme(scheme.w[perm], scheme.kappa[perm]), envs)
    a, b = solve(qfs), solve(other)
    assert b.min_value == pytest.approx(a.min_value, rel=1e-9, abs=1e-9)
    assert sv.set_distance(a.chosen_betas, b.chosen_betas) <= 1e-7


@settings(max_examples=20)
@given(st.integers(0, 2**31))
def test_duplicate_row_invariance(seed):
    qfs, _, _ = _random_nonneg(seed)
    a, b = solve(qfs), solve(qfs + [qfs[0]])
    assert b.min_value == pytest.approx(a.min_value, rel=1e-9, abs=1e-9)
    assert sv.set_distance(a.chosen_betas, b.chosen_betas) <= 1e-7


@settings(max_examples=25)
@given(st.integers(0, 2**31))
def test_report_invariants(seed):
    qfs, _, _ = _random_nonneg(seed)
    rep = solve(qfs)
    for k in rep.chosen:
        assert rep.candidates[k].admissible and k in rep.epsilon_set
    for k in rep.epsilon_set:
        assert rep.candidates[k].f_value <= rep.min_value + rep.epsilon
    for c in rep.candidates:
        value, active = eval_max(qfs, c.beta)
        assert c.f_value == value and c.active_set == active


def test_dedup_prefers_admissible_source():
    a = sv.CandidatePoint(np.array([0.0]), {"kind": "inflexion", "i": 0}, 1.0, frozenset({1}),
                          False, [{"kind": "inflexion", "i": 0}])
    b = sv.CandidatePoint(np.array([1e-12]), {"kind": "inflexion", "i": 1}, 1.0,
                          frozenset({1}), True, [{"kind": "inflexion", "i": 1}])
    (m,) = sv.dedup_candidates([a, b])
    assert m.admissible and m.source["i"] == 1 and m.beta[0] == 0.0 and len(m.sources) == 2


def test_non_argmin_crossing_is_kept():
    # f3 = f4 crosses at two points; the one with smaller f3 is dominated by f1, the
    # other is the minimizer of the max
    qfs = [qf(2.40110736, 0.5260064, 1.1743639381637818),
           qf(3.5677423, 1.42968516, 2.313891411897889),
           qf(4.76158158, 1.25723154, 1.948189612073722),
           QuadraticForm([[-1.09120085]], [-0.34365196], 1.9859450046976448, "NonPositive")]
    full = solve(qfs)
    assert full.chosen_betas[0][0] == pytest.approx(0.5586, abs=1e-3)
    assert full.min_value == pytest.approx(2.0295, abs=1e-3)
    pairwise = solve(qfs, SolverOptions(mode="pairwise"))
    assert pairwise.min_value > full.min_value + 0.05
