import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadminimax.errors import ConfigError, DegenerateInstance
from quadminimax.sem import (CoefficientSampler, NoiseSpec, SemSpec, ShiftClassSample,
                             c_grid_probes, environment_rng, simulate_environment,
                             simulate_environments, worst_risk_probe)


def spec_from(p, mean=None, scale=0.0, noise="normal", shifts=None, seed=0, **kw):
    d = p + 1
    mean = np.zeros((d, d)) if mean is None else mean
    shifts = shifts if shifts is not None else [np.zeros(d)]
    return SemSpec(p, CoefficientSampler(mean, scale), NoiseSpec(noise), shifts, seed, **kw)


def test_identity_solve_returns_shift():
    A = np.array([1.5, -2.0, 0.25])
    s = simulate_environment(spec_from(2, noise="zero", shifts=[A]), A, 50)
    assert np.all(s.y == 1.5) and np.all(s.X == A[1:])


def test_clt_mean_bound():
    n = 100_000
    s = simulate_environment(spec_from(2), np.zeros(3), n, np.random.default_rng(1))
    means = np.concatenate([[s.y.mean()], s.X.mean(axis=0)])
    assert np.all(np.abs(means) <= 4 / np.sqrt(n))


def test_fixed_B_solve():
    B = np.array([[0.0, 0.5, 0.0], [0.0, 0.0, 0.3], [0.2, 0.0, 0.0]])
    A = np.array([1.0, 2.0, -1.0])
    s = simulate_environment(spec_from(2, mean=B, noise="zero", shifts=[A]), A, 5)
    ref = np.linalg.solve(np.eye(3) - B, A)
    assert np.allclose(s.y, ref[0]) and np.allclose(s.X, ref[1:])


def test_zero_target_shift():
    spec = spec_from(1, noise="zero", shifts=[[3.0, 1.0]], zero_target_shift=True)
    assert spec.shifts[0][0] == 0
    s = simulate_environment(spec, [3.0, 1.0], 3)
    assert np.all(s.y == 0) and np.all(s.X == 1)


def test_spec_validation():
    with pytest.raises(ConfigError):
        spec_from(2, shifts=[[1.0, 2.0]])
    with pytest.raises(ConfigError):
        SemSpec(2, CoefficientSampler(np.zeros((2, 2))), NoiseSpec(), [np.zeros(3)])
    with pytest.raises(ConfigError):
        NoiseSpec("cauchy")
    with pytest.raises(ConfigError):
        ShiftClassSample(0, 1.5)


def test_singular_B_raises():
    spec = spec_from(1, mean=np.eye(2), noise="zero", shifts=[[1.0, 1.0]])
    with pytest.raises(DegenerateInstance):
        simulate_environment(spec, [1.0, 1.0], 3)


def test_spec_roundtrip(data_dir):
    raw = json.loads((data_dir / "sem_spec.json").read_text())
    spec = SemSpec.from_dict(raw)
    again = SemSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert again.to_dict() == spec.to_dict()
    assert spec.k == 3


def test_streams_are_deterministic_and_distinct(data_dir):
    spec = SemSpec.from_dict(json.loads((data_dir / "sem_spec.json").read_text()))
    a, b = simulate_environments(spec, 100), simulate_environments(spec, 100)
    for x, y in zip(a, b):
        assert np.array_equal(x.X, y.X) and np.array_equal(x.y, y.y)
    r0, r1 = environment_rng(spec, 0).random(), environment_rng(spec, 1).random()
    assert r0 != r1


def _probe_spec(seed=0):
    B = np.array([[0.0, 0.3, 0.2], [0.0, 0.0, 0.4], [0.1, 0.0, 0.0]])
    return spec_from(2, mean=B, scale=0.1, shifts=[[0, 1, 0], [0.5, 0, 2], [0, -1, 1]],
                     seed=seed)


def test_c1_reproduces_base():
    spec = _probe_spec()
    rep = worst_risk_probe(spec, [0.3, -0.2], [ShiftClassSample(i, 1.0) for i in range(3)], 2000)
    for pr, b in zip(rep.probes, rep.base):
        assert pr["risk"] == b["risk"]


def test_c0_probe_below_max_base():
    spec = _probe_spec(seed=5)
    rep = worst_risk_probe(spec, [0.1, 0.1], [ShiftClassSample(i, 0.0) for i in range(3)], 100_000)
    assert rep.passed


@settings(max_examples=5)
@given(st.integers(0, 2**20))
def test_grid_probes_bounded_and_monotone(seed):
    spec = _probe_spec(seed)
    beta = np.random.default_rng(seed).normal(size=2)
    rep = worst_risk_probe(spec, beta, c_grid_probes(spec.k), 20_000)
    assert rep.passed
    for i in range(spec.k):
        rs = [p for p in rep.probes if p["base"] == i]
        for lo, hi in zip(rs, rs[1:]):
            assert hi["risk"] >= lo["risk"] - 3 * np.hypot(lo["se"], hi["se"])
    assert all(ct["within_bound"] or abs(ct["cross"]) <= 4 * ct["se"] for ct in rep.cross_terms)


def test_beta_length_checked():
    with pytest.raises(ConfigError):
        worst_risk_probe(_probe_spec(), [0.0], c_grid_probes(3), 10)
