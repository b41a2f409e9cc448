import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quadminimax import poly
from quadminimax.errors import DegenerateInstance, IsolationBudgetExceeded
from quadminimax.poly import Polynomial, RootBracket

P2 = Polynomial([-2.0, 0.0, 1.0])  # x^2 - 2


def test_eval_examples():
    assert poly.eval_poly(P2, 2.0) == 2
    assert poly.eval_poly(Polynomial([0.0]), 7.0) == 0
    assert poly.eval_poly(Polynomial([3.0]), 5.0) == 3
    assert np.allclose(P2(np.array([0.0, 1.0])), [-2, -1])


def test_derivative_examples():
    assert poly.derivative(P2) == Polynomial([0.0, 2.0])
    assert poly.derivative(Polynomial([4.0])).is_zero()
    assert poly.derivative(Polynomial([0.0, 1.0, 0.0, 1.0])) == Polynomial([1.0, 0.0, 3.0])


def test_zero_polynomial_degree():
    assert Polynomial([0.0, 0.0]).degree == -1 and Polynomial([]).is_zero()


def test_resultant_examples():
    assert poly.sylvester_resultant(Polynomial([-1, 1]), Polynomial([-1, 1])) == pytest.approx(0, abs=1e-14)
    assert poly.sylvester_resultant(Polynomial([-1, 1]), Polynomial([1, 1])) == pytest.approx(2)
    # prod over the root 0 of Q of P(0) = -1
    assert poly.sylvester_resultant(Polynomial([-1, 0, 1]), Polynomial([0, 1])) == pytest.approx(-1)


def test_resultant_rejects_zero():
    with pytest.raises(ValueError):
        poly.sylvester_resultant(Polynomial([0.0]), P2)


def test_discriminant_examples():
    assert poly.discriminant(P2) == pytest.approx(8)
    assert poly.discriminant(Polynomial([1, 0, 1])) == pytest.approx(-4)
    assert poly.discriminant(Polynomial([1, -2, 1])) == pytest.approx(0, abs=1e-12)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10).filter(lambda a: abs(a) > 1e-3))
def test_quadratic_discriminant_is_b2_minus_4ac(c, b, a):
    d = poly.discriminant(Polynomial([c, b, a]))
    ref = b * b - 4 * a * c
    assert d == pytest.approx(ref, rel=1e-12, abs=1e-12 * (b * b + abs(4 * a * c)))


def test_lagrange_bound_examples():
    assert poly.lagrange_root_bound(P2) == 2
    assert poly.lagrange_root_bound(Polynomial([-3, 1])) == 3
    assert poly.lagrange_root_bound(Polynomial([0, 0, 0, 1])) == 1
    assert np.abs(poly.real_companion_roots(P2)).max() <= 2


def test_rump_examples():
    d = poly.rump_separation(P2)
    ref = math.exp(math.log(8) + math.log(4) - 2 * (math.log(2) + 3) * math.log(3))
    assert d == pytest.approx(ref, rel=1e-12)
    assert d == pytest.approx(9.6e-3, rel=0.05)
    assert d <= 2 * math.sqrt(2)
    assert poly.rump_separation(Polynomial([-1, 0, 1])) <= 2
    with pytest.raises(DegenerateInstance):
        poly.rump_separation(Polynomial([1, -2, 1]))


def test_isolate_examples():
    br = poly.isolate_real_roots(P2, 2.0, 0.5)
    assert len(br) == 2
    assert br[0].lo < -math.sqrt(2) < br[0].hi and br[1].lo < math.sqrt(2) < br[1].hi
    assert poly.isolate_real_roots(Polynomial([1, 0, 1]), 2.0, 0.5) == []
    br = poly.isolate_real_roots(Polynomial([0, 1]), 1.0, 0.3)
    assert len(br) == 1 and br[0].lo < 0 < br[0].hi


def test_isolate_budget():
    with pytest.raises(IsolationBudgetExceeded):
        poly.isolate_real_roots(P2, 2.0, 1e-9, budget=1000)


def test_sturm_examples():
    assert poly.sturm_count(P2, 0, 2) == 1
    assert poly.sturm_count(P2, -2, 2) == 2
    assert poly.sturm_count(Polynomial([1, 0, 1]), -10, 10) == 0


def test_bisect_examples():
    r = poly.bisect(P2, RootBracket(0.0, 2.0, -1, 1), max_iter=40)
    assert abs(r - math.sqrt(2)) <= 1e-11
    assert poly.bisect(Polynomial([0, 1]), RootBracket(-1.0, 1.0, -1, 1)) == 0
    assert poly.bisect(Polynomial([-1, 1]), RootBracket(0.0, 2.0, -1, 1)) == 1


def test_bisect_error_bound_without_polish():
    br = RootBracket(0.0, 2.0, -1, 1)
    for c in (5, 10, 20):
        r = poly.bisect(P2, br, max_iter=c, polish=False)
        assert abs(r - math.sqrt(2)) <= 2.0 / 2 ** c


def test_bracket_validation():
    with pytest.raises(ValueError):
        RootBracket(1.0, 0.0, -1, 1)
    with pytest.raises(ValueError):
        RootBracket(0.0, 1.0, 1, 1)


def test_companion_examples():
    assert np.allclose(poly.real_companion_roots(P2), [-math.sqrt(2), math.sqrt(2)])
    r = poly.companion_roots(Polynomial([1, 0, 1]))
    assert np.allclose(sorted(r, key=lambda z: z.imag), [-1j, 1j])
    assert poly.real_companion_roots(Polynomial([1, 0, 1])).size == 0
    assert np.allclose(poly.real_companion_roots(Polynomial([0, -1, 0, 1])), [-1, 0, 1])


def test_interpolation_examples():
    P = poly.interpolate_poly([-2, 0, 2], [2, -2, 2], 2)
    assert np.allclose(P.coeffs, [-2, 0, 1])
    assert poly.interpolate_poly([0, 1, 2], [3, 3, 3], 2).degree == 0
    nodes = poly.chebyshev_nodes(5)
    P = poly.interpolate_poly(nodes, (1 + nodes) ** 2, 4)
    assert P.degree == 2 and np.allclose(P.coeffs, [1, 2, 1])
    with pytest.raises(ValueError, match="duplicate"):
        poly.interpolate_poly([0, 0, 1], [1, 1, 2], 1)


@given(st.integers(0, 2**31), st.integers(0, 10))
def test_interpolation_identity(seed, d):
    rng = np.random.default_rng(seed)
    P = Polynomial(rng.uniform(-10, 10, d + 1))
    nodes = poly.chebyshev_nodes(d + 1, 2.0)
    Q = poly.interpolate_poly(nodes, P(nodes), d, eps_trim=0.0)
    assert np.abs(Q.coeffs - P.coeffs).max() <= 1e-9 * np.abs(P.coeffs).max()


def _random_squarefree(rng, max_degree=12):
    while True:
        d = int(rng.integers(1, max_degree + 1))
        P = Polynomial(rng.uniform(-10, 10, d + 1))
        if P.degree == d and (d < 2 or poly.is_squarefree(P)):
            return P


@given(st.integers(0, 2**31))
def test_pipeline_matches_companion(seed):
    P = _random_squarefree(np.random.default_rng(seed))
    got = np.sort(poly.find_real_roots(P).roots)
    ref = poly.real_companion_roots(P)
    assert got.size == ref.size
    assert np.all(np.abs(got - ref) <= 1e-8 * (1 + np.abs(ref)))


@given(st.integers(0, 2**31))
def test_sturm_count_matches_companion(seed):
    P = _random_squarefree(np.random.default_rng(seed))
    R = poly.lagrange_root_bound(P) * (1 + 1e-6) + 1e-6
    assert poly.sturm_count(P, -R, R) == poly.real_companion_roots(P).size


@given(st.integers(0, 2**31))
def test_rump_below_true_separation(seed):
    P = _random_squarefree(np.random.default_rng(seed), max_degree=8)
    if P.degree < 2:
        return
    z = poly.companion_roots(P)
    sep = min(abs(a - b) for i, a in enumerate(z) for b in z[i + 1:])
    assert poly.rump_separation(P) <= sep


def test_root_search_report():
    rs = poly.find_real_roots(P2)
    assert rs.method in ("grid", "sturm") and len(rs.roots) == 2
    assert poly.find_real_roots(Polynomial([-3, 1])).method == "linear"
    assert poly.find_real_roots(Polynomial([5.0])).roots == []


def test_trim_and_scale():
    P = Polynomial([1.0, 2.0, 1e-12])
    assert P.trim().degree == 1
    assert np.allclose(P2.scale_variable(2.0).coeffs, [-2, 0, 4])


def test_sturm_isolation_keeps_clustered_roots():
    # four real roots, two of them 1.4e-4 apart; |P| dips below the zero tolerance at
    # a subdivision point that is not a root
    P = Polynomial([-0.4246913965217109, 2.211474588807983, -4.318039377190818,
                    3.746912896407704, -1.2191488612472903])
    got = np.sort(poly.find_real_roots(P).roots)
    ref = poly.real_companion_roots(P)
    assert got.size == 4 and np.allclose(got, ref, atol=1e-8)
    assert len(poly.sturm_isolate(P, 9.0)) == 4
