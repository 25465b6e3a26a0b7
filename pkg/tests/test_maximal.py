import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxfield import expr as ex
from maxfield.maximal import (CertificationError, MaximalVector, UncertaintyInterval,
                              axioms_check, expect, g_eval, generating_function,
                              independence_factorization_check, lipschitz_bound, maximize,
                              minimize, pushforward)

from oracles import grid_max, np_eval, random_ast

P = ex.parse


def test_interval_rejects_reversed_ends():
    with pytest.raises(ValueError):
        UncertaintyInterval(2, 1)


def test_interval_kappa():
    assert UncertaintyInterval(-3, 2).kappa == 3


@pytest.mark.parametrize("p, expected", [(1, 2), (-3, 3), (0, 0)])
def test_g_examples(p, expected):
    assert g_eval(p, UncertaintyInterval(-1, 2)) == expected


def test_generating_function_examples():
    assert generating_function(MaximalVector([(0, 1), (0, 1)]), [1, 1]) == 2
    assert generating_function(MaximalVector([(-1, 2), (0, 1)]), [1, -1]) == 2
    assert generating_function(MaximalVector([(-1, 2)]), [-1]) == 1


def test_lipschitz_examples():
    assert lipschitz_bound(P("x0"), MaximalVector([(-1, 2)])) == pytest.approx(1.0)
    assert lipschitz_bound(P("abs(x0)"), MaximalVector([(-1, 2)])) == pytest.approx(1.0)
    L = lipschitz_bound(P("x0 * x1"), MaximalVector([(0, 1), (0, 1)]))
    assert 1.0 <= L <= math.sqrt(2) + 1e-12


def test_lipschitz_dominates_sampled_slopes():
    rng = np.random.default_rng(4)
    for _ in range(30):
        e = random_ast(rng, 2, 3)
        box = MaximalVector([(-1, 1.5), (-0.5, 1)])
        L = lipschitz_bound(e, box)
        a = rng.uniform(box.lo, box.hi, (200, 2))
        b = rng.uniform(box.lo, box.hi, (200, 2))
        fa = np_eval(e, [a[:, 0], a[:, 1]])
        fb = np_eval(e, [b[:, 0], b[:, 1]])
        slope = np.abs(fa - fb) / np.maximum(np.linalg.norm(a - b, axis=1), 1e-12)
        assert np.all(slope <= L * (1 + 1e-9) + 1e-9)


def test_maximize_square():
    r = maximize(P("x0^2"), MaximalVector([(-1, 2)]), 1e-6)
    assert abs(r.value - 4) <= 1e-6 and r.certified and r.error_bound <= 1e-6


def test_maximize_constant_is_exact():
    r = maximize(P("1.25"), MaximalVector([(0, 1), (3, 4)]))
    assert r.value == 1.25 and r.error_bound == 0


def test_maximize_concave_quadratic():
    # grid oracle at h = 1e-3 gives 0.25
    r = maximize(P("x0 * x1 - x0^2"), MaximalVector([(0, 1), (0, 1)]), 1e-6)
    assert r.value == pytest.approx(0.25, abs=1e-6)
    assert grid_max(P("x0 * x1 - x0^2"), [(0, 1), (0, 1)], 1001) == pytest.approx(0.25, abs=1e-6)


def test_linear_maximum_is_exact():
    r = maximize(P("x0 + x1"), MaximalVector([(0, 1), (0, 1)]))
    assert r.value == 2.0


def test_expect_examples():
    box = MaximalVector([(-1, 2)])
    assert expect(box, P("x0")).value == pytest.approx(2)
    assert expect(box, P("-x0")).value == pytest.approx(1)
    assert expect(MaximalVector([(0, 1), (0, 1)]), P("abs(x0 - x1)")).value == pytest.approx(1)


def test_minimize():
    r = minimize(P("(x0 - 0.3)^2"), MaximalVector([(-1, 1)]), 1e-8)
    assert r.value == pytest.approx(0.0, abs=1e-8)


def test_pushforward_examples():
    assert pushforward(MaximalVector([(-1, 2)]), P("x0^2")).as_tuple() == pytest.approx((0, 4))
    assert pushforward(MaximalVector([(0, 1)]), P("x0")).as_tuple() == (0, 1)
    assert pushforward(MaximalVector([(0, 1), (0, 1)]), P("x0 + x1")).as_tuple() == (0, 2)


def test_arity_exceeding_box_rejected():
    with pytest.raises(ValueError):
        maximize(P("x0 + x3"), MaximalVector([(0, 1)]))


def test_certified_cap_and_heuristic_fallback():
    e = ex.add_all(ex.Abs(ex.Var(i)) for i in range(9))
    box = MaximalVector([(-1, 1)] * 9)
    with pytest.raises(CertificationError):
        maximize(e, box)
    r = maximize(e, box, mode="heuristic", seed=1)
    assert not r.certified and math.isinf(r.error_bound)
    assert r.value <= 9 + 1e-12 and r.value >= 8.0


def test_degenerate_axes_do_not_count_toward_cap():
    e = ex.add_all(ex.Var(i) for i in range(12))
    box = MaximalVector([(1, 1)] * 10 + [(0, 1)] * 2)
    assert maximize(e, box).value == pytest.approx(12.0)


def test_nested_boxmax():
    # max over x0 of (max over x1 of -(x0 - x1)^2 + x0)
    e = ex.boxmax([1], [(0.0, 0.5)], ex.Add(ex.Neg(ex.Pow(ex.Sub(ex.Var(0), ex.Var(1)), 2)),
                                           ex.Var(0)))
    r = maximize(e, MaximalVector([(0, 1)]), 1e-6)
    assert r.value == pytest.approx(0.75, abs=1e-6)


def test_axioms_examples():
    box = MaximalVector([(-1, 2)])
    rep = axioms_check(box, P("x0"), P("-x0"))
    assert rep.passed and rep.details["E[e1+e2]"] == pytest.approx(0.0)
    rep = axioms_check(box, P("x0"), P("-x0"), lam=0.0)
    assert rep.passed and rep.details["E[lambda*e1]"] == 0.0
    rep = axioms_check(MaximalVector([(-1, 1)]), P("abs(x0)"), P("x0^2"))
    assert rep.passed and rep.details["E[e1+e2]"] == pytest.approx(2.0)


def test_independence_examples():
    assert independence_factorization_check([(0, 1), (0, 1)], trials=4).passed
    assert independence_factorization_check([(-1, 0), (2, 3)], trials=4).passed
    # additive test function: joint maximum is the sum of the upper ends
    r = maximize(P("x0 + x1"), MaximalVector([(-1, 0), (2, 3)]))
    assert r.value == 3.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_maximize_brackets_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    e = random_ast(rng, 2, 3)
    box = [(-1.0, 1.0), (-0.5, 1.5)]
    r = maximize(e, MaximalVector(box), 1e-4)
    brute = grid_max(e, box, 401)
    # the value is attained, so no grid point can exceed the certified upper end
    assert brute <= r.value + r.error_bound + 1e-9
    L = lipschitz_bound(e, MaximalVector(box))
    assert r.value <= brute + L * math.hypot(2 / 400, 2 / 400) / 2 + 1e-9
