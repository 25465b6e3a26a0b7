import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxfield import expr as ex
from maxfield import regions as rg
from maxfield.whitenoise import (FddQuery, WhiteNoiseModel, additivity_residual,
                                 consistency_check, distance_to_range_check, expansion_3set,
                                 expect, fdd_expect, fdd_generating, invariance_check,
                                 marginal_bounds)

from oracles import generating

P = ex.parse
I = rg.interval


def test_model_rejects_reversed_interval():
    with pytest.raises(ValueError):
        WhiteNoiseModel(1, (1, 0))


def test_generating_overlap_example():
    m = WhiteNoiseModel(1, (0, 1))
    assert fdd_generating(m, [I(0, 1), I(0.5, 1.5)], [1, -1]) == 0.5


def test_generating_disjoint_is_sum():
    m = WhiteNoiseModel(1, (-1, 2))
    assert fdd_generating(m, [I(0, 1), I(1, 3)], [1.5, -0.5]) == 2 * 1.5 * 1 + 1 * 0.5 * 2


def test_generating_zero_direction():
    assert fdd_generating(WhiteNoiseModel(1, (-1, 2)), [I(0, 1), I(0.5, 2)], [0, 0]) == 0


@pytest.mark.parametrize("regions, phi, mu, expected", [
    ([I(0, 2)], "abs(x0)", (-1, 1), 2.0),
    ([I(0, 1), I(1, 2)], "x0 + x1", (0, 1), 2.0),
    ([I(0, 1), I(0.5, 1.5)], "x0 - x1", (0, 1), 0.5),
])
def test_fdd_expect_examples(regions, phi, mu, expected):
    r = expect(WhiteNoiseModel(1, mu), regions, P(phi))
    assert r.value == pytest.approx(expected, abs=1e-6) and r.certified


def test_query_dimension_mismatch():
    with pytest.raises(ValueError):
        FddQuery(WhiteNoiseModel(2, (0, 1)), (I(0, 1),), P("x0"))


def test_query_arity_mismatch():
    with pytest.raises(ValueError):
        FddQuery(WhiteNoiseModel(1, (0, 1)), (I(0, 1),), P("x0 + x1"))


def test_marginal_bounds_examples():
    assert marginal_bounds(WhiteNoiseModel(1, (-1, 1)), I(0, 2)).as_tuple() == (-2, 2)
    assert marginal_bounds(WhiteNoiseModel(1, (-1, 1)), rg.Region(1)).as_tuple() == (0, 0)
    assert marginal_bounds(WhiteNoiseModel(1, (0, 1)), I(0, 1.5)).as_tuple() == (0, 1.5)


def test_additivity_examples():
    m = WhiteNoiseModel(1, (-1, 2))
    assert additivity_residual(m, [I(0, 1), I(1, 2)]).value == 0
    assert additivity_residual(m, [I(0, 1)]).value == 0
    assert additivity_residual(m, [I(0, 1), I(1, 2), I(2, 3)]).value == 0


def test_additivity_rejects_overlap():
    with pytest.raises(ValueError, match="overlap"):
        additivity_residual(WhiteNoiseModel(1, (0, 1)), [I(0, 1), I(0.5, 2)])


def test_consistency_examples():
    m = WhiteNoiseModel(1, (0, 1))
    assert consistency_check(m, [I(0, 1), I(1, 2)], trials=10).passed
    assert consistency_check(m, [I(0, 1), I(0.5, 1.5)], trials=10).passed
    assert fdd_generating(m, [I(0.5, 1.5), I(0, 1)], [-1, 1]) == 0.5


def test_expansion_examples():
    m = WhiteNoiseModel(1, (0, 1))
    terms, total = expansion_3set(m, I(0, 2), I(1, 3), I(2, 4), [1, 1, 1])
    assert total == 6
    table = {t.mask: (t.g_value, t.measure) for t in terms}
    assert table[(1, 1, 0)] == (2, 1) and table[(1, 0, 0)] == (1, 1)
    assert table[(0, 1, 1)] == (2, 1) and table[(0, 0, 1)] == (1, 1)
    assert table[(1, 1, 1)][1] == 0 and table[(1, 0, 1)][1] == 0 and table[(0, 1, 0)][1] == 0

    terms, _ = expansion_3set(m, I(0, 1), I(1, 2), I(2, 3), [1, -1, 2])
    assert {t.mask for t in terms if t.measure} == {(1, 0, 0), (0, 1, 0), (0, 0, 1)}

    terms, _ = expansion_3set(m, I(0, 1), I(0, 1), I(0, 1), [1, 1, 1])
    assert {t.mask for t in terms if t.measure} == {(1, 1, 1)}


def test_invariance_examples():
    m = WhiteNoiseModel(1, (-1, 2))
    assert invariance_check(m, [I(0, 1), I(0.5, 2)], P("x0 * x1"), shift=[5]).passed
    assert invariance_check(m, [I(0, 1), I(0.5, 2)], P("abs(x0 - x1)"), signs=[-1]).passed
    m2 = WhiteNoiseModel(2, (-1, 2))
    A = rg.region(((0, 1), (0, 2)))
    B = rg.region(((0.5, 2), (1, 3)))
    assert invariance_check(m2, [A, B], P("x0 - x1^2"), perm=[1, 0]).passed


def test_distance_to_range():
    assert distance_to_range_check(WhiteNoiseModel(1, (-1, 0.5)), I(0, 3)).passed


def test_empty_query_is_constant():
    q = FddQuery(WhiteNoiseModel(1, (0, 1)), (), P("3"))
    assert fdd_expect(q).value == 3


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_generating_matches_inclusion_exclusion(seed):
    rng = np.random.default_rng(seed)
    lo, hi = sorted(np.round(rng.uniform(-2, 2, 2), 2))
    m = WhiteNoiseModel(1, (lo, hi))
    n = int(rng.integers(1, 5))
    regs = []
    for _ in range(n):
        a = np.round(rng.uniform(0, 3), 2)
        regs.append(I(a, a + np.round(rng.uniform(0.1, 2), 2)))
    p = rng.normal(size=n)
    assert fdd_generating(m, regs, p) == pytest.approx(generating(regs, p, lo, hi),
                                                       rel=1e-12, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_linear_query_equals_generating(seed):
    rng = np.random.default_rng(seed)
    m = WhiteNoiseModel(1, (-0.5, 1.5))
    regs = [I(0, 1.25), I(0.75, 2), I(1.5, 2.5)]
    p = np.round(rng.normal(size=3), 3)
    phi = ex.add_all(ex.Mul(ex.Const(float(pi)), ex.Var(i)) for i, pi in enumerate(p))
    r = expect(m, regs, phi, 1e-9)
    assert r.value == pytest.approx(fdd_generating(m, regs, p), abs=1e-9)
