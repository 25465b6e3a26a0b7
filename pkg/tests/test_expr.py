import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxfield import expr as ex
from maxfield.maximal import MaximalVector, lipschitz_bound, maximize

from oracles import grid_max, np_eval, random_ast


def test_parse_abs_difference():
    assert ex.parse("abs(x0 - x1)") == ex.Abs(ex.Sub(ex.Var(0), ex.Var(1)))


def test_parse_max_times_power():
    e = ex.parse("max(x0, 1) * x1^2")
    assert e.arity == 2
    assert ex.evaluate(e, [0.5, 3.0]) == 9.0


def test_division_rejected_with_column():
    with pytest.raises(ex.ExpressionError, match="division") as info:
        ex.parse("x0 / x1")
    assert info.value.position == 3


@pytest.mark.parametrize("text", ["", "x0 +", "foo(x0)", "x0 ** 2", "x0^-1", "x0^0.5", "y1"])
def test_malformed_text_rejected(text):
    with pytest.raises(ex.ExpressionError):
        ex.parse(text)


def test_caret_binds_tighter_than_plus():
    assert ex.evaluate(ex.parse("1 + x0^2"), [3.0]) == 10.0


def test_nonfinite_constant_rejected():
    with pytest.raises(ex.ExpressionError):
        ex.Const(float("nan"))


def test_boxmax_round_trip_and_value():
    e = ex.boxmax([1], [(0.0, 1.0)], ex.Add(ex.Var(0), ex.Var(1)))
    back = ex.parse(ex.to_text(e))
    assert back == e
    assert maximize(e, MaximalVector([(2.0, 2.0)])).value == pytest.approx(3.0)
    assert ex.free_vars(e) == frozenset({0})


def test_fold_constants():
    assert ex.fold(ex.parse("2 * 3 + abs(-1)")) == ex.Const(7.0)


def test_simplify_cancels_difference():
    e = ex.parse("(x0 + x1) * x2 - x2 * x1 - x0 * x2")
    assert ex.fold(ex.simplify(e)) == ex.Const(0.0)


def test_substitute_avoids_capture():
    e = ex.boxmax([1], [(0.0, 1.0)], ex.Add(ex.Var(0), ex.Var(1)))
    s = ex.substitute(e, {0: ex.Var(1)})
    # the free x1 must not be captured by the bound variable
    assert maximize(s, MaximalVector([(0.0, 0.0), (5.0, 5.0)])).value == pytest.approx(6.0)


def test_canonical_identifies_renamed_bound_variables():
    a = ex.boxmax([3], [(0.0, 1.0)], ex.Mul(ex.Var(0), ex.Var(3)))
    b = ex.boxmax([7], [(0.0, 1.0)], ex.Mul(ex.Var(0), ex.Var(7)))
    assert ex.canonical(a) == ex.canonical(b)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000))
def test_text_round_trip_preserves_values(seed):
    rng = np.random.default_rng(seed)
    e = random_ast(rng, 3, 4)
    back = ex.parse(ex.to_text(e))
    x = rng.uniform(-2, 2, (16, 3))
    cols = [x[:, i] for i in range(3)]
    np.testing.assert_allclose(np_eval(back, cols), np_eval(e, cols), rtol=1e-12, atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000))
def test_simplify_preserves_values(seed):
    rng = np.random.default_rng(seed)
    e = random_ast(rng, 3, 4)
    s = ex.simplify(e)
    for x in rng.uniform(-2, 2, (8, 3)):
        ref = ex.evaluate(e, list(x))
        assert ex.evaluate(s, list(x)) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_alpha_rename_makes_binders_unique():
    inner = ex.boxmax([1], [(0.0, 1.0)], ex.Mul(ex.Var(0), ex.Var(1)))
    e = ex.Add(inner, inner)
    r = ex.alpha_rename(e)
    assert r.a.bound != r.b.bound
    assert ex.free_vars(r) == frozenset({0})


def test_hoist_through_sum_and_max():
    a = ex.boxmax([1], [(0.0, 1.0)], ex.Mul(ex.Var(0), ex.Var(1)))
    b = ex.boxmax([1], [(-1.0, 2.0)], ex.Abs(ex.Sub(ex.Var(0), ex.Var(1))))
    for e in (ex.Add(a, b), ex.Max(a, b), ex.Mul(ex.Const(2.0), a), ex.Sub(a, ex.Var(0))):
        h = ex.hoist_maxima(e)
        assert isinstance(h, ex.BoxMax) and not ex.contains_boxmax(h.body)


def test_hoist_keeps_min_and_negation_nested():
    a = ex.boxmax([1], [(0.0, 1.0)], ex.Mul(ex.Var(0), ex.Var(1)))
    for e in (ex.Min(a, ex.Var(0)), ex.Neg(a), ex.Sub(ex.Var(0), a), ex.Mul(ex.Var(0), a)):
        assert not isinstance(ex.hoist_maxima(e), ex.BoxMax)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from(["add", "max", "scale", "sub"]))
def test_hoisted_maximum_matches_joint_grid(seed, op):
    rng = np.random.default_rng(seed)
    fa = random_ast(rng, 2, 2)
    fb = random_ast(rng, 2, 2)
    # x0 is the outer variable; x1 is bound in each term
    a = ex.boxmax([1], [(-1.0, 1.0)], fa)
    b = ex.boxmax([1], [(0.0, 1.0)], fb)
    fb2 = ex.substitute(fb, {1: ex.Var(2)})
    joint, e = {
        "add": (ex.Add(fa, fb2), ex.Add(a, b)),
        "max": (ex.Max(fa, fb2), ex.Max(a, b)),
        "scale": (ex.Mul(ex.Const(0.5), fa), ex.Mul(ex.Const(0.5), a)),
        "sub": (ex.Sub(fa, ex.Var(0)), ex.Sub(a, ex.Var(0))),
    }[op]
    box = [(-0.5, 0.5), (-1.0, 1.0), (0.0, 1.0)]
    r = maximize(e, MaximalVector(box[:1]), 1e-4)
    brute = grid_max(joint, box, 81)
    slack = lipschitz_bound(joint, MaximalVector(box)) * 0.5 * np.hypot(1 / 80, np.hypot(2 / 80, 1 / 80))
    assert brute <= r.value + r.error_bound + 1e-9
    assert r.value <= brute + slack + 1e-9
