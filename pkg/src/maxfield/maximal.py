"""Maximal distributions on boxes and their certified expectations.

A maximally distributed vector with uncertainty box ``Λ = ⊗[lo_i, hi_i]`` has
``E[φ(X)] = max_{x∈Λ} φ(x)``. Everything here reduces to certified box
maximization of expression trees (:mod:`maxfield.search`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as ex
from . import search
from .report import CheckReport

CERTIFIED_CAP = 8


class CertificationError(RuntimeError):
    """The requested certificate cannot be produced (arity cap or work budget)."""


@dataclass(frozen=True)
class UncertaintyInterval:
    lower: float
    upper: float

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"interval ends must be finite, got [{lo}, {hi}]")
        if lo > hi:
            raise ValueError(f"lower end {lo} exceeds upper end {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def kappa(self) -> float:
        """``max(|lower|, |upper|)``, the bound on ``|v|`` for ``v`` in the interval."""
        return max(abs(self.lower), abs(self.upper))

    def scaled(self, c: float) -> UncertaintyInterval:
        a, b = self.lower * c, self.upper * c
        return UncertaintyInterval(min(a, b), max(a, b))

    def as_tuple(self) -> tuple[float, float]:
        return (self.lower, self.upper)


@dataclass(frozen=True)
class MaximalVector:
    intervals: tuple[UncertaintyInterval, ...]

    def __init__(self, intervals):
        ivs = tuple(i if isinstance(i, UncertaintyInterval) else UncertaintyInterval(*i)
                    for i in intervals)
        object.__setattr__(self, "intervals", ivs)

    @property
    def arity(self) -> int:
        return len(self.intervals)

    @property
    def lo(self) -> np.ndarray:
        return np.array([i.lower for i in self.intervals], dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.array([i.upper for i in self.intervals], dtype=float)


@dataclass(frozen=True)
class CertifiedValue:
    """``value`` is attained (a lower bound); the true maximum is at most ``value + error_bound``.

    Heuristic results carry ``certified=False`` and an infinite error bound.
    """

    value: float
    error_bound: float
    evaluations: int
    certified: bool = True
    argmax: tuple[float, ...] | None = None

    @property
    def upper(self) -> float:
        return self.value + self.error_bound

    def to_dict(self):
        return {
            "value": self.value,
            "error_bound": self.error_bound if math.isfinite(self.error_bound) else None,
            "certified": self.certified,
            "evaluations": self.evaluations,
        }


def g_eval(p: float, u: UncertaintyInterval) -> float:
    """``max_{v∈[lo,hi]} v·p = hi·p⁺ − lo·p⁻``."""
    return u.upper * max(p, 0.0) - u.lower * max(-p, 0.0)


def generating_function(mv: MaximalVector, p: Sequence[float]) -> float:
    if len(p) != mv.arity:
        raise ValueError(f"p has length {len(p)}, expected {mv.arity}")
    return math.fsum(g_eval(float(pi), iv) for pi, iv in zip(p, mv.intervals))


def _width(e: ex.Expr, m: int) -> int:
    return max(ex.max_index(e) + 1, m, 1)


def lipschitz_bound(e: ex.Expr, box: MaximalVector) -> float:
    """Euclidean Lipschitz constant of ``e`` on ``box`` from interval slope bounds."""
    if e.arity > box.arity:
        raise ValueError(f"expression arity {e.arity} exceeds box arity {box.arity}")
    w = _width(e, box.arity)
    lo = np.zeros((1, w))
    hi = np.zeros((1, w))
    lo[0, :box.arity] = box.lo
    hi[0, :box.arity] = box.hi
    ctx = search.Context()
    _, _, glo, ghi = search.enclose(e, lo, hi, ctx, gcols=np.arange(box.arity))
    g = np.maximum(np.abs(glo[0]), np.abs(ghi[0]))
    return float(np.sqrt(np.sum(g ** 2)))


def _lift(e: ex.Expr, box: MaximalVector):
    """Turn a root-level maximum over bound variables into extra search axes."""
    lo, hi = list(box.lo), list(box.hi)
    while isinstance(e, ex.BoxMax):
        base = max(len(lo), ex.max_index(e) + 1)
        # move the binder's variables to fresh axes past everything in use
        ren = {i: ex.Var(base + j) for j, i in enumerate(e.bound)}
        body = ex.substitute(e.body, ren)
        extra = base + len(e.bound) - len(lo)
        lo += [0.0] * extra
        hi += [0.0] * extra
        for j, (a, b) in enumerate(e.bounds):
            lo[base + j], hi[base + j] = a, b
        e = body
    return e, np.array(lo, dtype=float), np.array(hi, dtype=float)


def _search_form(e: ex.Expr, box: MaximalVector):
    body, lo, hi = _lift(e, box)
    used = sorted(ex.free_vars(body))
    # degenerate axes are fixed, not searched
    cols = np.array([i for i in used if hi[i] > lo[i]], dtype=int)
    return body, lo, hi, cols


def maximize(e: ex.Expr, box: MaximalVector, epsilon: float = 1e-6,
             mode: str = "certified", seed: int = 0,
             cap: int = CERTIFIED_CAP) -> CertifiedValue:
    """Certified maximum of ``e`` over ``box``.

    ``mode="certified"`` raises :class:`CertificationError` when more than
    ``cap`` axes are non-degenerate; ``mode="heuristic"`` falls back to a
    seeded multi-start local search there and labels the result uncertified.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if mode not in ("certified", "heuristic"):
        raise ValueError(f"unknown mode {mode!r}")
    if e.arity > box.arity:
        raise ValueError(f"expression arity {e.arity} exceeds box arity {box.arity}")
    e = ex.fold(e)
    if isinstance(e, ex.Const):
        return CertifiedValue(e.value, 0.0, 0, True, tuple(0.5 * (box.lo + box.hi)))
    body, lo, hi, cols = _search_form(e, box)
    if ex.contains_boxmax(e):
        # one joint search beats nested ones when the axis count allows it
        flat = _search_form(ex.hoist_maxima(e), box)
        if len(flat[3]) <= cap:
            body, lo, hi, cols = flat
    if len(cols) > cap:
        if mode == "certified":
            raise CertificationError(
                f"{len(cols)} non-degenerate axes exceed the certified cap of {cap}")
        return _heuristic(body, lo, hi, cols, seed, box.arity)
    w = _width(body, len(lo))
    base = np.zeros((1, w))
    base[0, :len(lo)] = 0.5 * (lo + hi)
    ctx = search.Context()
    res = search.branch_and_bound(body, base, cols, lo[cols], hi[cols], epsilon, ctx)
    value = float(res.lower[0])
    gap = float(res.upper[0]) - value
    if gap > epsilon:
        raise CertificationError(
            f"search budget exhausted with gap {gap:.3g} above epsilon {epsilon:.3g}")
    point = base[0, :len(lo)].copy()
    point[cols] = res.argmax[0]
    return CertifiedValue(value, max(gap, 0.0), res.evals, True, tuple(point[:box.arity]))


def minimize(e: ex.Expr, box: MaximalVector, epsilon: float = 1e-6, **kw) -> CertifiedValue:
    """Certified minimum; ``value`` is attained, the true minimum is ``>= value - error_bound``."""
    r = maximize(ex.Neg(e), box, epsilon, **kw)
    return CertifiedValue(-r.value, r.error_bound, r.evaluations, r.certified, r.argmax)


def _heuristic(body, lo, hi, cols, seed, arity, starts: int = 16):
    from scipy.optimize import minimize as sp_minimize

    rng = np.random.default_rng(seed)
    w = _width(body, len(lo))
    center = np.zeros(w)
    center[:len(lo)] = 0.5 * (lo + hi)
    ctx = search.Context()

    def f(z):
        x = center.copy()
        x[cols] = z
        x = x[None, :]
        ctx.evals += 1
        return float(search.enclose(body, x, x, ctx)[0][0])

    clo, chi = lo[cols], hi[cols]
    samples = clo + (chi - clo) * rng.random((512, len(cols)))
    pts = np.tile(center, (len(samples), 1))
    pts[:, cols] = samples
    vals = search.enclose(body, pts, pts, ctx)[0]
    ctx.evals += len(samples)
    best_z, best_v = None, -np.inf
    for i in np.argsort(-vals, kind="stable")[:starts]:
        r = sp_minimize(lambda z: -f(z), samples[i], method="Powell",
                        bounds=list(zip(clo, chi)), options={"xtol": 1e-10, "ftol": 1e-12})
        z = np.clip(r.x, clo, chi)
        v = f(z)
        if v > best_v:
            best_z, best_v = z, v
    point = center[:len(lo)].copy()
    point[cols] = best_z
    return CertifiedValue(best_v, math.inf, ctx.evals, False, tuple(point[:arity]))


def expect(mv: MaximalVector, e: ex.Expr, epsilon: float = 1e-6, **kw) -> CertifiedValue:
    """Sublinear expectation ``E[φ(X)] = max_{x∈Λ} φ(x)``."""
    return maximize(e, mv, epsilon, **kw)


def pushforward(mv: MaximalVector, psi: ex.Expr, epsilon: float = 1e-6,
                **kw) -> UncertaintyInterval:
    """Interval ``[min ψ, max ψ]`` over Λ: ``ψ(X)`` is maximal with this interval.

    The ends are the attained values, each within ``epsilon`` of the exact one.
    """
    top = maximize(psi, mv, epsilon, **kw)
    bottom = minimize(psi, mv, epsilon, **kw)
    return UncertaintyInterval(min(bottom.value, top.value), top.value)


def axioms_check(mv: MaximalVector, e1: ex.Expr, e2: ex.Expr, lam: float = 2.0,
                 epsilon: float = 1e-6) -> CheckReport:
    """Monotonicity, constant preservation, subadditivity and positive homogeneity."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    tol = 3 * epsilon
    E1 = maximize(e1, mv, epsilon)
    E2 = maximize(e2, mv, epsilon)
    Es = maximize(ex.Add(e1, e2), mv, epsilon)
    El = maximize(ex.Mul(ex.Const(lam), e1), mv, epsilon)
    c = 1.2345
    Ec = maximize(ex.Const(c), mv, epsilon)
    sub_ok = Es.value <= E1.upper + E2.upper + tol
    hom_ok = abs(El.value - lam * E1.value) <= tol * max(1.0, lam)
    const_ok = Ec.value == c
    # monotonicity applies only when e1 >= e2 holds on the whole box
    gap = minimize(ex.Sub(e1, e2), mv, epsilon)
    dominates = gap.value - gap.error_bound >= -tol
    mono_ok = (not dominates) or (E1.value >= E2.value - tol)
    return CheckReport("sublinear_axioms", sub_ok and hom_ok and const_ok and mono_ok, {
        "E[e1]": E1.value, "E[e2]": E2.value, "E[e1+e2]": Es.value,
        "lambda": lam, "E[lambda*e1]": El.value, "subadditive": sub_ok,
        "positively_homogeneous": hom_ok, "constant_preserving": const_ok,
        "e1_dominates_e2": dominates, "monotone": mono_ok,
    })


def independence_factorization_check(intervals: Sequence, trials: int = 10,
                                     epsilon: float = 1e-6, seed: int = 0) -> CheckReport:
    """Additive generating function and order-free iterated maximization.

    For random ``p`` the generating function of the product box must equal the
    sum of one-dimensional ones exactly. For random product test functions
    ``α(x)·β(y)`` over a split of the coordinates, the joint maximum must
    match the iterated one in both orders.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    mv = MaximalVector(intervals)
    n = mv.arity
    rng = np.random.default_rng(seed)
    gen_ok = True
    worst_gen = 0.0
    for _ in range(trials):
        p = rng.normal(size=n)
        joint = maximize(ex.add_all(ex.Mul(ex.Const(pi), ex.Var(i)) for i, pi in enumerate(p)),
                         mv, epsilon).value
        closed = generating_function(mv, p)
        split = math.fsum(g_eval(pi, iv) for pi, iv in zip(p, mv.intervals))
        gen_ok &= closed == split
        worst_gen = max(worst_gen, abs(joint - closed))
    gen_ok &= worst_gen <= epsilon

    worst_iter = 0.0
    if n >= 2:
        k = n // 2
        left, right = list(range(k)), list(range(k, n))
        for _ in range(trials):
            alpha = _random_factor(rng, left)
            beta = _random_factor(rng, right)
            phi = ex.Mul(alpha, beta)
            joint = maximize(phi, mv, epsilon).value
            # inner max over the right block, then the outer over the left, and vice versa
            in_right = ex.boxmax(right, [mv.intervals[i].as_tuple() for i in right], phi)
            in_left = ex.boxmax(left, [mv.intervals[i].as_tuple() for i in left], phi)
            it1 = maximize(in_right, mv, epsilon).value
            it2 = maximize(in_left, mv, epsilon).value
            worst_iter = max(worst_iter, abs(joint - it1), abs(joint - it2))
    iter_ok = worst_iter <= 2 * epsilon
    return CheckReport("independence_factorization", gen_ok and iter_ok, {
        "arity": n, "trials": trials, "generating_residual": worst_gen,
        "iterated_residual": worst_iter,
    })


def _random_factor(rng, idx):
    terms = [ex.Mul(ex.Const(round(float(rng.normal()), 3)), ex.Var(i)) for i in idx]
    lin = ex.Add(ex.add_all(terms), ex.Const(round(float(rng.normal()), 3)))
    return ex.Abs(lin) if rng.random() < 0.5 else lin
