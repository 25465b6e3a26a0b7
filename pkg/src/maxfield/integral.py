"""Cylinder random variables, stochastic integrals and conditional expectations.

Random variables are kept symbolic: a :class:`CylinderRandomVariable` is a
list of regions plus an expression in their noise values. Integrals of simple
fields are symbolic sums, and conditional expectations maximize out the
coordinates of the noise after the conditioning time with a ``boxmax`` node,
so operator identities can be checked by composing operations.

Temporal-spatial regions put time on axis 0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import expr as ex
from . import regions as rg
from . import search
from .maximal import CertifiedValue
from .report import CheckReport
from .whitenoise import (WhiteNoiseModel, atom_box, fdd_expect, FddQuery,
                         in_atom_coordinates)


class MeasurabilityError(ValueError):
    """A variable required to be observed by time ``t`` depends on later noise."""


@dataclass(frozen=True)
class CylinderRandomVariable:
    """``expr(W_{regions[0]}, ..., W_{regions[n-1]})``."""

    regions: tuple[rg.Region, ...]
    expr: ex.Expr

    def __post_init__(self):
        regs = tuple(self.regions)
        object.__setattr__(self, "regions", regs)
        object.__setattr__(self, "expr", ex.as_expr(self.expr))
        if len({r.dim for r in regs}) > 1:
            raise ValueError("regions of a cylinder variable must share a dimension")
        if self.expr.arity > len(regs):
            raise ValueError(f"expression uses {self.expr.arity} variables, "
                             f"only {len(regs)} regions given")

    @property
    def dim(self) -> int | None:
        return self.regions[0].dim if self.regions else None

    # arithmetic builds merged region lists, identical geometries share a slot
    def _binary(self, other, op):
        other = as_cylinder(other)
        regs, (ea, eb) = merge([self, other])
        return CylinderRandomVariable(regs, op(ea, eb))

    def __add__(self, other):
        return self._binary(other, ex.Add)

    def __radd__(self, other):
        return as_cylinder(other)._binary(self, ex.Add)

    def __sub__(self, other):
        return self._binary(other, ex.Sub)

    def __rsub__(self, other):
        return as_cylinder(other)._binary(self, ex.Sub)

    def __mul__(self, other):
        return self._binary(other, ex.Mul)

    def __rmul__(self, other):
        return as_cylinder(other)._binary(self, ex.Mul)

    def __neg__(self):
        return CylinderRandomVariable(self.regions, ex.Neg(self.expr))

    def __abs__(self):
        return CylinderRandomVariable(self.regions, ex.Abs(self.expr))

    def __pow__(self, k):
        return CylinderRandomVariable(self.regions, ex.Pow(self.expr, k))

    def apply(self, f) -> CylinderRandomVariable:
        """Apply an expression-level map, e.g. ``lambda e: ex.positive_part(e)``."""
        return CylinderRandomVariable(self.regions, f(self.expr))

    def simplified(self) -> CylinderRandomVariable:
        return CylinderRandomVariable(self.regions, ex.simplify(self.expr))

    def expect(self, model: WhiteNoiseModel, epsilon: float = 1e-6, **kw) -> CertifiedValue:
        return fdd_expect(FddQuery(model, self.regions, self.expr), epsilon, **kw)

    def __str__(self):
        names = ", ".join(r.name or f"R{i}" for i, r in enumerate(self.regions))
        return f"{ex.to_text(self.expr)}  [{names}]"


CylinderLike = Union[CylinderRandomVariable, float, int]


def as_cylinder(x) -> CylinderRandomVariable:
    if isinstance(x, CylinderRandomVariable):
        return x
    if isinstance(x, ex.Expr):
        if x.arity:
            raise ValueError("a bare expression needs regions")
        return CylinderRandomVariable((), x)
    return CylinderRandomVariable((), ex.Const(float(x)))


def constant(c: float) -> CylinderRandomVariable:
    return CylinderRandomVariable((), ex.Const(float(c)))


def noise(region: rg.Region) -> CylinderRandomVariable:
    """The noise value ``W_A`` as a cylinder variable."""
    return CylinderRandomVariable((region,), ex.Var(0))


def merge(variables: Sequence[CylinderRandomVariable]):
    """Common region list for several variables and their reindexed expressions."""
    regs: list[rg.Region] = []
    slot: dict = {}
    exprs = []
    for v in variables:
        v = as_cylinder(v)
        perm = {}
        for i, r in enumerate(v.regions):
            k = r.key()
            if k not in slot:
                slot[k] = len(regs)
                regs.append(r)
            perm[i] = slot[k]
        exprs.append(ex.reindex(v.expr, perm) if perm else v.expr)
    return tuple(regs), exprs


def combine(f, *variables) -> CylinderRandomVariable:
    """``f(e_1, ..., e_k)`` over the merged region list of the arguments."""
    regs, exprs = merge([as_cylinder(v) for v in variables])
    return CylinderRandomVariable(regs, f(*exprs))


# ---------------------------------------------------------------------------
# spatial integrals


@dataclass(frozen=True)
class SimpleRandomField:
    """``η = Σ_i ξ_i 1_{A_i}`` with pairwise disjoint carriers ``A_i``."""

    terms: tuple[tuple[CylinderRandomVariable, rg.Region], ...]

    def __init__(self, terms):
        ts = tuple((as_cylinder(xi), r) for xi, r in terms)
        for (_, a), (_, b) in itertools.combinations(ts, 2):
            if not rg.disjoint(a, b):
                raise ValueError(f"carriers {a} and {b} overlap")
        if len({r.dim for _, r in ts}) > 1:
            raise ValueError("carriers must share a dimension")
        object.__setattr__(self, "terms", ts)

    def scaled(self, alpha: CylinderLike) -> SimpleRandomField:
        return SimpleRandomField([(as_cylinder(alpha) * xi, r) for xi, r in self.terms])


def _check_model(model: WhiteNoiseModel, regions):
    for r in regions:
        if r.dim != model.dim:
            raise ValueError(f"region {r} has dimension {r.dim}, model has {model.dim}")


def integrate_spatial(field: SimpleRandomField, model: WhiteNoiseModel) -> CylinderRandomVariable:
    """``I_W(η) = Σ_i ξ_i W_{A_i}`` as a symbolic cylinder variable."""
    _check_model(model, [r for _, r in field.terms])
    total = constant(0.0)
    for xi, r in field.terms:
        total = total + xi * noise(r)
    return total.simplified() if field.terms else total


def norm_Mp(field: SimpleRandomField, model: WhiteNoiseModel, p: int = 1,
            epsilon: float = 1e-6) -> CertifiedValue:
    """``E[Σ |ξ_i|^p λ(A_i)]^{1/p}``; the error bound is mapped through the root."""
    if p < 1 or int(p) != p:
        raise ValueError("p must be a positive integer")
    integrand = constant(0.0)
    for xi, r in field.terms:
        mag = abs(xi) if p == 1 else abs(xi) ** int(p)
        integrand = integrand + mag * r.measure
    v = integrand.expect(model, epsilon)
    if p == 1:
        return v
    lo = max(v.value, 0.0) ** (1.0 / p)
    hi = max(v.value + v.error_bound, 0.0) ** (1.0 / p)
    return CertifiedValue(lo, hi - lo, v.evaluations, v.certified)


def norm_M1(field: SimpleRandomField, model: WhiteNoiseModel,
            epsilon: float = 1e-6) -> CertifiedValue:
    return norm_Mp(field, model, 1, epsilon)


def bound_check_spatial(field: SimpleRandomField, model: WhiteNoiseModel,
                        epsilon: float = 1e-6) -> CheckReport:
    """``E[|I_W(η)|] <= κ ‖η‖_{M^1}`` with ``κ = max(|μ̲|, |μ̄|)``."""
    lhs = abs(integrate_spatial(field, model)).expect(model, epsilon)
    norm = norm_M1(field, model, epsilon)
    kappa = model.kappa
    rhs = kappa * norm.value
    return CheckReport("integral_bound", lhs.value <= rhs + 2 * epsilon, {
        "lhs": lhs.value, "lhs_error_bound": lhs.error_bound, "kappa": kappa,
        "norm_M1": norm.value, "rhs": rhs, "slack": rhs - lhs.value,
    })


# ---------------------------------------------------------------------------
# temporal-spatial integrals


@dataclass(frozen=True)
class TemporalSpatialField:
    """``f(s, x) = Σ_i Σ_j X_ij 1_{A_j}(x) 1_{[t_i, t_{i+1})}(s)``.

    ``coefficients[i][j]`` belongs to slab ``i`` and spatial region ``j``.
    """

    time_grid: tuple[float, ...]
    spatial_regions: tuple[rg.Region, ...]
    coefficients: tuple[tuple[CylinderRandomVariable, ...], ...]

    def __init__(self, time_grid, spatial_regions, coefficients):
        tg = tuple(float(t) for t in time_grid)
        if len(tg) < 2 or any(b <= a for a, b in zip(tg, tg[1:])):
            raise ValueError("time grid must be strictly increasing with at least two points")
        if tg[0] < 0:
            raise ValueError("time grid must start at a nonnegative time")
        sp = tuple(spatial_regions)
        for a, b in itertools.combinations(sp, 2):
            if not rg.disjoint(a, b):
                raise ValueError(f"spatial regions {a} and {b} overlap")
        if len({r.dim for r in sp}) > 1:
            raise ValueError("spatial regions must share a dimension")
        co = tuple(tuple(as_cylinder(c) for c in row) for row in coefficients)
        if len(co) != len(tg) - 1 or any(len(row) != len(sp) for row in co):
            raise ValueError(f"coefficients must be a {len(tg) - 1} x {len(sp)} table")
        object.__setattr__(self, "time_grid", tg)
        object.__setattr__(self, "spatial_regions", sp)
        object.__setattr__(self, "coefficients", co)

    @property
    def spatial_dim(self) -> int:
        return self.spatial_regions[0].dim if self.spatial_regions else 0

    def cell(self, i: int, j: int) -> rg.Region:
        return rg.product((self.time_grid[i], self.time_grid[i + 1]), self.spatial_regions[j])

    def refine(self, times: Sequence[float]) -> TemporalSpatialField:
        """Insert breakpoints inside the grid; slabs keep their coefficients."""
        t0, t1 = self.time_grid[0], self.time_grid[-1]
        new = sorted(set(self.time_grid) | {float(t) for t in times if t0 < t < t1})
        rows = []
        for a in new[:-1]:
            i = int(np.searchsorted(self.time_grid, a, side="right")) - 1
            rows.append(self.coefficients[i])
        return TemporalSpatialField(new, self.spatial_regions, rows)

    def window(self, s: float, t: float) -> TemporalSpatialField | None:
        """Restriction to times in ``[s, t)``; ``None`` when empty."""
        lo, hi = max(s, self.time_grid[0]), min(t, self.time_grid[-1])
        if hi <= lo:
            return None
        f = self.refine([lo, hi])
        keep = [i for i in range(len(f.time_grid) - 1)
                if f.time_grid[i] >= lo and f.time_grid[i + 1] <= hi]
        grid = [f.time_grid[keep[0]]] + [f.time_grid[i + 1] for i in keep]
        return TemporalSpatialField(grid, f.spatial_regions, [f.coefficients[i] for i in keep])

    def to_simple(self) -> SimpleRandomField:
        terms = []
        for i, row in enumerate(self.coefficients):
            for j, c in enumerate(row):
                terms.append((c, self.cell(i, j)))
        return SimpleRandomField(terms)

    def scaled(self, alpha: CylinderLike) -> TemporalSpatialField:
        a = as_cylinder(alpha)
        return TemporalSpatialField(self.time_grid, self.spatial_regions,
                                    [[a * c for c in row] for row in self.coefficients])


def common_refinement(f: TemporalSpatialField, g: TemporalSpatialField):
    """Re-express two fields on a shared time grid and shared spatial cells."""
    times = sorted(set(f.time_grid) | set(g.time_grid))
    lo, hi = times[0], times[-1]
    spaces = list(f.spatial_regions) + list(g.spatial_regions)
    dec = rg.atoms(spaces)
    nf = len(f.spatial_regions)
    cells = [a.geometry for a in dec.atoms]

    def lift(h: TemporalSpatialField, offset: int, count: int):
        rows = []
        for a, b in zip(times, times[1:]):
            inside = h.time_grid[0] <= a and b <= h.time_grid[-1]
            i = int(np.searchsorted(h.time_grid, a, side="right")) - 1
            row = []
            for atom in dec.atoms:
                owner = [j for j in range(count) if atom.mask[offset + j]]
                row.append(h.coefficients[i][owner[0]] if inside and owner else constant(0.0))
            rows.append(row)
        return TemporalSpatialField(times, cells, rows)

    del lo, hi
    return lift(f, 0, nf), lift(g, nf, len(g.spatial_regions))


def add_fields(f: TemporalSpatialField, g: TemporalSpatialField) -> TemporalSpatialField:
    ff, gg = common_refinement(f, g)
    rows = [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(ff.coefficients, gg.coefficients)]
    return TemporalSpatialField(ff.time_grid, ff.spatial_regions, rows)


def integrate_temporal_spatial(field: TemporalSpatialField,
                               model: WhiteNoiseModel) -> CylinderRandomVariable:
    """``Σ_i Σ_j X_ij W([t_i, t_{i+1}) × A_j)``."""
    if model.dim != field.spatial_dim + 1:
        raise ValueError(f"model dimension {model.dim} does not match a temporal-spatial "
                         f"field over {field.spatial_dim} spatial axes")
    return integrate_spatial(field.to_simple(), model)


def integrate_between(field: TemporalSpatialField, model: WhiteNoiseModel,
                      s: float, t: float) -> CylinderRandomVariable:
    """Integral over times in ``[s, t)``."""
    w = field.window(s, t)
    if w is None:
        return constant(0.0)
    return integrate_temporal_spatial(w, model)


def time_bound_check(field: TemporalSpatialField, model: WhiteNoiseModel,
                     epsilon: float = 1e-6) -> CheckReport:
    """``E[|∫∫ f dW|] <= κ E[∫∫ |f|]`` for a temporal-spatial field."""
    rep = bound_check_spatial(field.to_simple(), model, epsilon)
    return CheckReport("temporal_integral_bound", rep.passed, rep.details)


def integral_properties_check(f: TemporalSpatialField, g: TemporalSpatialField,
                              alpha: CylinderLike, model: WhiteNoiseModel,
                              s: float, r: float, t: float,
                              epsilon: float = 1e-6) -> CheckReport:
    """Time-additivity of the integral and linearity with a bounded factor."""
    if not s <= r <= t:
        raise ValueError("need s <= r <= t")
    alpha = as_cylinder(alpha)
    fr = f.refine([s, r, t])
    split = (integrate_between(fr, model, s, t) - integrate_between(fr, model, s, r)
             - integrate_between(fr, model, r, t))
    res_split = abs(split).simplified().expect(model, epsilon)

    combo = integrate_temporal_spatial(add_fields(f.scaled(alpha), g), model)
    parts = alpha * integrate_temporal_spatial(f, model) + integrate_temporal_spatial(g, model)
    res_lin = abs(combo - parts).simplified().expect(model, epsilon)
    ok = res_split.value <= epsilon and res_lin.value <= epsilon
    return CheckReport("integral_properties", ok, {
        "s": s, "r": r, "t": t, "split_residual": res_split.value,
        "linearity_residual": res_lin.value,
    })


# ---------------------------------------------------------------------------
# conditional expectation


def _time_breaks(regions: Sequence[rg.Region]) -> set[float]:
    return {c for r in regions for b in r.boxes for c in b.extents[0]}


def _split_future(regions, t: float, cuts):
    """Observed pieces, future pieces and the time slabs cutting the future."""
    before, after = [], []
    for r in regions:
        b, a = rg.split_axis(r, 0, t)
        before.append(b)
        after.append(a)
    fut = [a for a in after if a.boxes]
    breaks = sorted(c for c in _time_breaks(fut) | {float(c) for c in cuts} if c >= t)
    return before, after, breaks


def conditional_expect(X: CylinderRandomVariable, t: float, model: WhiteNoiseModel,
                       cuts: Sequence[float] = ()) -> CylinderRandomVariable:
    """``E[X | F_t]`` as a cylinder variable over the noise before ``t``.

    Region parts after ``t`` are split into independent atom coordinates,
    slab by slab in time, and maximized out with a ``boxmax`` node; the parts
    before ``t`` stay free. ``cuts`` adds slab boundaries, which keeps the
    bound-variable layout identical across compositions of conditionings.
    """
    t = float(t)
    if t < 0 or not math.isfinite(t):
        raise ValueError("conditioning time must be a finite nonnegative number")
    X = as_cylinder(X)
    if not X.regions:
        return X
    _check_model(model, X.regions)
    before, after, breaks = _split_future(X.regions, t, cuts)
    if not any(a.boxes for a in after):
        return X

    # observed slots, deduplicated by geometry
    obs: list[rg.Region] = []
    slot: dict = {}
    obs_of = []
    for r, b in zip(X.regions, before):
        if not b.boxes:
            obs_of.append(None)
            continue
        k = b.key()
        if k not in slot:
            slot[k] = len(obs)
            obs.append(b.named(r.name))
        obs_of.append(slot[k])

    n_obs = len(obs)
    base = max(n_obs, ex.max_index(X.expr) + 1)
    terms: list[list[ex.Expr]] = [[] for _ in X.regions]
    bound, bounds = [], []
    mu = model.mu
    for lo, hi in zip(breaks, breaks[1:]):
        pieces = [rg.split_axis(rg.split_axis(a, 0, lo)[1], 0, hi)[0] for a in after]
        idx = [i for i, p in enumerate(pieces) if p.boxes]
        if not idx:
            continue
        dec = rg.atoms([pieces[i] for i in idx])
        for atom in dec.atoms:
            v = base + len(bound)
            bound.append(v)
            bounds.append((mu.lower * atom.measure, mu.upper * atom.measure))
            for pos, i in enumerate(idx):
                if atom.mask[pos]:
                    terms[i].append(ex.Var(v))
    # free indices are rebased onto the observed slots after binding the future
    mapping = {}
    for i, oi in enumerate(obs_of):
        parts = ([ex.Var(oi)] if oi is not None else []) + terms[i]
        mapping[i] = ex.add_all(parts)
    # bound indices start above every free index, so the substitution cannot capture
    body = ex.substitute(X.expr, mapping)
    return CylinderRandomVariable(tuple(obs), ex.boxmax(bound, bounds, body))


def measurable_before(X: CylinderRandomVariable, t: float) -> bool:
    return all(b.extents[0][1] <= t for r in as_cylinder(X).regions for b in r.boxes)


# points of the observed atom box at which identities are also checked pointwise
def pointwise_extremes(Z: CylinderRandomVariable, model: WhiteNoiseModel,
                       points: int = 64, seed: int = 0,
                       tol: float = 1e-6) -> tuple[float, float]:
    """Bracket ``[min, max]`` of ``Z`` over corners, centre and random points of its atom box.

    Values below ``boxmax`` nodes are certified to ``0.1 * tol``.
    """
    Z = as_cylinder(Z)
    if Z.regions:
        dec = rg.atoms(Z.regions)
        body = in_atom_coordinates(Z.expr, dec)
        box = atom_box(model, dec)
        lo, hi = box.lo, box.hi
    else:
        body = ex.simplify(Z.expr)
        lo = hi = np.zeros(0)
    m = len(lo)
    rng = np.random.default_rng(seed)
    pts = [0.5 * (lo + hi)]
    if m <= 6:
        pts += [np.where(np.array(c, bool), hi, lo) for c in itertools.product((0, 1), repeat=m)]
    pts += list(lo + (hi - lo) * rng.random((points, m)))
    P = np.array(pts).reshape(len(pts), m)
    width = max(ex.max_index(body) + 1, m, 1)
    X = np.zeros((len(P), width))
    X[:, :m] = P
    ctx = search.Context(inner_tol=0.1 * tol)
    vlo, vhi, _, _ = search.enclose(body, X, X, ctx)
    return float(np.min(vlo)), float(np.max(vhi))


def _residual(A, B, model, epsilon) -> float:
    """``E[|A - B|]`` with symbolic cancellation first."""
    d = abs(as_cylinder(A) - as_cylinder(B))
    d = CylinderRandomVariable(d.regions, ex.canonical(ex.simplify(d.expr)))
    return d.expect(model, epsilon).value


def conditional_properties_check(X: CylinderRandomVariable, Y: CylinderRandomVariable,
                                 eta: CylinderRandomVariable, t: float, s: float,
                                 model: WhiteNoiseModel, epsilon: float = 1e-4,
                                 points: int = 32, seed: int = 0) -> CheckReport:
    """Monotonicity, observed-variable triviality, subadditivity, sign split and tower.

    Identities with a zero right-hand side at the expectation level are
    checked as ``E[|LHS - RHS|]``; the others compare expectations and also
    check the pointwise inequality on sampled observed values.
    """
    X, Y, eta = as_cylinder(X), as_cylinder(Y), as_cylinder(eta)
    if not measurable_before(eta, t):
        raise MeasurabilityError("eta depends on noise after the conditioning time")
    tol = epsilon
    cuts = (t, s)

    def ce(Z, at=t):
        return conditional_expect(Z, at, model, cuts)

    def E(Z):
        return as_cylinder(Z).expect(model, 0.1 * tol)

    d: dict = {"t": t, "s": s, "tolerance": tol}

    # (i) Y' = min(X, Y) <= X
    Ylow = combine(ex.Min, X, Y)
    cx, cy = ce(X), ce(Ylow)
    e_gap = E(cy).value - E(cx).value
    _, p_gap = pointwise_extremes(cy - cx, model, points, seed, tol)
    ok1 = e_gap <= tol and p_gap <= tol
    d["monotone"] = {"expectation_gap": e_gap, "pointwise_max_gap": p_gap, "passed": ok1}

    # (ii) observed variables are left unchanged
    r2 = _residual(ce(eta), eta, model, 0.1 * tol)
    ok2 = r2 <= tol
    d["observed_identity"] = {"residual": r2, "passed": ok2}

    # (iii) subadditivity
    cs = ce(X + Y)
    rhs3 = cx + ce(Y)
    e_gap3 = E(cs).value - E(rhs3).value
    _, p_gap3 = pointwise_extremes(cs - rhs3, model, points, seed, tol)
    ok3 = e_gap3 <= tol and p_gap3 <= tol
    d["subadditive"] = {"expectation_gap": e_gap3, "pointwise_max_gap": p_gap3, "passed": ok3}

    # (iv) E[ηX|F_t] = η⁺E[X|F_t] + η⁻E[−X|F_t]
    lhs4 = ce(eta * X)
    rhs4 = (eta.apply(ex.positive_part) * cx) + (eta.apply(ex.negative_part) * ce(-X))
    lo4, hi4 = pointwise_extremes(lhs4 - rhs4, model, points, seed, tol)
    e4 = abs(E(lhs4).value - E(rhs4).value)
    eta_rng = pointwise_extremes(eta, model, 8, seed, tol)
    ok4 = max(abs(lo4), abs(hi4)) <= tol and e4 <= tol
    d["sign_split"] = {"pointwise_max_abs": max(abs(lo4), abs(hi4)), "expectation_diff": e4,
                       "eta_range": list(eta_rng), "passed": ok4}

    # (v) tower
    nested = ce(cx, s)
    direct = ce(X, min(t, s))
    r5 = _residual(nested, direct, model, 0.1 * tol)
    ok5 = r5 <= tol
    d["tower"] = {"residual": r5, "passed": ok5}

    return CheckReport("conditional_properties", ok1 and ok2 and ok3 and ok4 and ok5, d)
