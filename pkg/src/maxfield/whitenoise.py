"""Finite-dimensional laws of the spatial maximally distributed white noise.

A query ``φ(W_{A_1}, ..., W_{A_n})`` is evaluated in atom coordinates: the
regions are cut into the nonempty atoms of their membership masks, each atom
``k`` carries an independent maximal coordinate ``a_k ∈ [μ̲λ_k, μ̄λ_k]`` and
``W_{A_i} = Σ_{k ⊆ A_i} a_k``. Overlapping regions make the ``W`` coordinates
linearly dependent, the atom box is the faithful product domain.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as ex
from . import regions as rg
from .maximal import (CertifiedValue, MaximalVector, UncertaintyInterval, g_eval,
                      maximize)
from .report import CheckReport


@dataclass(frozen=True)
class WhiteNoiseModel:
    dim: int
    mu: UncertaintyInterval

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dimension must be positive")
        mu = self.mu if isinstance(self.mu, UncertaintyInterval) else UncertaintyInterval(*self.mu)
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "mu", mu)

    @property
    def kappa(self) -> float:
        return self.mu.kappa


@dataclass(frozen=True)
class FddQuery:
    model: WhiteNoiseModel
    regions: tuple[rg.Region, ...]
    phi: ex.Expr

    def __post_init__(self):
        regs = tuple(self.regions)
        object.__setattr__(self, "regions", regs)
        _check_dims(self.model, regs)
        names = [r.name for r in regs if r.name is not None]
        if len(set(names)) != len(names):
            raise ValueError("region names must be distinct")
        if self.phi.arity > len(regs):
            raise ValueError(f"phi uses {self.phi.arity} variables but only {len(regs)} regions given")


def _check_dims(model: WhiteNoiseModel, regions: Sequence[rg.Region]):
    for i, r in enumerate(regions):
        if r.dim != model.dim:
            raise ValueError(f"region {r.name or i} has dimension {r.dim}, model has {model.dim}")


def atom_box(model: WhiteNoiseModel, dec: rg.AtomDecomposition) -> MaximalVector:
    mu = model.mu
    return MaximalVector([(mu.lower * a.measure, mu.upper * a.measure) for a in dec.atoms])


def in_atom_coordinates(phi: ex.Expr, dec: rg.AtomDecomposition) -> ex.Expr:
    """Rewrite ``φ(w_1..w_n)`` as a function of the atom coordinates."""
    n = len(dec.sources)
    mapping = {i: ex.add_all(ex.Var(k) for k in dec.members(i)) for i in range(n)}
    # substitute binds fresh names for boxmax variables, so no capture is possible
    return ex.simplify(ex.substitute(phi, mapping))


def fdd_generating(model: WhiteNoiseModel, regions: Sequence[rg.Region],
                   p: Sequence[float]) -> float:
    """``Σ_k g(k·p) λ_{B(k)}`` over the nonempty atoms, in closed form."""
    regions = list(regions)
    if len(p) != len(regions):
        raise ValueError(f"p has length {len(p)}, expected {len(regions)}")
    _check_dims(model, regions)
    dec = rg.atoms(regions)
    p = [float(v) for v in p]
    return math.fsum(
        g_eval(math.fsum(p[i] for i in range(len(p)) if a.mask[i]), model.mu) * a.measure
        for a in dec.atoms)


def fdd_expect(query: FddQuery, epsilon: float = 1e-6, mode: str = "certified",
               seed: int = 0) -> CertifiedValue:
    """Sublinear expectation of ``φ(W_{A_1}, ..., W_{A_n})``."""
    if not query.regions:
        return maximize(ex.simplify(query.phi), MaximalVector([]), epsilon, mode=mode, seed=seed)
    dec = rg.atoms(query.regions)
    body = in_atom_coordinates(query.phi, dec)
    return maximize(body, atom_box(query.model, dec), epsilon, mode=mode, seed=seed)


def expect(model: WhiteNoiseModel, regions: Sequence[rg.Region], phi: ex.Expr,
           epsilon: float = 1e-6, **kw) -> CertifiedValue:
    return fdd_expect(FddQuery(model, tuple(regions), phi), epsilon, **kw)


def marginal_bounds(model: WhiteNoiseModel, region: rg.Region) -> UncertaintyInterval:
    """Range of ``W_A``: ``[μ̲λ_A, μ̄λ_A]``."""
    return UncertaintyInterval(model.mu.lower * region.measure, model.mu.upper * region.measure)


def additivity_residual(model: WhiteNoiseModel, regions: Sequence[rg.Region],
                        epsilon: float = 1e-6) -> CertifiedValue:
    """``E[|Σ W_{A_i} − W_{∪A_i}|]`` for pairwise disjoint regions."""
    regions = list(regions)
    if not regions:
        raise ValueError("need at least one region")
    for i, j in itertools.combinations(range(len(regions)), 2):
        if not rg.disjoint(regions[i], regions[j]):
            raise ValueError(f"regions {i} and {j} overlap")
    whole = rg.union(*regions, name="__union__")
    n = len(regions)
    phi = ex.Abs(ex.Sub(ex.add_all(ex.Var(i) for i in range(n)), ex.Var(n)))
    srcs = [r.named(None) for r in regions] + [whole.named(None)]
    return fdd_expect(FddQuery(model, tuple(srcs), phi), epsilon)


def consistency_check(model: WhiteNoiseModel, regions: Sequence[rg.Region],
                      trials: int = 20, seed: int = 0, extra: rg.Region | None = None,
                      rtol: float = 1e-12) -> CheckReport:
    """Compatibility (padding with an unused region) and permutation symmetry."""
    regions = list(regions)
    n = len(regions)
    rng = np.random.default_rng(seed)
    if extra is None:
        bb = rg.union(*regions).bounding_box()
        lo = [a for a, _ in bb.extents]
        hi = [b for _, b in bb.extents]
        ext = tuple((float(l + 0.5 * (h - l)), float(h + 1.0)) for l, h in zip(lo, hi))
        extra = rg.normalize([ext])
    worst_c = worst_s = 0.0
    for _ in range(trials):
        p = rng.normal(size=n)
        base = fdd_generating(model, regions, p)
        padded = fdd_generating(model, regions + [extra], list(p) + [0.0])
        worst_c = max(worst_c, abs(base - padded) / max(1.0, abs(base)))
        perm = rng.permutation(n)
        permuted = fdd_generating(model, [regions[k] for k in perm], p[perm])
        worst_s = max(worst_s, abs(base - permuted) / max(1.0, abs(base)))
    ok = worst_c <= rtol and worst_s <= rtol
    return CheckReport("consistency", ok, {
        "regions": n, "trials": trials, "compatibility_residual": worst_c,
        "symmetry_residual": worst_s,
    })


# order of the displayed three-set expansion
EXPANSION_ORDER = ((1, 1, 1), (1, 1, 0), (0, 1, 1), (1, 0, 1), (1, 0, 0), (0, 1, 0), (0, 0, 1))


@dataclass(frozen=True)
class ExpansionTerm:
    mask: tuple[int, int, int]
    slope: float
    g_value: float
    measure: float

    @property
    def value(self) -> float:
        return self.g_value * self.measure


def expansion_3set(model: WhiteNoiseModel, a1: rg.Region, a2: rg.Region, a3: rg.Region,
                   p: Sequence[float]) -> tuple[list[ExpansionTerm], float]:
    """Seven-term expansion of the three-region generating function.

    Each term is ``g(k·p) · λ(B(k))`` for one nonzero mask ``k``; absent atoms
    contribute measure 0.
    """
    if len(p) != 3:
        raise ValueError("p must have length 3")
    dec = rg.atoms([a1, a2, a3])
    meas = {a.mask: a.measure for a in dec.atoms}
    terms = []
    for k in EXPANSION_ORDER:
        s = math.fsum(float(pi) for pi, ki in zip(p, k) if ki)
        terms.append(ExpansionTerm(k, s, g_eval(s, model.mu), meas.get(k, 0.0)))
    return terms, math.fsum(t.value for t in terms)


def invariance_check(model: WhiteNoiseModel, regions: Sequence[rg.Region], phi: ex.Expr,
                     shift: Sequence[float] | None = None, perm: Sequence[int] | None = None,
                     signs: Sequence[int] | None = None, epsilon: float = 1e-6) -> CheckReport:
    """Law of the query is unchanged by a shift plus signed axis permutation."""
    regions = list(regions)
    moved = [rg.transform(r, shift, perm, signs) for r in regions]
    a = expect(model, regions, phi, epsilon)
    b = expect(model, moved, phi, epsilon)
    diff = abs(a.value - b.value)
    return CheckReport("invariance", diff <= 2 * epsilon, {
        "original": a.value, "transformed": b.value, "difference": diff,
        "shift": list(shift) if shift is not None else None,
        "perm": list(perm) if perm is not None else None,
        "signs": list(signs) if signs is not None else None,
    })


def distance_to_range_check(model: WhiteNoiseModel, region: rg.Region,
                            epsilon: float = 1e-6) -> CheckReport:
    """``E[dist(W_A, [μ̲λ_A, μ̄λ_A])] = 0``: the noise stays in its range."""
    b = marginal_bounds(model, region)
    x = ex.Var(0)
    dist = ex.Add(ex.Max(ex.Sub(ex.Const(b.lower), x), ex.Const(0.0)),
                  ex.Max(ex.Sub(x, ex.Const(b.upper)), ex.Const(0.0)))
    r = expect(model, [region], dist, epsilon)
    return CheckReport("distance_to_range", r.value + r.error_bound <= epsilon + 1e-12, {
        "range": b.as_tuple(), "expected_distance": r.value, "error_bound": r.error_bound,
    })
