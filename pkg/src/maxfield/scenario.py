"""Scenario files: JSON in, validated module inputs and structured results out.

A scenario names its regions once (``"regions": {"A": [[[0, 1]]]}``, each
box a list of ``[lo, hi)`` pairs, one per axis) and refers to them by name in
the query. Unknown keys are rejected with their path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from . import expr as ex
from . import integral as ig
from . import lln
from . import maximal as mx
from . import pde
from . import regions as rg
from . import whitenoise as wn

QUERY_TYPES = ("fdd", "generating", "integral", "conditional", "pde", "lln", "verify")
PROPERTIES = ("additivity", "consistency", "expansion", "integral_bound", "integral_properties",
              "conditional_properties", "invariance", "axioms", "independence", "distance",
              "semigroup")


class ScenarioError(ValueError):
    """Invalid scenario input; ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class _Node:
    """Dict wrapper that records which keys were consumed."""

    def __init__(self, obj, path: str):
        if not isinstance(obj, dict):
            raise ScenarioError("expected an object", path)
        self.obj, self.path, self.used = obj, path, set()

    def sub(self, key) -> str:
        return f"{self.path}.{key}" if self.path else key

    def has(self, key) -> bool:
        return key in self.obj

    def get(self, key, default=None, required=False):
        if key not in self.obj:
            if required:
                raise ScenarioError("missing required field", self.sub(key))
            return default
        self.used.add(key)
        return self.obj[key]

    def node(self, key, required=True):
        v = self.get(key, required=required)
        return None if v is None else _Node(v, self.sub(key))

    def finish(self):
        extra = sorted(set(self.obj) - self.used)
        if extra:
            raise ScenarioError(f"unknown field {extra[0]!r}", self.sub(extra[0]))


def _number(v, path, positive=False, nonneg=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError("expected a finite number", path)
    if positive and not v > 0:
        raise ScenarioError("must be positive", path)
    if nonneg and v < 0:
        raise ScenarioError("must be nonnegative", path)
    return float(v)


def _integer(v, path, minimum=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError("expected an integer", path)
    if minimum is not None and v < minimum:
        raise ScenarioError(f"must be at least {minimum}", path)
    return v


def _list(v, path, length=None) -> list:
    if not isinstance(v, list):
        raise ScenarioError("expected a list", path)
    if length is not None and len(v) != length:
        raise ScenarioError(f"expected {length} entries, got {len(v)}", path)
    return v


def _interval(v, path) -> tuple[float, float]:
    a, b = _list(v, path, 2)
    a, b = _number(a, f"{path}[0]"), _number(b, f"{path}[1]")
    if a > b:
        raise ScenarioError(f"lower end {a:g} exceeds upper end {b:g}", path)
    return a, b


def _expression(text, path) -> ex.Expr:
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return ex.Const(float(text))
    if not isinstance(text, str):
        raise ScenarioError("expected expression text", path)
    try:
        return ex.parse(text)
    except ex.ExpressionError as e:
        pos = f" at column {e.position + 1}" if getattr(e, "position", None) is not None else ""
        raise ScenarioError(f"{e.args[0]}{pos}", path) from None


@dataclass
class Scenario:
    mu: mx.UncertaintyInterval
    dimension: int
    regions: dict[str, rg.Region]
    query: dict[str, Any]
    phi: ex.Expr | None
    epsilon: float
    mode: str
    seed: int
    expect: dict | None
    source: Any = field(repr=False, default=None)

    @property
    def qtype(self) -> str:
        return self.query["type"]

    def model(self, dim: int | None = None) -> wn.WhiteNoiseModel:
        return wn.WhiteNoiseModel(self.dimension if dim is None else dim, self.mu)


def parse_text(text: str, name: str = "<scenario>") -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{name}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") \
            from None
    return from_dict(raw)


def load(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e.strerror}") from None
    return parse_text(text, str(path))


def from_dict(raw) -> Scenario:
    top = _Node(raw, "")
    mu = _interval(top.get("mu", required=True), "mu")
    dim = _integer(top.get("dimension", 1), "dimension", 1)
    regs_node = top.node("regions", required=False)
    regions: dict[str, rg.Region] = {}
    if regs_node is not None:
        for name in regs_node.obj:
            path = regs_node.sub(name)
            boxes = _list(regs_node.get(name), path)
            if not boxes:
                raise ScenarioError("a region needs at least one box", path)
            parsed = []
            for bi, box in enumerate(boxes):
                bpath = f"{path}[{bi}]"
                axes = _list(box, bpath)
                if not axes:
                    raise ScenarioError("a box needs at least one axis", bpath)
                try:
                    parsed.append(tuple(_interval(a, f"{bpath}[{k}]") for k, a in enumerate(axes)))
                except ScenarioError as e:
                    raise ScenarioError(f"region {name!r}: {e.args[0]}") from None
            try:
                regions[name] = rg.normalize(parsed, name=name)
            except ValueError as e:
                raise ScenarioError(f"region {name!r}: {e}", path) from None
        regs_node.finish()
    phi_text = top.get("phi")
    phi = None if phi_text is None else _expression(phi_text, "phi")
    eps = _number(top.get("epsilon", 1e-6), "epsilon", positive=True)
    mode = top.get("mode", "certified")
    if mode not in ("certified", "heuristic"):
        raise ScenarioError("must be 'certified' or 'heuristic'", "mode")
    seed = _integer(top.get("seed", 0), "seed", 0)
    assertion = None
    an = top.node("assert", required=False)
    if an is not None:
        assertion = {"value": _number(an.get("value", required=True), "assert.value"),
                     "tol": _number(an.get("tol", 1e-9), "assert.tol", nonneg=True)}
        an.finish()
    qn = top.node("query")
    qtype = qn.get("type", required=True)
    if qtype not in QUERY_TYPES:
        raise ScenarioError(f"unknown query type {qtype!r}; expected one of {QUERY_TYPES}",
                            "query.type")
    sc = Scenario(mx.UncertaintyInterval(*mu), dim, regions, {"type": qtype}, phi, eps, mode,
                  seed, assertion, raw)
    _QUERY_PARSERS[qtype](sc, qn)
    qn.finish()
    top.finish()
    return sc


# ---------------------------------------------------------------------------
# query parsers fill ``sc.query`` with ready-to-use objects


def _region_ref(sc: Scenario, name, path, dim=None) -> rg.Region:
    if not isinstance(name, str):
        raise ScenarioError("expected a region name", path)
    if name not in sc.regions:
        raise ScenarioError(f"unknown region {name!r}", path)
    r = sc.regions[name]
    if dim is not None and r.dim != dim:
        raise ScenarioError(f"region {name!r} has dimension {r.dim}, expected {dim}", path)
    return r


def _region_list(sc, node: _Node, key, dim=None, required=True, length=None):
    v = node.get(key, required=required)
    if v is None:
        return None
    path = node.sub(key)
    names = _list(v, path, length)
    return [_region_ref(sc, n, f"{path}[{i}]", dim) for i, n in enumerate(names)]


def _need_phi(sc: Scenario, arity: int | None = None):
    if sc.phi is None:
        raise ScenarioError("this query needs a test function", "phi")
    if arity is not None and sc.phi.arity > arity:
        raise ScenarioError(f"uses {sc.phi.arity} variables, only {arity} available", "phi")
    return sc.phi


def _cylinder(sc, v, path, dim=None) -> ig.CylinderRandomVariable:
    """A number, or ``{"phi": text, "regions": [names]}``."""
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return ig.constant(_number(v, path))
    n = _Node(v, path)
    e = _expression(n.get("phi", required=True), n.sub("phi"))
    regs = _region_list(sc, n, "regions", dim, required=False) or []
    n.finish()
    if e.arity > len(regs):
        raise ScenarioError(f"uses {e.arity} variables, only {len(regs)} regions given",
                            n.sub("phi"))
    return ig.CylinderRandomVariable(tuple(regs), e)


def _spatial_field(sc, q: _Node) -> ig.SimpleRandomField:
    terms = []
    path = q.sub("terms")
    for i, t in enumerate(_list(q.get("terms", required=True), path)):
        tn = _Node(t, f"{path}[{i}]")
        carrier = _region_ref(sc, tn.get("carrier", required=True), tn.sub("carrier"),
                              sc.dimension)
        coef = _cylinder(sc, tn.get("coefficient", 1.0), tn.sub("coefficient"), sc.dimension)
        tn.finish()
        terms.append((coef, carrier))
    try:
        return ig.SimpleRandomField(terms)
    except ValueError as e:
        raise ScenarioError(str(e), path) from None


def _ts_field(sc, q: _Node, own: bool = False) -> ig.TemporalSpatialField:
    if sc.dimension < 2:
        raise ScenarioError("temporal-spatial fields need dimension >= 2 (time plus space)",
                            "dimension")
    path = q.path
    grid = [_number(v, f"{q.sub('time_grid')}[{i}]")
            for i, v in enumerate(_list(q.get("time_grid", required=True), q.sub("time_grid")))]
    spatial = _region_list(sc, q, "spatial", sc.dimension - 1)
    rows = _list(q.get("coefficients", required=True), q.sub("coefficients"), len(grid) - 1)
    coefs = []
    for i, row in enumerate(rows):
        rpath = f"{q.sub('coefficients')}[{i}]"
        coefs.append([_cylinder(sc, c, f"{rpath}[{j}]", sc.dimension)
                      for j, c in enumerate(_list(row, rpath, len(spatial)))])
    if own:
        q.finish()
    try:
        return ig.TemporalSpatialField(grid, spatial, coefs)
    except ValueError as e:
        raise ScenarioError(str(e), path) from None


def _parse_fdd(sc, q):
    regs = _region_list(sc, q, "regions", sc.dimension)
    _need_phi(sc, len(regs))
    sc.query["regions"] = regs


def _parse_generating(sc, q):
    regs = _region_list(sc, q, "regions", sc.dimension)
    p = _list(q.get("p", required=True), q.sub("p"), len(regs))
    sc.query["regions"] = regs
    sc.query["p"] = [_number(v, f"{q.sub('p')}[{i}]") for i, v in enumerate(p)]


def _parse_integral(sc, q):
    if q.has("terms"):
        sc.query["field"] = _spatial_field(sc, q)
        sc.query["kind"] = "spatial"
    else:
        sc.query["field"] = _ts_field(sc, q)
        sc.query["kind"] = "temporal-spatial"


def _parse_conditional(sc, q):
    regs = _region_list(sc, q, "regions", sc.dimension)
    phi = _need_phi(sc, len(regs))
    sc.query["X"] = ig.CylinderRandomVariable(tuple(regs), phi)
    sc.query["t"] = _number(q.get("t", required=True), q.sub("t"), nonneg=True)


def _parse_pde(sc, q):
    box = q.get("lambda")
    lam = [sc.mu.as_tuple()] if box is None else \
        [_interval(v, f"{q.sub('lambda')}[{i}]") for i, v in enumerate(_list(box, q.sub("lambda")))]
    if len(lam) not in (1, 2):
        raise ScenarioError("Λ must have one or two axes", q.sub("lambda"))
    phi = _need_phi(sc, len(lam))
    horizon = _number(q.get("horizon", 1.0), q.sub("horizon"), nonneg=True)
    rb = q.get("report_box")
    report = [(-1.0, 1.0)] * len(lam) if rb is None else \
        [_interval(v, f"{q.sub('report_box')}[{i}]") for i, v in enumerate(_list(rb, q.sub("report_box"), len(lam)))]
    hs = q.get("refinements", [1 / 32, 1 / 64, 1 / 128])
    hs = [_number(v, f"{q.sub('refinements')}[{i}]", positive=True)
          for i, v in enumerate(_list(hs, q.sub("refinements")))]
    if len(hs) < 2:
        raise ScenarioError("need at least two refinement levels", q.sub("refinements"))
    cfl = _number(q.get("cfl", 0.5), q.sub("cfl"), positive=True)
    try:
        sc.query["problem"] = pde.PdeProblem(mx.MaximalVector(lam), phi, horizon, report,
                                             hs[0], cfl)
    except ValueError as e:
        raise ScenarioError(str(e), q.path) from None
    sc.query["refinements"] = hs
    sc.query["threshold"] = _number(q.get("threshold", 0.05), q.sub("threshold"), positive=True)


def _parse_lln(sc, q):
    phi = _need_phi(sc, 1)
    ns = [_integer(v, f"{q.sub('n')}[{i}]", 1)
          for i, v in enumerate(_list(q.get("n", [100, 10000]), q.sub("n")))]
    if any(b <= a for a, b in zip(ns, ns[1:])) or not ns:
        raise ScenarioError("must be a strictly increasing nonempty list", q.sub("n"))
    noise = q.get("noise", "uniform")
    if noise not in lln.NOISE_KINDS:
        raise ScenarioError(f"must be one of {lln.NOISE_KINDS}", q.sub("noise"))
    sc.query.update(
        n=ns, phi=phi,
        samples=_integer(q.get("samples", 2000), q.sub("samples"), 100),
        family=lln.MeasureFamily.standard(
            sc.mu, noise, _number(q.get("sigma", 1.0), q.sub("sigma"), nonneg=True),
            _integer(q.get("grid", 11), q.sub("grid"), 1),
            bool(q.get("switching", True))),
        threshold=_number(q.get("threshold", 0.15), q.sub("threshold"), positive=True),
    )


def _parse_verify(sc, q):
    prop = q.get("property", required=True)
    if prop not in PROPERTIES:
        raise ScenarioError(f"unknown property {prop!r}; expected one of {PROPERTIES}",
                            q.sub("property"))
    sc.query["property"] = prop
    d = sc.dimension
    if prop in ("additivity", "consistency"):
        sc.query["regions"] = _region_list(sc, q, "regions", d)
        if prop == "consistency":
            sc.query["trials"] = _integer(q.get("trials", 50), q.sub("trials"), 1)
    elif prop == "expansion":
        sc.query["regions"] = _region_list(sc, q, "regions", d, length=3)
        p = _list(q.get("p", required=True), q.sub("p"), 3)
        sc.query["p"] = [_number(v, f"{q.sub('p')}[{i}]") for i, v in enumerate(p)]
    elif prop == "integral_bound":
        _parse_integral(sc, q)
    elif prop == "integral_properties":
        sc.query["f"] = _ts_field(sc, q.node("f"), own=True)
        sc.query["g"] = _ts_field(sc, q.node("g"), own=True)
        sc.query["alpha"] = _cylinder(sc, q.get("alpha", 1.0), q.sub("alpha"), d)
        for k in ("s", "r", "t"):
            sc.query[k] = _number(q.get(k, required=True), q.sub(k), nonneg=True)
    elif prop == "conditional_properties":
        for k in ("X", "Y", "eta"):
            sc.query[k] = _cylinder(sc, q.get(k, required=True), q.sub(k), d)
        sc.query["t"] = _number(q.get("t", required=True), q.sub("t"), nonneg=True)
        sc.query["s"] = _number(q.get("s", required=True), q.sub("s"), nonneg=True)
    elif prop == "invariance":
        regs = _region_list(sc, q, "regions", d)
        _need_phi(sc, len(regs))
        sc.query["regions"] = regs
        sc.query["shift"] = [_number(v, f"{q.sub('shift')}[{i}]") for i, v in
                             enumerate(_list(q.get("shift", [0.0] * d), q.sub("shift"), d))]
        sc.query["perm"] = [_integer(v, f"{q.sub('perm')}[{i}]") for i, v in
                            enumerate(_list(q.get("perm", list(range(d))), q.sub("perm"), d))]
        sc.query["signs"] = [_integer(v, f"{q.sub('signs')}[{i}]") for i, v in
                             enumerate(_list(q.get("signs", [1] * d), q.sub("signs"), d))]
        if sorted(sc.query["perm"]) != list(range(d)):
            raise ScenarioError("not a permutation of the axes", q.sub("perm"))
        if any(s not in (1, -1) for s in sc.query["signs"]):
            raise ScenarioError("signs must be 1 or -1", q.sub("signs"))
    elif prop == "axioms":
        box = [_interval(v, f"{q.sub('box')}[{i}]")
               for i, v in enumerate(_list(q.get("box", required=True), q.sub("box")))]
        sc.query["box"] = mx.MaximalVector(box)
        for k in ("e1", "e2"):
            e = _expression(q.get(k, required=True), q.sub(k))
            if e.arity > len(box):
                raise ScenarioError(f"uses {e.arity} variables, box has {len(box)}", q.sub(k))
            sc.query[k] = e
        sc.query["lambda"] = _number(q.get("lambda", 2.0), q.sub("lambda"), nonneg=True)
    elif prop == "independence":
        sc.query["intervals"] = [_interval(v, f"{q.sub('intervals')}[{i}]") for i, v in
                                 enumerate(_list(q.get("intervals", required=True),
                                                 q.sub("intervals")))]
        sc.query["trials"] = _integer(q.get("trials", 10), q.sub("trials"), 1)
    elif prop == "distance":
        sc.query["region"] = _region_ref(sc, q.get("region", required=True), q.sub("region"), d)
    elif prop == "semigroup":
        _parse_pde(sc, q)
        sc.query["t"] = _number(q.get("t", required=True), q.sub("t"), nonneg=True)
        sc.query["s"] = _number(q.get("s", required=True), q.sub("s"), nonneg=True)
        pts = _list(q.get("points", required=True), q.sub("points"))
        dd = sc.query["problem"].dim
        sc.query["points"] = [[_number(c, f"{q.sub('points')}[{i}][{k}]")
                               for k, c in enumerate(_list(p, f"{q.sub('points')}[{i}]", dd))]
                              for i, p in enumerate(pts)]


_QUERY_PARSERS = {
    "fdd": _parse_fdd, "generating": _parse_generating, "integral": _parse_integral,
    "conditional": _parse_conditional, "pde": _parse_pde, "lln": _parse_lln,
    "verify": _parse_verify,
}
