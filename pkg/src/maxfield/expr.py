"""Test-function expressions.

Test functions are kept as small immutable syntax trees rather than Python
callables: the maximizer needs interval enclosures and slope bounds, and
conditional expectations need a node that maximizes out some variables
(:class:`BoxMax`). Variables are numbered ``x0, x1, ...``; a ``BoxMax`` binds
some indices over given intervals and leaves the rest free.

There is deliberately no division node, so every expression is Lipschitz on
compact boxes.
"""

from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Mapping, Sequence


class ExpressionError(ValueError):
    """Malformed expression text or structure. ``position`` is 0-based."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at column {position + 1})"
        super().__init__(message)
        self.position = position


class Expr:
    """Base node. Subclasses are frozen dataclasses with a cached hash."""

    __slots__ = ()

    # arithmetic sugar so expressions can be written naturally in Python
    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __pos__(self):
        return self

    def __abs__(self):
        return Abs(self)

    def __pow__(self, k):
        return Pow(self, k)

    def __truediv__(self, other):
        raise ExpressionError("division is not supported")

    def __str__(self):
        return to_text(self)

    @property
    def arity(self) -> int:
        fv = free_vars(self)
        return max(fv) + 1 if fv else 0


def _hashed(cls):
    """Cache the structural hash; trees are hashed a lot during simplification."""
    plain = cls.__hash__

    def __hash__(self):
        try:
            return object.__getattribute__(self, "_h")
        except AttributeError:
            h = plain(self)
            object.__setattr__(self, "_h", h)
            return h

    cls.__hash__ = __hash__
    return cls


@_hashed
@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v):
            raise ExpressionError(f"non-finite constant {self.value!r}")
        object.__setattr__(self, "value", v)


@_hashed
@dataclass(frozen=True, eq=True)
class Var(Expr):
    index: int

    def __post_init__(self):
        if int(self.index) != self.index or self.index < 0:
            raise ExpressionError(f"bad variable index {self.index!r}")
        object.__setattr__(self, "index", int(self.index))


@_hashed
@dataclass(frozen=True, eq=True)
class Add(Expr):
    a: Expr
    b: Expr


@_hashed
@dataclass(frozen=True, eq=True)
class Sub(Expr):
    a: Expr
    b: Expr


@_hashed
@dataclass(frozen=True, eq=True)
class Mul(Expr):
    a: Expr
    b: Expr


@_hashed
@dataclass(frozen=True, eq=True)
class Neg(Expr):
    a: Expr


@_hashed
@dataclass(frozen=True, eq=True)
class Abs(Expr):
    a: Expr


@_hashed
@dataclass(frozen=True, eq=True)
class Min(Expr):
    a: Expr
    b: Expr


@_hashed
@dataclass(frozen=True, eq=True)
class Max(Expr):
    a: Expr
    b: Expr


@_hashed
@dataclass(frozen=True, eq=True)
class Pow(Expr):
    a: Expr
    k: int

    def __post_init__(self):
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise ExpressionError(f"exponent must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))


@_hashed
@dataclass(frozen=True, eq=True)
class BoxMax(Expr):
    """``max`` of ``body`` over the variables ``bound``, each in its interval."""

    bound: tuple[int, ...]
    bounds: tuple[tuple[float, float], ...]
    body: Expr

    def __post_init__(self):
        bound = tuple(int(i) for i in self.bound)
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        if len(bound) != len(bounds):
            raise ExpressionError("boxmax needs one interval per bound variable")
        if len(set(bound)) != len(bound):
            raise ExpressionError("boxmax binds a variable twice")
        for a, b in bounds:
            if not (math.isfinite(a) and math.isfinite(b)) or a > b:
                raise ExpressionError(f"bad boxmax interval [{a}, {b}]")
        object.__setattr__(self, "bound", bound)
        object.__setattr__(self, "bounds", bounds)


BINARY = (Add, Sub, Mul, Min, Max)
UNARY = (Neg, Abs)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return Const(x)
    raise TypeError(f"cannot use {type(x).__name__} as an expression")


def const(c: float) -> Const:
    return Const(c)


def var(i: int) -> Var:
    return Var(i)


def variables(n: int) -> list[Var]:
    return [Var(i) for i in range(n)]


def add_all(terms: Iterable[Expr]) -> Expr:
    terms = list(terms)
    if not terms:
        return Const(0.0)
    return reduce(Add, terms)


def maximum(*args) -> Expr:
    return reduce(Max, [as_expr(a) for a in args])


def minimum(*args) -> Expr:
    return reduce(Min, [as_expr(a) for a in args])


def positive_part(e: Expr) -> Expr:
    return Max(e, Const(0.0))


def negative_part(e: Expr) -> Expr:
    return Max(Neg(e), Const(0.0))


def boxmax(bound: Sequence[int], bounds: Sequence[tuple[float, float]], body: Expr) -> Expr:
    """Smart constructor: flattens directly nested maxima and drops unused binders."""
    body = as_expr(body)
    pairs = list(zip(bound, bounds))
    while isinstance(body, BoxMax):
        taken = {i for i, _ in pairs}
        inner = [(i, b) for i, b in zip(body.bound, body.bounds)]
        if taken & {i for i, _ in inner}:
            break
        pairs += inner
        body = body.body
    used = free_vars(body)
    pairs = [(i, b) for i, b in pairs if i in used]
    if not pairs:
        return body
    return BoxMax(tuple(i for i, _ in pairs), tuple(b for _, b in pairs), body)


# ---------------------------------------------------------------------------
# structural queries


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, BINARY):
        return (e.a, e.b)
    if isinstance(e, UNARY + (Pow,)):
        return (e.a,)
    if isinstance(e, BoxMax):
        return (e.body,)
    return ()


def free_vars(e: Expr) -> frozenset[int]:
    if isinstance(e, Var):
        return frozenset((e.index,))
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, BoxMax):
        return free_vars(e.body) - set(e.bound)
    out = frozenset()
    for c in children(e):
        out |= free_vars(c)
    return out


def max_index(e: Expr) -> int:
    """Largest variable index anywhere in ``e`` (free or bound); -1 if none."""
    if isinstance(e, Var):
        return e.index
    m = -1
    if isinstance(e, BoxMax) and e.bound:
        m = max(e.bound)
    for c in children(e):
        m = max(m, max_index(c))
    return m


def size(e: Expr) -> int:
    return 1 + sum(size(c) for c in children(e))


def contains_boxmax(e: Expr) -> bool:
    return isinstance(e, BoxMax) or any(contains_boxmax(c) for c in children(e))


def rebuild(e: Expr, kids: Sequence[Expr]) -> Expr:
    if isinstance(e, BINARY):
        return type(e)(kids[0], kids[1])
    if isinstance(e, UNARY):
        return type(e)(kids[0])
    if isinstance(e, Pow):
        return Pow(kids[0], e.k)
    if isinstance(e, BoxMax):
        return BoxMax(e.bound, e.bounds, kids[0])
    return e


# ---------------------------------------------------------------------------
# substitution


def substitute(e: Expr, mapping: Mapping[int, Expr]) -> Expr:
    """Replace free variables; bound variables are renamed to avoid capture.

    Free variables missing from ``mapping`` are left untouched.
    """
    mapping = {int(k): as_expr(v) for k, v in mapping.items()}
    top = max([max_index(e)] + [max_index(v) for v in mapping.values()] + list(mapping))
    return _subst(e, mapping, [top + 1])


def _subst(e: Expr, mapping: dict[int, Expr], fresh: list[int]) -> Expr:
    if isinstance(e, Var):
        return mapping.get(e.index, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, BoxMax):
        inner = dict(mapping)
        new_bound = []
        for i in e.bound:
            j = fresh[0]
            fresh[0] += 1
            inner[i] = Var(j)
            new_bound.append(j)
        return BoxMax(tuple(new_bound), e.bounds, _subst(e.body, inner, fresh))
    return rebuild(e, [_subst(c, mapping, fresh) for c in children(e)])


def reindex(e: Expr, perm: Mapping[int, int]) -> Expr:
    return substitute(e, {i: Var(j) for i, j in perm.items()})


def alpha_rename(e: Expr, start: int | None = None) -> Expr:
    """Give every binder a fresh index, unique across the whole tree."""
    counter = [max_index(e) + 1 if start is None else start]

    def go(node, env):
        if isinstance(node, Var):
            return env.get(node.index, node)
        if isinstance(node, Const):
            return node
        if isinstance(node, BoxMax):
            inner = dict(env)
            new = []
            for i in node.bound:
                inner[i] = Var(counter[0])
                new.append(counter[0])
                counter[0] += 1
            return BoxMax(tuple(new), node.bounds, go(node.body, inner))
        return rebuild(node, [go(c, env) for c in children(node)])

    return go(e, {})


def _nonnegative(e: Expr) -> bool:
    if isinstance(e, Const):
        return e.value >= 0
    if isinstance(e, Abs):
        return True
    if isinstance(e, Pow):
        return e.k % 2 == 0 or _nonnegative(e.a)
    if isinstance(e, Max):
        return _nonnegative(e.a) or _nonnegative(e.b)
    if isinstance(e, (Add, Mul, Min)):
        return _nonnegative(e.a) and _nonnegative(e.b)
    return False


def hoist_maxima(e: Expr) -> Expr:
    """Pull ``boxmax`` binders to the root where that leaves the value unchanged.

    Binders with disjoint variables commute with ``+``, ``max``, subtraction
    of a binder-free term and multiplication by a nonnegative binder-free
    factor, so for example ``max_u f(u) + max_v g(v) = max_{u,v} (f + g)``.
    Other positions keep their maxima nested.
    """
    e = alpha_rename(e)

    def wrap(binders, body):
        if not binders:
            return body
        return BoxMax(tuple(i for i, _ in binders), tuple(b for _, b in binders), body)

    def go(node):
        if isinstance(node, BoxMax):
            bs, body = go(node.body)
            return list(zip(node.bound, node.bounds)) + bs, body
        if isinstance(node, (Add, Max)):
            ba, a = go(node.a)
            bb, b = go(node.b)
            return ba + bb, type(node)(a, b)
        if isinstance(node, Sub):
            ba, a = go(node.a)
            return ba, Sub(a, wrap(*go(node.b)))
        if isinstance(node, Mul):
            ba, a = go(node.a)
            bb, b = go(node.b)
            if not ba and bb and _nonnegative(a):
                return bb, Mul(a, b)
            if not bb and ba and _nonnegative(b):
                return ba, Mul(a, b)
            return [], Mul(wrap(ba, a), wrap(bb, b))
        if isinstance(node, (Var, Const)):
            return [], node
        return [], rebuild(node, [wrap(*go(c)) for c in children(node)])

    return wrap(*go(e))


def canonical(e: Expr) -> Expr:
    """Rename bound variables deterministically.

    Each binder's variables are renumbered consecutively from one past the
    largest free index of the binder, so alpha-equivalent trees compare equal.
    """
    if isinstance(e, BoxMax):
        fv = free_vars(e)
        base = max(fv) + 1 if fv else 0
        ren = {i: Var(base + k) for k, i in enumerate(e.bound)}
        # temporarily move clashing free indices out of the way is unnecessary:
        # base exceeds every free index of the binder
        body = _subst(e.body, ren, [max(max_index(e), base + len(e.bound)) + 1])
        return BoxMax(tuple(range(base, base + len(e.bound))), e.bounds, canonical(body))
    kids = children(e)
    if not kids:
        return e
    return rebuild(e, [canonical(c) for c in kids])


# ---------------------------------------------------------------------------
# point evaluation (plain floats, for tests and small checks)


def evaluate(e: Expr, x: Sequence[float]) -> float:
    """Evaluate a BoxMax-free expression at a point."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(x[e.index])
    if isinstance(e, Add):
        return evaluate(e.a, x) + evaluate(e.b, x)
    if isinstance(e, Sub):
        return evaluate(e.a, x) - evaluate(e.b, x)
    if isinstance(e, Mul):
        return evaluate(e.a, x) * evaluate(e.b, x)
    if isinstance(e, Neg):
        return -evaluate(e.a, x)
    if isinstance(e, Abs):
        return abs(evaluate(e.a, x))
    if isinstance(e, Min):
        return min(evaluate(e.a, x), evaluate(e.b, x))
    if isinstance(e, Max):
        return max(evaluate(e.a, x), evaluate(e.b, x))
    if isinstance(e, Pow):
        return evaluate(e.a, x) ** e.k
    raise TypeError("evaluate() does not handle boxmax; use maxfield.search.enclose")


# ---------------------------------------------------------------------------
# simplification: polynomial normal form over non-polynomial factors


def fold(e: Expr) -> Expr:
    """Constant folding and trivial identities; keeps the tree shape otherwise."""
    kids = [fold(c) for c in children(e)]
    if isinstance(e, BoxMax):
        return boxmax(e.bound, e.bounds, kids[0])
    if kids and all(isinstance(k, Const) for k in kids):
        return Const(evaluate(rebuild(e, kids), ()))
    if isinstance(e, (Add, Sub)):
        a, b = kids
        if isinstance(b, Const) and b.value == 0.0:
            return a
        if isinstance(a, Const) and a.value == 0.0:
            return b if isinstance(e, Add) else Neg(b)
    if isinstance(e, Mul):
        a, b = kids
        for p, q in ((a, b), (b, a)):
            if isinstance(p, Const):
                if p.value == 0.0:
                    return Const(0.0)
                if p.value == 1.0:
                    return q
    if isinstance(e, Pow) and e.k == 1:
        return kids[0]
    if isinstance(e, Neg) and isinstance(kids[0], Neg):
        return kids[0].a
    return rebuild(e, kids) if kids else e


_EXPAND_LIMIT = 400


def _key(e: Expr) -> str:
    return to_text(e)


def _poly(e: Expr) -> dict:
    """Map monomial -> coefficient; monomial is a sorted tuple of (key, factor, power)."""
    if isinstance(e, Const):
        return {(): e.value} if e.value != 0.0 else {}
    if isinstance(e, (Add, Sub)):
        out = dict(_poly(e.a))
        sign = 1.0 if isinstance(e, Add) else -1.0
        for m, c in _poly(e.b).items():
            out[m] = out.get(m, 0.0) + sign * c
        return {m: c for m, c in out.items() if c != 0.0}
    if isinstance(e, Neg):
        return {m: -c for m, c in _poly(e.a).items()}
    if isinstance(e, Mul):
        pa, pb = _poly(e.a), _poly(e.b)
        if len(pa) * len(pb) <= _EXPAND_LIMIT:
            return _pmul(pa, pb)
        f = Mul(_from_poly(pa), _from_poly(pb))
        return {((_key(f), f, 1),): 1.0}
    if isinstance(e, Pow):
        pa = _poly(e.a)
        if len(pa) <= 1 or len(pa) ** e.k <= _EXPAND_LIMIT:
            out = {(): 1.0}
            for _ in range(e.k):
                out = _pmul(out, pa)
            return out
        base = _from_poly(pa)
        return {((_key(base), base, e.k),): 1.0}
    f = _opaque(e)
    return {((_key(f), f, 1),): 1.0}


def _opaque(e: Expr) -> Expr:
    if isinstance(e, BoxMax):
        return canonical(boxmax(e.bound, e.bounds, simplify(e.body)))
    if isinstance(e, (Var, Const)):
        return e
    if isinstance(e, Abs):
        a = simplify(e.a)
        if isinstance(a, Const):
            return Const(abs(a.value))
        if isinstance(a, (Abs,)):
            return a
        return Abs(a)
    if isinstance(e, (Min, Max)):
        a, b = simplify(e.a), simplify(e.b)
        if a == b:
            return a
        if isinstance(a, Const) and isinstance(b, Const):
            return Const(min(a.value, b.value) if isinstance(e, Min) else max(a.value, b.value))
        a, b = sorted((a, b), key=_key)
        return type(e)(a, b)
    return simplify(e)


def _pmul(pa: dict, pb: dict) -> dict:
    out: dict = {}
    for ma, ca in pa.items():
        for mb, cb in pb.items():
            powers: dict = {}
            for k, f, p in ma + mb:
                if k in powers:
                    powers[k] = (f, powers[k][1] + p)
                else:
                    powers[k] = (f, p)
            m = tuple(sorted((k, f, p) for k, (f, p) in powers.items()))
            out[m] = out.get(m, 0.0) + ca * cb
    return {m: c for m, c in out.items() if c != 0.0}


def _from_poly(p: dict) -> Expr:
    if not p:
        return Const(0.0)
    # constant-only polynomials fold into a single Const
    if set(p) == {()}:
        return Const(p[()])
    out = None
    for m in sorted(p, key=lambda m: (len(m), [k for k, _, _ in m])):
        c = p[m]
        factors = [f if q == 1 else Pow(f, q) for _, f, q in m]
        mono = reduce(Mul, factors) if factors else None
        if mono is None:
            term, neg = Const(abs(c)), c < 0
        elif abs(c) == 1.0:
            term, neg = mono, c < 0
        else:
            term, neg = Mul(Const(abs(c)), mono), c < 0
        if out is None:
            out = Neg(term) if neg else term
        else:
            out = Sub(out, term) if neg else Add(out, term)
    return out


def simplify(e: Expr) -> Expr:
    """Normal form that cancels structurally equal terms (``a*w - a*w -> 0``).

    Products of sums are expanded up to a size limit; abs/min/max/boxmax
    nodes are simplified inside and then treated as opaque factors.
    """
    return _from_poly(_poly(fold(e)))


# ---------------------------------------------------------------------------
# printing and parsing

_PREC = {Add: 1, Sub: 1, Mul: 2, Neg: 3, Pow: 4}


def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_text(e: Expr) -> str:
    """Infix text accepted back by :func:`parse`."""
    return _fmt(e, 0)


def _fmt(e: Expr, outer: int) -> str:
    if isinstance(e, Const):
        s = _num(e.value)
        return f"({s})" if e.value < 0 and outer > 0 else s
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Abs):
        return f"abs({_fmt(e.a, 0)})"
    if isinstance(e, (Min, Max)):
        name = "min" if isinstance(e, Min) else "max"
        return f"{name}({_fmt(e.a, 0)}, {_fmt(e.b, 0)})"
    if isinstance(e, BoxMax):
        rng = ", ".join(f"x{i}=({_num(a)}, {_num(b)})" for i, (a, b) in zip(e.bound, e.bounds))
        return f"boxmax({_fmt(e.body, 0)}, {rng})"
    p = _PREC[type(e)]
    if isinstance(e, Neg):
        s = f"-{_fmt(e.a, p)}"
    elif isinstance(e, Pow):
        s = f"{_fmt(e.a, p + 1)}^{e.k}"
    else:
        op = {Add: " + ", Sub: " - ", Mul: " * "}[type(e)]
        # left-associative: the right operand of - needs parens at equal precedence
        s = f"{_fmt(e.a, p)}{op}{_fmt(e.b, p + 1 if isinstance(e, (Sub, Mul, Add)) else p)}"
    return f"({s})" if p < outer else s


_VAR = re.compile(r"x(\d+)$")


def parse(text: str) -> Expr:
    """Parse infix text: ``+ - * ^k``, ``abs``, ``min``, ``max``, ``x0..xN``.

    ``boxmax(body, x2=(a, b), ...)`` is also accepted so printed
    conditional expectations round-trip.
    """
    if not text or not text.strip():
        raise ExpressionError("empty expression")
    if "**" in text:
        raise ExpressionError("use ^ for powers", text.index("**"))
    for ch in "/%":
        if ch in text:
            raise ExpressionError("division is not supported", text.index(ch))
    # Python's ^ binds looser than +; rewrite to ** and remember the column shift
    carets = [i + j for j, i in enumerate(k for k, ch in enumerate(text) if ch == "^")]
    src = text.replace("^", "**")

    def orig(col):
        return col - sum(1 for c in carets if c < col)

    try:
        tree = ast.parse(src.strip(), mode="eval")
    except SyntaxError as exc:
        lead = len(src) - len(src.lstrip())
        pos = (exc.offset or 1) - 1 + lead
        raise ExpressionError(f"syntax error: {exc.msg}", orig(pos)) from None
    lead = len(src) - len(src.lstrip())
    return _convert(tree.body, lambda col: orig(col + lead))


def _convert(node, pos) -> Expr:
    at = pos(getattr(node, "col_offset", 0))
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported literal {node.value!r}", at)
        return Const(node.value)
    if isinstance(node, ast.Name):
        m = _VAR.match(node.id)
        if not m:
            raise ExpressionError(f"unknown identifier {node.id!r}", at)
        return Var(int(m.group(1)))
    if isinstance(node, ast.UnaryOp):
        inner = _convert(node.operand, pos)
        if isinstance(node.op, ast.USub):
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Neg(inner)
        if isinstance(node.op, ast.UAdd):
            return inner
        raise ExpressionError("unsupported unary operator", at)
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, (ast.Div, ast.FloorDiv, ast.Mod)):
            raise ExpressionError("division is not supported", at)
        a = _convert(node.left, pos)
        if isinstance(node.op, ast.Pow):
            k = node.right
            neg = False
            if isinstance(k, ast.UnaryOp) and isinstance(k.op, ast.USub):
                neg, k = True, k.operand
            if neg or not isinstance(k, ast.Constant) or not isinstance(k.value, int) \
                    or isinstance(k.value, bool) or k.value < 1:
                raise ExpressionError("exponent must be a positive integer literal",
                                      pos(node.right.col_offset))
            return Pow(a, k.value)
        b = _convert(node.right, pos)
        if isinstance(node.op, ast.Add):
            return Add(a, b)
        if isinstance(node.op, ast.Sub):
            return Sub(a, b)
        if isinstance(node.op, ast.Mult):
            return Mul(a, b)
        raise ExpressionError("unsupported operator", at)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id
        if name == "abs":
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError("abs takes one argument", at)
            return Abs(_convert(node.args[0], pos))
        if name in ("min", "max"):
            if len(node.args) < 2 or node.keywords:
                raise ExpressionError(f"{name} takes at least two arguments", at)
            args = [_convert(a, pos) for a in node.args]
            return reduce(Min if name == "min" else Max, args)
        if name == "boxmax":
            if len(node.args) != 1 or not node.keywords:
                raise ExpressionError("boxmax(body, xK=(lo, hi), ...)", at)
            body = _convert(node.args[0], pos)
            bound, bounds = [], []
            for kw in node.keywords:
                m = _VAR.match(kw.arg or "")
                if not m:
                    raise ExpressionError(f"bad bound variable {kw.arg!r}", at)
                try:
                    lo, hi = ast.literal_eval(kw.value)
                except (ValueError, TypeError, SyntaxError):
                    raise ExpressionError("boxmax range must be a (lo, hi) pair", at) from None
                bound.append(int(m.group(1)))
                bounds.append((lo, hi))
            return BoxMax(tuple(bound), tuple(bounds), body)
        raise ExpressionError(f"unknown function {name!r}", at)
    raise ExpressionError(f"unsupported syntax {type(node).__name__}", at)
