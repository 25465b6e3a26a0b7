"""Closed-form maximal semigroup versus a monotone scheme for ``u_t = g(D_x u)``.

The closed form is ``u(t, x) = max_{v∈Λ} φ(x + t v)``. The numerical solver
is semi-Lagrangian: ``u^{k+1}(x) = max_{v∈V_h} I[u^k](x + τ v)`` with ``I``
the (multi)linear interpolant on the grid. ``V_h`` is the tensor product of
per-axis offsets consisting of the ends of ``τΛ_i`` and every grid offset
inside, so the max of the piecewise-(bi)linear interpolant over ``τΛ`` is
taken exactly and the scheme is monotone.
"""

from __future__ import annotations

import csv
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from . import search
from .maximal import MaximalVector, maximize
from .report import CheckReport


@dataclass(frozen=True)
class PdeProblem:
    """``report_box`` is where errors are measured; the grid extends past it
    by the domain of dependence, and its outermost node layer takes the
    closed form as boundary data."""

    lambda_box: MaximalVector
    phi: ex.Expr
    horizon: float
    report_box: tuple[tuple[float, float], ...]
    h: float
    cfl: float = 0.5
    epsilon: float = 1e-9

    def __post_init__(self):
        lb = self.lambda_box if isinstance(self.lambda_box, MaximalVector) \
            else MaximalVector(self.lambda_box)
        object.__setattr__(self, "lambda_box", lb)
        rb = tuple((float(a), float(b)) for a, b in self.report_box)
        object.__setattr__(self, "report_box", rb)
        d = lb.arity
        if d not in (1, 2):
            raise ValueError("only one or two spatial dimensions are supported")
        if len(rb) != d:
            raise ValueError(f"report box has {len(rb)} axes, Λ has {d}")
        if self.phi.arity > d:
            raise ValueError(f"initial condition uses {self.phi.arity} variables, dimension is {d}")
        if ex.contains_boxmax(self.phi):
            raise ValueError("initial condition must not contain boxmax")
        if not self.horizon >= 0:
            raise ValueError("horizon must be nonnegative")
        if not self.h > 0:
            raise ValueError("space step must be positive")
        if not 0 < self.cfl <= 1:
            raise ValueError("CFL number must lie in (0, 1]; larger steps break monotonicity")
        if any(b <= a for a, b in rb):
            raise ValueError("report box must have positive extent on every axis")

    @property
    def dim(self) -> int:
        return self.lambda_box.arity

    @property
    def speed(self) -> float:
        return float(np.max(np.abs(np.concatenate([self.lambda_box.lo, self.lambda_box.hi]))))

    def time_steps(self) -> tuple[int, float]:
        if self.horizon == 0:
            return 0, 0.0
        if self.speed == 0:
            return 1, self.horizon
        n = max(1, math.ceil(self.horizon * self.speed / (self.cfl * self.h) - 1e-9))
        return n, self.horizon / n

    def margin_cells(self) -> int:
        # domain of dependence plus the boundary layer
        return math.ceil(self.horizon * self.speed / self.h - 1e-9) + 1


@dataclass
class PdeResult:
    axes: list[np.ndarray]            # report-box node coordinates per axis
    u_numeric: np.ndarray
    u_closed: np.ndarray
    error: float
    steps: int
    tau: float
    stats: dict = field(default_factory=dict)

    def rows(self, t: float):
        grids = np.meshgrid(*self.axes, indexing="ij")
        for idx in np.ndindex(*self.u_numeric.shape):
            pt = [float(g[idx]) for g in grids]
            un, uc = float(self.u_numeric[idx]), float(self.u_closed[idx])
            yield [t] + pt + [un, uc, abs(un - uc)]


def _shifted(phi: ex.Expr, d: int, t: float) -> ex.Expr:
    """``φ(x + t v)`` with ``x`` in columns ``0..d-1`` and ``v`` in ``d..2d-1``."""
    return ex.substitute(phi, {i: ex.Add(ex.Var(i), ex.Mul(ex.Const(t), ex.Var(d + i)))
                               for i in range(d)})


def closed_form(problem: PdeProblem, t: float, x: Sequence[float],
                epsilon: float | None = None) -> float:
    """``max_{v∈Λ} φ(x + t v)``; exact at ``t = 0``."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    d = problem.dim
    if len(x) != d:
        raise ValueError(f"point has {len(x)} coordinates, expected {d}")
    if t == 0:
        return ex.evaluate(problem.phi, list(x) + [0.0] * d)
    eps = problem.epsilon if epsilon is None else epsilon
    body = ex.substitute(problem.phi, {i: ex.Add(ex.Const(float(x[i])),
                                                 ex.Mul(ex.Const(t), ex.Var(i)))
                                       for i in range(d)})
    return maximize(body, problem.lambda_box, eps).value


def closed_form_grid(problem: PdeProblem, t: float, points: np.ndarray,
                     epsilon: float | None = None) -> np.ndarray:
    """Closed form at many points at once (rows of ``points``)."""
    points = np.asarray(points, dtype=float)
    d = problem.dim
    if t == 0:
        pts = np.zeros((len(points), max(problem.phi.arity, d, 1)))
        pts[:, :d] = points
        return search.enclose(problem.phi, pts, pts, search.Context())[0]
    eps = problem.epsilon if epsilon is None else epsilon
    body = _shifted(problem.phi, d, t)
    lo, hi = problem.lambda_box.lo, problem.lambda_box.hi
    cols = np.array([d + i for i in range(d) if hi[i] > lo[i]], dtype=int)
    base = np.zeros((len(points), 2 * d))
    base[:, :d] = points
    base[:, d:] = 0.5 * (lo + hi)
    res = search.branch_and_bound(body, base, cols, lo[cols - d], hi[cols - d], eps,
                                  search.Context())
    return res.lower


def _offsets(lo: float, hi: float, tau: float, h: float) -> np.ndarray:
    a, b = tau * lo, tau * hi
    inner = np.arange(math.ceil(a / h - 1e-12), math.floor(b / h + 1e-12) + 1) * h
    return np.unique(np.concatenate([[a, b], inner[(inner > a) & (inner < b)]]))


def _interp_1d(u: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Linear interpolation at fractional node positions (clipped to the grid)."""
    n = u.shape[0]
    pos = np.clip(pos, 0, n - 1)
    i0 = np.minimum(np.floor(pos).astype(int), n - 2)
    w = pos - i0
    return (1 - w) * u[i0] + w * u[i0 + 1]


def _step(u: np.ndarray, offs: list[np.ndarray], h: float) -> np.ndarray:
    d = u.ndim
    idx = np.meshgrid(*[np.arange(s, dtype=float) for s in u.shape], indexing="ij")
    best = np.full(u.shape, -np.inf)
    for v in itertools.product(*offs):
        if d == 1:
            val = _interp_1d(u, idx[0] + v[0] / h)
        else:
            p0 = np.clip(idx[0] + v[0] / h, 0, u.shape[0] - 1)
            p1 = np.clip(idx[1] + v[1] / h, 0, u.shape[1] - 1)
            i0 = np.minimum(np.floor(p0).astype(int), u.shape[0] - 2)
            j0 = np.minimum(np.floor(p1).astype(int), u.shape[1] - 2)
            a, b = p0 - i0, p1 - j0
            val = ((1 - a) * (1 - b) * u[i0, j0] + a * (1 - b) * u[i0 + 1, j0]
                   + (1 - a) * b * u[i0, j0 + 1] + a * b * u[i0 + 1, j0 + 1])
        np.maximum(best, val, out=best)
    return best


def solve_fd(problem: PdeProblem) -> PdeResult:
    """Run the monotone scheme to the horizon and compare with the closed form."""
    t_start = time.perf_counter()
    d, h = problem.dim, problem.h
    steps, tau = problem.time_steps()
    m = problem.margin_cells()
    axes, report = [], []
    for a, b in problem.report_box:
        n = math.ceil((b - a) / h - 1e-9)
        axes.append(a + h * np.arange(-m, n + 1 + m))
        report.append(slice(m, m + n + 1))
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    shape = grids[0].shape
    u = closed_form_grid(problem, 0.0, pts).reshape(shape)

    edge = np.zeros(shape, bool)
    for k in range(d):
        sl = [slice(None)] * d
        sl[k] = 0
        edge[tuple(sl)] = True
        sl[k] = -1
        edge[tuple(sl)] = True
    edge_pts = pts[edge.ravel()]

    lo, hi = problem.lambda_box.lo, problem.lambda_box.hi
    offs = [_offsets(lo[k], hi[k], tau, h) for k in range(d)]
    for k in range(steps):
        u = _step(u, offs, h)
        u[edge] = closed_form_grid(problem, (k + 1) * tau, edge_pts)
    t_solve = time.perf_counter() - t_start

    rep = tuple(report)
    rep_pts = np.stack([g[rep].ravel() for g in grids], axis=1)
    exact = closed_form_grid(problem, problem.horizon, rep_pts).reshape(grids[0][rep].shape)
    un = u[rep]
    err = float(np.max(np.abs(un - exact))) if un.size else 0.0
    return PdeResult([ax[r] for ax, r in zip(axes, report)], un, exact, err, steps, tau, {
        "grid_nodes": int(u.size), "margin_cells": m, "offsets": [len(o) for o in offs],
        "solve_seconds": t_solve, "total_seconds": time.perf_counter() - t_start,
    })


def with_step(problem: PdeProblem, h: float) -> PdeProblem:
    return PdeProblem(problem.lambda_box, problem.phi, problem.horizon, problem.report_box,
                      h, problem.cfl, problem.epsilon)


def convergence_study(problem: PdeProblem, refinements: Sequence[float],
                      threshold: float = 0.05) -> tuple[list[dict], CheckReport]:
    """Sup errors over a sequence of space steps; errors must not increase."""
    hs = [float(h) for h in refinements]
    if len(hs) < 2:
        raise ValueError("need at least two refinement levels")
    table = []
    for h in hs:
        r = solve_fd(with_step(problem, h))
        table.append({"h": h, "error": r.error, "steps": r.steps, "tau": r.tau,
                      "seconds": r.stats["total_seconds"]})
    for prev, cur in zip(table, table[1:]):
        cur["ratio"] = prev["error"] / cur["error"] if cur["error"] > 0 else math.inf
    errs = [row["error"] for row in table]
    # tiny errors are rounding noise, not a trend
    floor = 1e-12
    monotone = all(b <= a or b <= floor for a, b in zip(errs, errs[1:]))
    ok = monotone and errs[-1] <= threshold
    return table, CheckReport("pde_convergence", ok, {
        "errors": errs, "monotone": monotone, "final_error": errs[-1], "threshold": threshold,
    })


def semigroup_check(problem: PdeProblem, t: float, s: float, points: Sequence,
                    epsilon: float = 1e-6) -> CheckReport:
    """``u(t + s, x) = max_{v∈Λ} u(s, x + t v)`` at the given points."""
    d = problem.dim
    lo, hi = problem.lambda_box.lo, problem.lambda_box.hi
    # u(s, y) as an expression in y = x0..x_{d-1}, maximizing over fresh axes
    inner_vars = list(range(d, 2 * d))
    u_s = ex.boxmax(inner_vars, list(zip(lo, hi)), _shifted(problem.phi, d, s))
    worst = 0.0
    for x in points:
        direct = closed_form(problem, t + s, x, epsilon)
        body = ex.substitute(u_s, {i: ex.Add(ex.Const(float(x[i])),
                                             ex.Mul(ex.Const(t), ex.Var(i)))
                                   for i in range(d)})
        iterated = maximize(body, problem.lambda_box, epsilon).value
        worst = max(worst, abs(direct - iterated))
    return CheckReport("semigroup", worst <= 2 * epsilon, {"t": t, "s": s, "max_difference": worst})


def write_field_csv(path, result: PdeResult, t: float):
    d = len(result.axes)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x"] + (["y"] if d == 2 else []) + ["u_numeric", "u_closed", "abs_err"])
        for row in result.rows(t):
            w.writerow([repr(float(v)) for v in row])


def write_convergence_csv(path, table: list[dict]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "error", "ratio", "steps", "tau"])
        for row in table:
            w.writerow([repr(row["h"]), repr(row["error"]), repr(row.get("ratio", "")),
                        row["steps"], repr(row["tau"])])
