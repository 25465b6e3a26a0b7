"""Acceptance criteria, one test per criterion.

Each test records a single PASS/FAIL line; the lines are printed in the
terminal summary (see conftest.py) and also when this file is run directly.
"""

import itertools
import math
import time

import numpy as np
import pytest

from maxfield import cli
from maxfield import expr as ex
from maxfield import regions as rg
from maxfield.integral import (CylinderRandomVariable, SimpleRandomField, TemporalSpatialField,
                               bound_check_spatial, conditional_properties_check)
from maxfield.lln import MeasureFamily, convergence_curve
from maxfield.maximal import MaximalVector, lipschitz_bound, maximize
from maxfield.pde import PdeProblem, convergence_study
from maxfield.whitenoise import (WhiteNoiseModel, additivity_residual, consistency_check,
                                 expansion_3set, fdd_generating, invariance_check)

from oracles import generating, grid_max, mixed_ast, random_ast, random_disjoint_boxes

RESULTS = {}


def record(n, ok, detail, seconds):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}  ({seconds:.1f}s)"
    RESULTS[n] = line
    print(line)
    return ok


def random_mu(rng):
    lo, hi = sorted(np.round(rng.uniform(-2, 2, 2), 2))
    return (float(lo), float(hi))


def random_regions_1d(rng, n):
    out = []
    for _ in range(n):
        a = float(np.round(rng.uniform(0, 3), 2))
        out.append(rg.interval(a, a + float(np.round(rng.uniform(0.1, 2), 2))))
    return out


def test_criterion_01_additivity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(25):
        d = int(rng.integers(1, 3))
        n = int(rng.integers(2, 5))
        cells = random_disjoint_boxes(rng, d, 2 * n)
        k = len(cells)
        if k < n:
            n = k
        # each region takes one or two cells; cells are disjoint across regions
        split = sorted(rng.choice(np.arange(1, k), size=n - 1, replace=False)) if n > 1 else []
        groups = np.split(np.arange(k), split)
        regs = [rg.normalize([cells[i] for i in g[:2]]) for g in groups]
        m = WhiteNoiseModel(d, random_mu(rng))
        r = additivity_residual(m, regs, 1e-6)
        worst = max(worst, r.value + r.error_bound)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and dt <= 60
    assert record(1, ok, f"25 families, worst residual {worst:.3g} <= 1e-6", dt)


def test_criterion_02_three_set_expansion():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(100):
        mu = random_mu(rng)
        m = WhiteNoiseModel(1, mu)
        regs = random_regions_1d(rng, 3)
        p = rng.normal(size=3)
        _, total = expansion_3set(m, *regs, p)
        direct = fdd_generating(m, regs, p)
        ref = generating(regs, p, *mu)
        scale = max(1.0, abs(direct))
        worst = max(worst, abs(total - direct) / scale, abs(total - ref) / scale)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12
    assert record(2, ok, f"100 instances, worst relative difference {worst:.3g} <= 1e-12", dt)


def test_criterion_03_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    worst = 0.0
    passed = 0
    for i in range(200):
        m = WhiteNoiseModel(1, random_mu(rng))
        regs = random_regions_1d(rng, int(rng.integers(1, 5)))
        rep = consistency_check(m, regs, trials=3, seed=i, rtol=1e-12)
        passed += rep.passed
        worst = max(worst, rep.details["compatibility_residual"], rep.details["symmetry_residual"])
    dt = time.perf_counter() - t0
    ok = passed == 200
    assert record(3, ok, f"{passed}/200 instances, worst residual {worst:.3g} <= 1e-12", dt)


def _random_coefficient(rng, cells):
    """A constant or a nonlinear function of noise on up to two of ``cells``."""
    if rng.random() < 0.4:
        return float(np.round(rng.uniform(-2, 2), 2))
    k = int(rng.integers(1, 3))
    pick = [cells[i] for i in rng.choice(len(cells), size=k, replace=False)]
    return CylinderRandomVariable(tuple(pick), mixed_ast(rng, k, 2))


def test_criterion_04_integral_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    eps = 1e-4
    passed = 0
    worst_slack = math.inf
    for i in range(50):
        mu = random_mu(rng)
        if i % 2 == 0:
            m = WhiteNoiseModel(1, mu)
            cells = [rg.normalize([c]) for c in random_disjoint_boxes(rng, 1, 4)]
            carriers = cells[:int(rng.integers(1, min(3, len(cells)) + 1))]
            field = SimpleRandomField([(_random_coefficient(rng, cells), c) for c in carriers])
        else:
            m = WhiteNoiseModel(2, mu)
            spatial = [rg.interval(0, float(np.round(rng.uniform(0.2, 1.5), 2))),
                       rg.interval(2, 2 + float(np.round(rng.uniform(0.2, 1.5), 2)))]
            grid = [0.0, 1.0, 1.0 + float(np.round(rng.uniform(0.2, 1.5), 2))]
            probe = TemporalSpatialField(grid, spatial, [[0, 0], [0, 0]])
            cells = [probe.cell(a, b) for a in range(2) for b in range(2)]
            coeffs = [[_random_coefficient(rng, cells) for _ in range(2)] for _ in range(2)]
            field = TemporalSpatialField(grid, spatial, coeffs).to_simple()
        rep = bound_check_spatial(field, m, eps)
        passed += rep.passed
        worst_slack = min(worst_slack, rep.details["slack"])
    witness = bound_check_spatial(SimpleRandomField([(1, rg.interval(0, 2))]),
                                  WhiteNoiseModel(1, (-1, 1)), eps)
    lhs, rhs = witness.details["lhs"], witness.details["rhs"]
    wit_ok = witness.passed and abs(lhs - 2) <= eps and abs(rhs - 2) <= eps
    dt = time.perf_counter() - t0
    ok = passed == 50 and wit_ok and dt <= 120
    assert record(4, ok, f"{passed}/50 fields, min slack {worst_slack:.3g} >= -2e-4; "
                         f"witness lhs {lhs:.6f} rhs {rhs:.6f}", dt)


PDE_CASES = {"-|x|": "-abs(x0)", "clamp": "min(1, max(-1, x0))",
             "hat": "max(0, 1 - abs(x0))"}


def test_criterion_05_pde():
    t0 = time.perf_counter()
    lines = []
    ok = True
    for name, phi in PDE_CASES.items():
        c0 = time.perf_counter()
        p = PdeProblem([(-1, 1)], ex.parse(phi), 1.0, [(-1, 1)], 1 / 32)
        _, rep = convergence_study(p, [1 / 32, 1 / 64, 1 / 128], threshold=0.05)
        case_ok = rep.passed and time.perf_counter() - c0 <= 60
        ok &= case_ok
        lines.append(f"{name} errors " + "/".join(f"{e:.4f}" for e in rep.details["errors"]))
    dt = time.perf_counter() - t0
    assert record(5, ok, "; ".join(lines) + " (final <= 0.05, non-increasing)", dt)


def _cells(rng):
    """Two time slabs by two spatial regions."""
    t1 = 1.0
    T = t1 + float(np.round(rng.uniform(0.5, 1.5), 2))
    a = float(np.round(rng.uniform(0.5, 1.5), 2))
    b = a + float(np.round(rng.uniform(0.5, 1.5), 2))
    slabs = [(0.0, t1), (t1, T)]
    spans = [(0.0, a), (a, b)]
    cells = [rg.region((s, x)) for s in slabs for x in spans]
    return cells, t1, T


def test_criterion_06_conditional():
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    passed = 0
    worst_tower = 0.0
    failures = []
    for i in range(20):
        cells, t1, T = _cells(rng)
        m = WhiteNoiseModel(2, random_mu(rng))
        X = CylinderRandomVariable(tuple(cells), mixed_ast(rng, 4, 3))
        Y = CylinderRandomVariable(tuple(cells), mixed_ast(rng, 4, 2))
        t, s = [(0.0, t1), (t1, 0.0), (t1, T), (T, t1), (t1, t1)][i % 5]
        if i >= 10:
            t, s = [(0.0, T), (T, 0.0), (T, T), (0.0, 0.0), (t1, T)][i % 5]
        # eta must be known before t: slab-0 noise for t >= t1, else a constant
        if t >= T:
            eta = CylinderRandomVariable(tuple(cells), mixed_ast(rng, 4, 2))
        elif t >= t1:
            eta = CylinderRandomVariable(tuple(cells[:2]), mixed_ast(rng, 2, 2))
        else:
            eta = CylinderRandomVariable((), ex.Const(float(np.round(rng.uniform(-1, 1), 2))))
        rep = conditional_properties_check(X, Y, eta, t, s, m, epsilon=1e-4, seed=i)
        passed += rep.passed
        worst_tower = max(worst_tower, rep.details["tower"]["residual"])
        if not rep.passed:
            failures.append(i)
    dt = time.perf_counter() - t0
    ok = passed == 20 and worst_tower <= 1e-4 and dt <= 120
    assert record(6, ok, f"{passed}/20 cases (i)-(v) within 1e-4, worst tower residual "
                         f"{worst_tower:.3g}" + (f", failed {failures}" if failures else ""), dt)


def test_criterion_07_maximizer_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(707)
    sound = 0
    worst = 0.0
    points = 1_000_000
    for _ in range(100):
        k = int(rng.integers(1, 4))
        e = mixed_ast(rng, k, 3)
        box = []
        for _ in range(k):
            a = float(np.round(rng.uniform(-2, 1), 2))
            box.append((a, a + float(np.round(rng.uniform(0.2, 2), 2))))
        per_axis = int(round(points ** (1 / k)))
        L = lipschitz_bound(e, MaximalVector(box))
        # brute-force slack: half the grid diagonal times L; the certified
        # tolerance is ten times that, so the grid is at a tenth of its spacing
        slack = L * 0.5 * math.sqrt(sum(((b - a) / (per_axis - 1)) ** 2 for a, b in box))
        eps = max(10 * slack, 1e-9)
        r = maximize(e, MaximalVector(box), eps)
        brute = grid_max(e, box, per_axis)
        ok = brute <= r.value + r.error_bound + 1e-12 and r.value <= brute + slack + 1e-12
        sound += ok
        worst = max(worst, abs(r.value - brute) - max(r.error_bound, slack))
    dt = time.perf_counter() - t0
    ok = sound == 100 and dt <= 120
    assert record(7, ok, f"{sound}/100 ASTs bracketed by the brute force "
                         f"(worst excess {worst:.2g} <= 0)", dt)


def test_criterion_08_lln():
    t0 = time.perf_counter()
    fam = MeasureFamily.standard((-1, 2), "uniform", 1.0)
    rows, _ = convergence_curve(fam, ex.parse("x0^2"), [100, 10_000], samples=20_000, seed=8)
    small, large = rows
    dt = time.perf_counter() - t0
    ok = abs(large.value - 4) <= 0.15 and large.gap < small.gap and dt <= 60
    assert record(8, ok, f"value(1e4) {large.value:.4f} (|.-4| <= 0.15), gaps "
                         f"{small.gap:.4f} -> {large.gap:.4f}", dt)


def test_criterion_09_invariance():
    t0 = time.perf_counter()
    rng = np.random.default_rng(909)
    eps = 1e-6
    passed = 0
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 3))
        n = int(rng.integers(1, 4))
        regs = []
        for _ in range(n):
            lo = np.round(rng.uniform(-1, 2, d), 2)
            hi = lo + np.round(rng.uniform(0.2, 1.5, d), 2)
            regs.append(rg.normalize([tuple(zip(lo, hi))]))
        phi = mixed_ast(rng, n, 2)
        shift = list(np.round(rng.uniform(-3, 3, d), 2))
        perm = list(rng.permutation(d))
        signs = list(rng.choice([-1, 1], size=d))
        rep = invariance_check(WhiteNoiseModel(d, random_mu(rng)), regs, phi, shift, perm,
                               signs, eps)
        passed += rep.passed
        worst = max(worst, rep.details["difference"])
    dt = time.perf_counter() - t0
    ok = passed == 50 and dt <= 60
    assert record(9, ok, f"{passed}/50 queries, worst difference {worst:.3g} <= 2e-6", dt)


def test_criterion_10_determinism():
    t0 = time.perf_counter()
    runs = [cli.dumps(cli.verify_all(threads=t, seed=10, no_timestamp=True)[0])
            for t in (1, 4, 1, 4)]
    dt = time.perf_counter() - t0
    ok = len(set(runs)) == 1
    assert record(10, ok, "verify_all twice at threads 1 and 4: "
                          + ("byte-identical" if ok else "reports differ"), dt)


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
