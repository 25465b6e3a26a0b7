"""Interval enclosures and batched branch-and-bound maximization.

``enclose`` evaluates an expression on a batch of boxes (rows of ``lo``/``hi``
arrays) and returns an enclosure of its range together with an enclosure of
its generalized gradient. On degenerate boxes (points) the value enclosure is
exact, except below a ``BoxMax`` node, whose value at a point is itself
computed by a nested search and returned as a certified bracket.

``branch_and_bound`` maximizes over some columns of each row, all rows at
once. Upper bounds per sub-box are the smaller of the interval upper end and
the mean-value bound ``f(center) + sum_k |g_k| r_k``. Floating-point rounding
is not directed, so bounds are exact up to a few ulps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex

# inner searches stop once the bracket is this fraction of the caller's tolerance
INNER_FRACTION = 0.1
MAX_ACTIVE = 200_000
MAX_EVALS = 40_000_000


class SearchBudgetExceeded(RuntimeError):
    pass


@dataclass
class Context:
    """Tolerance and work counters shared by nested searches."""

    inner_tol: float = 1e-9
    evals: int = 0
    max_evals: int = MAX_EVALS


def _imul(alo, ahi, blo, bhi):
    p1, p2, p3, p4 = alo * blo, alo * bhi, ahi * blo, ahi * bhi
    return (np.minimum(np.minimum(p1, p2), np.minimum(p3, p4)),
            np.maximum(np.maximum(p1, p2), np.maximum(p3, p4)))


def _ipow(lo, hi, k):
    if k % 2 == 1:
        return lo ** k, hi ** k
    alo, ahi = np.abs(lo), np.abs(hi)
    big = np.maximum(alo, ahi) ** k
    small = np.minimum(alo, ahi) ** k
    straddle = (lo < 0) & (hi > 0)
    return np.where(straddle, 0.0, small), big


def _hull_sym(glo, ghi):
    m = np.maximum(np.abs(glo), np.abs(ghi))
    return -m, m


def enclose(e: ex.Expr, lo: np.ndarray, hi: np.ndarray, ctx: Context,
            gcols=None):
    """Enclose ``e`` on every row box ``[lo, hi]``.

    Returns ``(vlo, vhi, glo, ghi)``. Gradient enclosures are tracked only
    for the columns listed in ``gcols`` (shape ``(rows, len(gcols))``); with
    ``gcols=None`` they are skipped and returned as ``None``. ``lo``/``hi``
    need a column for every variable index used anywhere in ``e``.
    """
    if gcols is None:
        return _enc(e, lo, hi, ctx, None)
    gpos = np.full(lo.shape[1], -1, dtype=int)
    gpos[np.asarray(gcols, dtype=int)] = np.arange(len(gcols))
    return _enc(e, lo, hi, ctx, (gpos, len(gcols)))


def _enc(e, lo, hi, ctx, gpos):
    # gpos is None or (column -> gradient slot with -1 for untracked, slot count)
    n = lo.shape[0]
    grad = gpos is not None
    if isinstance(e, ex.Const):
        v = np.full(n, e.value)
        if not grad:
            return v, v.copy(), None, None
        g = np.zeros((n, gpos[1]))
        return v, v.copy(), g, g.copy()
    if isinstance(e, ex.Var):
        vlo, vhi = lo[:, e.index].copy(), hi[:, e.index].copy()
        if not grad:
            return vlo, vhi, None, None
        g = np.zeros((n, gpos[1]))
        slot = gpos[0][e.index]
        if slot >= 0:
            g[:, slot] = 1.0
        return vlo, vhi, g, g.copy()
    if isinstance(e, ex.BoxMax):
        return _enc_boxmax(e, lo, hi, ctx, gpos)

    a = _enc(e.a, lo, hi, ctx, gpos)
    if isinstance(e, ex.Neg):
        return -a[1], -a[0], (-a[3] if grad else None), (-a[2] if grad else None)
    if isinstance(e, ex.Abs):
        alo, ahi = a[0], a[1]
        vlo = np.where(alo >= 0, alo, np.where(ahi <= 0, -ahi, 0.0))
        vhi = np.maximum(np.abs(alo), np.abs(ahi))
        if not grad:
            return vlo, vhi, None, None
        pos = (alo >= 0)[:, None]
        neg = (ahi <= 0)[:, None]
        slo, shi = _hull_sym(a[2], a[3])
        glo = np.where(pos, a[2], np.where(neg, -a[3], slo))
        ghi = np.where(pos, a[3], np.where(neg, -a[2], shi))
        return vlo, vhi, glo, ghi
    if isinstance(e, ex.Pow):
        k = e.k
        vlo, vhi = _ipow(a[0], a[1], k)
        if not grad or k == 1:
            return vlo, vhi, a[2], a[3]
        dlo, dhi = _ipow(a[0], a[1], k - 1)
        glo, ghi = _imul(k * dlo[:, None], k * dhi[:, None], a[2], a[3])
        return vlo, vhi, glo, ghi

    b = _enc(e.b, lo, hi, ctx, gpos)
    if isinstance(e, ex.Add):
        return (a[0] + b[0], a[1] + b[1],
                (a[2] + b[2]) if grad else None, (a[3] + b[3]) if grad else None)
    if isinstance(e, ex.Sub):
        return (a[0] - b[1], a[1] - b[0],
                (a[2] - b[3]) if grad else None, (a[3] - b[2]) if grad else None)
    if isinstance(e, ex.Mul):
        vlo, vhi = _imul(a[0], a[1], b[0], b[1])
        if not grad:
            return vlo, vhi, None, None
        l1, h1 = _imul(a[0][:, None], a[1][:, None], b[2], b[3])
        l2, h2 = _imul(b[0][:, None], b[1][:, None], a[2], a[3])
        return vlo, vhi, l1 + l2, h1 + h2
    if isinstance(e, (ex.Min, ex.Max)):
        if isinstance(e, ex.Max):
            vlo, vhi = np.maximum(a[0], b[0]), np.maximum(a[1], b[1])
            a_wins, b_wins = a[0] >= b[1], b[0] >= a[1]
        else:
            vlo, vhi = np.minimum(a[0], b[0]), np.minimum(a[1], b[1])
            a_wins, b_wins = a[1] <= b[0], b[1] <= a[0]
        if not grad:
            return vlo, vhi, None, None
        aw, bw = a_wins[:, None], b_wins[:, None]
        hlo, hhi = np.minimum(a[2], b[2]), np.maximum(a[3], b[3])
        glo = np.where(aw, a[2], np.where(bw, b[2], hlo))
        ghi = np.where(aw, a[3], np.where(bw, b[3], hhi))
        return vlo, vhi, glo, ghi
    raise TypeError(f"unknown node {type(e).__name__}")


def _enc_boxmax(e: ex.BoxMax, lo, hi, ctx, gpos):
    cols = np.array(e.bound, dtype=int)
    blo = np.array([b[0] for b in e.bounds])
    bhi = np.array([b[1] for b in e.bounds])
    jlo, jhi = lo.copy(), hi.copy()
    jlo[:, cols] = blo
    jhi[:, cols] = bhi
    inner_gpos = None
    if gpos is not None:
        # bound columns shadow any outer variable with the same index
        shadowed = gpos[0].copy()
        shadowed[cols] = -1
        inner_gpos = (shadowed, gpos[1])
    # the hull over the joint box bounds the max from above, and the hull of
    # the body's gradient encloses the gradient of the max in the free variables
    hull = _enc(e.body, jlo, jhi, ctx, inner_gpos)
    vhi = hull[1]
    mid = 0.5 * (blo + bhi)
    clo, chi = lo.copy(), hi.copy()
    clo[:, cols] = mid
    chi[:, cols] = mid
    vlo = _enc(e.body, clo, chi, ctx, None)[0]

    free = sorted(ex.free_vars(e))
    point = np.all(lo[:, free] == hi[:, free], axis=1) if free else np.ones(lo.shape[0], bool)
    if point.any():
        rows = np.flatnonzero(point)
        res = branch_and_bound(e.body, lo[rows], cols, blo, bhi, ctx.inner_tol, ctx)
        vlo, vhi = vlo.copy(), vhi.copy()
        vlo[rows] = np.maximum(vlo[rows], res.lower)
        vhi[rows] = np.minimum(vhi[rows], res.upper)
    if gpos is None:
        return vlo, vhi, None, None
    return vlo, vhi, hull[2], hull[3]


def _polish(body, base, rows, cols, x, fx, blo, bhi, ctx, iters=48):
    """Batched compass search from incumbents ``x`` (one per entry of ``rows``).

    Returns improved points and values; values are attained point values.
    """
    k = len(cols)
    r = len(rows)
    scale = np.full(r, 0.25)
    width = bhi - blo
    eye = np.eye(k)
    for _ in range(iters):
        live = scale * np.max(width) > 1e-13 * max(1.0, float(np.max(np.abs(bhi))))
        if not live.any():
            break
        step = (scale[:, None] * width[None, :])
        cand = np.concatenate([x[:, None, :] + step[:, None, :] * eye[None],
                               x[:, None, :] - step[:, None, :] * eye[None]], axis=1)
        cand = np.clip(cand, blo, bhi).reshape(-1, k)
        pts = np.repeat(base[rows], 2 * k, axis=0)
        pts[:, cols] = cand
        ctx.evals += len(pts)
        val = enclose(body, pts, pts, ctx)[0].reshape(r, 2 * k)
        j = np.argmax(val, axis=1)
        top = val[np.arange(r), j]
        up = (top > fx) & live
        x = np.where(up[:, None], cand.reshape(r, 2 * k, k)[np.arange(r), j], x)
        fx = np.where(up, top, fx)
        scale = np.where(up, scale, 0.5 * scale)
    return x, fx


POLISH_AT = (3, 12, 30, 60)


@dataclass
class SearchResult:
    lower: np.ndarray      # certified lower bound per row (attained at argmax)
    upper: np.ndarray      # certified upper bound per row
    argmax: np.ndarray     # (rows, len(cols)) best point found
    evals: int
    exhausted: bool


def branch_and_bound(body: ex.Expr, base: np.ndarray, cols: np.ndarray,
                     blo: np.ndarray, bhi: np.ndarray, tol: float,
                     ctx: Context, max_active: int = MAX_ACTIVE) -> SearchResult:
    """Maximize ``body`` over ``cols`` in ``[blo, bhi]`` for every row of ``base``.

    ``base`` holds point values for the remaining columns. The search stops
    for a row once every surviving sub-box has an upper bound within ``tol``
    of the best lower bound; boxes are discarded in deterministic order and
    ties pick the earliest box, so results do not depend on batch layout.
    """
    cols = np.asarray(cols, dtype=int)
    nrows, width = base.shape
    k = len(cols)
    row = np.arange(nrows)
    lo = np.tile(np.asarray(blo, float), (nrows, 1))
    hi = np.tile(np.asarray(bhi, float), (nrows, 1))
    best = np.full(nrows, -np.inf)
    arg = 0.5 * (lo + hi)
    disc = np.full(nrows, -np.inf)
    exhausted = False
    evals0 = ctx.evals
    saved_tol = ctx.inner_tol
    ctx.inner_tol = tol * INNER_FRACTION
    it = 0
    try:
        while row.size:
            it += 1
            m = row.size
            flo = base[row].copy()
            fhi = flo.copy()
            flo[:, cols] = lo
            fhi[:, cols] = hi
            mid = 0.5 * (lo + hi)
            blo_, bhi_, glo, ghi = enclose(body, flo, fhi, ctx, gcols=cols)
            # second candidate: the corner favoured by sign-definite slopes
            corner = np.where(glo >= 0, hi, np.where(ghi <= 0, lo, mid))
            pts = np.concatenate([base[row], base[row]])
            pts[:m, cols] = mid
            pts[m:, cols] = corner
            ctx.evals += 3 * m
            plo, phi_, _, _ = enclose(body, pts, pts, ctx)
            chi = phi_[:m]
            take = plo[m:] > plo[:m]
            clo = np.where(take, plo[m:], plo[:m])
            cpt = np.where(take[:, None], corner, mid)
            gmag = np.maximum(np.abs(glo), np.abs(ghi))
            rad = 0.5 * (hi - lo)
            ub = np.minimum(bhi_, chi + np.sum(gmag * rad, axis=1))
            ub = np.maximum(ub, clo)

            # best lower bound per row; earliest box wins ties
            order = np.lexsort((np.arange(m), -clo, row))
            first = np.ones(m, bool)
            first[1:] = row[order][1:] != row[order][:-1]
            cand = order[first]
            improve = clo[cand] > best[row[cand]]
            upd = cand[improve]
            best[row[upd]] = clo[upd]
            arg[row[upd]] = cpt[upd]

            if it in POLISH_AT and k:
                act = np.unique(row[ub > best[row] + tol])
                if act.size:
                    px, pf = _polish(body, base, act, cols, arg[act], best[act],
                                     np.asarray(blo, float), np.asarray(bhi, float), ctx)
                    better = pf > best[act]
                    best[act[better]] = pf[better]
                    arg[act[better]] = px[better]

            keep = ub > best[row] + tol
            splittable = np.any(hi - lo > 1e-15 * np.maximum(1.0, np.abs(lo) + np.abs(hi)), axis=1)
            drop = ~(keep & splittable)
            if drop.any():
                np.maximum.at(disc, row[drop], ub[drop])
            keep &= splittable
            row, lo, hi = row[keep], lo[keep], hi[keep]
            if not row.size:
                break
            if ctx.evals > ctx.max_evals or 2 * row.size > max_active:
                np.maximum.at(disc, row, ub[keep])
                exhausted = True
                break
            score = gmag[keep] * (hi - lo)
            flat = ~np.any(score > 0, axis=1)
            score[flat] = (hi - lo)[flat]
            axis = np.argmax(score, axis=1)
            cut = 0.5 * (lo[np.arange(row.size), axis] + hi[np.arange(row.size), axis])
            lo2, hi2 = lo.copy(), hi.copy()
            hi[np.arange(row.size), axis] = cut
            lo2[np.arange(row.size), axis] = cut
            # interleave children so each row's boxes stay in a stable order
            row = np.repeat(row, 2)
            lo = np.stack([lo, lo2], axis=1).reshape(-1, k)
            hi = np.stack([hi, hi2], axis=1).reshape(-1, k)
    finally:
        ctx.inner_tol = saved_tol
    upper = np.maximum(best, disc)
    return SearchResult(best, upper, arg, ctx.evals - evals0, exhausted)
