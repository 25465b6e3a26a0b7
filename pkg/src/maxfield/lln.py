"""Monte Carlo view of the law of large numbers under model uncertainty.

A family of laws is indexed by mean sequences ``m_1, m_2, ...`` with values
in ``[μ̲, μ̄]`` plus centred bounded noise. The estimate of
``sup_θ E_θ[φ(S_n / n)]`` is the best strategy in a finite adversary list;
its limit is ``max_{v∈[μ̲, μ̄]} φ(v)``.

Every strategy sees the same noise (common random numbers). Noise is drawn
in time blocks from child streams of one seed sequence, so results depend
only on the seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special, stats

from . import expr as ex
from . import search
from .maximal import MaximalVector, UncertaintyInterval, lipschitz_bound, maximize
from .report import CheckReport

NOISE_KINDS = ("uniform", "truncated-gaussian")
TRUNCATION = 3.0
BLOCK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class Strategy:
    """A mean sequence. ``kind`` is ``constant``, ``alternating``, ``switch``
    (first half low, second half high) or ``adaptive`` (move away from the
    midpoint of the running mean's side, a non-anticipating rule)."""

    kind: str
    level: float = 0.0

    @property
    def label(self) -> str:
        return f"constant({self.level:g})" if self.kind == "constant" else self.kind


@dataclass(frozen=True)
class MeasureFamily:
    mu: UncertaintyInterval
    noise: str = "uniform"
    sigma: float = 1.0
    strategies: tuple[Strategy, ...] = ()

    def __post_init__(self):
        mu = self.mu if isinstance(self.mu, UncertaintyInterval) else UncertaintyInterval(*self.mu)
        object.__setattr__(self, "mu", mu)
        if self.noise not in NOISE_KINDS:
            raise ValueError(f"noise must be one of {NOISE_KINDS}")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValueError("sigma must be finite and nonnegative")
        strategies = tuple(self.strategies)
        for s in strategies:
            if s.kind == "constant" and not mu.lower <= s.level <= mu.upper:
                raise ValueError(f"constant mean {s.level} lies outside [{mu.lower}, {mu.upper}]")
            if s.kind not in ("constant", "alternating", "switch", "adaptive"):
                raise ValueError(f"unknown strategy kind {s.kind!r}")
        object.__setattr__(self, "strategies", strategies)

    @classmethod
    def standard(cls, mu, noise="uniform", sigma=1.0, grid: int = 11,
                 switching: bool = True) -> MeasureFamily:
        """Constant means on an even grid of the interval, plus switching rules."""
        mu = mu if isinstance(mu, UncertaintyInterval) else UncertaintyInterval(*mu)
        levels = np.linspace(mu.lower, mu.upper, grid) if grid > 1 else [mu.upper]
        strategies = [Strategy("constant", float(v)) for v in levels]
        if switching and mu.upper > mu.lower:
            strategies += [Strategy("alternating"), Strategy("switch"), Strategy("adaptive")]
        return cls(mu, noise, sigma, tuple(strategies))

    @property
    def noise_bound(self) -> float:
        if self.sigma == 0:
            return 0.0
        if self.noise == "uniform":
            return math.sqrt(3.0) * self.sigma
        return TRUNCATION * self.sigma / _truncated_std()


def _truncated_std() -> float:
    return float(math.sqrt(stats.truncnorm(-TRUNCATION, TRUNCATION).var()))


@dataclass
class LlnEstimate:
    n: int
    value: float
    std_error: float
    reference: float
    best_strategy: str
    per_strategy: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return abs(self.value - self.reference)


def _noise_block(rng, shape, kind, sigma):
    if sigma == 0:
        return np.zeros(shape)
    u = rng.random(shape)
    if kind == "uniform":
        return (2.0 * u - 1.0) * (math.sqrt(3.0) * sigma)
    # inverse-CDF sampling of the standard normal truncated to ±TRUNCATION,
    # rescaled so the standard deviation is sigma
    a = special.ndtr(-TRUNCATION)
    z = special.ndtri(a + u * (1.0 - 2.0 * a))
    return z * (sigma / _truncated_std())


def _means(strategy: Strategy, mu: UncertaintyInterval, start: int, stop: int, n: int):
    k = np.arange(start, stop)
    if strategy.kind == "constant":
        return np.full(stop - start, strategy.level)
    if strategy.kind == "alternating":
        return np.where(k % 2 == 0, mu.upper, mu.lower)
    if strategy.kind == "switch":
        return np.where(k < n // 2, mu.lower, mu.upper)
    raise ValueError(strategy.kind)


def _eval_phi(phi: ex.Expr, x: np.ndarray) -> np.ndarray:
    pts = x.reshape(-1, 1)
    return search.enclose(phi, pts, pts, search.Context())[0]


def simulate(family: MeasureFamily, phi: ex.Expr, n: int, samples: int = 1000,
             seed: int = 0) -> LlnEstimate:
    """Estimate ``max_θ E_θ[φ(S_n / n)]`` over the family's strategies."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if samples < 100:
        raise ValueError("need at least 100 samples")
    if not family.strategies:
        raise ValueError("the adversary list is empty")
    if phi.arity > 1:
        raise ValueError("phi must be a function of one variable")
    mu = family.mu
    strategies = family.strategies
    sums = np.zeros((len(strategies), samples))
    block = max(1, BLOCK_ELEMENTS // samples)
    nblocks = math.ceil(n / block)
    children = np.random.SeedSequence(seed).spawn(nblocks)
    mid = 0.5 * (mu.lower + mu.upper)
    for b in range(nblocks):
        start, stop = b * block, min(n, (b + 1) * block)
        noise = _noise_block(np.random.default_rng(children[b]), (samples, stop - start),
                             family.noise, family.sigma)
        row_noise = noise.sum(axis=1)
        for s_idx, st in enumerate(strategies):
            if st.kind != "adaptive":
                sums[s_idx] += math.fsum(_means(st, mu, start, stop, n)) + row_noise
                continue
            acc = sums[s_idx]
            for j in range(stop - start):
                k = start + j
                # the running mean so far decides the next mean
                ahead = acc >= mid * k
                acc += np.where(ahead, mu.upper, mu.lower) + noise[:, j]
    values = []
    errors = []
    for s_idx in range(len(strategies)):
        f = _eval_phi(phi, sums[s_idx] / n)
        values.append(float(np.mean(f)))
        errors.append(float(np.std(f, ddof=1) / math.sqrt(samples)))
    best = int(np.argmax(values))
    reference = maximize(phi, MaximalVector([mu.as_tuple()]), 1e-9).value
    per = {st.label: {"value": v, "std_error": e}
           for st, v, e in zip(strategies, values, errors)}
    return LlnEstimate(n, values[best], errors[best], reference, strategies[best].label, per)


def tail_allowance(family: MeasureFamily, phi: ex.Expr, n: int) -> float:
    """``L · σ / √n``: how far noise alone can lift ``E[φ(S_n/n)]`` above the limit."""
    c = family.noise_bound
    box = MaximalVector([(family.mu.lower - c, family.mu.upper + c)])
    return lipschitz_bound(phi, box) * family.sigma / math.sqrt(n)


def convergence_curve(family: MeasureFamily, phi: ex.Expr, n_list: Sequence[int],
                      samples: int = 1000, seed: int = 0,
                      threshold: float = 0.15) -> tuple[list[LlnEstimate], CheckReport]:
    """Estimates for increasing ``n``; the last gap must be within ``threshold``."""
    ns = [int(v) for v in n_list]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_list must be strictly increasing")
    rows = [simulate(family, phi, n, samples, seed) for n in ns]
    gaps = [r.gap for r in rows]
    bounded = all(r.value <= r.reference + 3 * r.std_error + tail_allowance(family, phi, r.n)
                  for r in rows)
    ok = gaps[-1] <= threshold and bounded
    return rows, CheckReport("lln_convergence", ok, {
        "n": ns, "gaps": gaps, "final_gap": gaps[-1], "threshold": threshold,
        "dominated_by_limit": bounded,
        "shrinking": len(gaps) < 2 or gaps[-1] < gaps[0],
    })


def write_curve_csv(path, rows: Sequence[LlnEstimate]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "value", "std_error", "reference", "gap", "best_strategy"])
        for r in rows:
            w.writerow([r.n, repr(r.value), repr(r.std_error), repr(r.reference),
                        repr(r.gap), r.best_strategy])
