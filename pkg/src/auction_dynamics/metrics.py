"""Auctioneer regret, last-iterate convergence, meta-game gains and exponent fits."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .engine import SimConfig, run_trials
from .mechanisms import Mechanism


def truthful_spa_revenue(values: Sequence[int], delta: int, reserve: int = 0) -> float:
    """Per-round SPA revenue when everybody bids their value."""
    v = sorted(values, reverse=True)
    if v[0] < reserve:
        return 0.0
    return max(v[1], reserve) / delta


@dataclass
class RegretReport:
    benchmark_total: float
    achieved_total: float
    regret: float
    segments: list = field(default_factory=list)

    @property
    def negative(self) -> bool:
        return self.regret < 0

    def to_dict(self) -> dict:
        return {"benchmark_total": self.benchmark_total, "achieved_total": self.achieved_total,
                "regret": self.regret, "negative": self.negative, "segments": self.segments}


def auctioneer_regret(result, values: Optional[Sequence[int]] = None,
                      reserve: Optional[int] = None) -> RegretReport:
    """Truthful second-price revenue over the horizon minus the realized expected revenue.

    ``reserve`` switches the benchmark to SPA with that reserve.
    """
    values = result.values if values is None else values
    per_round = truthful_spa_revenue(values, result.delta, reserve or 0)
    revenue = np.asarray(result.revenue)
    segments = []
    for start, end, name in result.segments:
        achieved = float(revenue[start - 1:end].sum())
        bench = per_round * (end - start + 1)
        segments.append({"start": start, "end": end, "mechanism": name,
                         "benchmark": bench, "achieved": achieved, "regret": bench - achieved})
    benchmark = per_round * len(revenue)
    achieved = float(revenue.sum())
    return RegretReport(benchmark, achieved, benchmark - achieved, segments)


def tv_distance(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    size = max(len(p), len(q))
    p = np.pad(p, (0, size - len(p)))
    q = np.pad(q, (0, size - len(q)))
    return 0.5 * float(np.abs(p - q).sum())


def point_mass(k: int, size: int) -> np.ndarray:
    e = np.zeros(size)
    e[k] = 1.0
    return e


def is_monotone_mass(dist, upto: int) -> bool:
    head = np.asarray(dist)[:upto + 1]
    return bool(np.all(np.diff(head) >= 0))


@dataclass
class ConvergenceReport:
    tv: list
    expected_bid: list
    monotone: list
    prob_zero: list

    def to_dict(self) -> dict:
        return {"tv": self.tv, "expected_bid": self.expected_bid,
                "monotone": self.monotone, "prob_zero": self.prob_zero}


def convergence(result, targets: Optional[Sequence[int]] = None) -> ConvergenceReport:
    """Distance of each final bid distribution to the point mass at its target bid.

    Targets default to the bidders' reported values (their caps).
    """
    final = np.asarray(result.final)
    targets = result.caps if targets is None else targets
    A = final.shape[1]
    grid_vals = np.arange(A) / result.delta
    return ConvergenceReport(
        tv=[tv_distance(final[i], point_mass(k, A)) for i, k in enumerate(targets)],
        expected_bid=[float(final[i] @ grid_vals) for i in range(len(targets))],
        monotone=[is_monotone_mass(final[i], k) for i, k in enumerate(targets)],
        prob_zero=[float(final[i, 0]) for i in range(len(targets))],
    )


def expected_utility(m: Mechanism, bidder: int, value: int, dists) -> float:
    """Expected utility of ``bidder`` with true value index ``value`` when every
    bidder bids independently from ``dists[j]``."""
    u = m.grid.value_of(value) * m.alloc[bidder] - m.pay[bidder]
    for d in reversed(dists):
        u = u @ np.asarray(d, dtype=float)[:m.grid.size]
    return float(u)


def metagame_gain(base: SimConfig, bidder: int, reports: Optional[Sequence[int]] = None,
                  n_trials: int = 1, jobs: Optional[int] = None) -> dict:
    """Change in the bidder's final-round expected true utility when it reports
    ``r`` to its learner instead of the truth, for each candidate ``r``.

    Every report reuses the same trial seeds, so the truthful entry is exactly 0.
    """
    truth = base.bidders[bidder].value
    reports = range(base.grid.size) if reports is None else reports
    last = base.schedule.mechanism_at(base.horizon)

    def payoff(r):
        bidders = list(base.bidders)
        bidders[bidder] = replace(bidders[bidder], reported_value=r)
        res = run_trials(replace(base, bidders=tuple(bidders), trace_stride=0), n_trials, jobs,
                         keep_traces=False)
        return float(np.mean([expected_utility(last, bidder, truth, f) for f in res.trial_final]))

    baseline = payoff(truth)
    return {int(r): (0.0 if r == truth else payoff(r) - baseline) for r in reports}


def fit_scaling_exponent(points: Sequence[tuple]) -> float:
    """Least-squares slope of log(regret) against log(T)."""
    if len(points) < 3:
        raise ValueError(f"need at least 3 (T, regret) points, got {len(points)}")
    kept = [(T, y) for T, y in points if T > 0 and y > 0]
    if len(kept) < len(points):
        warnings.warn(f"excluded {len(points) - len(kept)} non-positive point(s) from the fit",
                      stacklevel=2)
    if len(kept) < 2:
        raise ValueError("fewer than 2 positive points remain after exclusion")
    x = np.log([T for T, _ in kept])
    y = np.log([v for _, v in kept])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
