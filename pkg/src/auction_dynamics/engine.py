"""Repeated-auction simulation with oblivious schedules.

Random streams: bidder ``i`` of a run with seed ``s`` draws its uniforms
from ``PCG64(SeedSequence(s, spawn_key=(i,)))``; trial ``k`` of a
multi-trial run uses the seed ``split_seed(master_seed, k)``, the first
64-bit word of ``SeedSequence(master_seed, spawn_key=(k,))``. Both rules are
part of the reproducibility contract and must not change.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Optional

import numpy as np

from . import _kernel
from .errors import ConfigError, PreconditionError
from .grid import BidGrid
from .learners import KIND_CODES, LearnerConfig, LearnerKind, Trace, resolve_eta
from .mechanisms import ICStatus, Mechanism, make_spa, mix, verify_ic

CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class Schedule:
    segments: tuple
    horizon: int
    metadata: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    def __post_init__(self):
        segs = tuple((int(s), m) for s, m in self.segments)
        if not segs:
            raise ConfigError("schedule needs at least one segment")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if segs[0][0] != 1:
            raise ConfigError("the first segment must start at round 1")
        starts = [s for s, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("segment start rounds must be strictly increasing")
        if starts[-1] > self.horizon:
            raise ConfigError(f"segment starting at round {starts[-1]} lies beyond T={self.horizon}")
        m0 = segs[0][1]
        if any(m.grid != m0.grid or m.n != m0.n for _, m in segs):
            raise ConfigError("all scheduled mechanisms must share the grid and bidder count")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    def __reduce__(self):
        return (Schedule, (self.segments, self.horizon, dict(self.metadata)))

    @property
    def grid(self) -> BidGrid:
        return self.segments[0][1].grid

    @property
    def n(self) -> int:
        return self.segments[0][1].n

    def mechanism_at(self, t: int) -> Mechanism:
        if not 1 <= t <= self.horizon:
            raise IndexError(f"round {t} outside [1, {self.horizon}]")
        current = self.segments[0][1]
        for start, m in self.segments:
            if start > t:
                break
            current = m
        return current

    def segment_bounds(self) -> list:
        """``(start, end, mechanism)`` triples with inclusive round bounds."""
        out = []
        for k, (start, m) in enumerate(self.segments):
            end = self.segments[k + 1][0] - 1 if k + 1 < len(self.segments) else self.horizon
            out.append((start, end, m))
        return out


def constant_schedule(m: Mechanism, horizon: int, **metadata) -> Schedule:
    return Schedule(((1, m),), horizon, metadata)


@dataclass(frozen=True)
class BidderSpec:
    value: int
    learner: LearnerConfig = LearnerConfig()
    reported_value: Optional[int] = None

    @property
    def cap(self) -> int:
        return self.value if self.reported_value is None else self.reported_value


@dataclass(frozen=True, eq=False)
class SimConfig:
    grid: BidGrid
    horizon: int
    bidders: tuple
    schedule: Schedule
    snapshot_rounds: Optional[tuple] = None
    master_seed: int = 0
    trace_stride: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bidders", tuple(self.bidders))
        if len(self.bidders) < 2:
            raise ConfigError("need at least two bidders")
        if self.schedule.horizon != self.horizon:
            raise ConfigError(f"schedule horizon {self.schedule.horizon} != T={self.horizon}")
        if self.schedule.grid != self.grid or self.schedule.n != len(self.bidders):
            raise ConfigError("schedule grid/bidder count does not match the configuration")
        for b in self.bidders:
            self.grid.check_index(b.value)
            self.grid.check_index(b.cap)
            if b.learner.kind is LearnerKind.FIXED and not 0 <= b.learner.fixed_bid <= b.cap:
                raise ConfigError(f"fixed bid {b.learner.fixed_bid} exceeds the cap {b.cap}")
        if self.snapshot_rounds is None:
            rounds = default_snapshot_rounds(self.horizon)
        else:
            rounds = sorted(set(int(r) for r in self.snapshot_rounds))
            if rounds and not (1 <= rounds[0] and rounds[-1] <= self.horizon):
                raise ConfigError(f"snapshot rounds must lie in [1, {self.horizon}]")
        object.__setattr__(self, "snapshot_rounds", tuple(rounds))
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if self.trace_stride < 0:
            raise ConfigError("trace_stride must be >= 0")

    @property
    def n(self) -> int:
        return len(self.bidders)


def default_snapshot_rounds(horizon: int) -> list:
    rounds = {1 << k for k in range(horizon.bit_length()) if 1 << k <= horizon}
    rounds.add(horizon)
    return sorted(rounds)


def split_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(k,)).generate_state(1, np.uint64)[0])


def bidder_stream(seed: int, i: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(i,))))


@dataclass
class SimResult:
    delta: int
    horizon: int
    values: tuple
    caps: tuple
    revenue: np.ndarray
    snapshot_rounds: tuple
    snapshots: np.ndarray          # (rounds, bidder, action)
    final: np.ndarray              # (bidder, action), after all T updates
    cumulative_utility: np.ndarray
    realized_utility: np.ndarray
    segments: tuple                # (start, end, mechanism name)
    etas: tuple
    traces: Optional[list] = None
    seed: int = 0

    @property
    def total_revenue(self) -> float:
        return float(self.revenue.sum())

    def snapshot(self, t: int) -> np.ndarray:
        return self.snapshots[self.snapshot_rounds.index(t)]


def _tables(schedule: Schedule):
    n = schedule.n
    P = schedule.grid.size ** n
    alloc = np.stack([m.alloc.reshape(n, P) for _, m in schedule.segments])
    pay = np.stack([m.pay.reshape(n, P) for _, m in schedule.segments])
    starts = np.array([s - 1 for s, _ in schedule.segments], dtype=np.int64)
    return np.ascontiguousarray(alloc), np.ascontiguousarray(pay), starts


def run(config: SimConfig, warn: bool = True) -> SimResult:
    """Simulate one run of ``config.horizon`` rounds with full-feedback learners."""
    grid, T, n = config.grid, config.horizon, config.n
    A = grid.size
    alloc, pay, starts = _tables(config.schedule)
    strides = np.array([A ** (n - 1 - j) for j in range(n)], dtype=np.int64)
    values = np.array([b.value / grid.delta for b in config.bidders])
    caps = np.array([b.cap for b in config.bidders], dtype=np.int64)
    kinds = np.array([KIND_CODES[b.learner.kind] for b in config.bidders], dtype=np.int64)
    etas = np.array([resolve_eta(b.learner, grid, T, warn) for b in config.bidders])
    eps_powers = np.array([b.learner.epsilon_power for b in config.bidders])
    fixed = np.array([b.learner.fixed_bid or 0 for b in config.bidders], dtype=np.int64)

    U = np.zeros((n, A))
    realized = np.zeros(n)
    revenue = np.empty(T)
    snap_rounds = np.array(config.snapshot_rounds, dtype=np.int64)
    snaps = np.zeros((len(snap_rounds), n, A))
    snap_ptr = np.zeros(1, dtype=np.int64)

    stride = config.trace_stride
    R = (T + stride - 1) // stride + 1 if stride else 0
    tr_round = np.zeros(R, dtype=np.int64)
    tr_action = np.zeros((R, n), dtype=np.int64)
    tr_probs = np.zeros((R, n, A))
    tr_cum = np.zeros((R, n, A))
    tr_util = np.zeros((R, n))
    tr_ptr = np.zeros(1, dtype=np.int64)

    streams = [bidder_stream(config.master_seed, i) for i in range(n)]
    for t0 in range(0, T, CHUNK):
        t1 = min(T, t0 + CHUNK)
        uniforms = np.stack([g.random(t1 - t0) for g in streams])
        _kernel.run_chunk(alloc, pay, starts, values, caps, kinds, etas, eps_powers, fixed,
                          strides, U, realized, t0, t1, uniforms, revenue,
                          snap_rounds, snaps, snap_ptr,
                          stride, T, tr_round, tr_action, tr_probs, tr_cum, tr_util, tr_ptr)

    final = np.zeros((n, A))
    for i in range(n):
        s = _kernel.learner_weights(U[i], caps[i], kinds[i], etas[i], eps_powers[i], fixed[i],
                                    T + 1, final[i])
        final[i] /= s

    traces = None
    if stride:
        m = int(tr_ptr[0])
        traces = [Trace(T, config.bidders[i].value, tr_round[:m].copy(), tr_action[:m, i].copy(),
                        tr_probs[:m, i, :caps[i] + 1].copy(), tr_cum[:m, i, :caps[i] + 1].copy(),
                        tr_util[:m, i].copy(), U[i, :caps[i] + 1].copy(), float(realized[i]))
                  for i in range(n)]

    return SimResult(
        delta=grid.delta,
        horizon=T,
        values=tuple(b.value for b in config.bidders),
        caps=tuple(int(c) for c in caps),
        revenue=revenue,
        snapshot_rounds=tuple(int(r) for r in snap_rounds),
        snapshots=snaps,
        final=final,
        cumulative_utility=U,
        realized_utility=realized,
        segments=tuple((s, e, m.name) for s, e, m in config.schedule.segment_bounds()),
        etas=tuple(float(e) for e in etas),
        traces=traces,
        seed=config.master_seed,
    )


@dataclass
class TrialsResult:
    delta: int
    n_trials: int
    horizon: int
    values: tuple
    caps: tuple
    seeds: tuple
    revenue_mean: np.ndarray
    revenue_std: np.ndarray
    snapshot_rounds: tuple
    snapshot_mean: np.ndarray
    snapshot_std: np.ndarray
    final_mean: np.ndarray
    final_std: np.ndarray
    trial_final: np.ndarray        # (trial, bidder, action)
    trial_revenue: np.ndarray      # total revenue per trial
    trial_realized: np.ndarray     # (trial, bidder)
    segments: tuple
    etas: tuple
    traces: Optional[list] = None  # per trial, per bidder

    @property
    def revenue(self) -> np.ndarray:
        return self.revenue_mean

    @property
    def final(self) -> np.ndarray:
        return self.final_mean

    @property
    def total_revenue(self) -> float:
        return float(self.trial_revenue.mean())


def _run_trial(args):
    config, seed, warn = args
    return run(replace(config, master_seed=seed), warn=warn)


def _welford(mean, m2, x, k):
    """Running mean and squared-deviation sum; identical samples keep ``m2`` exactly 0."""
    d = x - mean
    mean += d / k
    m2 += d * (x - mean)


def _std(m2, k):
    if k < 2:
        return np.zeros_like(m2)
    return np.sqrt(np.maximum(m2, 0.0) / (k - 1))


def run_trials(config: SimConfig, n_trials: int, jobs: Optional[int] = None,
               keep_traces: bool = True) -> TrialsResult:
    """Independent trials with seeds ``split_seed(master_seed, k)``, merged in trial order."""
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    if jobs is None:
        jobs = int(os.environ.get("AUCTION_DYNAMICS_JOBS", "1"))
    seeds = [split_seed(config.master_seed, k) for k in range(n_trials)]
    # the degeneracy warning is emitted once here, not once per trial
    args = [(config, s, False) for s in seeds]
    for b in config.bidders:
        resolve_eta(b.learner, config.grid, config.horizon, warn=True)

    if jobs > 1 and n_trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(_run_trial, args)
            return _merge(config, seeds, results, keep_traces)
    return _merge(config, seeds, map(_run_trial, args), keep_traces)


def _merge(config, seeds, results, keep_traces) -> TrialsResult:
    k = len(seeds)
    rev_sum = rev_run = rev_m2 = snap_sum = snap_run = snap_m2 = None
    finals, totals, realized, traces = [], [], [], []
    first = None
    for res in results:
        if first is None:
            first = res
            rev_sum, rev_run, rev_m2 = (np.zeros_like(res.revenue) for _ in range(3))
            snap_sum, snap_run, snap_m2 = (np.zeros_like(res.snapshots) for _ in range(3))
        rev_sum += res.revenue
        snap_sum += res.snapshots
        _welford(rev_run, rev_m2, res.revenue, len(finals) + 1)
        _welford(snap_run, snap_m2, res.snapshots, len(finals) + 1)
        finals.append(res.final)
        totals.append(res.total_revenue)
        realized.append(res.realized_utility)
        if keep_traces and res.traces is not None:
            traces.append(res.traces)
    finals = np.array(finals)
    return TrialsResult(
        delta=first.delta,
        n_trials=k,
        horizon=first.horizon,
        values=first.values,
        caps=first.caps,
        seeds=tuple(seeds),
        revenue_mean=rev_sum / k,
        revenue_std=_std(rev_m2, k),
        snapshot_rounds=first.snapshot_rounds,
        snapshot_mean=snap_sum / k,
        snapshot_std=_std(snap_m2, k),
        final_mean=finals.mean(axis=0),
        final_std=finals.std(axis=0, ddof=1) if k > 1 else np.zeros_like(finals[0]),
        trial_final=finals,
        trial_revenue=np.array(totals),
        trial_realized=np.array(realized),
        segments=first.segments,
        etas=first.etas,
        traces=traces or None,
    )


def default_delta_T(delta: int, horizon: int) -> float:
    return math.sqrt(math.log(delta + 1) / horizon)


def _strict_gamma(a_strict: Mechanism) -> float:
    report = verify_ic(a_strict)
    if report.status is not ICStatus.IC_STRICT:
        raise PreconditionError(f"{a_strict.name} is not strictly IC (gamma = {report.gamma})")
    return report.gamma


def build_constant_mixture_schedule(a_strict: Mechanism, grid: BidGrid, horizon: int,
                                    delta_T: Optional[float] = None,
                                    spa: Optional[Mechanism] = None) -> Schedule:
    """One auction for all rounds: ``p_T * a_strict + (1 - p_T) * SPA``,
    ``p_T = sqrt(2 * delta * delta_T / gamma)`` clamped below 1."""
    if a_strict.grid != grid:
        raise ConfigError("mechanism grid differs from the schedule grid")
    gamma = _strict_gamma(a_strict)
    if delta_T is None:
        delta_T = default_delta_T(grid.delta, horizon)
    if delta_T < 0:
        raise ConfigError("delta_T must be non-negative")
    spa = spa or make_spa(grid, a_strict.n)
    raw = math.sqrt(2 * grid.delta * delta_T / gamma)
    p_T = min(1 - 1e-9, raw)
    meta = {"builder": "constant_mixture", "gamma": gamma, "delta_T": delta_T,
            "p_T_raw": raw, "p_T": p_T, "clamped": raw != p_T or p_T <= 0}
    if raw >= 1 - 1e-9:
        warnings.warn(f"p_T = {raw:.4g} exceeds 1; clamped to {p_T}", stacklevel=2)
    if p_T <= 0:
        warnings.warn("delta_T = 0 gives p_T = 0; schedule is pure SPA", stacklevel=2)
        return constant_schedule(spa, horizon, **meta)
    return constant_schedule(mix(p_T, a_strict, spa), horizon, **meta)


def build_two_phase_schedule(a_strict: Mechanism, grid: BidGrid, horizon: int,
                             delta_T: Optional[float] = None,
                             spa: Optional[Mechanism] = None) -> Schedule:
    """``a_strict`` for the first ``T0 = ceil(delta_T * T / gamma)`` rounds, SPA afterwards."""
    if a_strict.grid != grid:
        raise ConfigError("mechanism grid differs from the schedule grid")
    gamma = _strict_gamma(a_strict)
    if delta_T is None:
        delta_T = default_delta_T(grid.delta, horizon)
    if delta_T < 0:
        raise ConfigError("delta_T must be non-negative")
    spa = spa or make_spa(grid, a_strict.n)
    raw = math.ceil(delta_T * horizon / gamma)
    T0 = min(raw, horizon)
    meta = {"builder": "two_phase", "gamma": gamma, "delta_T": delta_T,
            "T0_raw": raw, "T0": T0, "clamped": raw >= horizon}
    if T0 >= horizon:
        warnings.warn(f"T0 = {raw} >= T = {horizon}; schedule never switches to SPA", stacklevel=2)
        return constant_schedule(a_strict, horizon, **meta)
    if T0 <= 0:
        return constant_schedule(spa, horizon, **meta)
    return Schedule(((1, a_strict), (T0 + 1, spa)), horizon, meta)
