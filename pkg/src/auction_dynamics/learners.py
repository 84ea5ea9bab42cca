"""Mean-based no-regret bidders with full feedback and no overbidding.

Weights are kept in the log domain: an MWU learner stores the cumulative
counterfactual utility ``U`` of every allowed bid and plays
``softmax(eta * U)``, shifted by ``max(U)`` before exponentiation.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .grid import BidGrid


class LearnerKind(str, enum.Enum):
    MWU = "mwu"
    EPS_GREEDY = "eps_greedy"
    FIXED = "fixed"


KIND_CODES = {LearnerKind.MWU: 0, LearnerKind.EPS_GREEDY: 1, LearnerKind.FIXED: 2}


@dataclass(frozen=True)
class LearnerConfig:
    kind: LearnerKind = LearnerKind.MWU
    eta: Optional[float] = None
    epsilon_power: float = 1.0 / 3.0
    fixed_bid: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", LearnerKind(self.kind))
        if self.eta is not None and not (math.isfinite(self.eta) and self.eta > 0):
            raise ConfigError(f"learning rate must be finite and positive, got {self.eta}")
        if self.kind is LearnerKind.FIXED and self.fixed_bid is None:
            raise ConfigError("a fixed bidder needs 'fixed_bid'")
        if self.epsilon_power <= 0:
            raise ConfigError("epsilon_power must be positive")


def default_eta(delta: int, horizon: int) -> float:
    """``sqrt(log(delta) / T)``; the log is floored at ``log 2`` so delta = 1 stays usable."""
    return math.sqrt(max(math.log(delta), math.log(2)) / horizon)


def check_non_degenerate(eta: float, horizon: int) -> bool:
    ok = eta * horizon >= 10 and eta * math.log(max(horizon, 2)) <= 1
    if not ok:
        warnings.warn(
            f"learning rate {eta:.3g} is degenerate for T={horizon} "
            f"(eta*T={eta * horizon:.3g}, eta*log T={eta * math.log(max(horizon, 2)):.3g})",
            stacklevel=2)
    return ok


def resolve_eta(config: LearnerConfig, grid: BidGrid, horizon: int, warn: bool = True) -> float:
    if config.kind is not LearnerKind.MWU:
        return 0.0
    eta = config.eta if config.eta is not None else default_eta(grid.delta, horizon)
    if warn:
        check_non_degenerate(eta, horizon)
    return eta


def sample_index(weights: np.ndarray, u: float) -> int:
    """Inverse-CDF draw from unnormalized weights using one uniform ``u`` in [0, 1)."""
    cdf = np.cumsum(weights)
    k = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(k, len(weights) - 1)


class _Learner:
    def __init__(self, cap: int):
        if cap < 0:
            raise ConfigError(f"value cap must be >= 0, got {cap}")
        self.cap = cap
        self.cumulative_utility = np.zeros(cap + 1)
        self.round = 0

    def probabilities(self) -> np.ndarray:
        raise NotImplementedError

    def act(self, rng: np.random.Generator) -> int:
        return sample_index(self.probabilities(), rng.random())

    def update(self, utilities):
        u = np.asarray(utilities, dtype=np.float64)
        if u.shape != self.cumulative_utility.shape:
            raise ConfigError(f"utility vector has shape {u.shape}, expected {self.cumulative_utility.shape}")
        self.cumulative_utility += u
        self.round += 1
        return self


class MWULearner(_Learner):
    def __init__(self, cap: int, eta: float):
        if not (math.isfinite(eta) and eta > 0):
            raise ConfigError(f"learning rate must be finite and positive, got {eta}")
        super().__init__(cap)
        self.eta = eta

    @property
    def log_weights(self) -> np.ndarray:
        U = self.cumulative_utility
        return self.eta * (U - U.max())

    def probabilities(self) -> np.ndarray:
        w = np.exp(self.log_weights)
        return w / w.sum()

    def act(self, rng: np.random.Generator) -> int:
        return sample_index(np.exp(self.log_weights), rng.random())


class EpsGreedyLearner(_Learner):
    """Plays the cumulative leader with probability 1 - eps_t, uniform otherwise, eps_t = t^(-power)."""

    def __init__(self, cap: int, power: float = 1.0 / 3.0):
        super().__init__(cap)
        self.power = power

    def probabilities(self) -> np.ndarray:
        eps = min(1.0, (self.round + 1) ** -self.power)
        U = self.cumulative_utility
        leaders = U == U.max()
        return eps / len(U) + (1 - eps) * leaders / leaders.sum()


class FixedBidder(_Learner):
    def __init__(self, cap: int, bid: int):
        if not 0 <= bid <= cap:
            raise ConfigError(f"fixed bid {bid} outside [0, {cap}]")
        super().__init__(cap)
        self.bid = bid

    def probabilities(self) -> np.ndarray:
        p = np.zeros(self.cap + 1)
        p[self.bid] = 1.0
        return p


def make_learner(config: LearnerConfig, cap: int, eta: float = 0.0) -> _Learner:
    if config.kind is LearnerKind.MWU:
        return MWULearner(cap, eta)
    if config.kind is LearnerKind.EPS_GREEDY:
        return EpsGreedyLearner(cap, config.epsilon_power)
    return FixedBidder(cap, config.fixed_bid)


@dataclass
class Trace:
    """Per-round record of one bidder, possibly thinned to every k-th round.

    ``cumulative_utility[j]`` is the counterfactual total before the update
    of round ``rounds[j]``; ``probabilities[j]`` is the distribution the
    action of that round was drawn from.
    """

    horizon: int
    true_value: int
    rounds: np.ndarray
    actions: np.ndarray
    probabilities: np.ndarray
    cumulative_utility: np.ndarray
    realized_utility: np.ndarray
    final_cumulative_utility: np.ndarray
    realized_total: float

    @property
    def prob_truthful(self) -> np.ndarray:
        if self.true_value >= self.probabilities.shape[1]:
            return np.zeros(len(self.rounds))
        return self.probabilities[:, self.true_value]

    @property
    def expected_bid(self) -> np.ndarray:
        return self.probabilities @ np.arange(self.probabilities.shape[1])

    def write_csv(self, path, delta: int) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["round", "action_index", "prob_truthful", "expected_bid", "realized_utility"])
            for t, a, pt, eb, ru in zip(self.rounds, self.actions, self.prob_truthful,
                                        self.expected_bid / delta, self.realized_utility):
                w.writerow([int(t), int(a), repr(float(pt)), repr(float(eb)), repr(float(ru))])


@dataclass
class MeanBasedCheck:
    passed: bool
    violation: Optional[dict] = None

    def __bool__(self):
        return self.passed


def check_mean_based(trace: Trace, delta: float) -> MeanBasedCheck:
    """Whenever some bid leads ``b'`` by more than ``delta * T`` in cumulative
    utility, ``b'`` must be played with probability at most ``delta``."""
    U = trace.cumulative_utility
    P = trace.probabilities
    if U.shape[1] < 2 or len(U) == 0:
        return MeanBasedCheck(True)
    lead = U.max(axis=1, keepdims=True) - U
    bad = np.argwhere((lead > delta * trace.horizon) & (P > delta))
    if not bad.size:
        return MeanBasedCheck(True)
    j, b_lo = bad[0]
    return MeanBasedCheck(False, {
        "round": int(trace.rounds[j]),
        "leader": int(np.argmax(U[j])),
        "trailing_bid": int(b_lo),
        "utility_gap": float(lead[j, b_lo]),
        "probability": float(P[j, b_lo]),
    })


def realized_regret(trace: Trace) -> float:
    return float(trace.final_cumulative_utility.max() - trace.realized_total)
