"""Truthful single-item mechanisms on the bid grid.

A mechanism is stored as two dense tables ``alloc`` and ``pay`` of shape
``(n,) + (delta + 1,) * n``: ``alloc[i][b_1]...[b_n]`` is the expected
allocation of bidder ``i`` at the profile ``(b_1, ..., b_n)`` and ``pay`` is
the matching expected payment.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import BudgetExceeded, ConfigError, MonotonicityError, PreconditionError
from .grid import BidGrid

TOL = 1e-12
DEFAULT_BUDGET = 200_000_000


class TieBreakRule(str, enum.Enum):
    FAVOR_LOWER_INDEX = "favor_lower_index"
    FAVOR_HIGHER_INDEX = "favor_higher_index"
    UNIFORM_SPLIT = "uniform_split"


class Interpolation(str, enum.Enum):
    STEP = "step"
    LINEAR = "linear"


class ICStatus(enum.IntEnum):
    NOT_IC = 0
    IC_WEAK = 1
    IC_STRICT = 2


@dataclass(frozen=True, eq=False)
class Mechanism:
    grid: BidGrid
    n: int
    alloc: np.ndarray
    pay: np.ndarray
    name: str = "mechanism"

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"need at least 2 bidders, got {self.n}")
        shape = (self.n,) + (self.grid.size,) * self.n
        alloc = np.array(self.alloc, dtype=np.float64)
        pay = np.array(self.pay, dtype=np.float64)
        if alloc.shape != shape or pay.shape != shape:
            raise ConfigError(f"tables must have shape {shape}, got {alloc.shape} and {pay.shape}")
        if not (np.all(np.isfinite(alloc)) and np.all(np.isfinite(pay))):
            raise ConfigError("allocation and payment tables must be finite")
        if alloc.min() < -TOL or alloc.max() > 1 + TOL:
            raise ConfigError("allocation probabilities must lie in [0, 1]")
        if alloc.sum(axis=0).max() > 1 + TOL:
            raise ConfigError("total allocation exceeds 1 on some profile")
        if pay.min() < -TOL:
            raise ConfigError("payments must be non-negative")
        alloc.flags.writeable = False
        pay.flags.writeable = False
        object.__setattr__(self, "alloc", alloc)
        object.__setattr__(self, "pay", pay)

    @property
    def deterministic(self) -> bool:
        a = self.alloc
        return bool(np.all((np.abs(a) <= TOL) | (np.abs(a - 1.0) <= TOL)))

    def alloc_at(self, i: int, profile) -> float:
        return float(self.alloc[(i,) + self.grid.check_profile(profile)])

    def pay_at(self, i: int, profile) -> float:
        return float(self.pay[(i,) + self.grid.check_profile(profile)])

    def utility(self, i: int, value: int, profile) -> float:
        return self.grid.value_of(value) * self.alloc_at(i, profile) - self.pay_at(i, profile)

    def revenue_at(self, profile) -> float:
        idx = self.grid.check_profile(profile)
        return float(sum(self.pay[(i,) + idx] for i in range(self.n)))

    def own_axis_view(self, i: int):
        """Tables of bidder ``i`` reshaped to ``(own bid, opponent profile)``."""
        A = self.grid.size
        x = np.moveaxis(self.alloc[i], i, 0).reshape(A, -1)
        p = np.moveaxis(self.pay[i], i, 0).reshape(A, -1)
        return x, p

    def opponents_of(self, i: int, r: int) -> tuple[int, ...]:
        return tuple(int(k) for k in np.unravel_index(r, (self.grid.size,) * (self.n - 1)))

    def to_spec(self) -> dict:
        return {
            "kind": "table",
            "delta": self.grid.delta,
            "n": self.n,
            "name": self.name,
            "alloc": self.alloc.tolist(),
            "pay": self.pay.tolist(),
        }


def _profiles(grid: BidGrid, n: int) -> np.ndarray:
    return np.indices((grid.size,) * n)


def make_spa(grid: BidGrid, n: int = 2, reserve: int = 0,
             tie: TieBreakRule = TieBreakRule.UNIFORM_SPLIT) -> Mechanism:
    """Second-price auction with a reserve, all quantities exact on the grid."""
    if n < 2:
        raise ConfigError(f"SPA needs at least 2 bidders, got {n}")
    reserve = grid.check_index(reserve)
    tie = TieBreakRule(tie)
    bids = _profiles(grid, n)
    top = bids.max(axis=0)
    is_top = bids == top
    eligible = top >= reserve
    second = np.sort(bids, axis=0)[-2]
    price = np.maximum(second, reserve) / grid.delta

    if tie is TieBreakRule.UNIFORM_SPLIT:
        alloc = is_top / is_top.sum(axis=0)
    else:
        if tie is TieBreakRule.FAVOR_LOWER_INDEX:
            winner = np.argmax(is_top, axis=0)
        else:
            winner = n - 1 - np.argmax(is_top[::-1], axis=0)
        alloc = (np.arange(n).reshape((n,) + (1,) * n) == winner).astype(float)
    alloc = alloc * eligible
    pay = alloc * price
    name = f"spa(reserve={reserve},tie={tie.value})"
    return Mechanism(grid, n, alloc, pay, name)


def make_staircase(grid: BidGrid, n: int = 2) -> Mechanism:
    """Pick a bidder uniformly, then allocate to them with probability equal to their bid.

    Payments are the Myerson integral of the linear allocation, v^2 / (2n).
    """
    if n < 2:
        raise ConfigError(f"staircase needs at least 2 bidders, got {n}")
    v = _profiles(grid, n) / grid.delta
    return Mechanism(grid, n, v / n, v ** 2 / (2 * n), f"staircase(n={n})")


def make_softmax(grid: BidGrid, lam: float) -> Mechanism:
    """Two-bidder soft-max auction with its closed-form Myerson payment."""
    if not (math.isfinite(lam) and lam > 0):
        raise ConfigError(f"lambda must be finite and positive, got {lam}")
    b = grid.values[:, None]
    o = grid.values[None, :]
    lb, lo = lam * b, lam * o
    win = np.exp(lb - np.logaddexp(lb, lo))
    pay = b * win - (np.logaddexp(lb, lo) - np.logaddexp(0.0, lo)) / lam
    pay = np.maximum(pay, 0.0)  # rounding near b = 0
    alloc = np.stack([win, win.T])
    payments = np.stack([pay, pay.T])
    return Mechanism(grid, 2, alloc, payments, f"softmax(lambda={lam:g})")


def mix(q: float, a: Mechanism, a_prime: Mechanism) -> Mechanism:
    """Pointwise q-mixture ``q * a + (1 - q) * a_prime``."""
    if not 0.0 < q < 1.0:
        raise ConfigError(f"mixing weight must lie in (0, 1), got {q}")
    if a.n != a_prime.n or a.grid != a_prime.grid:
        raise ConfigError("mixed mechanisms must share the grid and bidder count")
    return Mechanism(
        a.grid, a.n,
        q * a.alloc + (1 - q) * a_prime.alloc,
        q * a.pay + (1 - q) * a_prime.pay,
        f"mix({q:g}, {a.name}, {a_prime.name})",
    )


def payment_from_allocation(grid: BidGrid, alloc, interpolation=Interpolation.LINEAR,
                            tol: float = TOL) -> np.ndarray:
    """Derive truthful payments from a monotone allocation table.

    ``alloc`` is either a full ``(n, A, ..., A)`` table or a 1-D allocation
    curve over the grid (own bid only); the result has the same shape.
    STEP gives threshold payments, LINEAR integrates the piecewise-linear
    interpolant of the allocation between grid points.
    """
    interpolation = Interpolation(interpolation)
    alloc = np.asarray(alloc, dtype=np.float64)
    A = grid.size
    if alloc.ndim == 1:
        if alloc.shape != (A,):
            raise ConfigError(f"allocation curve has length {alloc.size}, expected {A}")
        return _payments_1d(grid, alloc[:, None], interpolation, tol, 0, None)[:, 0]
    n = alloc.shape[0]
    if alloc.shape != (n,) + (A,) * n:
        raise ConfigError(f"allocation table has shape {alloc.shape}, expected {(n,) + (A,) * n}")
    pay = np.empty_like(alloc)
    for i in range(n):
        x = np.moveaxis(alloc[i], i, 0)
        rest = x.shape[1:]
        p = _payments_1d(grid, x.reshape(A, -1), interpolation, tol, i, rest)
        pay[i] = np.moveaxis(p.reshape((A,) + rest), 0, i)
    return pay


def _payments_1d(grid, x, interpolation, tol, bidder, rest_shape):
    drop = np.diff(x, axis=0)
    bad = np.argwhere(drop < -tol)
    if bad.size:
        k, r = bad[0]
        opp = tuple(int(j) for j in np.unravel_index(r, rest_shape)) if rest_shape else ()
        witness = {"bidder": bidder, "opponents": opp, "bid_low": int(k), "bid_high": int(k + 1),
                   "alloc_low": float(x[k, r]), "alloc_high": float(x[k + 1, r])}
        raise MonotonicityError(
            f"allocation of bidder {bidder} drops from {x[k, r]:g} to {x[k + 1, r]:g} "
            f"between bids {k} and {k + 1} (opponents {opp})", witness)
    vals = grid.values[:, None]
    if interpolation is Interpolation.STEP:
        jumps = np.diff(x, axis=0, prepend=0.0)
        p = np.cumsum(vals * jumps, axis=0)
    else:
        cells = (x[:-1] + x[1:]) / (2 * grid.delta)
        area = np.concatenate([np.zeros((1, x.shape[1])), np.cumsum(cells, axis=0)])
        p = vals * x - area
    return np.maximum(p, 0.0)


def make_from_allocation(grid: BidGrid, alloc, interpolation=Interpolation.LINEAR,
                         name: Optional[str] = None) -> Mechanism:
    alloc = np.asarray(alloc, dtype=np.float64)
    pay = payment_from_allocation(grid, alloc, interpolation)
    interp = Interpolation(interpolation).value
    return Mechanism(grid, alloc.shape[0], alloc, pay, name or f"derived({interp})")


class Witness(NamedTuple):
    bidder: int
    value: int
    bid: int
    opponents: tuple


@dataclass
class ICReport:
    status: ICStatus
    gamma: float
    ir_ok: bool
    witness: Optional[Witness] = None
    min_gap: float = 0.0

    def to_dict(self) -> dict:
        return {
            "status": self.status.name,
            "gamma": self.gamma,
            "min_gap": self.min_gap,
            "ir_ok": self.ir_ok,
            "witness": None if self.witness is None else {
                "bidder": self.witness.bidder,
                "value": self.witness.value,
                "bid": self.witness.bid,
                "opponents": list(self.witness.opponents),
            },
        }


def verify_ic(m: Mechanism, tol: float = TOL, budget: int = DEFAULT_BUDGET) -> ICReport:
    """Exhaustive incentive-compatibility and IR check.

    Scans every (bidder, value, misreport, opponent profile). The smallest
    gain of truth over a misreport is reported as ``gamma`` when positive.
    """
    A = m.grid.size
    cost = m.n * A ** (m.n + 1)
    if cost > budget:
        raise BudgetExceeded(f"IC scan needs {cost} evaluations, budget is {budget}")
    vals = m.grid.values
    min_gap = math.inf
    ic_witness = ir_witness = None
    chunk = max(1, int(4_000_000 // max(1, A * A ** (m.n - 1))))
    for i in range(m.n):
        x, p = m.own_axis_view(i)
        for v0 in range(0, A, chunk):
            vs = np.arange(v0, min(A, v0 + chunk))
            u = vals[vs, None, None] * x[None] - p[None]          # (v, b, r)
            truthful = u[np.arange(len(vs)), vs]                  # (v, r)
            gap = truthful[:, None, :] - u
            gap[np.arange(len(vs)), vs] = np.inf
            min_gap = min(min_gap, float(gap.min()))
            if ic_witness is None:
                bad = np.argwhere(gap < -tol)
                if bad.size:
                    vi, b, r = bad[0]
                    ic_witness = Witness(i, int(vs[vi]), int(b), m.opponents_of(i, int(r)))
            if ir_witness is None:
                bad = np.argwhere(truthful < -tol)
                if bad.size:
                    vi, r = bad[0]
                    ir_witness = Witness(i, int(vs[vi]), int(vs[vi]), m.opponents_of(i, int(r)))
    if ic_witness is not None:
        status = ICStatus.NOT_IC
    elif min_gap > tol:
        status = ICStatus.IC_STRICT
    else:
        status = ICStatus.IC_WEAK
    gamma = min_gap if status is ICStatus.IC_STRICT else 0.0
    return ICReport(status, gamma, ir_witness is None, ic_witness or ir_witness, min_gap)


@dataclass
class CharacterizationResult:
    passed: bool
    violation: Optional[dict] = None

    def __bool__(self):
        return self.passed


def characterize_deterministic(m: Mechanism, exact_threshold: bool = False,
                               tol: float = TOL) -> CharacterizationResult:
    """Check the structure of a truthful deterministic auction with no transfers to bidders.

    For every bidder and opponent profile the allocation must be a monotone
    0/1 step, losers pay nothing and all winning bids pay one common price.
    On the grid that price may sit anywhere between the highest losing bid
    and the lowest winning bid (e.g. SPA for the bidder who loses ties);
    ``exact_threshold=True`` insists on the lowest winning bid itself.
    """
    if not m.deterministic:
        raise PreconditionError(f"{m.name} is randomized; characterization applies to deterministic mechanisms")
    vals = m.grid.values
    step = 1.0 / m.grid.delta
    for i in range(m.n):
        x, p = m.own_axis_view(i)
        wins = x > 0.5
        for r in range(x.shape[1]):
            col = wins[:, r]
            where = {"bidder": i, "opponents": list(m.opponents_of(i, r))}
            if not col.any():
                first = None
            else:
                first = int(np.argmax(col))
                if not col[first:].all():
                    return CharacterizationResult(False, {
                        "reason": "non-monotone allocation",
                        "bid": first + int(np.argmin(col[first:])), **where})
            for b in np.flatnonzero(~col):
                if abs(p[b, r]) > tol:
                    return CharacterizationResult(False, {
                        "reason": "loser pays", "bid": int(b), "payment": float(p[b, r]), **where})
            if first is None:
                continue
            threshold = vals[first]
            low = threshold if exact_threshold or first == 0 else threshold - step
            price = p[first, r]
            for b in range(first, x.shape[0]):
                if abs(p[b, r] - price) > tol or not low - tol <= p[b, r] <= threshold + tol:
                    return CharacterizationResult(False, {
                        "reason": "winner payment is not the threshold price", "bid": b,
                        "payment": float(p[b, r]), "threshold": float(threshold), **where})
    return CharacterizationResult(True)


def strictify(a: Mechanism, a_strict: Mechanism, q: float, budget: int = DEFAULT_BUDGET) -> Mechanism:
    """Blend a truthful mechanism with weight ``q`` of a strictly-IC one.

    The result is within ``q`` of ``a`` in sup-norm (allocations and payments
    lie in [0, 1]) and its gamma is at least ``q`` times that of ``a_strict``.
    """
    if not 0.0 < q < 1.0:
        raise ConfigError(f"q must lie in (0, 1), got {q}")
    if verify_ic(a, budget=budget).status < ICStatus.IC_WEAK:
        raise PreconditionError(f"{a.name} is not truthful")
    if verify_ic(a_strict, budget=budget).status is not ICStatus.IC_STRICT:
        raise PreconditionError(f"{a_strict.name} is not strictly IC")
    return mix(1 - q, a, a_strict)


def mechanism_from_spec(spec: dict, delta: Optional[int] = None, n: Optional[int] = None) -> Mechanism:
    """Build a mechanism from its JSON description.

    ``delta`` and ``n`` may be given at any level and are inherited by the
    components of a ``mix``.
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("mechanism spec must be an object with a 'kind' field")
    delta = spec.get("delta", delta)
    n = spec.get("n", n)
    kind = spec["kind"]
    if kind == "mix":
        a = mechanism_from_spec(spec["a"], delta, n)
        b = mechanism_from_spec(spec["b"], a.grid.delta, a.n)
        return mix(float(spec["q"]), a, b)
    if delta is None:
        raise ConfigError(f"mechanism '{kind}' needs 'delta'")
    grid = BidGrid(int(delta))
    if kind == "spa":
        return make_spa(grid, int(n or 2), int(spec.get("reserve", 0)),
                        TieBreakRule(spec.get("tie", TieBreakRule.UNIFORM_SPLIT.value)))
    if kind == "staircase":
        return make_staircase(grid, int(n or 2))
    if kind == "softmax":
        if n not in (None, 2):
            raise ConfigError("softmax is defined for 2 bidders")
        return make_softmax(grid, float(spec["lambda"]))
    if kind == "table":
        alloc = np.asarray(spec["alloc"], dtype=np.float64)
        name = spec.get("name", "table")
        if "pay" in spec:
            return Mechanism(grid, alloc.shape[0], alloc, np.asarray(spec["pay"], dtype=np.float64), name)
        return make_from_allocation(grid, alloc, spec.get("interpolation", "linear"), name)
    raise ConfigError(f"unknown mechanism kind {kind!r}")
