"""Discrete bid/value grid {0, 1/delta, ..., 1} addressed by integer indices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class BidGrid:
    delta: int

    def __post_init__(self):
        if isinstance(self.delta, bool) or not isinstance(self.delta, (int, np.integer)):
            raise TypeError(f"delta must be an integer, got {self.delta!r}")
        if self.delta < 1:
            raise ValueError(f"delta must be >= 1, got {self.delta}")
        object.__setattr__(self, "delta", int(self.delta))

    @property
    def size(self) -> int:
        return self.delta + 1

    @property
    def values(self) -> np.ndarray:
        return np.arange(self.size) / self.delta

    def check_index(self, k) -> int:
        if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
            raise TypeError(f"bid index must be an integer, got {k!r}")
        if not 0 <= k <= self.delta:
            raise IndexError(f"bid index {k} outside [0, {self.delta}]")
        return int(k)

    def value_of(self, k: int) -> float:
        return self.check_index(k) / self.delta

    def nearest_index(self, value: float) -> int:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"value {value} outside [0, 1]")
        return int(round(value * self.delta))

    def check_profile(self, bids: Sequence[int]) -> tuple[int, ...]:
        if len(bids) < 2:
            raise ValueError("a bid profile needs at least two bidders")
        return tuple(self.check_index(b) for b in bids)


def value_of(grid: BidGrid, k: int) -> float:
    return grid.value_of(k)
