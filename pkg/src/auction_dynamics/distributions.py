"""Discrete value distributions, virtual values and the Myerson reserve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PreconditionError
from .grid import BidGrid

TOL = 1e-12


class UndefinedVirtualValue(LookupError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    grid: BidGrid
    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.array(self.pmf, dtype=np.float64)
        if pmf.shape != (self.grid.size,):
            raise ConfigError(f"pmf needs {self.grid.size} entries, got {pmf.shape}")
        if np.any(pmf < 0) or not np.all(np.isfinite(pmf)):
            raise ConfigError("pmf entries must be finite and non-negative")
        if abs(pmf.sum() - 1.0) > 1e-12:
            raise ConfigError(f"pmf sums to {pmf.sum()!r}, not 1")
        pmf.flags.writeable = False
        object.__setattr__(self, "pmf", pmf)

    @classmethod
    def uniform(cls, grid: BidGrid) -> "DiscreteDistribution":
        return cls(grid, np.full(grid.size, 1.0 / grid.size))

    @classmethod
    def from_weights(cls, grid: BidGrid, weights) -> "DiscreteDistribution":
        w = np.asarray(weights, dtype=np.float64)
        if w.sum() <= 0:
            raise ConfigError("weights must have positive total mass")
        return cls(grid, w / w.sum())

    @classmethod
    def point_mass(cls, grid: BidGrid, k: int) -> "DiscreteDistribution":
        pmf = np.zeros(grid.size)
        pmf[grid.check_index(k)] = 1.0
        return cls(grid, pmf)

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.grid.size, size=size, p=self.pmf)


@dataclass(frozen=True, eq=False)
class VirtualValueTable:
    phi: np.ndarray
    defined: np.ndarray

    def __len__(self):
        return len(self.phi)

    def __getitem__(self, k: int) -> float:
        if not self.defined[k]:
            raise UndefinedVirtualValue(f"virtual value undefined at index {k} (zero mass)")
        return float(self.phi[k])


def virtual_values(f: DiscreteDistribution) -> VirtualValueTable:
    pmf = f.pmf
    # mass strictly above each index
    upper = np.concatenate([np.cumsum(pmf[::-1])[::-1][1:], [0.0]])
    defined = pmf > 0
    phi = np.zeros_like(pmf)
    phi[defined] = f.grid.values[defined] - upper[defined] / (f.grid.delta * pmf[defined])
    return VirtualValueTable(phi, defined)


def is_regular(f: DiscreteDistribution) -> bool:
    vv = virtual_values(f)
    return bool(np.all(np.diff(vv.phi[vv.defined]) >= -TOL))


def myerson_reserve(f: DiscreteDistribution) -> int:
    """Smallest index with non-negative virtual value; ``delta`` when there is none."""
    if not is_regular(f):
        raise PreconditionError("Myerson reserve requires a regular distribution")
    vv = virtual_values(f)
    ok = np.flatnonzero(vv.defined & (vv.phi >= -TOL))
    return int(ok[0]) if ok.size else f.grid.delta


def distribution_from_spec(spec: dict, grid: BidGrid) -> DiscreteDistribution:
    kind = spec.get("kind")
    if kind == "uniform":
        return DiscreteDistribution.uniform(grid)
    if kind == "pmf":
        return DiscreteDistribution.from_weights(grid, spec["weights"])
    raise ConfigError(f"unknown distribution kind {kind!r}")
