"""Uniform time grids and functions sampled on them.

Every trajectory and quadrature in this package lives on a uniform grid
over [t0, tf].  Node times are always derived from the node index rather
than accumulated, so spacing is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

#: relative slack allowed between t0 + n_steps*dt and tf
_GRID_RTOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling of [t0, tf] with n_steps intervals (n_steps+1 nodes)."""

    t0: float
    tf: float
    n_steps: int

    def __post_init__(self):
        if not self.tf > self.t0:
            raise DomainError(f"tf must exceed t0, got [{self.t0}, {self.tf}]")
        if self.n_steps < 1:
            raise DomainError("grid needs at least one step")
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "tf", float(self.tf))

    @property
    def dt(self) -> float:
        return (self.tf - self.t0) / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @classmethod
    def from_step(cls, t0: float, tf: float, dt: float) -> "TimeGrid":
        """Build a grid from a step size that must tile [t0, tf] exactly.

        The step is accepted when t0 + round((tf-t0)/dt)*dt reproduces tf
        to within one part in 10^9 of the horizon length.
        """
        if dt <= 0:
            raise DomainError(f"dt must be positive, got {dt}")
        n = int(round((tf - t0) / dt))
        if n < 1 or abs(t0 + n * dt - tf) > _GRID_RTOL * max(1.0, abs(tf - t0)):
            raise DomainError(
                f"dt={dt} does not evenly divide [{t0}, {tf}]")
        return cls(t0, tf, n)

    def node(self, k: int) -> float:
        """Time of node k, computed as t0 + k*dt (never accumulated)."""
        if not 0 <= k <= self.n_steps:
            raise DomainError(f"node {k} outside grid 0..{self.n_steps}")
        return self.t0 + k * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_nodes)


@dataclass(frozen=True)
class SampledFunction:
    """Real- or vector-valued samples on the nodes of a TimeGrid.

    values has shape (n_nodes,) for scalar functions or (n_nodes, d) for
    vector-valued ones, and must be finite everywhere.
    """

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape[0] != self.grid.n_nodes:
            raise DomainError(
                f"expected {self.grid.n_nodes} samples, got {vals.shape[0]}")
        if vals.ndim not in (1, 2):
            raise DomainError("values must be 1- or 2-dimensional")
        if not np.all(np.isfinite(vals)):
            raise DomainError("samples must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: TimeGrid, fn) -> "SampledFunction":
        return cls(grid, np.array([fn(t) for t in grid.times()], dtype=float))

    @property
    def is_scalar(self) -> bool:
        return self.values.ndim == 1

    def __len__(self) -> int:
        return self.grid.n_nodes
