"""Generalized performance index built from fractional-integral cost terms.

A performance index is an ordered list of terms, each pairing a tuning
order v in [0, 2] with an operand.  Terms with v > 0 integrate a running
operand g(t, x, u) against the kernel (tf - tau)^(v-1) / Gamma(v); terms
with v = 0 contribute a terminal operand g(tf, x(tf)) and fix the
boundary value of the value function.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.special as sps

from .errors import DomainError, SingularTimeError
from .grid import TimeGrid
from .operators import singular_kernel_weights

__all__ = [
    "CostTerm",
    "PerformanceIndex",
    "terminal_index_set",
    "terminal_value",
    "running_weight",
    "evaluate",
]


@dataclass(frozen=True)
class CostTerm:
    """One (tuning order, operand) pair of the performance index.

    Zero-order terms carry a terminal operand g(tf, x) only; nonzero-order
    terms carry a running operand g(t, x, u) only.
    """

    v: float
    running: Optional[Callable[[float, np.ndarray, np.ndarray], float]] = None
    terminal: Optional[Callable[[float, np.ndarray], float]] = None

    def __post_init__(self):
        if not 0.0 <= self.v <= 2.0:
            raise DomainError(f"tuning order must lie in [0,2], got {self.v}")
        if self.v == 0.0:
            if self.terminal is None or self.running is not None:
                raise DomainError(
                    "a zero-order term carries a terminal operand only")
        else:
            if self.running is None or self.terminal is not None:
                raise DomainError(
                    "a nonzero-order term carries a running operand only")


@dataclass(frozen=True)
class PerformanceIndex:
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if len(terms) < 1:
            raise DomainError("performance index needs at least one term")
        for term in terms:
            if not isinstance(term, CostTerm):
                raise DomainError("terms must be CostTerm instances")
        object.__setattr__(self, "terms", terms)

    @property
    def running_terms(self):
        return tuple(t for t in self.terms if t.v != 0.0)


def terminal_index_set(pi: PerformanceIndex) -> frozenset:
    """Indices of the zero-order (non-integral) terms."""
    return frozenset(i for i, t in enumerate(pi.terms) if t.v == 0.0)


def terminal_value(pi: PerformanceIndex, tf: float, x_tf: np.ndarray) -> float:
    """Boundary value of the value function: sum of terminal operands.

    Zero when the index has no zero-order terms.
    """
    x_tf = np.asarray(x_tf, dtype=float)
    return float(sum(pi.terms[i].terminal(tf, x_tf)
                     for i in terminal_index_set(pi)))


def running_weight(v: float, t: float, tf: float) -> float:
    """Instantaneous kernel weight (tf - t)^(v-1) / Gamma(v).

    Constant 1 for v = 1; singular at t = tf when v < 1 (raised as
    SingularTimeError rather than returned as inf).
    """
    if v <= 0.0 or v > 2.0:
        raise DomainError(f"running weight needs v in (0,2], got {v}")
    if t > tf:
        raise DomainError("running weight evaluated past the horizon")
    rem = tf - t
    if rem == 0.0 and v < 1.0:
        raise SingularTimeError("running weight is singular at t = tf for v < 1")
    return rem ** (v - 1.0) / float(sps.gamma(v))


def evaluate(pi: PerformanceIndex, grid: TimeGrid, x: np.ndarray,
             u: np.ndarray, from_node: int = 0) -> float:
    """Cost-to-go of a sampled trajectory pair from a grid node.

    Each nonzero-order term is integrated over [t_from, tf] with the
    singularity-safe product quadrature; zero-order terms add their
    terminal operands.  Trajectories are node-sampled arrays of shape
    (n_nodes, n_states) and (n_nodes, n_controls).
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape[0] != grid.n_nodes or u.shape[0] != grid.n_nodes:
        raise DomainError("trajectories must cover every grid node")
    if not 0 <= from_node <= grid.n_steps:
        raise DomainError(f"node {from_node} outside grid")
    times = grid.times()
    total = terminal_value(pi, grid.tf, x[-1])
    for term in pi.running_terms:
        w = singular_kernel_weights(grid, term.v, from_node,
                                    grid.n_steps, "upper")
        samples = np.array([term.running(times[k], x[k], u[k])
                            for k in range(from_node, grid.n_nodes)])
        total += float(w[from_node:] @ samples)
    return total
