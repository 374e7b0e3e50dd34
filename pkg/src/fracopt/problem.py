"""Optimal control problem bundle: plant + performance index + control set."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .cost import PerformanceIndex
from .errors import DomainError
from .expansion import ExpansionCoeffs, TransformedField
from .plant import FractionalPlant


@dataclass(frozen=True)
class HJBProblem:
    """Fixed-final-time problem over a compact box of controls.

    The transformed field (the integer-order equivalent of the Caputo
    dynamics) is attached by with_field once truncation settings are
    known; the solver does this automatically from its configuration.
    """

    plant: FractionalPlant
    index: PerformanceIndex
    tf: float
    u_lower: np.ndarray
    u_upper: np.ndarray
    quadratic_control: bool = False
    field: Optional[TransformedField] = None

    def __post_init__(self):
        lo = np.asarray(self.u_lower, dtype=float).reshape(-1)
        hi = np.asarray(self.u_upper, dtype=float).reshape(-1)
        if lo.shape[0] != self.plant.n_controls or hi.shape[0] != lo.shape[0]:
            raise DomainError("one bound pair per control component required")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise DomainError("control set must be compact (finite bounds)")
        if np.any(lo > hi):
            raise DomainError("control lower bounds exceed upper bounds")
        if not self.tf > self.plant.t0:
            raise DomainError("final time must exceed the initial time")
        if self.field is not None \
                and self.field.plant.n_states != self.plant.n_states:
            raise DomainError("transformed field dimension mismatch")
        object.__setattr__(self, "u_lower", lo)
        object.__setattr__(self, "u_upper", hi)
        object.__setattr__(self, "tf", float(self.tf))

    def with_field(self, n_a: int, n_b: int, p_max: int,
                   b_series: str = "divergent") -> "HJBProblem":
        """Return a copy carrying the transformed field for the given
        truncation settings."""
        coeffs = tuple(
            ExpansionCoeffs.build(q, n_a, n_b, p_max, b_series)
            for q in self.plant.orders)
        return replace(self, field=TransformedField(self.plant, coeffs))
