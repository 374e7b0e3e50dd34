"""Pointwise Hamiltonian, its box-constrained minimization, and the
residual of the fractional dynamic-programming equation.

The equation under test is

    -V_t(t, x) = min_u { sum_j w_j(t) g_j(t, x, u) + V_x . field(t, x, W, u) }

with w_j the running kernel weight of each cost term.  Residuals audit a
finished sweep: the Hamiltonian at the stored data plus the reconstructed
V_t, zero at the exact solution.

Endpoint conventions (both endpoints of the grid host singular factors):
at the final node the running weights of orders v < 1 are evaluated at the
adjacent interior time, and at the initial node the transformed field is
evaluated at the adjacent interior time.  The V_t entry of the initial
node is defined through the equation itself (see sweep.backward_sweep),
since no usable one-sided difference exists at the singular corner.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .cost import running_weight
from .errors import DomainError, SweepAbort
from .grid import TimeGrid
from .problem import HJBProblem

__all__ = [
    "ValueData",
    "hamiltonian",
    "node_hamiltonian",
    "minimize_hamiltonian",
    "hjb_residual",
    "aggregate_error",
]

_COORD_TOL = 1e-10
_COORD_SWEEPS = 60


@dataclass(frozen=True)
class ValueData:
    """Value and costate data along a swept trajectory.

    v holds the value samples (v[-1] equals the terminal boundary value),
    v_x the costate vector per node, and v_t the partial-time-derivative
    reconstruction used by the residual formula.
    """

    grid: TimeGrid
    v: np.ndarray = field(repr=False)
    v_x: np.ndarray = field(repr=False)
    v_t: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.grid.n_nodes
        if self.v.shape[0] != n or self.v_x.shape[0] != n \
                or self.v_t.shape[0] != n:
            raise DomainError("value data must cover every grid node")
        if not (np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.v_x))
                and np.all(np.isfinite(self.v_t))):
            raise DomainError("value data must be finite")


def _running_cost(prob: HJBProblem, t_weight: float, t_operand: float,
                  x: np.ndarray, u: np.ndarray) -> float:
    total = 0.0
    for term in prob.index.running_terms:
        w = running_weight(term.v, t_weight, prob.tf)
        total += w * term.running(t_operand, x, u)
    return total


def hamiltonian(prob: HJBProblem, t: float, x: np.ndarray,
                w_node: np.ndarray, u: np.ndarray,
                v_x: np.ndarray) -> float:
    """Weighted running cost plus V_x . field at an interior time.

    Raises SingularTimeError at t = t0 (field) and, for v < 1 terms, at
    t = tf (weight); the solver substitutes adjacent-node values there
    via node_hamiltonian.
    """
    if prob.field is None:
        raise DomainError("problem carries no transformed field")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    run = _running_cost(prob, t, t, x, u)
    return run + float(np.dot(v_x, prob.field(t, x, w_node, u)))


def node_hamiltonian(prob: HJBProblem, grid: TimeGrid, k: int,
                     x: np.ndarray, w_node: np.ndarray, u: np.ndarray,
                     v_x: np.ndarray) -> float:
    """Hamiltonian at grid node k with the endpoint substitutions applied."""
    if prob.field is None:
        raise DomainError("problem carries no transformed field")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    n = grid.n_steps
    t_run = grid.node(n - 1) if k == n else grid.node(k)
    t_field = grid.node(1) if k == 0 else grid.node(k)
    run = _running_cost(prob, t_run, t_run, x, u)
    return run + float(np.dot(v_x, prob.field(t_field, x, w_node, u)))


def _field_partial(prob: HJBProblem, grid: TimeGrid, k: int,
                   x: np.ndarray, w_node: np.ndarray):
    t_field = grid.node(1) if k == 0 else grid.node(k)
    return prob.field.at_state(t_field, x, w_node)


def _minimize_box(h: Callable[[np.ndarray], float], lo: np.ndarray,
                  hi: np.ndarray, quadratic: bool):
    """Box-constrained minimizer of a scalar function of the control.

    quadratic=True uses exact 3-point probing per component (valid for
    Hamiltonians quadratic and separable in the control); otherwise
    bounded scalar minimization per component, swept until the iterate
    stops moving.
    """
    m = lo.shape[0]
    u = np.clip(np.zeros(m), lo, hi)
    if quadratic:
        h0 = h(u)
        if not np.isfinite(h0):
            raise SweepAbort("non-finite Hamiltonian during minimization")
        out = u.copy()
        for j in range(m):
            step = max(1.0, 1e-3 * (hi[j] - lo[j]))
            up = u.copy()
            um = u.copy()
            up[j] += step
            um[j] -= step
            hp, hm = h(up), h(um)
            if not (np.isfinite(hp) and np.isfinite(hm)):
                raise SweepAbort("non-finite Hamiltonian during minimization")
            curv = (hp + hm - 2.0 * h0) / (2.0 * step * step)
            slope = (hp - hm) / (2.0 * step)
            if curv > 0.0:
                cand = u[j] - slope / (2.0 * curv)
                out[j] = min(max(cand, lo[j]), hi[j])
            else:
                # no interior minimum along this axis: best endpoint
                ue = u.copy()
                ue[j] = lo[j]
                h_lo = h(ue)
                ue[j] = hi[j]
                h_hi = h(ue)
                out[j] = lo[j] if h_lo <= h_hi else hi[j]
        h_out = h(out)
        if not np.isfinite(h_out):
            raise SweepAbort("non-finite Hamiltonian during minimization")
        return out, h_out

    u = u.copy()
    for _ in range(_COORD_SWEEPS):
        moved = 0.0
        for j in range(m):
            if hi[j] - lo[j] <= _COORD_TOL:
                u[j] = lo[j]
                continue

            def axis(val, j=j):
                uu = u.copy()
                uu[j] = val
                hv = h(uu)
                if not np.isfinite(hv):
                    raise SweepAbort("non-finite Hamiltonian during minimization")
                return hv

            res = minimize_scalar(axis, bounds=(lo[j], hi[j]),
                                  method="bounded",
                                  options={"xatol": _COORD_TOL})
            moved = max(moved, abs(res.x - u[j]))
            u[j] = res.x
        if moved <= _COORD_TOL:
            break
    return u, h(u)


def minimize_hamiltonian(prob: HJBProblem, t: float, x: np.ndarray,
                         w_node: np.ndarray, v_x: np.ndarray):
    """Box-constrained Hamiltonian minimizer at an interior time.

    Returns (u_star, h_star).
    """
    def h(u):
        return hamiltonian(prob, t, x, w_node, u, v_x)

    return _minimize_box(h, prob.u_lower, prob.u_upper,
                         prob.quadratic_control)


def minimize_node_hamiltonian(prob: HJBProblem, grid: TimeGrid, k: int,
                              x: np.ndarray, w_node: np.ndarray,
                              v_x: np.ndarray):
    """Node-indexed variant with endpoint substitutions (solver path)."""
    n = grid.n_steps
    t_run = grid.node(n - 1) if k == n else grid.node(k)
    partial = _field_partial(prob, grid, k, x, w_node)

    def h(u):
        run = _running_cost(prob, t_run, t_run, x, u)
        return run + float(np.dot(v_x, partial(u)))

    return _minimize_box(h, prob.u_lower, prob.u_upper,
                         prob.quadratic_control)


def hjb_residual(prob: HJBProblem, value: ValueData, x: np.ndarray,
                 u: np.ndarray, states, k: int) -> float:
    """Residual of the dynamic-programming equation at node k.

    Hamiltonian at the supplied (x, u, V_x) plus the stored V_t
    reconstruction; zero at the exact solution.
    """
    return node_hamiltonian(prob, value.grid, k, x[k], states.at_node(k),
                            u[k], value.v_x[k]) + float(value.v_t[k])


def aggregate_error(residuals: np.ndarray) -> float:
    """Root-sum-square of the per-node residuals."""
    r = np.asarray(residuals, dtype=float)
    return float(np.sqrt(np.sum(r * r)))
