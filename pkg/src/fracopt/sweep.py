"""Forward-backward sweep solver.

One iteration evaluates the current control trajectory end to end:
integrate the transformed dynamics and moment states forward, integrate
the costate and value backward, minimize the Hamiltonian pointwise, and
score the iterate by the root-sum-square residual of the
dynamic-programming equation.  The control update is relaxed and accepted
only when the aggregate residual does not increase; on rejection the
relaxation factor is halved and the update retried.

The value samples are generated by the exact discrete inverse of the
residual's time-derivative stencil (centered differences inside the grid,
one-sided at the final node), so a converged control makes every residual
vanish to rounding.  Because of that inversion the value chain integrates
the full Hamiltonian, which along a trajectory is NOT the cost-to-go
derivative; the optimal cost is therefore reported from the cost
quadrature of the converged pair rather than from the value chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import cost as cost_mod
from .errors import DomainError, SweepAbort
from .expansion import AuxiliaryStates, advance_moments
from .grid import TimeGrid
from .hjb import (ValueData, aggregate_error, minimize_node_hamiltonian,
                  node_hamiltonian)
from .problem import HJBProblem

__all__ = ["SweepConfig", "SweepState", "forward_sweep", "backward_sweep",
           "update_control", "solve", "audit_residuals"]

_MAX_HALVINGS = 20


@dataclass(frozen=True)
class SweepConfig:
    """Solver settings: grid step, initial guess, truncations, iteration
    control, and integration scheme ("euler" or "heun")."""

    dt: float = 0.01
    u_init: Union[float, np.ndarray] = 0.0
    n_a: int = 10_000_000
    n_b: int = 10_000_000
    p_max: int = 150
    max_iters: int = 200
    error_tol: float = 1e-8
    relaxation: float = 0.5
    stepper: str = "euler"
    b_series: str = "divergent"
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.dt <= 0:
            raise DomainError("dt must be positive")
        if self.error_tol <= 0:
            raise DomainError("error_tol must be positive")
        if not 0 < self.relaxation <= 1:
            raise DomainError("relaxation must lie in (0, 1]")
        if self.stepper not in ("euler", "heun"):
            raise DomainError(f"unknown stepper {self.stepper!r}")
        if self.b_series not in ("divergent", "convergent"):
            raise DomainError(f"unknown coefficient series {self.b_series!r}")
        if self.max_iters < 0:
            raise DomainError("max_iters must be non-negative")
        if self.n_a < 2 or self.n_b < 1 or self.p_max < 2:
            raise DomainError("truncation counts too small")


@dataclass
class SweepState:
    """Result of a solve: final trajectories and iteration diagnostics."""

    grid: TimeGrid
    iteration: int
    u: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    moments: AuxiliaryStates = field(repr=False)
    value: ValueData = field(repr=False)
    u_star: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    error: float
    error_history: list
    j_star: float
    converged: bool
    stagnated: bool

    @property
    def terminal_state(self) -> np.ndarray:
        return self.x[-1]


def _grid_for(prob: HJBProblem, cfg: SweepConfig) -> TimeGrid:
    return TimeGrid.from_step(prob.plant.t0, prob.tf, cfg.dt)


def _control_array(prob: HJBProblem, grid: TimeGrid, u_init) -> np.ndarray:
    m = prob.plant.n_controls
    u = np.asarray(u_init, dtype=float)
    if u.ndim == 0:
        u = np.full((grid.n_nodes, m), float(u))
    elif u.ndim == 1 and u.shape[0] == m:
        u = np.tile(u, (grid.n_nodes, 1))
    elif u.ndim == 1 and m == 1 and u.shape[0] == grid.n_nodes:
        u = u[:, None]
    if u.shape != (grid.n_nodes, m):
        raise DomainError(
            f"control guess must broadcast to ({grid.n_nodes}, {m})")
    return np.clip(u, prob.u_lower, prob.u_upper)


def _ensure_field(prob: HJBProblem, cfg: SweepConfig) -> HJBProblem:
    return prob.with_field(cfg.n_a, cfg.n_b, cfg.p_max, cfg.b_series)


def _check_finite(arr: np.ndarray, what: str, k: int) -> None:
    if not np.all(np.isfinite(arr)):
        raise SweepAbort(f"non-finite {what} at node {k}")


def forward_sweep(prob: HJBProblem, u, cfg: SweepConfig):
    """Integrate states and moments forward under a control trajectory.

    The transformed field is singular at t0, so the first cell is crossed
    with one explicit Euler step of the original Caputo right-hand side
    (which is regular); stepping then proceeds on the transformed system
    with the configured scheme.  Returns (x, moments).
    """
    if prob.field is None:
        prob = _ensure_field(prob, cfg)
    grid = _grid_for(prob, cfg)
    u = _control_array(prob, grid, u)
    plant = prob.plant
    n = grid.n_steps
    dt = grid.dt
    times = grid.times()
    x = np.empty((grid.n_nodes, plant.n_states))
    states = AuxiliaryStates(grid, cfg.p_max, plant.n_states)
    x[0] = plant.x0
    x[1] = x[0] + dt * np.asarray(plant.rhs(times[0], x[0], u[0]), dtype=float)
    _check_finite(x[1], "state", 1)
    advance_moments(states, x[0], 0)
    for k in range(1, n):
        advance_moments(states, x[k], k)   # moment step is x_{k+1}-free
        _check_finite(states.at_node(k + 1), "moment state", k + 1)
        f_k = prob.field(times[k], x[k], states.at_node(k), u[k])
        if cfg.stepper == "euler":
            x[k + 1] = x[k] + dt * f_k
        else:
            x_pred = x[k] + dt * f_k
            f_k1 = prob.field(times[k + 1], x_pred,
                              states.at_node(k + 1), u[k + 1])
            x[k + 1] = x[k] + 0.5 * dt * (f_k + f_k1)
        _check_finite(x[k + 1], "state", k + 1)
    return x, states


def _terminal_gradient(prob: HJBProblem, x_tf: np.ndarray,
                       fd_step: float) -> np.ndarray:
    grad = np.zeros(prob.plant.n_states)
    for i in range(grad.shape[0]):
        h = fd_step * max(1.0, abs(x_tf[i]))
        xp, xm = x_tf.copy(), x_tf.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (cost_mod.terminal_value(prob.index, prob.tf, xp)
                   - cost_mod.terminal_value(prob.index, prob.tf, xm)) / (2 * h)
    return grad


def _weighted_running_gradient(prob: HJBProblem, grid: TimeGrid, k: int,
                               x_k: np.ndarray, u_k: np.ndarray,
                               fd_step: float) -> np.ndarray:
    """d/dx of the weighted running cost at node k (weights substituted at
    the final node), by central differences on the user operands."""
    n = grid.n_steps
    t_run = grid.node(n - 1) if k == n else grid.node(k)
    weights = [cost_mod.running_weight(term.v, t_run, prob.tf)
               for term in prob.index.running_terms]

    def g_of(xv):
        return sum(w * term.running(t_run, xv, u_k)
                   for w, term in zip(weights, prob.index.running_terms))

    grad = np.zeros(x_k.shape[0])
    for i in range(grad.shape[0]):
        h = fd_step * max(1.0, abs(x_k[i]))
        xp, xm = x_k.copy(), x_k.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (g_of(xp) - g_of(xm)) / (2 * h)
    return grad


def backward_sweep(prob: HJBProblem, x: np.ndarray, states: AuxiliaryStates,
                   u, cfg: SweepConfig) -> ValueData:
    """Integrate costates backward and build the value chain.

    The costate solves lambda' = -(dg/dx + (dfield/dx)^T lambda) with
    lambda(tf) set to the terminal-value gradient.  The value samples are
    produced by inverting the residual stencil: one backward-difference
    seed at the final node, then the centered-difference chain inward.
    V_t at the initial node is defined through the equation itself
    (-H at that node), the only choice that keeps the singular corner
    auditable.
    """
    if prob.field is None:
        prob = _ensure_field(prob, cfg)
    grid = _grid_for(prob, cfg)
    u = _control_array(prob, grid, u)
    n = grid.n_steps
    dt = grid.dt
    times = grid.times()
    nx = prob.plant.n_states
    lam = np.zeros((grid.n_nodes, nx))
    lam[n] = _terminal_gradient(prob, x[n], cfg.fd_step)

    def rhs(k, lam_k):
        gg = _weighted_running_gradient(prob, grid, k, x[k], u[k], cfg.fd_step)
        jac = prob.field.jacobian_x(times[k], x[k], states.at_node(k),
                                    u[k], cfg.fd_step)
        return -(gg + jac.T @ lam_k)

    if cfg.stepper == "euler":
        for k in range(n - 1, -1, -1):
            lam[k] = lam[k + 1] - dt * rhs(k + 1, lam[k + 1])
            _check_finite(lam[k], "costate", k)
    else:
        for k in range(n - 1, 0, -1):
            r1 = rhs(k + 1, lam[k + 1])
            pred = lam[k + 1] - dt * r1
            lam[k] = lam[k + 1] - 0.5 * dt * (r1 + rhs(k, pred))
            _check_finite(lam[k], "costate", k)
        lam[0] = lam[1] - dt * rhs(1, lam[1])
        _check_finite(lam[0], "costate", 0)

    h_gen = np.array([
        node_hamiltonian(prob, grid, k, x[k], states.at_node(k), u[k], lam[k])
        for k in range(grid.n_nodes)])
    if not np.all(np.isfinite(h_gen)):
        raise SweepAbort("non-finite Hamiltonian along the sweep")

    v = np.empty(grid.n_nodes)
    v[n] = cost_mod.terminal_value(prob.index, prob.tf, x[n])
    v[n - 1] = v[n] + dt * h_gen[n]
    for k in range(n - 1, 0, -1):
        v[k - 1] = v[k + 1] + 2.0 * dt * h_gen[k]

    v_t = np.empty(grid.n_nodes)
    v_t[1:n] = (v[2:] - v[:-2]) / (2.0 * dt)
    v_t[n] = (v[n] - v[n - 1]) / dt
    v_t[0] = -h_gen[0]
    return ValueData(grid, v, lam, v_t)


def _pointwise_minimizers(prob: HJBProblem, grid: TimeGrid, x: np.ndarray,
                          states: AuxiliaryStates,
                          value: ValueData) -> np.ndarray:
    u_star = np.empty((grid.n_nodes, prob.plant.n_controls))
    for k in range(grid.n_nodes):
        u_star[k], _ = minimize_node_hamiltonian(
            prob, grid, k, x[k], states.at_node(k), value.v_x[k])
    return u_star


def update_control(prob: HJBProblem, x: np.ndarray, states: AuxiliaryStates,
                   value: ValueData, u_old, cfg: SweepConfig) -> np.ndarray:
    """Pointwise Hamiltonian minimization blended with the old control."""
    if prob.field is None:
        prob = _ensure_field(prob, cfg)
    grid = _grid_for(prob, cfg)
    u_old = _control_array(prob, grid, u_old)
    u_star = _pointwise_minimizers(prob, grid, x, states, value)
    theta = cfg.relaxation
    return theta * u_star + (1.0 - theta) * u_old


def _evaluate(prob: HJBProblem, grid: TimeGrid, u: np.ndarray,
              cfg: SweepConfig):
    x, states = forward_sweep(prob, u, cfg)
    value = backward_sweep(prob, x, states, u, cfg)
    u_star = _pointwise_minimizers(prob, grid, x, states, value)
    residuals = np.array([
        node_hamiltonian(prob, grid, k, x[k], states.at_node(k),
                         u_star[k], value.v_x[k]) + value.v_t[k]
        for k in range(grid.n_nodes)])
    return x, states, value, u_star, residuals, aggregate_error(residuals)


def audit_residuals(prob: HJBProblem, x: np.ndarray, u,
                    cfg: SweepConfig):
    """Recompute residuals and value data from stored trajectories alone.

    Rebuilds the moment states from the node samples of x, reruns the
    backward sweep under the supplied control, and evaluates the
    residuals at the pointwise minimizers: the audit path behind the
    command-line verify.  Returns (residuals, value).
    """
    prob = _ensure_field(prob, cfg)
    grid = _grid_for(prob, cfg)
    u = _control_array(prob, grid, u)
    if x.shape != (grid.n_nodes, prob.plant.n_states):
        raise DomainError("state trajectory does not match the grid")
    states = AuxiliaryStates(grid, cfg.p_max, prob.plant.n_states)
    for k in range(grid.n_steps):
        advance_moments(states, x[k], k)
    value = backward_sweep(prob, x, states, u, cfg)
    u_star = _pointwise_minimizers(prob, grid, x, states, value)
    residuals = np.array([
        node_hamiltonian(prob, grid, k, x[k], states.at_node(k), u_star[k],
                         value.v_x[k]) + value.v_t[k]
        for k in range(grid.n_nodes)])
    return residuals, value


def solve(prob: HJBProblem, cfg: SweepConfig) -> SweepState:
    """Run the sweep iteration until the aggregate residual meets the
    tolerance or the iteration budget is spent.

    Non-convergence is reported on the returned state (converged=False,
    and stagnated=True when 20 relaxation halvings failed to find a
    non-increasing update), never as an exception.
    """
    prob = _ensure_field(prob, cfg)
    grid = _grid_for(prob, cfg)
    u = _control_array(prob, grid, cfg.u_init)
    x, states, value, u_star, residuals, err = _evaluate(prob, grid, u, cfg)
    history = [err]
    iteration = 0
    stagnated = False
    while err > cfg.error_tol and iteration < cfg.max_iters:
        theta = cfg.relaxation
        accepted = False
        for _ in range(_MAX_HALVINGS + 1):
            u_try = np.clip(theta * u_star + (1.0 - theta) * u,
                            prob.u_lower, prob.u_upper)
            trial = _evaluate(prob, grid, u_try, cfg)
            if trial[-1] <= history[-1]:
                accepted = True
                break
            theta *= 0.5
        if not accepted:
            stagnated = True
            break
        u = u_try
        x, states, value, u_star, residuals, err = trial
        history.append(err)
        iteration += 1
    j_star = cost_mod.evaluate(prob.index, grid, x, u, 0)
    return SweepState(
        grid=grid, iteration=iteration, u=u, x=x, moments=states,
        value=value, u_star=u_star, residuals=residuals, error=err,
        error_history=history, j_star=j_star,
        converged=bool(err <= cfg.error_tol), stagnated=stagnated)
