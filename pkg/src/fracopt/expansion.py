"""Series expansion of fractional derivatives into local terms and moments.

A left fractional derivative of order q in (0,1) is represented through
the sampled function itself, its first derivative, and a family of moment
states W_p solving

    dW_p/dt = (1-p) (t-a)^(p-2) x(t),   W_p(a) = 0,   p = 2, 3, ...

with coefficients

    A(q,N) = (1/Gamma(1-q)) * (1 + sum_{p=2}^{N} Gamma(p-1+q)/(Gamma(q)(p-1)!))
    B(q,N) = (1/Gamma(2-q)) * (1 + sum_{p=1}^{N} Gamma(p-1+q)/(Gamma(q)(p-1)!))
    C(q,p) = Gamma(p-1+q) / (Gamma(2-q) Gamma(q-1) (p-1)!)

The A and B series diverge as N grows (terms behave like p^(q-1)), so the
truncation count is a modeling parameter rather than a convergence
tolerance.  Note that B as defined above grows without bound with N and
does not approach 1 as q -> 1; a second convention for B,

    B(q,N) = Gamma(N+q) / (Gamma(q) Gamma(N+1) Gamma(2-q)),

is provided under series="convergent".  It decays like N^(q-1), equals 1
identically at q = 1, and is the choice under which the reconstruction
of the derivative converges when N and the moment cutoff grow together.
See README for when each convention is appropriate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.special as sps

from .errors import DomainError, SingularTimeError
from .grid import TimeGrid

__all__ = [
    "series_partial_sum",
    "state_coeff",
    "derivative_coeff",
    "moment_coeff",
    "ExpansionCoeffs",
    "AuxiliaryStates",
    "advance_moments",
    "memory_correction",
    "TransformedField",
    "reconstruct_rl_derivative",
]

_CHUNK = 5_000_000

#: drop log-space terms below this exponent (exp underflows to 0 anyway)
_LOG_FLOOR = -745.0


def _check_order(q: float) -> float:
    q = float(q)
    if not 0 < q < 1:
        raise DomainError(f"expansion order must lie in (0,1), got {q}")
    return q


@lru_cache(maxsize=64)
def series_partial_sum(q: float, n_terms: int) -> float:
    """sum_{p=2}^{N} Gamma(p-1+q) / (Gamma(q) (p-1)!) for N = n_terms.

    Terms are generated by the ratio recurrence
    term(p+1) = term(p) * (p-1+q)/p, which avoids Gamma overflow, and
    accumulated with error-free summation: chunks are summed pairwise by
    numpy and the chunk partials combined exactly with math.fsum.
    """
    q = _check_order(q)
    if n_terms < 2:
        return 0.0
    partials = []
    term = q                      # p = 2 term: Gamma(1+q)/Gamma(q) = q
    p_start = 2
    while p_start <= n_terms:
        p_stop = min(p_start + _CHUNK, n_terms + 1)
        ps = np.arange(p_start, p_stop, dtype=float)
        ratios = (ps - 2.0 + q) / (ps - 1.0)
        ratios[0] = 1.0           # seed carries the first term of the chunk
        terms = term * np.cumprod(ratios)
        partials.append(float(np.sum(terms)))
        # seed for the next chunk: term(p_stop) from term(p_stop - 1)
        term = terms[-1] * (p_stop - 2.0 + q) / (p_stop - 1.0)
        p_start = p_stop
    return math.fsum(partials)


def state_coeff(q: float, n_terms: int) -> float:
    """Coefficient multiplying (t-a)^(-q) x(t) in the expansion."""
    q = _check_order(q)
    if n_terms < 2:
        raise DomainError("state coefficient needs a truncation count >= 2")
    return (1.0 + series_partial_sum(q, n_terms)) / sps.gamma(1 - q)


def derivative_coeff(q: float, n_terms: int,
                     series: str = "divergent") -> float:
    """Coefficient multiplying (t-a)^(1-q) x'(t) in the expansion.

    series="divergent" is the partial-sum definition (same term kernel as
    the state coefficient, lower limit p=1); series="convergent" is the
    closed-form variant that restores the q -> 1 limit (see module notes).
    """
    q = _check_order(q)
    if n_terms < 1:
        raise DomainError("derivative coefficient needs a truncation count >= 1")
    if series == "divergent":
        # 1 + sum_{p=1}^{N} = 2 + sum_{p=2}^{N}  (the p=1 term equals 1)
        return (2.0 + series_partial_sum(q, n_terms)) / sps.gamma(2 - q)
    if series == "convergent":
        lg = (sps.gammaln(n_terms + q) - sps.gammaln(q)
              - sps.gammaln(n_terms + 1.0))
        return float(np.exp(lg)) / sps.gamma(2 - q)
    raise DomainError(f"unknown derivative-coefficient series {series!r}")


def moment_coeff(q: float, p: int) -> float:
    """Coefficient of the p-th moment state, negative for q in (0,1)."""
    q = _check_order(q)
    if p < 2:
        raise DomainError(f"moment index must be >= 2, got {p}")
    lg = (sps.gammaln(p - 1 + q) - sps.gammaln(2 - q)
          - sps.gammaln(q - 1.0) - sps.gammaln(float(p)))
    return float(sps.gammasgn(q - 1.0) * np.exp(lg))


@dataclass(frozen=True)
class ExpansionCoeffs:
    """Truncated expansion coefficients for one fractional order."""

    q: float
    n_a: int
    n_b: int
    p_max: int
    b_series: str
    a_val: float
    b_val: float
    c_vals: np.ndarray = field(repr=False)      # index 0 <-> p = 2
    log_c_mag: np.ndarray = field(repr=False)   # log|C(q,p)|, same indexing

    @classmethod
    def build(cls, q: float, n_a: int, n_b: int, p_max: int,
              b_series: str = "divergent") -> "ExpansionCoeffs":
        q = _check_order(q)
        if p_max < 2:
            raise DomainError("moment cutoff p_max must be >= 2")
        ps = np.arange(2, p_max + 1, dtype=float)
        log_c = (sps.gammaln(ps - 1 + q) - sps.gammaln(2 - q)
                 - sps.gammaln(q - 1.0) - sps.gammaln(ps))
        c_vals = sps.gammasgn(q - 1.0) * np.exp(log_c)
        coeffs = cls(
            q=q, n_a=int(n_a), n_b=int(n_b), p_max=int(p_max),
            b_series=b_series,
            a_val=state_coeff(q, n_a),
            b_val=derivative_coeff(q, n_b, b_series),
            c_vals=c_vals,
            log_c_mag=log_c,
        )
        if not (math.isfinite(coeffs.a_val) and coeffs.a_val > 0):
            raise DomainError("state coefficient must be finite and positive")
        if not (math.isfinite(coeffs.b_val) and coeffs.b_val > 0):
            raise DomainError("derivative coefficient must be finite and positive")
        return coeffs

    @property
    def p_values(self) -> np.ndarray:
        return np.arange(2, self.p_max + 1)


@dataclass
class AuxiliaryStates:
    """Moment-state trajectories W_p(t) for every state component.

    values[k, j, i] holds W_p at node k for p = j+2 and state component i.
    All moments start at zero: W_p(a) = 0.
    """

    grid: TimeGrid
    p_max: int
    n_states: int
    values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.p_max < 2:
            raise DomainError("moment cutoff p_max must be >= 2")
        if self.values is None:
            self.values = np.zeros(
                (self.grid.n_nodes, self.p_max - 1, self.n_states))

    @property
    def p_values(self) -> np.ndarray:
        return np.arange(2, self.p_max + 1)

    def at_node(self, k: int) -> np.ndarray:
        return self.values[k]


def _moment_rates(ps: np.ndarray, t_rel: float) -> np.ndarray:
    """(1-p) (t-a)^(p-2) with the 0^0 = 1 convention at t = a."""
    if t_rel > 0.0:
        return (1.0 - ps) * t_rel ** (ps - 2.0)
    return np.where(ps == 2, -1.0, 0.0)


def advance_moments(states: AuxiliaryStates, x: np.ndarray,
                    node: int) -> AuxiliaryStates:
    """One explicit trapezoidal step of the moment IVP from node to node+1.

    The rate (1-p)(t-a)^(p-2) x is integrated over the cell with the state
    sample frozen at the left node, which makes the stored trajectory a
    pure function of the node samples of x (the property the residual
    audit relies on).  Exact for constant x.
    """
    if not 0 <= node < states.grid.n_steps:
        raise DomainError(f"cannot step from node {node}")
    ps = states.p_values.astype(float)
    a = states.grid.t0
    r0 = _moment_rates(ps, states.grid.node(node) - a)
    r1 = _moment_rates(ps, states.grid.node(node + 1) - a)
    fac = 0.5 * states.grid.dt * (r0 + r1)
    states.values[node + 1] = states.values[node] \
        + np.outer(fac, np.asarray(x, dtype=float))
    return states


def _signed_log_sum(log_c: np.ndarray, ps: np.ndarray, q: float,
                    log_t: float, w_col: np.ndarray) -> float:
    """sum_p C(q,p) (t-a)^(1-p-q) W_p, evaluated in log space with signs.

    For small t-a and large p the power factor overflows while W_p
    underflows; combining exponents in log space keeps every term finite.
    Terms with log-magnitude below the exp underflow threshold are
    dropped, and C(q,p) < 0 on (0,1) is carried as an explicit sign.
    """
    mask = w_col != 0.0
    if not np.any(mask):
        return 0.0
    logs = (log_c[mask] + (1.0 - ps[mask] - q) * log_t
            + np.log(np.abs(w_col[mask])))
    keep = logs > _LOG_FLOOR
    if not np.any(keep):
        return 0.0
    signs = -np.sign(w_col[mask][keep])          # sign(C) = -1
    return float(np.sum(signs * np.exp(logs[keep])))


def memory_correction(t: float, x_i: float, coeffs: ExpansionCoeffs,
                      w_values: np.ndarray, x0_i: float, a: float) -> float:
    """Correction term for one state component: initial value, state, and
    moment contributions.

        -x_i(a)/Gamma(1-q) (t-a)^(-q) + A (t-a)^(-q) x_i
        - sum_p C(q,p) (t-a)^(1-p-q) W_p(t)

    w_values holds W_p(t) for this component, p = 2..p_max.  Singular at
    t = a: every term carries a negative power of (t-a).
    """
    t_rel = t - a
    if t_rel <= 0.0:
        raise SingularTimeError("memory correction is singular at t = a")
    q = coeffs.q
    log_t = math.log(t_rel)
    base = (-x0_i / sps.gamma(1 - q) + coeffs.a_val * x_i) * t_rel ** (-q)
    ps = coeffs.p_values.astype(float)
    return base - _signed_log_sum(coeffs.log_c_mag, ps, q, log_t, w_values)


class TransformedField:
    """Equivalent integer-order vector field for Caputo dynamics.

    Component i evaluates to

        (f_i(t, x, u) - k_i(t, x_i, W)) / (B_i (t-a)^(1-q_i)),

    where k_i is the memory correction.  Singular at t = a; the solver
    never evaluates there (start-offset policy).
    """

    def __init__(self, plant, coeffs: tuple):
        if len(coeffs) != plant.n_states:
            raise DomainError("one coefficient set per state component required")
        for c, q in zip(coeffs, plant.orders):
            if abs(c.q - q) > 1e-12:
                raise DomainError("coefficient order does not match plant order")
        self.plant = plant
        self.coeffs = tuple(coeffs)
        self._a = np.array([c.a_val for c in coeffs])
        self._b = np.array([c.b_val for c in coeffs])
        self._q = np.asarray(plant.orders, dtype=float)

    def correction(self, t: float, x: np.ndarray,
                   w_node: np.ndarray) -> np.ndarray:
        a = self.plant.t0
        return np.array([
            memory_correction(t, x[i], self.coeffs[i], w_node[:, i],
                              self.plant.x0[i], a)
            for i in range(self.plant.n_states)
        ])

    def denominator(self, t: float) -> np.ndarray:
        t_rel = t - self.plant.t0
        if t_rel <= 0.0:
            raise SingularTimeError("transformed field is singular at t = a")
        return self._b * t_rel ** (1.0 - self._q)

    def __call__(self, t: float, x: np.ndarray, w_node: np.ndarray,
                 u: np.ndarray) -> np.ndarray:
        shift = self.correction(t, x, w_node)
        return (self.plant.rhs(t, x, u) - shift) / self.denominator(t)

    def at_state(self, t: float, x: np.ndarray, w_node: np.ndarray):
        """Freeze (t, x, W) and return a cheap function of the control only."""
        shift = self.correction(t, x, w_node)
        denom = self.denominator(t)
        plant_rhs = self.plant.rhs

        def field_of_u(u: np.ndarray) -> np.ndarray:
            return (plant_rhs(t, x, u) - shift) / denom

        return field_of_u

    def jacobian_x(self, t: float, x: np.ndarray, w_node: np.ndarray,
                   u: np.ndarray, fd_step: float = 1e-6) -> np.ndarray:
        """d(field)/dx: finite differences on the plant part, exact on the
        expansion part (the correction is linear in x with a diagonal
        coefficient A_i (t-a)^(-q_i))."""
        del w_node  # moments are treated as exogenous data here
        t_rel = t - self.plant.t0
        if t_rel <= 0.0:
            raise SingularTimeError("transformed field is singular at t = a")
        n = self.plant.n_states
        jac = np.empty((n, n))
        for j in range(n):
            h = fd_step * max(1.0, abs(x[j]))
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            jac[:, j] = (self.plant.rhs(t, xp, u)
                         - self.plant.rhs(t, xm, u)) / (2 * h)
        jac -= np.diag(self._a * t_rel ** (-self._q))
        return jac / self.denominator(t)[:, None]


def reconstruct_rl_derivative(coeffs: ExpansionCoeffs, t: float, a: float,
                              x_val: float, xdot_val: float,
                              w_values: np.ndarray) -> float:
    """Evaluate the expansion's representation of the RL derivative.

        A (t-a)^(-q) x + B (t-a)^(1-q) x' - sum_p C(q,p) (t-a)^(1-p-q) W_p

    Used by the consistency suite to compare against the quadrature-based
    operator on test functions.
    """
    t_rel = t - a
    if t_rel <= 0.0:
        raise SingularTimeError("reconstruction is singular at t = a")
    q = coeffs.q
    total = (coeffs.a_val * t_rel ** (-q) * x_val
             + coeffs.b_val * t_rel ** (1 - q) * xdot_val)
    ps = coeffs.p_values.astype(float)
    return total - _signed_log_sum(coeffs.log_c_mag, ps, q,
                                   math.log(t_rel), w_values)
