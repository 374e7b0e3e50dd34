"""fracopt: fractional optimal control toolkit.

Fractional calculus primitives on uniform grids, a series expansion that
turns Caputo dynamics into an equivalent augmented integer-order system,
a generalized performance index built from fractional integrals of tuning
order, the associated dynamic-programming (HJB-type) equation, and a
forward-backward sweep solver for fixed-final-time problems.
"""

from .cost import (CostTerm, PerformanceIndex, evaluate, running_weight,
                   terminal_index_set, terminal_value)
from .errors import ConfigError, DomainError, SingularTimeError, SweepAbort
from .expansion import (AuxiliaryStates, ExpansionCoeffs, TransformedField,
                        advance_moments, derivative_coeff, memory_correction,
                        moment_coeff, reconstruct_rl_derivative,
                        series_partial_sum, state_coeff)
from .grid import SampledFunction, TimeGrid
from .hjb import (ValueData, aggregate_error, hamiltonian, hjb_residual,
                  minimize_hamiltonian)
from .operators import (caputo_derivative, gamma, rl_derivative,
                        rl_integral_left, rl_integral_right)
from .plant import FractionalPlant
from .problem import HJBProblem
from .sweep import (SweepConfig, SweepState, backward_sweep, forward_sweep,
                    solve, update_control)

__version__ = "0.1.0"

__all__ = [
    "TimeGrid", "SampledFunction",
    "gamma", "rl_integral_left", "rl_integral_right",
    "caputo_derivative", "rl_derivative",
    "series_partial_sum", "state_coeff", "derivative_coeff", "moment_coeff",
    "ExpansionCoeffs", "AuxiliaryStates", "advance_moments",
    "memory_correction", "TransformedField", "reconstruct_rl_derivative",
    "CostTerm", "PerformanceIndex", "terminal_index_set", "terminal_value",
    "running_weight", "evaluate",
    "FractionalPlant", "HJBProblem",
    "ValueData", "hamiltonian", "minimize_hamiltonian", "hjb_residual",
    "aggregate_error",
    "SweepConfig", "SweepState", "forward_sweep", "backward_sweep",
    "update_control", "solve",
    "DomainError", "SingularTimeError", "SweepAbort", "ConfigError",
]
