import numpy as np
import pytest

import fracopt as fo
from fracopt.config import parse_problem

EXAMPLE_FILE = "problems/example.yaml"


def two_state_problem():
    """The bundled two-state problem, built programmatically."""
    plant = fo.FractionalPlant(
        orders=(0.2, 0.7),
        rhs=lambda t, x, u: np.array([x[1] + u[0], -x[0]]),
        x0=np.array([1.0, 0.5]),
        n_controls=1,
    )
    index = fo.PerformanceIndex((
        fo.CostTerm(v=0.3, running=lambda t, x, u: x[0] ** 2 + x[1] ** 2),
        fo.CostTerm(v=0.4, running=lambda t, x, u: x[0] ** 2 + u[0] ** 2),
    ))
    return fo.HJBProblem(plant=plant, index=index, tf=1.0,
                         u_lower=np.array([-10.0]),
                         u_upper=np.array([10.0]),
                         quadratic_control=True)


def two_state_config(**kw):
    base = dict(dt=0.01, u_init=5.0, n_a=10 ** 9, n_b=10 ** 9, p_max=150,
                max_iters=200, error_tol=1e-8, relaxation=0.5,
                stepper="euler", b_series="divergent")
    base.update(kw)
    return fo.SweepConfig(**base)


@pytest.fixture(scope="session")
def example_parsed():
    return parse_problem(EXAMPLE_FILE)


@pytest.fixture(scope="session")
def example_state(example_parsed):
    """Converged solve of the bundled example at full truncation.

    Session-scoped: the 1e9-term coefficient summation dominates the
    cost and is shared by every test that needs the converged run.
    Returns (state, wall_seconds).
    """
    import time
    start = time.perf_counter()
    state = fo.solve(example_parsed.problem, example_parsed.config)
    return state, time.perf_counter() - start


@pytest.fixture(scope="session")
def cheap_state():
    """Converged solve at light truncation for structural tests."""
    cfg = two_state_config(n_a=10 ** 5, n_b=10 ** 5, p_max=40)
    return fo.solve(two_state_problem(), cfg)
