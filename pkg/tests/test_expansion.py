import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fracopt as fo
from fracopt import (AuxiliaryStates, DomainError, ExpansionCoeffs,
                     SampledFunction, SingularTimeError, TimeGrid,
                     TransformedField, advance_moments, caputo_derivative,
                     derivative_coeff, gamma, memory_correction, moment_coeff,
                     reconstruct_rl_derivative, rl_derivative,
                     series_partial_sum, state_coeff)

mp.mp.dps = 40


def bracket_closed_form(q, n):
    """Independent oracle: sum_{p=2}^{N} Gamma(p-1+q)/(Gamma(q)(p-1)!)
    equals Gamma(q+N)/(Gamma(q+1) Gamma(N)) - 1 (hockey-stick identity)."""
    return float(mp.gamma(q + n) / (mp.gamma(q + 1) * mp.gamma(n)) - 1)


# ------------------------------------------------------------- series

def test_partial_sum_small_counts_exact():
    # direct term-by-term oracle at high precision
    for q in (0.2, 0.5, 0.9):
        for n in (2, 3, 7, 25):
            direct = float(sum(mp.gamma(p - 1 + q) / (mp.gamma(q)
                                                      * mp.factorial(p - 1))
                               for p in range(2, n + 1)))
            assert series_partial_sum(q, n) == pytest.approx(direct,
                                                             rel=1e-13)


def test_partial_sum_matches_closed_form_large_counts():
    # the term recurrence accumulates ~N*eps rounding along the cumprod
    # chain; measured drift is ~8e-12 at N=1e4 and ~7e-10 at N=1e6
    for q in (0.2, 0.7):
        assert series_partial_sum(q, 10 ** 4) == pytest.approx(
            bracket_closed_form(q, 10 ** 4), rel=1e-10)
        assert series_partial_sum(q, 10 ** 6) == pytest.approx(
            bracket_closed_form(q, 10 ** 6), rel=1e-8)


def test_state_coeff_hand_value():
    # (1 + Gamma(1.5)/(Gamma(0.5) 1!)) / Gamma(0.5) = 1.5 / sqrt(pi)
    assert state_coeff(0.5, 2) == pytest.approx(0.8462843753, rel=1e-9)


def test_state_coeff_monotone_in_truncation():
    assert state_coeff(0.5, 10 ** 4) > state_coeff(0.5, 10 ** 2)


def test_state_coeff_frozen_regression_values():
    # recorded once from the summation implementation
    assert state_coeff(0.2, 10 ** 7) == pytest.approx(23.498428200224684,
                                                      rel=1e-12)
    assert state_coeff(0.7, 10 ** 7) == pytest.approx(29221.98593233596,
                                                      rel=1e-12)


def test_derivative_coeff_hand_value():
    # p=1 term equals 1: (1 + 1) / Gamma(1.5)
    assert derivative_coeff(0.5, 1) == pytest.approx(2.2567583342, rel=1e-9)


def test_derivative_coeff_frozen_regression_values():
    assert derivative_coeff(0.2, 10 ** 7) == pytest.approx(
        30.446706524311683, rel=1e-12)
    assert derivative_coeff(0.7, 10 ** 7) == pytest.approx(
        97407.73401696174, rel=1e-12)


def test_full_truncation_frozen_regression_values():
    # the full-fidelity tables used by the bundled example, recorded once
    # from the summation implementation (already cached by the acceptance
    # run when the whole suite executes)
    assert state_coeff(0.2, 10 ** 9) == pytest.approx(59.02538338075875,
                                                      rel=1e-12)
    assert state_coeff(0.7, 10 ** 9) == pytest.approx(734023.1062384361,
                                                      rel=1e-12)
    assert derivative_coeff(0.2, 10 ** 9) == pytest.approx(
        74.85540049997925, rel=1e-12)
    assert derivative_coeff(0.7, 10 ** 9) == pytest.approx(
        2446744.801703962, rel=1e-12)


def test_derivative_coeff_dominates_matching_state_sum():
    # B's series holds one extra positive term over A's at matching counts
    for q in (0.25, 0.6):
        for n in (5, 50):
            lhs = derivative_coeff(q, n)
            rhs = state_coeff(q, n + 1) * gamma(1 - q) / gamma(2 - q)
            assert lhs > rhs


def test_convergent_derivative_coeff_matches_direct_sum():
    # closed form vs direct summation of the Gamma(p-1+q)/(Gamma(q-1) p!)
    # kernel, the variant whose series actually converges
    for q, n in ((0.3, 7), (0.8, 12), (0.5, 30)):
        direct = float(
            (1 + sum(mp.gamma(p - 1 + q) / (mp.gamma(q - 1)
                                            * mp.factorial(p))
                     for p in range(1, n + 1))) / mp.gamma(2 - q))
        assert derivative_coeff(q, n, "convergent") == pytest.approx(
            direct, rel=1e-12)


def test_convergent_derivative_coeff_integer_limit():
    # the convergent variant approaches 1 as q -> 1 for any truncation
    for n in (2, 10, 150):
        assert derivative_coeff(0.999, n, "convergent") == pytest.approx(
            1.0, abs=6e-3)


def test_moment_coeff_hand_value():
    # C(0.5, 2) = 1/Gamma(-0.5) = -1/(2 sqrt(pi))
    assert moment_coeff(0.5, 2) == pytest.approx(-0.2820947918, rel=1e-9)


def test_moment_coeff_sign_and_ratio():
    for p in range(2, 40):
        assert moment_coeff(0.5, p) < 0
        ratio = moment_coeff(0.5, p + 1) / moment_coeff(0.5, p)
        assert ratio == pytest.approx((p - 0.5) / p, rel=1e-12)
        assert abs(ratio) < 1


def test_sign_structure_across_orders():
    for q in (0.1, 0.3, 0.5, 0.7, 0.9):
        assert state_coeff(q, 20) > 0
        assert derivative_coeff(q, 20) > 0
        assert derivative_coeff(q, 20, "convergent") > 0
        assert all(moment_coeff(q, p) < 0 for p in (2, 5, 17))


def test_coeff_build_validates():
    with pytest.raises(DomainError):
        ExpansionCoeffs.build(1.2, 10, 10, 10)
    with pytest.raises(DomainError):
        ExpansionCoeffs.build(0.5, 10, 10, 1)
    with pytest.raises(DomainError):
        state_coeff(0.5, 1)


# ------------------------------------------------------- moment states

def test_moments_p2_constant_state():
    grid = TimeGrid(0.0, 1.0, 50)
    states = AuxiliaryStates(grid, 4, 1)
    for k in range(grid.n_steps):
        advance_moments(states, np.array([1.0]), k)
    # W_2 solves W' = -x, so W_2(t) = -(t - a) exactly
    for k in (10, 25, 50):
        assert states.values[k, 0, 0] == pytest.approx(-grid.node(k),
                                                       rel=1e-12)


def test_moments_p3_constant_state():
    grid = TimeGrid(0.0, 1.0, 200)
    states = AuxiliaryStates(grid, 3, 1)
    for k in range(grid.n_steps):
        advance_moments(states, np.array([1.0]), k)
    # W_3' = -2(t-a): the trapezoidal step integrates linear rates exactly
    for k in (40, 120, 200):
        assert states.values[k, 1, 0] == pytest.approx(-grid.node(k) ** 2,
                                                       rel=1e-12)


def test_moments_zero_state_stay_zero():
    grid = TimeGrid(0.0, 1.0, 20)
    states = AuxiliaryStates(grid, 10, 2)
    for k in range(grid.n_steps):
        advance_moments(states, np.zeros(2), k)
    assert np.all(states.values == 0.0)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3),
       seed=st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_moment_advance_is_linear_in_state(a, b, seed):
    rng = np.random.default_rng(seed)
    grid = TimeGrid(0.0, 1.0, 30)
    xs = rng.uniform(-1, 1, (grid.n_nodes, 1))
    ys = rng.uniform(-1, 1, (grid.n_nodes, 1))

    def run(traj):
        st_ = AuxiliaryStates(grid, 6, 1)
        for k in range(grid.n_steps):
            advance_moments(st_, traj[k], k)
        return st_.values.copy()

    combo = run(a * xs + b * ys)
    split = a * run(xs) + b * run(ys)
    assert np.allclose(combo, split, rtol=1e-12, atol=1e-12)


# ---------------------------------------------------- memory correction

def test_correction_zero_state_zero_initial():
    coeffs = ExpansionCoeffs.build(0.4, 50, 50, 6)
    w = np.zeros(5)
    assert memory_correction(0.5, 0.0, coeffs, w, 0.0, 0.0) == 0.0


def test_correction_constant_state_hand_formula():
    # x identically c with p_max = 2: W_2(t) = -c (t-a)
    c, q, t = 2.0, 0.3, 0.5
    coeffs = ExpansionCoeffs.build(q, 10, 10, 2)
    w = np.array([-c * t])
    got = memory_correction(t, c, coeffs, w, c, 0.0)
    expected = (-c / gamma(1 - q) * t ** (-q)
                + coeffs.a_val * t ** (-q) * c
                - moment_coeff(q, 2) * t ** (-1 - q) * (-c * t))
    assert got == pytest.approx(expected, rel=1e-12)


def test_correction_singular_at_anchor():
    coeffs = ExpansionCoeffs.build(0.4, 10, 10, 4)
    with pytest.raises(SingularTimeError):
        memory_correction(0.0, 1.0, coeffs, np.zeros(3), 1.0, 0.0)


def test_correction_caputo_limit_with_growing_truncation():
    # Caputo(x) ~ correction + B (t-a)^(1-q) x'(t) under the convergent
    # series as every truncation grows together; x(t) = t^2
    q, t = 0.5, 0.5
    grid = TimeGrid(0.0, 1.0, 1000)
    f = SampledFunction.from_callable(grid, lambda s: s ** 2)
    node = 500
    target = caputo_derivative(f, q, node)
    errs = []
    for n in (8, 16, 32):
        coeffs = ExpansionCoeffs.build(q, n, n, n, b_series="convergent")
        ps = np.arange(2, n + 1)
        w = (1.0 - ps) * t ** (ps + 1.0) / (ps + 1.0)   # exact moments of t^2
        approx = (memory_correction(t, t ** 2, coeffs, w, 0.0, 0.0)
                  + coeffs.b_val * t ** (1 - q) * 2 * t)
        errs.append(abs(approx - target))
    assert errs[0] > errs[1] > errs[2]


# ---------------------------------------------------- transformed field

def probe_plant():
    return fo.FractionalPlant(
        orders=(0.2, 0.7),
        rhs=lambda t, x, u: np.array([x[1] + u[0], -x[0]]),
        x0=np.array([1.0, 0.5]),
        n_controls=1)


def test_field_zero_everything_is_zero():
    plant = fo.FractionalPlant(
        orders=(0.5,), rhs=lambda t, x, u: np.zeros(1),
        x0=np.zeros(1), n_controls=1)
    coeffs = (ExpansionCoeffs.build(0.5, 20, 20, 10),)
    field = TransformedField(plant, coeffs)
    out = field(0.3, np.zeros(1), np.zeros((9, 1)), np.zeros(1))
    assert np.all(out == 0.0)


def test_field_probe_frozen_value():
    # regression constant recorded from the frozen coefficient tables
    plant = probe_plant()
    coeffs = tuple(ExpansionCoeffs.build(q, 10 ** 7, 10 ** 7, 150)
                   for q in plant.orders)
    field = TransformedField(plant, coeffs)
    out = field(0.5, np.array([1.0, 0.5]), np.zeros((149, 2)),
                np.array([0.0]))
    assert out[0] == pytest.approx(-1.458562743502119, rel=1e-12)
    assert out[1] == pytest.approx(-0.30000577571087034, rel=1e-12)


def test_field_integer_order_limit_recovers_plant_rhs():
    # q -> 1 with the convergent series and a small consistent truncation:
    # the transformed field approaches the original right-hand side
    plant = fo.FractionalPlant(
        orders=(0.999, 0.999),
        rhs=lambda t, x, u: np.array([x[1] + u[0], -x[0]]),
        x0=np.array([1.0, 0.5]),
        n_controls=1)
    n = 8
    coeffs = tuple(ExpansionCoeffs.build(q, n, n, n, b_series="convergent")
                   for q in plant.orders)
    field = TransformedField(plant, coeffs)
    grid = TimeGrid(0.0, 1.0, 100)
    states = AuxiliaryStates(grid, n, 2)
    x = np.empty((grid.n_nodes, 2))
    x[0] = plant.x0
    u = np.array([0.3])
    x[1] = x[0] + grid.dt * plant.rhs(0.0, x[0], u)
    advance_moments(states, x[0], 0)
    for k in range(1, grid.n_steps):
        x[k + 1] = x[k] + grid.dt * field(grid.node(k), x[k],
                                          states.at_node(k), u)
        advance_moments(states, x[k], k)
    for k in (20, 50, 80):
        ft = field(grid.node(k), x[k], states.at_node(k), u)
        f0 = plant.rhs(grid.node(k), x[k], u)
        assert np.max(np.abs(ft - f0)) <= 0.05 * max(1.0, np.max(np.abs(f0)))


def test_field_singular_at_anchor():
    plant = probe_plant()
    coeffs = tuple(ExpansionCoeffs.build(q, 10, 10, 5)
                   for q in plant.orders)
    field = TransformedField(plant, coeffs)
    with pytest.raises(SingularTimeError):
        field(0.0, plant.x0, np.zeros((4, 2)), np.array([0.0]))


# ------------------------------------------------------- reconstruction

def exact_moments(ps, t, m):
    """W_p(t) for x(s) = s^m, integrated in closed form."""
    return (1.0 - ps) * t ** (m + ps - 1.0) / (m + ps - 1.0)


def reconstruction_errors(q, levels, t, m, series):
    true = gamma(m + 1) / gamma(m + 1 - q) * t ** (m - q)
    errs = []
    for n in levels:
        coeffs = ExpansionCoeffs.build(q, n, n, n, b_series=series)
        ps = coeffs.p_values.astype(float)
        xd = m * t ** (m - 1)
        got = reconstruct_rl_derivative(coeffs, t, 0.0, t ** m, xd,
                                        exact_moments(ps, t, m))
        errs.append(abs(got - true))
    return errs


def test_reconstruction_converges_for_linear_and_quadratic():
    for m in (1, 2):
        for q in (0.2, 0.5, 0.7):
            errs = reconstruction_errors(q, (8, 16, 32), 0.5, m,
                                         "convergent")
            # linear inputs reconstruct to rounding at every level; the
            # quadratic case decreases strictly
            assert all(e < 1e-12 for e in errs) \
                or errs[0] > errs[1] > errs[2]
            assert errs[2] < 5e-3


def test_reconstruction_matches_grid_operator():
    # cross-check against the quadrature-based derivative at grid nodes
    q = 0.5
    grid = TimeGrid(0.0, 1.0, 1000)
    f = SampledFunction.from_callable(grid, lambda s: s ** 2)
    coeffs = ExpansionCoeffs.build(q, 64, 64, 64, b_series="convergent")
    ps = coeffs.p_values.astype(float)
    for node in (300, 500, 800):
        t = grid.node(node)
        got = reconstruct_rl_derivative(coeffs, t, 0.0, t ** 2, 2 * t,
                                        exact_moments(ps, t, 2))
        ref = rl_derivative(f, q, node)
        assert got == pytest.approx(ref, rel=2e-3)


def test_reconstruction_diverges_with_partial_sum_series():
    # characterization of the divergent convention: the same refinement
    # schedule drives the reconstruction away from the true derivative
    errs = reconstruction_errors(0.5, (8, 16, 32), 0.5, 2, "divergent")
    assert errs[0] < errs[1] < errs[2]


def test_moment_term_tail_shrinks_with_cutoff():
    # adding moment terms shrinks the neglected tail for t - a <= 1
    q, t = 0.4, 0.8
    coeffs = ExpansionCoeffs.build(q, 200, 200, 200)
    ps = coeffs.p_values.astype(float)
    w = exact_moments(ps, t, 1)
    terms = np.abs(coeffs.c_vals * t ** (1.0 - ps - q) * w)
    tails = np.cumsum(terms[::-1])[::-1]
    assert np.all(np.diff(tails[:100]) < 0)
