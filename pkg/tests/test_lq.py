from dataclasses import replace

import numpy as np
import pytest

from mxlqr.approx import dense_dre_oracle, dense_openloop_oracle
from mxlqr.lq import (LqProblem, TerminalWeight, coercivity_estimate, evaluate_cost,
                      feedback_residual, gram_apply, optimal_state, riccati_apply,
                      riccati_symmetry_defect, solve_open_loop, transition_check)
from mxlqr.maxwell import gaussian_pulse, random_state
from mxlqr.propagation import Propagator
from mxlqr.space import (CGConvergenceError, ControlTrajectory, TimeGrid, inner_u_traj,
                         norm_u_traj, norm_y)


def _rel_u(a, b, prob):
    ip, grid = prob.ops.ip, prob.prop.grid
    return norm_u_traj(a - b, ip, grid) / norm_u_traj(b, ip, grid)


# dense oracles first


def test_open_loop_matches_dense_oracle(prob6, y0_6):
    sol = solve_open_loop(prob6, y0_6)
    g_dense, cost_dense, _ = dense_openloop_oracle(prob6, y0_6)
    assert _rel_u(sol.g_hat, g_dense, prob6) <= 1e-7
    assert cost_dense <= sol.cost + 1e-10
    assert abs(cost_dense - sol.cost) <= 1e-9


@pytest.mark.parametrize("alpha, k_s", [(0.3, 0), (2.0, 5)])
def test_open_loop_dense_oracle_variants(prop6, ops6, alpha, k_s):
    prob = LqProblem(prop6, alpha=alpha, k_s=k_s)
    y0 = random_state(ops6.layout, 9)
    sol = solve_open_loop(prob, y0)
    g_dense, cost_dense, _ = dense_openloop_oracle(prob, y0)
    assert _rel_u(sol.g_hat, g_dense, prob) <= 1e-7
    assert abs(cost_dense - sol.cost) <= 1e-9 * max(1.0, cost_dense)


def test_open_loop_resolvent_weight_vs_oracle(prop6, y0_6):
    prob = LqProblem(prop6, terminal_weight=TerminalWeight.resolvent_smoothed(4))
    sol = solve_open_loop(prob, y0_6)
    g_dense, _, _ = dense_openloop_oracle(prob, y0_6)
    assert _rel_u(sol.g_hat, g_dense, prob) <= 1e-7


def test_riccati_converges_to_dense_dre(ops6, y0_6):
    # backward RK4 on the matrix equation and the CN scheme differ by O(dt^2)
    errs = []
    for nt in (32, 64):
        prob = LqProblem(Propagator(ops6, TimeGrid(1.0, nt)))
        dre = dense_dre_oracle(prob, y0_6)
        p_y0 = riccati_apply(prob, 0, y0_6)
        errs.append(norm_y(p_y0 - dre["p0"] @ y0_6, ops6.ip) / norm_y(p_y0, ops6.ip))
        np.testing.assert_allclose(dre["p_nodes"][-1], np.eye(ops6.n_state), atol=1e-14)
    assert errs[1] <= 1e-2
    assert errs[0] / errs[1] >= 3.5


def test_zero_initial_state(prob6):
    sol = solve_open_loop(prob6, np.zeros(prob6.ops.n_state))
    assert sol.cost == 0.0 and np.all(sol.g_hat.values == 0)


def test_gram_operator_coercive_and_symmetric(prob6):
    rng = np.random.default_rng(0)
    shape = (prob6.nt, prob6.ops.n_gamma)
    ip, grid = prob6.ops.ip, prob6.prop.grid
    g, h = (ControlTrajectory(0, rng.standard_normal(shape)) for _ in range(2))
    lg, lh = gram_apply(prob6, g), gram_apply(prob6, h)
    a, b = inner_u_traj(lg, h, ip, grid), inner_u_traj(g, lh, ip, grid)
    assert abs(a - b) <= 1e-12 * abs(a)
    assert inner_u_traj(lg, g, ip, grid) >= prob6.alpha * inner_u_traj(g, g, ip, grid)


def test_cost_expansion_identity(prob6, y0_6):
    # J(g) - J(g_hat) = (Lambda (g - g_hat), g - g_hat)
    sol = solve_open_loop(prob6, y0_6)
    rng = np.random.default_rng(1)
    ip, grid = prob6.ops.ip, prob6.prop.grid
    for _ in range(3):
        d = ControlTrajectory(0, rng.standard_normal(sol.g_hat.values.shape))
        gap = evaluate_cost(prob6, sol.g_hat + d, y0_6) - sol.cost
        assert gap == pytest.approx(inner_u_traj(gram_apply(prob6, d), d, ip, grid), rel=1e-8)


def test_riccati_terminal_and_symmetry(prob8, y0_8):
    x = random_state(prob8.ops.layout, 2)
    np.testing.assert_array_equal(riccati_apply(prob8, prob8.nt, x), x)
    assert riccati_symmetry_defect(prob8, 10, x, y0_8) <= 1e-9


def test_cost_identity(prob8, y0_8):
    for k in (0, 32):
        sol = solve_open_loop(prob8.at(k), y0_8)
        p_form = np.dot(riccati_apply(prob8, k, y0_8) * prob8.ops.ip.y_weights, y0_8)
        assert abs(p_form - sol.cost) <= 1e-8 * sol.cost


def test_riccati_operator_bounded_by_identity(prob8):
    # 0 < P(t) <= G*G = I
    x = random_state(prob8.ops.layout, 5)
    px = riccati_apply(prob8, 0, x)
    w = prob8.ops.ip.y_weights
    assert 0 < np.dot(px * w, x) <= np.dot(x * w, x)


def test_feedback_residual(prob8, y0_8):
    res = feedback_residual(prob8, y0_8, [8, 40])
    assert max(res["cheap"].values()) <= 1e-8
    assert max(res["independent"].values()) <= 1e-6
    with pytest.raises(ValueError):
        feedback_residual(prob8, y0_8, [64])


def test_transition(prob8, y0_8):
    r = transition_check(prob8, y0_8, 20, 45)
    assert r["state_error"] <= 1e-7 and r["control_error"] <= 1e-7
    np.testing.assert_allclose(optimal_state(prob8, 0, y0_8), y0_8)
    with pytest.raises(ValueError):
        transition_check(prob8, y0_8, 30, 20)


def test_lossy_problem(ops6_lossy):
    prob = LqProblem(Propagator(ops6_lossy, TimeGrid(1.0, 16)))
    y0 = gaussian_pulse(ops6_lossy.layout)
    sol = solve_open_loop(prob, y0)
    g_dense, cost_dense, _ = dense_openloop_oracle(prob, y0)
    assert _rel_u(sol.g_hat, g_dense, prob) <= 1e-7
    res = feedback_residual(prob, y0, [3, 12])
    assert max(res["independent"].values()) <= 1e-6


def test_coercivity_estimate_small(prob6):
    c = coercivity_estimate(prob6, n_iter=20)
    assert 0 < c["lambda_min"] <= c["lambda_max"] <= 1 + 1e-9


def test_problem_validation(prop6):
    with pytest.raises(ValueError):
        LqProblem(prop6, alpha=0.0)
    with pytest.raises(ValueError):
        LqProblem(prop6, k_s=16)
    with pytest.raises(ValueError):
        TerminalWeight("resolvent")
    with pytest.raises(ValueError):
        TerminalWeight("other")
    prob = LqProblem(prop6)
    with pytest.raises(ValueError):
        evaluate_cost(prob, ControlTrajectory(1, np.zeros((15, prop6.ops.n_gamma))),
                      np.zeros(prop6.ops.n_state))


def test_cg_cap_surfaces(prob6, y0_6):
    with pytest.raises(CGConvergenceError):
        solve_open_loop(replace(prob6, cg_tol=1e-14, cg_max_iter=2), y0_6)
