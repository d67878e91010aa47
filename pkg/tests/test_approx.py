import json
import math

import numpy as np
import pytest

from mxlqr.approx import (convergence_study, dense_dre_oracle, dense_openloop_oracle,
                          dense_system, gn_apply, is_nonincreasing, solve_problem_n)
from mxlqr.lq import LqProblem, TerminalWeight, solve_open_loop
from mxlqr.maxwell import apply_a, gaussian_pulse, random_state
from mxlqr.propagation import Propagator
from mxlqr.space import TimeGrid, norm_u_traj, norm_y


def test_gn_matches_dense(ops6_lossy):
    ds = dense_system(ops6_lossy, 0.1)
    y = random_state(ops6_lossy.layout, 0)
    n = ds.a.shape[0]
    for k in (1, 5):
        expect = k * np.linalg.solve(k * np.eye(n) - ds.a, y)
        np.testing.assert_allclose(gn_apply(ops6_lossy, k, y), expect, rtol=1e-9, atol=1e-12)
    with pytest.raises(ValueError):
        gn_apply(ops6_lossy, 0, y)


def test_gn_is_contraction_and_converges(ops8):
    # smooth probe: ||G_n* G_n z - z|| decreases in n
    ip = ops8.ip
    z = gaussian_pulse(ops8.layout, fields="ez hx hy")
    errs = []
    for n in (1, 2, 4, 8, 16, 32, 64):
        gz = gn_apply(ops8, n, z)
        assert norm_y(gz, ip) <= norm_y(z, ip) * (1 + 1e-12)
        errs.append(norm_y(gn_apply(ops8, n, gz, "adjoint") - z, ip))
    assert is_nonincreasing(errs, start=0)
    assert errs[-1] < 1e-2 * norm_y(z, ip)


def test_gn_commutes_with_generator(ops6):
    y = random_state(ops6.layout, 1)
    lhs = gn_apply(ops6, 3, apply_a(ops6, "forward", y))
    rhs = apply_a(ops6, "forward", gn_apply(ops6, 3, y))
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_solve_problem_n_matches_weight(prob6, y0_6):
    a = solve_problem_n(prob6, 4, y0_6)
    b = solve_open_loop(LqProblem(prob6.prop, terminal_weight=TerminalWeight.resolvent_smoothed(4)),
                        y0_6)
    np.testing.assert_allclose(a.g_hat.values, b.g_hat.values)


def test_convergence_table(prob6, y0_6):
    probes = [gaussian_pulse(prob6.ops.layout)]
    tab = convergence_study(prob6, y0_6, [1, 4, 16, math.inf], probes=probes)
    assert tab.control_error[-1] == 0.0 and tab.cost_error[-1] == 0.0
    assert list(tab.riccati_error) == ["P_err_k0_z0"]
    assert is_nonincreasing(tab.control_error, start=0)
    csv_text = tab.to_csv()
    lines = csv_text.split("\n")
    assert lines[0] == "n,g_err,y_err,J_err,P_err_k0_z0" and csv_text.endswith("\n")
    assert len(lines) == 4 + 2
    payload = json.loads(tab.to_json())
    assert payload["n"][:3] == [1, 4, 16] and len(payload["columns"]["g_err"]) == 4
    with pytest.raises(ValueError):
        convergence_study(prob6, y0_6, [4, 2])


def test_convergence_study_threads_deterministic(prob6, y0_6):
    a = convergence_study(prob6, y0_6, [1, 2, 8])
    b = convergence_study(prob6, y0_6, [1, 2, 8], workers=3)
    assert a.to_csv() == b.to_csv()


def test_is_nonincreasing():
    assert is_nonincreasing([5, 3, 3, 1])
    assert is_nonincreasing([1, 5, 3], start=1)
    assert not is_nonincreasing([5, 3, 4])


def test_dense_guards(prob8, y0_8):
    with pytest.raises(ValueError):
        dense_openloop_oracle(prob8, y0_8, max_unknowns=100)
    with pytest.raises(ValueError):
        dense_dre_oracle(prob8, y0_8, max_dim=10)


def test_dense_openloop_zero(prob6):
    g, cost, _ = dense_openloop_oracle(prob6, np.zeros(prob6.ops.n_state))
    assert cost == 0.0 and np.all(g.values == 0)


def test_dre_closed_loop_tracks_open_loop(ops6, y0_6):
    # the feedback-driven RK4 trajectory and the open-loop optimum agree to O(dt^2)
    errs = []
    for nt in (32, 64):
        prob = LqProblem(Propagator(ops6, TimeGrid(1.0, nt)))
        sol = solve_open_loop(prob, y0_6)
        dre = dense_dre_oracle(prob, y0_6)
        errs.append(norm_u_traj(dre["g"] - sol.g_hat, ops6.ip, prob.prop.grid)
                    / norm_u_traj(sol.g_hat, ops6.ip, prob.prop.grid))
        p = dre["p_nodes"]
        w = ops6.ip.y_weights
        sym = (w[:, None] * p[0])
        np.testing.assert_allclose(sym, sym.T, atol=1e-12)
    assert errs[1] <= 1e-2 and errs[0] / errs[1] >= 3.0


def test_dre_alpha_scaling(ops6, y0_6):
    # larger alpha makes control dearer: optimal cost grows
    costs = [dense_dre_oracle(LqProblem(Propagator(ops6, TimeGrid(1.0, 16)), alpha=a), y0_6)["cost"]
             for a in (0.5, 1.0, 2.0)]
    assert costs[0] < costs[1] < costs[2]
