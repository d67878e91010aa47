from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp

from mxlqr.approx import dense_system
from mxlqr.lq import LqProblem, riccati_apply, solve_open_loop
from mxlqr.maxwell import boundary_silent, gaussian_pulse, random_state
from mxlqr.propagation import Propagator, propagate
from mxlqr.space import TimeGrid, inner_y, norm_u_traj, norm_y
from mxlqr.zero_sigma import (QHandle, dual_re_residual, openloop_via_q, pq_identity_check,
                              q_apply, q_inverse_apply, q_spectrum)


def _dense_q(ops, nt, k_t, alpha=1.0):
    """Trapezoid quadrature with explicitly assembled matrices."""
    dt = 1.0 / nt
    ds = dense_system(ops, dt)
    m = ds.mass_y
    c = ds.cayley
    c_adj = (c.T * m) / m[:, None]
    b_star = np.linalg.solve(ds.mass_u, ds.b.T * m)
    bb = ds.b @ b_star / alpha
    steps = nt - k_t
    q = np.zeros_like(c)
    cj = np.eye(c.shape[0])
    for j in range(steps + 1):
        w = dt * (0.5 if j in (0, steps) else 1.0)
        q += w * (cj.T * m / m[:, None]) @ bb @ cj
        if j < steps:
            cj = c @ cj
    cm = np.linalg.matrix_power(c, steps)
    return q + np.linalg.matrix_power(c_adj, steps) @ cm


@pytest.fixture(scope="module")
def q6(ops6):
    return QHandle(Propagator(ops6, TimeGrid(1.0, 32)))


@pytest.fixture(scope="module")
def q8(prop8):
    return QHandle(prop8)


@pytest.mark.parametrize("k_t", [0, 11, 31])
def test_q_matches_dense_quadrature(q6, ops6, k_t):
    x = random_state(ops6.layout, k_t)
    expect = _dense_q(ops6, 32, k_t) @ x
    np.testing.assert_allclose(q_apply(q6, k_t, x), expect, atol=1e-9 * np.abs(expect).max())


def test_q_alpha_scaling(ops6):
    q = QHandle(Propagator(ops6, TimeGrid(1.0, 32)), alpha=2.5)
    x = random_state(ops6.layout, 0)
    expect = _dense_q(ops6, 32, 4, alpha=2.5) @ x
    np.testing.assert_allclose(q_apply(q, 4, x), expect, atol=1e-9 * np.abs(expect).max())


def test_q_terminal_and_zero(q8):
    x = random_state(q8.ops.layout, 1)
    np.testing.assert_array_equal(q_apply(q8, q8.nt, x), x)
    np.testing.assert_array_equal(q_inverse_apply(q8, q8.nt, x), x)
    assert np.all(q_apply(q8, 5, np.zeros_like(x)) == 0)


def test_q_inverse_composition(q8):
    x = random_state(q8.ops.layout, 2)
    back = q_apply(q8, 10, q_inverse_apply(q8, 10, x))
    assert norm_y(back - x, q8.ops.ip) <= 1e-8 * norm_y(x, q8.ops.ip)


def test_q_self_adjoint_and_above_identity(q8):
    ip = q8.ops.ip
    rng = np.random.default_rng(3)
    x, y = rng.standard_normal((2, q8.ops.n_state))
    a = inner_y(q_apply(q8, 7, x), y, ip)
    b = inner_y(x, q_apply(q8, 7, y), ip)
    assert abs(a - b) <= 1e-10 * norm_y(x, ip) * norm_y(y, ip)
    assert inner_y(q_apply(q8, 7, x), x, ip) >= inner_y(x, x, ip) - 1e-10


def test_group_term_is_exact(prop8):
    x = random_state(prop8.ops.layout, 4)
    fwd = propagate(prop8, "forward", x, 20, 64, final_only=True)
    back = propagate(prop8, "adjoint", fwd, 20, 64)[0]
    assert norm_y(back - x, prop8.ops.ip) <= 1e-11 * norm_y(x, prop8.ops.ip)


def test_midpoint_quadrature_inverts_discrete_riccati(prob8):
    q = QHandle(prob8.prop, quadrature="midpoint")
    probes = [random_state(prob8.ops.layout, s) for s in range(3)]
    for k in (0, 40):
        assert pq_identity_check(q, prob8, k, probes) <= 1e-8


def test_pq_identity_boundary_silent(prob8):
    # with the midpoint rule only solver tolerances remain
    q = QHandle(prob8.prop, quadrature="midpoint")
    probe = boundary_silent(prob8.ops.layout)
    assert pq_identity_check(q, prob8, 0, [probe]) <= 1e-5


def test_pq_identity_trapezoid(q8, prob8):
    probes = [random_state(prob8.ops.layout, s) for s in range(2)]
    assert pq_identity_check(q8, prob8, prob8.nt, probes) == 0.0
    assert pq_identity_check(q8, prob8, 0, probes) <= 5e-3


def test_openloop_via_q(q8, prob8, y0_8):
    ip, grid = prob8.ops.ip, prob8.prop.grid
    ref = solve_open_loop(prob8, y0_8)
    via = openloop_via_q(q8, y0_8, node_stride=16)
    assert via["nodes"] == [0, 16, 32, 48, 64]
    rel = norm_u_traj(via["g_hat"] - ref.g_hat, ip, grid) / norm_u_traj(ref.g_hat, ip, grid)
    assert rel <= 5e-3
    # y_hat(0) = Q(0) Q(0)^{-1} y0
    assert norm_y(via["y_hat"][0] - y0_8, ip) <= 1e-8 * norm_y(y0_8, ip)
    zero = openloop_via_q(q8, np.zeros_like(y0_8), node_stride=64)
    assert np.all(zero["g_hat"].values == 0) and np.all(zero["y_hat"] == 0)


def test_openloop_via_q_midpoint_exact(prob8, y0_8):
    q = QHandle(prob8.prop, quadrature="midpoint")
    ref = solve_open_loop(prob8, y0_8)
    via = openloop_via_q(q, y0_8, node_stride=64)
    ip, grid = prob8.ops.ip, prob8.prop.grid
    assert norm_u_traj(via["g_hat"] - ref.g_hat, ip, grid) <= 1e-8 * norm_u_traj(ref.g_hat, ip, grid)
    assert norm_y(via["y_hat"][-1] - ref.terminal, ip) <= 1e-8 * norm_y(ref.terminal, ip)


def test_dual_re_without_control(ops8):
    # B = 0: Q(t) = I and both sides vanish
    ops0 = replace(ops8, b_mat=sp.csr_matrix(ops8.b_mat.shape))
    q = QHandle(Propagator(ops0, TimeGrid(1.0, 16)))
    x, y = random_state(ops8.layout, 0), random_state(ops8.layout, 1)
    np.testing.assert_allclose(q_apply(q, 3, x), x, atol=1e-12)
    assert dual_re_residual(q, 8, x, y) <= 1e-12


def test_dual_re_second_order(ops8):
    x = gaussian_pulse(ops8.layout, width=0.2)
    y = gaussian_pulse(ops8.layout, (0.35, 0.6), 0.2, fields="ez hx hy")
    res = [dual_re_residual(QHandle(Propagator(ops8, TimeGrid(1.0, nt))), nt // 2, x, y)
           for nt in (32, 64)]
    assert 3.0 <= res[0] / res[1] <= 5.0
    with pytest.raises(ValueError):
        dual_re_residual(QHandle(Propagator(ops8, TimeGrid(1.0, 8))), 8, x, y)


def test_coercivity_cross_check(q8, prob8):
    lam_q = q_spectrum(q8, 0, n_iter=30)
    assert lam_q[0] >= 1 - 1e-9
    x = random_state(prob8.ops.layout, 0)
    ip = prob8.ops.ip
    # Rayleigh quotient of P is at least 1/lambda_max(Q) up to quadrature error
    rq = inner_y(riccati_apply(prob8, 0, x), x, ip) / inner_y(x, x, ip)
    assert rq >= 1 / lam_q[-1] - 1e-3


def test_rejects_lossy_and_bad_args(ops6_lossy, prop8):
    with pytest.raises(ValueError):
        QHandle(Propagator(ops6_lossy, TimeGrid(1.0, 8)))
    with pytest.raises(ValueError):
        QHandle(prop8, alpha=0.0)
    with pytest.raises(ValueError):
        QHandle(prop8, quadrature="simpson")
