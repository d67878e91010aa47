import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mxlqr.approx import dense_input_map, dense_system
from mxlqr.maxwell import apply_b, random_state
from mxlqr.propagation import (Propagator, adjoint_input_map, admissibility_ratio,
                               backward_sweep, input_map_gain, pairing_defect, propagate)
from mxlqr.space import ControlTrajectory, TimeGrid, inner_y, norm_y


def test_step_matches_dense_cayley(ops6_lossy):
    p = Propagator(ops6_lossy, TimeGrid(1.0, 10))
    ds = dense_system(ops6_lossy, p.dt)
    y = random_state(ops6_lossy.layout, 0)
    np.testing.assert_allclose(p.step(y), ds.cayley @ y, rtol=1e-10, atol=1e-12)
    g = np.random.default_rng(1).standard_normal(ops6_lossy.n_gamma)
    np.testing.assert_allclose(p.step(y, apply_b(ops6_lossy, g)), ds.cayley @ y + ds.drive @ g,
                               rtol=1e-10, atol=1e-12)


def test_forward_input_map_matches_dense(prop6):
    ops = prop6.ops
    ds = dense_system(ops, prop6.dt)
    lmat = dense_input_map(ds, prop6.nt, 3)
    g = ControlTrajectory(3, np.random.default_rng(2).standard_normal((prop6.nt - 3, ops.n_gamma)))
    y_t = propagate(prop6, "forward", np.zeros(ops.n_state), 3, prop6.nt, g, final_only=True)
    np.testing.assert_allclose(y_t, lmat @ g.values.ravel(), rtol=1e-9, atol=1e-12)


def test_trajectory_shapes(prop6):
    y = random_state(prop6.ops.layout, 1)
    traj = propagate(prop6, "forward", y, 2, 7)
    assert traj.shape == (6, prop6.ops.n_state)
    np.testing.assert_array_equal(traj[0], y)
    back = propagate(prop6, "adjoint", y, 2, 7)
    np.testing.assert_array_equal(back[-1], y)
    with pytest.raises(ValueError):
        propagate(prop6, "forward", y, 5, 5)
    with pytest.raises(ValueError):
        propagate(prop6, "adjoint", y, 0, 3, ControlTrajectory.zeros(prop6.grid, prop6.ops.n_gamma))


def test_adjoint_sweep_nodes(prop6):
    z = random_state(prop6.ops.layout, 4)
    ctrl, z0, nodes = backward_sweep(prop6, z, 0, keep_nodes=True)
    np.testing.assert_allclose(nodes, propagate(prop6, "adjoint", z, 0, prop6.nt))
    np.testing.assert_array_equal(nodes[0], z0)
    assert ctrl.n_slices == prop6.nt


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 15))
def test_input_map_pairing(prop6, seed, k_s):
    rng = np.random.default_rng(seed)
    g = ControlTrajectory(k_s, rng.standard_normal((prop6.nt - k_s, prop6.ops.n_gamma)))
    z = rng.standard_normal(prop6.ops.n_state)
    assert pairing_defect(prop6, g, z, k_s) <= 1e-12


def test_lossless_energy_conserved(prop8):
    y = random_state(prop8.ops.layout, 7)
    traj = propagate(prop8, "forward", y, 0, prop8.nt)
    norms = np.sqrt(np.sum(traj**2 * prop8.ops.ip.y_weights, axis=1))
    assert np.max(np.abs(norms / norms[0] - 1)) <= 1e-12
    # the adjoint group is also isometric: C* C = I
    back = propagate(prop8, "adjoint", traj[-1], 0, prop8.nt)[0]
    assert norm_y(back - y, prop8.ops.ip) <= 1e-11 * norm_y(y, prop8.ops.ip)


def test_lossy_contraction(ops6_lossy):
    p = Propagator(ops6_lossy, TimeGrid(1.0, 32))
    traj = propagate(p, "forward", random_state(ops6_lossy.layout, 3), 0, p.nt)
    norms = np.sqrt(np.sum(traj**2 * ops6_lossy.ip.y_weights, axis=1))
    assert np.all(np.diff(norms) <= 1e-14 * norms[0])
    assert norms[-1] < norms[0]


def test_admissibility_and_gain(prop8):
    r = admissibility_ratio(prop8, n_samples=4, seed=0)
    assert np.isfinite(r["max_ratio"]) and r["max_ratio"] > 0
    assert r["max_ratio"] == pytest.approx(r["ratios"].max())
    assert 0 < input_map_gain(prop8, n_samples=2) < np.inf
    with pytest.raises(ValueError):
        admissibility_ratio(prop8, n_samples=0)


def test_admissibility_equals_adjoint_norm(prop6):
    # ratio is ||L_T^* x||^2 for unit x; compare with the dense adjoint map
    ops = prop6.ops
    ds = dense_system(ops, prop6.dt)
    lmat = dense_input_map(ds, prop6.nt, 0)
    x = np.random.default_rng(0).standard_normal(ops.n_state)
    x /= norm_y(x, ops.ip)
    lstar = adjoint_input_map(prop6, x, 0)
    # (L g, x)_Y = (g, L* x)_U for all g  <=>  L^T M_Y x = (I (x) dt M_U) L* x
    lhs = lmat.T @ (ds.mass_y * x)
    rhs = (prop6.dt * lstar.values @ ds.mass_u.T).ravel()
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-12)
    assert inner_y(x, x, ops.ip) == pytest.approx(1.0)
