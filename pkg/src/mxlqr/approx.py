"""Resolvent-smoothed terminal weights and dense brute-force oracles.

``G_n = n (nI - A)^{-1}`` replaces the identity terminal weight; the
problems with ``G_n`` have bounded Riccati gains and their solutions
converge to the ones with ``G = I`` as ``n`` grows. The dense oracles in
this module rebuild every operator column by column and are only meant for
small grids.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .lq import (LqProblem, OpenLoopSolution, TerminalWeight, riccati_apply,
                 solve_open_loop)
from .maxwell import MaxwellOperators, apply_a, apply_b, resolvent_solve
from .space import ControlTrajectory, norm_u_traj, norm_y

__all__ = [
    "gn_apply",
    "solve_problem_n",
    "ConvergenceTable",
    "convergence_study",
    "is_nonincreasing",
    "DenseSystem",
    "dense_system",
    "dense_input_map",
    "dense_openloop_oracle",
    "dense_dre_oracle",
]


def gn_apply(ops: MaxwellOperators, n: int, y, direction: str = "forward") -> np.ndarray:
    """``n R(n, A) y`` (or ``n R(n, A*) y`` for ``direction='adjoint'``)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return n * resolvent_solve(ops, float(n), y, direction)


def solve_problem_n(prob_base: LqProblem, n: int, y0) -> OpenLoopSolution:
    """Open-loop solution of the problem with terminal weight ``G_n``."""
    return solve_open_loop(_with_gn(prob_base, n), y0)


def _with_gn(prob: LqProblem, n) -> LqProblem:
    if n is None or n == math.inf:
        weight = TerminalWeight("identity", scale=prob.terminal_weight.scale)
    else:
        weight = TerminalWeight.resolvent_smoothed(int(n), prob.terminal_weight.scale)
    return replace(prob, terminal_weight=weight)


def is_nonincreasing(values, start: int = 1, rtol: float = 1e-12) -> bool:
    """Monotone non-increase of ``values[start:]`` up to roundoff."""
    v = np.asarray(values, dtype=float)[start:]
    return bool(np.all(np.diff(v) <= rtol * np.maximum(np.abs(v[:-1]), 1e-300)))


@dataclass
class ConvergenceTable:
    """Errors of the ``G_n`` problems against the ``G = I`` problem, one row per ``n``."""

    n_list: list
    control_error: list = field(default_factory=list)
    state_error: list = field(default_factory=list)
    cost_error: list = field(default_factory=list)
    riccati_error: dict = field(default_factory=dict)  # column name -> list
    reference: dict = field(default_factory=dict)

    @property
    def columns(self) -> dict:
        cols = {"g_err": self.control_error, "y_err": self.state_error, "J_err": self.cost_error}
        cols.update(self.riccati_error)
        return cols

    def rows(self):
        cols = self.columns
        for i, n in enumerate(self.n_list):
            yield {"n": n, **{k: v[i] for k, v in cols.items()}}

    def to_csv(self) -> str:
        buf = io.StringIO()
        fieldnames = ["n", *self.columns]
        writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: (repr(float(v)) if k != "n" else v) for k, v in row.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"n": list(self.n_list), "columns": {k: [float(x) for x in v]
                                                                for k, v in self.columns.items()},
                           "reference": self.reference}, indent=2, sort_keys=True)


def convergence_study(prob: LqProblem, y0, n_list=(1, 2, 4, 8, 16, 32, 64), probes=(),
                      probe_steps=None, workers: int = 1) -> ConvergenceTable:
    """Fill a :class:`ConvergenceTable` for the listed ``n``.

    ``probes`` are states ``z`` for which ``||P_n(t) z - P(t) z||_Y`` is
    tabulated at each node in ``probe_steps`` (default: the initial node).
    An entry ``math.inf`` in ``n_list`` stands for ``G = I`` itself. The
    ``n`` are independent; ``workers > 1`` runs them on a thread pool and
    the rows keep the order of ``n_list``.
    """
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    probe_steps = [prob.k_s] if probe_steps is None else list(probe_steps)
    ops, grid = prob.ops, prob.prop.grid
    ip = ops.ip
    ref = solve_open_loop(prob, y0)
    ref_p = {(k, i): riccati_apply(prob, k, z) for k in probe_steps for i, z in enumerate(probes)}
    table = ConvergenceTable(n_list, reference={"cost": ref.cost,
                                                "g_norm": norm_u_traj(ref.g_hat, ip, grid)})
    for key in ref_p:
        table.riccati_error[f"P_err_k{key[0]}_z{key[1]}"] = []
    def one(n):
        pn = _with_gn(prob, n)
        sol = solve_open_loop(pn, y0)
        diff = sol.y_hat - ref.y_hat
        return (norm_u_traj(sol.g_hat - ref.g_hat, ip, grid),
                float(np.sqrt(np.max(np.sum(diff**2 * ip.y_weights, axis=1)))),
                abs(sol.cost - ref.cost),
                {key: norm_y(riccati_apply(pn, key[0], probes[key[1]]) - p_ref, ip)
                 for key, p_ref in ref_p.items()})

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, n_list))
    else:
        results = [one(n) for n in n_list]
    for g_err, y_err, j_err, p_err in results:
        table.control_error.append(g_err)
        table.state_error.append(y_err)
        table.cost_error.append(j_err)
        for (k, i), v in p_err.items():
            table.riccati_error[f"P_err_k{k}_z{i}"].append(v)
    return table


# ---------------------------------------------------------------------------
# dense oracles


@dataclass
class DenseSystem:
    a: np.ndarray
    b: np.ndarray
    mass_y: np.ndarray  # diagonal
    mass_u: np.ndarray  # full symmetric matrix of one slice pairing
    cayley: np.ndarray
    drive: np.ndarray  # dt (I - dt/2 A)^{-1} B


def dense_system(ops: MaxwellOperators, dt: float, max_dim: int = 2000) -> DenseSystem:
    """Assemble ``A`` and ``B`` column by column and the dense Cayley step."""
    n, m = ops.n_state, ops.n_gamma
    if n > max_dim:
        raise ValueError(f"state dimension {n} exceeds the dense guard {max_dim}")
    eye = np.eye(n)
    a = np.column_stack([apply_a(ops, "forward", eye[:, i]) for i in range(n)])
    b = np.column_stack([apply_b(ops, np.eye(m)[:, j]) for j in range(m)])
    lhs = eye - 0.5 * dt * a
    cay = np.linalg.solve(lhs, eye + 0.5 * dt * a)
    drive = dt * np.linalg.solve(lhs, b)
    mass_u = ops.boundary.weights[:, None] * ops.boundary.s_plus
    return DenseSystem(a, b, ops.ip.y_weights.copy(), 0.5 * (mass_u + mass_u.T), cay, drive)


def _dense_weight(ds: DenseSystem, weight: TerminalWeight) -> np.ndarray:
    n = ds.a.shape[0]
    if weight.kind == "identity":
        g = np.eye(n)
    else:
        g = weight.n * np.linalg.inv(weight.n * np.eye(n) - ds.a)
    return np.sqrt(weight.scale) * g


def dense_input_map(ds: DenseSystem, nt: int, k_s: int) -> np.ndarray:
    """``L_{sT}`` as a matrix acting on controls flattened step-major."""
    blocks = []
    power = ds.drive
    for _ in range(nt - k_s):
        blocks.append(power)
        power = ds.cayley @ power
    return np.hstack(blocks[::-1])


def dense_openloop_oracle(prob: LqProblem, y0, max_unknowns: int = 5000):
    """Dense normal equations of the discrete functional.

    Returns ``(g_hat, cost, pieces)`` where ``pieces`` carries the dense
    matrices (``L``, ``gram``, ``weight``, ``mass_u_full``) for reuse.
    """
    ops, grid = prob.ops, prob.prop.grid
    m = (grid.nt - prob.k_s) * ops.n_gamma
    if m > max_unknowns:
        raise ValueError(f"{m} control unknowns exceed the dense guard {max_unknowns}")
    ds = dense_system(ops, grid.dt)
    lmat = dense_input_map(ds, grid.nt, prob.k_s)
    gmat = _dense_weight(ds, prob.terminal_weight)
    mu_full = np.kron(np.eye(grid.nt - prob.k_s), grid.dt * ds.mass_u)
    my = np.diag(ds.mass_y)
    obs = gmat.T @ my @ gmat
    hess = prob.alpha * mu_full + lmat.T @ obs @ lmat
    free = np.linalg.matrix_power(ds.cayley, grid.nt - prob.k_s) @ np.asarray(y0, dtype=float)
    rhs = -lmat.T @ obs @ free
    g = scipy.linalg.solve(0.5 * (hess + hess.T), rhs, assume_a="pos")
    y_t = free + lmat @ g
    cost = prob.alpha * g @ mu_full @ g + y_t @ obs @ y_t
    g_hat = ControlTrajectory(prob.k_s, g.reshape(grid.nt - prob.k_s, ops.n_gamma))
    pieces = {"L": lmat, "gram": np.linalg.solve(mu_full, hess), "weight": gmat,
              "mass_u_full": mu_full, "system": ds}
    return g_hat, float(cost), pieces


def dense_dre_oracle(prob: LqProblem, y0=None, max_dim: int = 2000) -> dict:
    """Integrate the matrix Riccati equation backward with classical RK4.

    Works in coordinates where both pairings are Euclidean
    (``y~ = M_Y^{1/2} y``, ``g~ = M_U^{1/2} g``) and uses the step of the
    problem's time grid. Returns a dict with ``p0`` (operator on ``Y``),
    ``p_nodes``, the optimal cost ``(P(s) y0, y0)_Y`` and, if ``y0`` is
    given, the closed-loop state/control from ``g = -(1/alpha) B* P y``.
    """
    ops, grid = prob.ops, prob.prop.grid
    n = ops.n_state
    if n > max_dim:
        raise ValueError(f"state dimension {n} exceeds the dense guard {max_dim}")
    ds = dense_system(ops, grid.dt, max_dim)
    sy = np.sqrt(ds.mass_y)
    lam_u, vec_u = np.linalg.eigh(ds.mass_u)
    mu_ihalf = (vec_u / np.sqrt(lam_u)) @ vec_u.T
    at = sy[:, None] * ds.a / sy[None, :]
    bt = (sy[:, None] * ds.b) @ mu_ihalf
    gt = sy[:, None] * _dense_weight(ds, prob.terminal_weight) / sy[None, :]
    bbt = bt @ bt.T / prob.alpha

    def rhs(p):
        # dP/dt = -(P A + A^T P - P B B^T P / alpha)
        pa = p @ at
        return -(pa + pa.T - p @ bbt @ p)

    def rk4(p, h):
        k1 = rhs(p)
        k2 = rhs(p + 0.5 * h * k1)
        k3 = rhs(p + 0.5 * h * k2)
        k4 = rhs(p + h * k3)
        out = p + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        return 0.5 * (out + out.T)

    dt = grid.dt
    m = grid.nt - prob.k_s
    p_e = np.empty((m + 1, n, n))
    p_mid = np.empty((m, n, n))
    p_e[m] = gt.T @ gt
    for k in range(m - 1, -1, -1):
        p_e[k] = rk4(p_e[k + 1], -dt)
        p_mid[k] = rk4(p_e[k + 1], -0.5 * dt)
    p_nodes = p_e / sy[:, None] * sy[None, :]
    out = {"p0": p_nodes[0], "p_nodes": p_nodes, "p_euclid": p_e,
           "times": grid.nodes[prob.k_s:]}
    if y0 is None:
        return out
    y0 = np.asarray(y0, dtype=float)
    out["cost"] = float(y0 @ (ds.mass_y * (p_nodes[0] @ y0)))

    # closed loop in Euclidean coordinates, RK4 with P at t, t+dt/2, t+dt
    def field_at(p, y):
        return at @ y - bbt @ (p @ y)

    ys = np.empty((m + 1, n))
    ys[0] = sy * y0
    for k in range(m):
        y = ys[k]
        k1 = field_at(p_e[k], y)
        k2 = field_at(p_mid[k], y + 0.5 * dt * k1)
        k3 = field_at(p_mid[k], y + 0.5 * dt * k2)
        k4 = field_at(p_e[k + 1], y + dt * k3)
        ys[k + 1] = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    # Hermite midpoint states for the midpoint controls
    f_nodes = np.array([field_at(p_e[k], ys[k]) for k in range(m + 1)])
    y_mid = 0.5 * (ys[:-1] + ys[1:]) + dt / 8.0 * (f_nodes[:-1] - f_nodes[1:])
    g_tilde = -np.einsum("ij,kjl,kl->ki", bt.T, p_mid, y_mid) / prob.alpha
    out["y_nodes"] = ys / sy[None, :]
    out["g"] = ControlTrajectory(prob.k_s, g_tilde @ mu_ihalf)
    out["closed_loop_terminal"] = ys[-1] / sy
    return out
