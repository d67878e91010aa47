"""Open-loop minimiser, Riccati operator and feedback checks.

The discrete problem starting at node ``k_s`` is::

    J_s(g) = alpha * dt * sum_k (S g_k, g_k)_Gamma + ||G y^{nt}||_Y^2

with ``y`` from the Crank-Nicolson scheme. Its unique minimiser solves the
Gram system ``(alpha I + L* G*G L) g = -L* G*G y_free`` which is handed to
CG in the ``L^2(s,T;U)`` pairing. ``P(t) x`` is never assembled; it is the
adjoint sweep of ``G*G`` applied to the optimal terminal state of the
subproblem starting from ``x`` at ``t``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .maxwell import resolvent_solve
from .propagation import Propagator, b_star_rows, backward_sweep, propagate
from .space import (CGReport, ControlTrajectory, cg_solve, inner_u, inner_u_traj, inner_y,
                    lanczos, norm_u_traj, norm_y)

__all__ = [
    "TerminalWeight",
    "LqProblem",
    "OpenLoopSolution",
    "evaluate_cost",
    "gram_apply",
    "solve_open_loop",
    "optimal_state",
    "riccati_apply",
    "feedback_residual",
    "transition_check",
    "coercivity_estimate",
    "riccati_symmetry_defect",
]


@dataclass(frozen=True)
class TerminalWeight:
    """Terminal observation ``G``: the identity or ``n R(n, A)``, times ``sqrt(scale)``."""

    kind: Literal["identity", "resolvent"] = "identity"
    n: int | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "resolvent"):
            raise ValueError(f"unknown terminal weight {self.kind!r}")
        if self.kind == "resolvent" and (self.n is None or self.n < 1):
            raise ValueError("resolvent_smoothed weight needs an integer n >= 1")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def resolvent_smoothed(cls, n: int, scale: float = 1.0) -> "TerminalWeight":
        return cls("resolvent", int(n), scale)

    def apply(self, ops, x: np.ndarray) -> np.ndarray:
        """``G x``."""
        gx = x if self.kind == "identity" else self.n * resolvent_solve(ops, self.n, x)
        return np.sqrt(self.scale) * gx

    def apply_adjoint(self, ops, x: np.ndarray) -> np.ndarray:
        gx = x if self.kind == "identity" else self.n * resolvent_solve(ops, self.n, x, "adjoint")
        return np.sqrt(self.scale) * gx

    def gram(self, ops, x: np.ndarray) -> np.ndarray:
        """``G* G x``."""
        if self.kind == "identity":
            return self.scale * np.asarray(x, dtype=float)
        return self.apply_adjoint(ops, self.apply(ops, x))


@dataclass(frozen=True)
class LqProblem:
    prop: Propagator
    alpha: float = 1.0
    k_s: int = 0
    terminal_weight: TerminalWeight = TerminalWeight()
    cg_tol: float = 1e-10
    cg_max_iter: int | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        self.prop.grid.check_step(self.k_s, allow_end=False)

    @property
    def ops(self):
        return self.prop.ops

    @property
    def nt(self) -> int:
        return self.prop.nt

    def at(self, k: int) -> "LqProblem":
        """Same problem with initial node ``k``."""
        return replace(self, k_s=k)


@dataclass
class OpenLoopSolution:
    g_hat: ControlTrajectory
    y_hat: np.ndarray  # optimal states at nodes k_s..nt
    cost: float
    cg_report: CGReport

    @property
    def terminal(self) -> np.ndarray:
        return self.y_hat[-1]


def _controls(prob: LqProblem, g: ControlTrajectory) -> ControlTrajectory:
    g.check(prob.prop.grid, prob.ops.n_gamma)
    if g.start_index != prob.k_s:
        raise ValueError(f"control starts at {g.start_index}, problem at {prob.k_s}")
    return g


def _free_terminal(prob: LqProblem, y0) -> np.ndarray:
    return propagate(prob.prop, "forward", y0, prob.k_s, prob.nt, final_only=True)


def evaluate_cost(prob: LqProblem, g: ControlTrajectory, y0) -> float:
    """``alpha ||g||^2_{L^2(s,T;U)} + ||G y(T)||_Y^2``."""
    g = _controls(prob, g)
    y_t = propagate(prob.prop, "forward", y0, prob.k_s, prob.nt, g, final_only=True)
    gy = prob.terminal_weight.apply(prob.ops, y_t)
    return prob.alpha * inner_u_traj(g, g, prob.ops.ip, prob.prop.grid) + inner_y(gy, gy, prob.ops.ip)


def gram_apply(prob: LqProblem, g: ControlTrajectory) -> ControlTrajectory:
    """``Lambda g = alpha g + L* G*G L g``."""
    g = _controls(prob, g)
    lg = propagate(prob.prop, "forward", np.zeros(prob.ops.n_state), prob.k_s, prob.nt, g,
                   final_only=True)
    back = backward_sweep(prob.prop, prob.terminal_weight.gram(prob.ops, lg), prob.k_s)[0]
    return ControlTrajectory(prob.k_s, prob.alpha * g.values + back.values)


def _traj_inner(prob: LqProblem, shape):
    ip, dt = prob.ops.ip, prob.prop.grid.dt
    w = ip.gamma_weights

    def inner(a, b):
        a2 = a.reshape(shape)
        return float(dt * np.sum(ip.u_weight_op(a2) * w * b.reshape(shape)))

    return inner


def solve_open_loop(prob: LqProblem, y0) -> OpenLoopSolution:
    """Unique minimiser of ``J_s`` by CG on the Gram operator.

    Raises :class:`~mxlqr.space.CGConvergenceError` if CG stalls.
    """
    y0 = np.asarray(y0, dtype=float)
    shape = (prob.nt - prob.k_s, prob.ops.n_gamma)
    free_t = _free_terminal(prob, y0)
    rhs = -backward_sweep(prob.prop, prob.terminal_weight.gram(prob.ops, free_t), prob.k_s)[0].values

    def op(v):
        return gram_apply(prob, ControlTrajectory(prob.k_s, v.reshape(shape))).values.ravel()

    x, report = cg_solve(op, rhs.ravel(), _traj_inner(prob, shape), tol=prob.cg_tol,
                         max_iter=prob.cg_max_iter)
    g_hat = ControlTrajectory(prob.k_s, x.reshape(shape))
    y_hat = propagate(prob.prop, "forward", y0, prob.k_s, prob.nt, g_hat)
    gy = prob.terminal_weight.apply(prob.ops, y_hat[-1])
    cost = prob.alpha * inner_u_traj(g_hat, g_hat, prob.ops.ip, prob.prop.grid) + \
        inner_y(gy, gy, prob.ops.ip)
    return OpenLoopSolution(g_hat, y_hat, cost, report)


def optimal_state(prob: LqProblem, k_to: int, x) -> np.ndarray:
    """Evolution map ``Phi(t_{k_to}, t_{k_s}) x``."""
    if k_to == prob.k_s:
        return np.array(x, dtype=float)
    return solve_open_loop(prob, x).y_hat[k_to - prob.k_s]


def riccati_apply(prob: LqProblem, k_t: int, x) -> np.ndarray:
    """``P(t) x = e^{A*(T-t)} G*G Phi(T, t) x`` via one inner LQ solve.

    ``k_t = nt`` is accepted and returns ``G*G x``.
    """
    x = np.asarray(x, dtype=float)
    prob.prop.grid.check_step(k_t)
    if k_t == prob.nt:
        return prob.terminal_weight.gram(prob.ops, x)
    sol = solve_open_loop(prob.at(k_t), x)
    return backward_sweep(prob.prop, prob.terminal_weight.gram(prob.ops, sol.terminal), k_t)[1]


def riccati_symmetry_defect(prob: LqProblem, k_t: int, x, y) -> float:
    """``|(P x, y) - (x, P y)| / (||x|| ||y||)``."""
    ip = prob.ops.ip
    a = inner_y(riccati_apply(prob, k_t, x), y, ip)
    b = inner_y(x, riccati_apply(prob, k_t, y), ip)
    return abs(a - b) / (norm_y(x, ip) * norm_y(y, ip))


def feedback_residual(prob: LqProblem, y0, sample_steps) -> dict:
    """Residual of ``g(t) = -(1/alpha) B* P(t) y(t)`` along the optimal pair.

    In discrete time the control on ``[t_k, t_{k+1}]`` pairs with the
    midpoint average of ``P y`` at the two nodes. The ``cheap`` path gets
    ``P(t_k) y(t_k)`` from one adjoint sweep of ``G*G y(T)``; the
    ``independent`` path recomputes it with fresh Riccati solves at each
    node. Residuals are ``||r_k||_U / ||g||_{L^2(s,T;U)}`` (0 if ``g = 0``).
    """
    sol = solve_open_loop(prob, y0)
    ip, ops = prob.ops.ip, prob.ops
    g_norm = norm_u_traj(sol.g_hat, ip, prob.prop.grid)
    _, _, z_nodes = backward_sweep(prob.prop, prob.terminal_weight.gram(ops, sol.terminal),
                                   prob.k_s, keep_nodes=True)
    cheap, independent = {}, {}
    for k in sample_steps:
        if not prob.k_s <= k < prob.nt:
            raise ValueError(f"sample step {k} outside [{prob.k_s}, {prob.nt})")
        j = k - prob.k_s
        g_k = sol.g_hat.values[j]
        mid = 0.5 * (z_nodes[j] + z_nodes[j + 1])
        fresh = 0.5 * (riccati_apply(prob, k, sol.y_hat[j]) + riccati_apply(prob, k + 1, sol.y_hat[j + 1]))
        for out, pz in ((cheap, mid), (independent, fresh)):
            r = g_k + b_star_rows(ops, pz[None, :])[0] / prob.alpha
            out[int(k)] = 0.0 if g_norm == 0 else float(np.sqrt(max(inner_u(r, r, ip), 0.0)) / g_norm)
    return {"cheap": cheap, "independent": independent, "g_norm": g_norm}


def transition_check(prob: LqProblem, y0, k_tau: int, k_t: int) -> dict:
    """Splitting errors of ``Phi(t,s) = Phi(t,tau) Phi(tau,s)`` and of the tail control.

    The state error is relative to ``||y0||_Y``, the control error relative
    to ``||g_hat||_{L^2(s,T;U)}``.
    """
    if not prob.k_s <= k_tau <= k_t <= prob.nt:
        raise ValueError("need k_s <= k_tau <= k_t <= nt")
    ip, grid = prob.ops.ip, prob.prop.grid
    y0_norm = norm_y(y0, ip)
    if y0_norm == 0:
        return {"state_error": 0.0, "control_error": 0.0}
    full = solve_open_loop(prob, y0)
    if k_tau == prob.nt:
        return {"state_error": 0.0, "control_error": 0.0}
    y_tau = full.y_hat[k_tau - prob.k_s]
    part = solve_open_loop(prob.at(k_tau), y_tau)
    state_err = norm_y(part.y_hat[k_t - k_tau] - full.y_hat[k_t - prob.k_s], ip) / y0_norm
    g_norm = norm_u_traj(full.g_hat, ip, grid)
    diff = part.g_hat - full.g_hat.tail(k_tau)
    ctrl_err = norm_u_traj(diff, ip, grid) / g_norm if g_norm > 0 else 0.0
    return {"state_error": float(state_err), "control_error": float(ctrl_err)}


def coercivity_estimate(prob: LqProblem, k_t: int = 0, n_iter: int = 40, seed: int = 0) -> dict:
    """Extreme Ritz values of ``x -> P(t) x`` in the energy pairing.

    The smallest Ritz value is an upper estimate of ``lambda_min(P(t))``
    that tightens as ``n_iter`` grows.
    """
    ip = prob.ops.ip
    ritz = lanczos(lambda v: riccati_apply(prob, k_t, v), prob.ops.n_state,
                   lambda a, b: inner_y(a, b, ip), n_iter=n_iter, seed=seed)
    return {"lambda_min": float(ritz[0]), "lambda_max": float(ritz[-1]), "ritz": ritz}
