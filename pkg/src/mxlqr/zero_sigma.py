"""Lossless media: the dual Riccati operator in closed form.

With ``sigma = 0`` the generator is skew-adjoint and, for ``G = I``, the
inverse of the Riccati operator is explicit::

    Q(t) x = (1/alpha) int_t^T e^{(r-t)A*} B B* e^{(r-t)A} x dr
             + e^{(T-t)A*} e^{(T-t)A} x

so that ``g(t) = -(1/alpha) B* e^{tA} Q(0)^{-1} y0`` and
``y(t) = Q(t) e^{tA} Q(0)^{-1} y0``. The integral is evaluated on the step
nodes. ``quadrature="trapezoid"`` is the plain composite rule;
``"midpoint"`` samples ``B* e^{rA} x`` at Crank-Nicolson midpoint averages,
which makes ``Q`` the exact inverse of the discrete Riccati operator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .lq import LqProblem, riccati_apply
from .maxwell import apply_a
from .propagation import Propagator, b_star_rows, propagate
from .space import ControlTrajectory, cg_solve, inner_u, inner_y, lanczos, norm_y

__all__ = [
    "QHandle",
    "q_apply",
    "q_inverse_apply",
    "openloop_via_q",
    "dual_re_residual",
    "pq_identity_check",
    "q_spectrum",
]


@dataclass(frozen=True)
class QHandle:
    prop: Propagator
    alpha: float = 1.0
    quadrature: Literal["trapezoid", "midpoint"] = "trapezoid"
    cg_tol: float = 1e-12

    def __post_init__(self):
        if not self.prop.ops.lossless:
            raise ValueError("the explicit dual Riccati operator needs sigma = 0")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.quadrature not in ("trapezoid", "midpoint"):
            raise ValueError(f"unknown quadrature {self.quadrature!r}")

    @property
    def ops(self):
        return self.prop.ops

    @property
    def nt(self) -> int:
        return self.prop.nt


def _bbstar(ops, states: np.ndarray) -> np.ndarray:
    """``B B*`` applied row-wise."""
    return np.asarray(ops.b_mat @ b_star_rows(ops, states).T).T


def q_apply(q: QHandle, k_t: int, x) -> np.ndarray:
    """``Q(t_k) x`` with one forward and one backward sweep."""
    q.prop.grid.check_step(k_t)
    x = np.asarray(x, dtype=float)
    m = q.nt - k_t
    if m == 0:
        return x.copy()
    p, dt = q.prop, q.prop.dt
    z = propagate(p, "forward", x, k_t, q.nt)
    if q.quadrature == "trapezoid":
        w = np.full(m + 1, dt / q.alpha)
        w[[0, -1]] *= 0.5
        src = _bbstar(q.ops, z) * w[:, None]
        acc = z[m] + src[m]
        for j in range(m - 1, -1, -1):
            acc = p.step_adjoint(acc)[0] + src[j]
        return acc
    src = _bbstar(q.ops, 0.5 * (z[:-1] + z[1:])) * (dt / q.alpha)
    acc = z[m]
    for j in range(m - 1, -1, -1):
        # C*^{j} (I - dt/2 A*)^{-1} on the midpoint sample
        acc = p.step_adjoint(acc)[0] + p.step_adjoint(src[j])[1]
    return acc


def q_inverse_apply(q: QHandle, k_t: int, x) -> np.ndarray:
    """``Q(t_k)^{-1} x`` by CG in the energy pairing."""
    ip = q.ops.ip
    x = np.asarray(x, dtype=float)
    if k_t == q.nt:
        return x.copy()
    sol, _ = cg_solve(lambda v: q_apply(q, k_t, v), x, lambda a, b: inner_y(a, b, ip),
                      tol=q.cg_tol)
    return sol


def openloop_via_q(q: QHandle, y0, node_stride: int = 1) -> dict:
    """Optimal pair from ``Q(0)^{-1} y0`` and one free propagation.

    ``y_hat`` is filled at nodes ``0, stride, 2 stride, ..., nt`` (the last
    node is always included); ``nodes`` lists them.
    """
    w0 = q_inverse_apply(q, 0, y0)
    z = propagate(q.prop, "forward", w0, 0, q.nt)
    g = -b_star_rows(q.ops, 0.5 * (z[:-1] + z[1:])) / q.alpha
    nodes = sorted(set(range(0, q.nt + 1, node_stride)) | {q.nt})
    y_hat = np.array([q_apply(q, k, z[k]) for k in nodes])
    return {"g_hat": ControlTrajectory(0, g), "y_hat": y_hat, "nodes": nodes, "w0": w0}


def dual_re_residual(q: QHandle, k_t: int, x, y) -> float:
    """Centred-difference defect of the dual Riccati equation at an interior node.

    Compares ``d/dt (Q x, y)`` with ``(Q x, A* y) + (A* x, Q y) - (B* x, B* y)_U / alpha``
    and normalises by ``||x|| ||y||``.
    """
    if not 0 < k_t < q.nt:
        raise ValueError(f"k_t must be interior, got {k_t}")
    ops, ip, dt = q.ops, q.ops.ip, q.prop.dt
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    lhs = (inner_y(q_apply(q, k_t + 1, x), y, ip) - inner_y(q_apply(q, k_t - 1, x), y, ip)) / (2 * dt)
    qx, qy = q_apply(q, k_t, x), q_apply(q, k_t, y)
    bx, by = b_star_rows(ops, np.vstack([x, y]))
    rhs = inner_y(qx, apply_a(ops, "adjoint", y), ip) + inner_y(apply_a(ops, "adjoint", x), qy, ip) \
        - inner_u(bx, by, ip) / q.alpha
    scale = norm_y(x, ip) * norm_y(y, ip)
    return abs(lhs - rhs) / scale if scale > 0 else 0.0


def pq_identity_check(q: QHandle, prob: LqProblem, k_t: int, probes) -> float:
    """``max ||P(t) Q(t) x - x|| / ||x||`` over the probes."""
    ip = q.ops.ip
    errs = [norm_y(riccati_apply(prob, k_t, q_apply(q, k_t, x)) - x, ip) / norm_y(x, ip)
            for x in probes]
    return float(max(errs))


def q_spectrum(q: QHandle, k_t: int = 0, n_iter: int = 40, seed: int = 0) -> np.ndarray:
    """Ritz values of ``Q(t_k)``."""
    ip = q.ops.ip
    return lanczos(lambda v: q_apply(q, k_t, v), q.ops.n_state, lambda a, b: inner_y(a, b, ip),
                   n_iter=n_iter, seed=seed)
