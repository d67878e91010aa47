"""Crank-Nicolson semigroups, input-to-state maps and their exact adjoints.

One forward step solves::

    (I - dt/2 A) y^{k+1} = (I + dt/2 A) y^k + dt B g_{k+1/2}

which is done with a single factorised solve as
``y^{k+1} = 2 (I - dt/2 A)^{-1} (y^k + dt/2 B g) - y^k``. The backward
(adjoint) step is the same with ``A*``; its intermediate solve is exactly
the midpoint average ``(z^k + z^{k+1}) / 2`` at which ``B*`` must be
evaluated for the discrete adjoint of ``g -> y^{nt}`` to be exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .maxwell import MaxwellOperators
from .space import ControlTrajectory, TimeGrid, inner_u_traj, inner_y, norm_u_traj, norm_y

__all__ = [
    "Propagator",
    "propagate",
    "adjoint_input_map",
    "backward_sweep",
    "admissibility_ratio",
    "input_map_gain",
    "b_star_rows",
    "pairing_defect",
]


@dataclass(eq=False)
class Propagator:
    ops: MaxwellOperators
    grid: TimeGrid
    _lu_fwd: object = field(init=False, repr=False)
    _lu_adj: object = field(init=False, repr=False)

    def __post_init__(self):
        half = 0.5 * self.grid.dt
        self._lu_fwd = self.ops.factor(1.0, half, "forward")
        self._lu_adj = self.ops.factor(1.0, half, "adjoint")

    @property
    def nt(self) -> int:
        return self.grid.nt

    @property
    def dt(self) -> float:
        return self.grid.dt

    def step(self, y: np.ndarray, source: np.ndarray | None = None) -> np.ndarray:
        """One forward step; ``source`` is ``B g_{k+1/2}`` (already applied)."""
        rhs = y if source is None else y + (0.5 * self.dt) * source
        return 2.0 * self._lu_fwd.solve(rhs) - y

    def step_adjoint(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """One backward step ``z^{k+1} -> z^k``; also returns the midpoint state."""
        mid = self._lu_adj.solve(z)
        return 2.0 * mid - z, mid


def b_star_rows(ops: MaxwellOperators, states: np.ndarray) -> np.ndarray:
    """``B*`` applied to each row of a ``(m, n_state)`` stack."""
    trace = (states * ops.ip.y_weights) @ ops.b_mat
    trace = np.asarray(trace) / ops.boundary.weights
    return trace @ ops.boundary.s_minus.T


def _sources(p: Propagator, g: ControlTrajectory | None, k_from: int, k_to: int):
    if g is None:
        return None
    g.check(p.grid, p.ops.n_gamma)
    if g.start_index > k_from:
        raise ValueError(f"control starts at step {g.start_index}, after k_from={k_from}")
    vals = g.values[k_from - g.start_index: k_to - g.start_index]
    return np.asarray(p.ops.b_mat @ vals.T).T


def propagate(p: Propagator, direction: Literal["forward", "adjoint"], y_init, k_from: int,
              k_to: int, g: ControlTrajectory | None = None, final_only: bool = False
              ) -> np.ndarray:
    """Run the scheme between nodes ``k_from < k_to``.

    ``forward`` starts from ``y_init`` at ``k_from``; ``adjoint`` starts from
    ``y_init`` at ``k_to`` and runs backward without a control term. The
    returned trajectory is ordered by increasing node index, shape
    ``(k_to - k_from + 1, n_state)``, or just the end state if
    ``final_only``.
    """
    p.grid.check_step(k_from); p.grid.check_step(k_to)
    if not k_from < k_to:
        raise ValueError(f"need k_from < k_to, got {k_from}, {k_to}")
    y = np.array(y_init, dtype=float)
    if y.shape != (p.ops.n_state,):
        raise ValueError(f"state has shape {y.shape}, expected ({p.ops.n_state},)")
    n = k_to - k_from
    traj = None if final_only else np.empty((n + 1, y.size))
    if direction == "forward":
        src = _sources(p, g, k_from, k_to)
        if traj is not None:
            traj[0] = y
        for k in range(n):
            y = p.step(y, None if src is None else src[k])
            if traj is not None:
                traj[k + 1] = y
        return y if final_only else traj
    if direction == "adjoint":
        if g is not None:
            raise ValueError("adjoint propagation takes no control")
        if traj is not None:
            traj[n] = y
        for k in range(n - 1, -1, -1):
            y, _ = p.step_adjoint(y)
            if traj is not None:
                traj[k] = y
        return y if final_only else traj
    raise ValueError(f"unknown direction {direction!r}")


def backward_sweep(p: Propagator, terminal, k_s: int, keep_nodes: bool = False):
    """Backward adjoint sweep from ``terminal`` at ``nt`` down to ``k_s``.

    Returns ``(controls, z_ks, nodes)`` where ``controls`` is the
    :class:`ControlTrajectory` ``L_{sT}^* terminal``, ``z_ks`` the adjoint
    state at node ``k_s`` and ``nodes`` the adjoint states at nodes
    ``k_s..nt`` (``None`` unless ``keep_nodes``).
    """
    p.grid.check_step(k_s, allow_end=False)
    z = np.array(terminal, dtype=float)
    if z.shape != (p.ops.n_state,):
        raise ValueError(f"state has shape {z.shape}, expected ({p.ops.n_state},)")
    m = p.nt - k_s
    mids = np.empty((m, z.size))
    nodes = np.empty((m + 1, z.size)) if keep_nodes else None
    if nodes is not None:
        nodes[m] = z
    for k in range(m - 1, -1, -1):
        z, mids[k] = p.step_adjoint(z)
        if nodes is not None:
            nodes[k] = z
    return ControlTrajectory(k_s, b_star_rows(p.ops, mids)), z, nodes


def adjoint_input_map(p: Propagator, terminal, k_s: int) -> ControlTrajectory:
    """Exact discrete adjoint of ``g -> (L_s g)(T)``."""
    return backward_sweep(p, terminal, k_s)[0]


def admissibility_ratio(p: Propagator, n_samples: int = 8, seed: int = 0,
                        power_steps: int = 0) -> dict:
    """Sample ``int_0^T ||B* e^{tA*} x||_U^2 dt / ||x||_Y^2`` over random ``x``.

    The time integral is ``||L_T^* x||^2`` in the discrete ``L^2(0,T;U)``
    pairing; the maximum over samples is a lower estimate of the trace
    regularity constant. ``power_steps`` rounds of ``x <- L_T L_T^* x``
    push each sample toward the top of the spectrum, so the estimate
    approaches ``||L_T||^2``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    ops, zero = p.ops, np.zeros(p.ops.n_state)
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(n_samples):
        x = rng.standard_normal(ops.n_state)
        x /= norm_y(x, ops.ip)
        for _ in range(power_steps):
            x = propagate(p, "forward", zero, 0, p.nt, adjoint_input_map(p, x, 0), final_only=True)
            x /= norm_y(x, ops.ip)
        ratios.append(norm_u_traj(adjoint_input_map(p, x, 0), ops.ip, p.grid) ** 2)
    ratios = np.array(ratios)
    return {"max_ratio": float(ratios.max()), "ratios": ratios}


def input_map_gain(p: Propagator, k_s: int = 0, n_samples: int = 4, seed: int = 0) -> float:
    """Largest sampled ``sup_t ||(L_s g)(t)||_Y / ||g||_{L^2(s,T;U)}``."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_samples):
        g = ControlTrajectory(k_s, rng.standard_normal((p.nt - k_s, p.ops.n_gamma)))
        traj = propagate(p, "forward", np.zeros(p.ops.n_state), k_s, p.nt, g)
        sup = np.sqrt(np.max(np.sum(traj**2 * p.ops.ip.y_weights, axis=1)))
        best = max(best, sup / norm_u_traj(g, p.ops.ip, p.grid))
    return float(best)


def pairing_defect(p: Propagator, g: ControlTrajectory, z, k_s: int) -> float:
    """Relative defect of ``(L_sT g, z)_Y = (g, L_sT^* z)`` for one pair."""
    lg = propagate(p, "forward", np.zeros(p.ops.n_state), k_s, p.nt, g, final_only=True)
    lhs = inner_y(lg, z, p.ops.ip)
    rhs = inner_u_traj(g, adjoint_input_map(p, z, k_s), p.ops.ip, p.grid)
    scale = norm_y(lg, p.ops.ip) * norm_y(z, p.ops.ip) + abs(lhs)
    return abs(lhs - rhs) / scale if scale > 0 else 0.0
