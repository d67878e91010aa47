"""Weighted state/control spaces, time grids and a Krylov solver.

States are stored as flat float arrays of length ``n_ez + n_hx + n_hy``
(see :class:`StateLayout`); boundary slices are arrays of length
``n_gamma``; control trajectories are ``(n_slices, n_gamma)`` arrays
wrapped in :class:`ControlTrajectory`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "StateLayout",
    "StateVector",
    "TimeGrid",
    "ControlTrajectory",
    "InnerProducts",
    "CGReport",
    "CGConvergenceError",
    "IndefiniteOperatorError",
    "inner_y",
    "norm_y",
    "inner_u",
    "inner_u_traj",
    "norm_u_traj",
    "cg_solve",
    "lanczos",
]


@dataclass(frozen=True)
class StateLayout:
    """Index layout of the staggered TM fields on an ``nx`` x ``ny`` grid.

    ``ez`` lives on nodes ``(i, j)``, ``hx`` on ``(i, j+1/2)`` and ``hy`` on
    ``(i+1/2, j)``; each block is stored in C order with ``i`` as the first
    axis.
    """

    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid dims must be positive, got {self.nx}x{self.ny}")

    @property
    def ez_shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny + 1)

    @property
    def hx_shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny)

    @property
    def hy_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny + 1)

    @property
    def n_ez(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_hx(self) -> int:
        return (self.nx + 1) * self.ny

    @property
    def n_hy(self) -> int:
        return self.nx * (self.ny + 1)

    @property
    def size(self) -> int:
        return self.n_ez + self.n_hx + self.n_hy

    @property
    def slices(self) -> tuple[slice, slice, slice]:
        a, b = self.n_ez, self.n_ez + self.n_hx
        return slice(0, a), slice(a, b), slice(b, self.size)

    def split(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return reshaped views ``(ez, hx, hy)`` of a flat state."""
        y = np.asarray(y)
        if y.shape != (self.size,):
            raise ValueError(f"state has shape {y.shape}, expected ({self.size},)")
        se, sx, sy = self.slices
        return (y[se].reshape(self.ez_shape), y[sx].reshape(self.hx_shape),
                y[sy].reshape(self.hy_shape))

    def join(self, ez, hx, hy) -> np.ndarray:
        ez, hx, hy = (np.asarray(a, dtype=float) for a in (ez, hx, hy))
        for name, arr, shape in (("ez", ez, self.ez_shape), ("hx", hx, self.hx_shape),
                                 ("hy", hy, self.hy_shape)):
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
        return np.concatenate([ez.ravel(), hx.ravel(), hy.ravel()])

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size)


class StateVector:
    """Field triple ``(ez, hx, hy)`` backed by one flat array.

    Numerical routines work on the flat array directly; the class exists so
    that callers can build and inspect states field by field.
    """

    __slots__ = ("layout", "data")

    def __init__(self, layout: StateLayout, data: np.ndarray | None = None):
        self.layout = layout
        if data is None:
            data = layout.zeros()
        data = np.array(data, dtype=float)
        if data.shape != (layout.size,):
            raise ValueError(f"state has shape {data.shape}, expected ({layout.size},)")
        if not np.all(np.isfinite(data)):
            raise ValueError("state contains non-finite entries")
        self.data = data

    @classmethod
    def from_fields(cls, layout: StateLayout, ez, hx, hy) -> "StateVector":
        return cls(layout, layout.join(ez, hx, hy))

    @property
    def ez(self) -> np.ndarray:
        return self.layout.split(self.data)[0]

    @property
    def hx(self) -> np.ndarray:
        return self.layout.split(self.data)[1]

    @property
    def hy(self) -> np.ndarray:
        return self.layout.split(self.data)[2]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self):
        return f"StateVector(nx={self.layout.nx}, ny={self.layout.ny})"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k * dt`` on ``[0, T]`` with ``nt`` steps."""

    T: float
    nt: int

    def __post_init__(self):
        if self.nt < 1:
            raise ValueError(f"nt must be >= 1, got {self.nt}")
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ValueError(f"T must be positive and finite, got {self.T}")

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.nt) + 0.5) * self.dt

    def check_step(self, k: int, *, allow_end: bool = True) -> int:
        top = self.nt if allow_end else self.nt - 1
        if not (0 <= k <= top):
            raise ValueError(f"step index {k} outside [0, {top}]")
        return int(k)


@dataclass
class ControlTrajectory:
    """Boundary controls at the midpoints ``t_{k+1/2}``, ``k = start_index..nt-1``."""

    start_index: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("control values must be a (n_slices, n_gamma) array")

    @classmethod
    def zeros(cls, grid: TimeGrid, n_gamma: int, start_index: int = 0) -> "ControlTrajectory":
        grid.check_step(start_index, allow_end=False)
        return cls(start_index, np.zeros((grid.nt - start_index, n_gamma)))

    @property
    def n_slices(self) -> int:
        return self.values.shape[0]

    def check(self, grid: TimeGrid, n_gamma: int | None = None) -> "ControlTrajectory":
        if self.n_slices != grid.nt - self.start_index:
            raise ValueError(f"trajectory has {self.n_slices} slices, expected "
                             f"{grid.nt - self.start_index} for start_index {self.start_index}")
        if n_gamma is not None and self.values.shape[1] != n_gamma:
            raise ValueError(f"slice length {self.values.shape[1]} != {n_gamma}")
        return self

    def tail(self, k: int) -> "ControlTrajectory":
        """Restriction to the steps ``k..nt-1``."""
        if k < self.start_index:
            raise ValueError("tail index precedes start_index")
        return ControlTrajectory(k, self.values[k - self.start_index:].copy())

    def _same_frame(self, other: "ControlTrajectory"):
        if self.start_index != other.start_index or self.values.shape != other.values.shape:
            raise ValueError("control trajectories cover different time windows")

    def __add__(self, other: "ControlTrajectory") -> "ControlTrajectory":
        self._same_frame(other)
        return ControlTrajectory(self.start_index, self.values + other.values)

    def __sub__(self, other: "ControlTrajectory") -> "ControlTrajectory":
        self._same_frame(other)
        return ControlTrajectory(self.start_index, self.values - other.values)

    def __mul__(self, c: float) -> "ControlTrajectory":
        return ControlTrajectory(self.start_index, c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "ControlTrajectory":
        return ControlTrajectory(self.start_index, -self.values)


@dataclass(frozen=True)
class InnerProducts:
    """The two Hilbert-space pairings.

    ``y_weights`` is the diagonal mass (``eps`` or ``mu`` times dual-cell
    area) of each state entry. ``gamma_weights`` holds arc-length weights of
    the boundary nodes and ``u_weight_op`` applies the boundary operator
    ``S = (kappa - Laplace_Gamma)^{1/2}`` to one slice or to the rows of a
    stack of slices.
    """

    y_weights: np.ndarray
    gamma_weights: np.ndarray
    u_weight_op: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __post_init__(self):
        if np.any(~np.isfinite(self.y_weights)) or np.any(self.y_weights <= 0):
            raise ValueError("state mass weights must be finite and strictly positive")
        if np.any(self.gamma_weights <= 0):
            raise ValueError("arc-length weights must be strictly positive")


def _check_pair(a: np.ndarray, b: np.ndarray, n: int):
    if a.shape != (n,) or b.shape != (n,):
        raise ValueError(f"shape mismatch: {a.shape}, {b.shape}, expected ({n},)")


def inner_y(a, b, ip: InnerProducts) -> float:
    """Energy pairing ``(a, eps b)_E + (a, mu b)_H`` with cell-area quadrature."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _check_pair(a, b, ip.y_weights.size)
    return float(np.dot(a * ip.y_weights, b))


def norm_y(a, ip: InnerProducts) -> float:
    return float(np.sqrt(max(inner_y(a, a, ip), 0.0)))


def inner_u(f, g, ip: InnerProducts) -> float:
    """``(S f, g)`` in the arc-length weighted boundary pairing."""
    f, g = np.asarray(f, dtype=float), np.asarray(g, dtype=float)
    _check_pair(f, g, ip.gamma_weights.size)
    return float(np.dot(ip.gamma_weights * ip.u_weight_op(f), g))


def inner_u_traj(g1: ControlTrajectory, g2: ControlTrajectory, ip: InnerProducts,
                 grid: TimeGrid) -> float:
    """Midpoint-rule ``L^2(s, T; U)`` pairing ``dt * sum_k (S g1_k, g2_k)``."""
    g1._same_frame(g2)
    if g1.values.shape[1] != ip.gamma_weights.size:
        raise ValueError("slice length does not match the boundary mesh")
    sg = ip.u_weight_op(g1.values)
    return float(grid.dt * np.sum(sg * ip.gamma_weights * g2.values))


def norm_u_traj(g: ControlTrajectory, ip: InnerProducts, grid: TimeGrid) -> float:
    return float(np.sqrt(max(inner_u_traj(g, g, ip, grid), 0.0)))


@dataclass
class CGReport:
    iters: int
    final_relative_residual: float
    converged: bool = True


class CGConvergenceError(RuntimeError):
    """Raised when CG exhausts ``max_iter``; carries the partial report."""

    def __init__(self, message: str, report: CGReport, x: np.ndarray):
        super().__init__(message)
        self.report = report
        self.x = x


class IndefiniteOperatorError(RuntimeError):
    """Raised when CG meets non-positive curvature."""


def cg_solve(op: Callable[[np.ndarray], np.ndarray], rhs: np.ndarray,
             inner: Callable[[np.ndarray, np.ndarray], float], tol: float = 1e-10,
             max_iter: int | None = None, x0: np.ndarray | None = None
             ) -> tuple[np.ndarray, CGReport]:
    """Conjugate gradients for ``op(x) = rhs`` in the pairing ``inner``.

    ``op`` must be self-adjoint and positive definite with respect to
    ``inner``. Convergence means ``||op(x) - rhs|| <= tol * ||rhs||`` in the
    norm induced by ``inner``; the residual is recomputed from scratch
    before returning so the report is not the recursive estimate.

    Raises
    ------
    CGConvergenceError
        if the tolerance is not met within ``max_iter`` iterations.
    IndefiniteOperatorError
        if a search direction with ``(p, op p) <= 0`` is encountered.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rhs = np.asarray(rhs, dtype=float)
    if max_iter is None:
        max_iter = int(10 * np.sqrt(rhs.size)) + 200
    rhs_norm = np.sqrt(max(inner(rhs, rhs), 0.0))
    if rhs_norm == 0.0:
        return np.zeros_like(rhs), CGReport(0, 0.0)

    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    r = rhs - op(x) if x0 is not None else rhs.copy()
    p = r.copy()
    rr = inner(r, r)
    it = 0
    while True:
        rel = np.sqrt(max(rr, 0.0)) / rhs_norm
        if rel <= tol:
            # recursive residuals drift; confirm against the true residual
            r = rhs - op(x)
            rr = inner(r, r)
            rel = np.sqrt(max(rr, 0.0)) / rhs_norm
            if rel <= tol:
                return x, CGReport(it, float(rel))
            p = r.copy()
        if it >= max_iter:
            report = CGReport(it, float(rel), converged=False)
            raise CGConvergenceError(
                f"CG did not reach tol={tol:g} in {max_iter} iterations "
                f"(relative residual {rel:.3e})", report, x)
        q = op(p)
        curv = inner(p, q)
        if curv <= 0:
            raise IndefiniteOperatorError(
                f"non-positive curvature {curv:.3e} at iteration {it}")
        step = rr / curv
        x = x + step * p
        r = r - step * q
        rr_new = inner(r, r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1


def lanczos(op: Callable[[np.ndarray], np.ndarray], n: int,
            inner: Callable[[np.ndarray, np.ndarray], float], n_iter: int = 40,
            seed: int = 0, start: np.ndarray | None = None) -> np.ndarray:
    """Ritz values of a self-adjoint ``op`` after ``n_iter`` Lanczos steps.

    Full reorthogonalisation in ``inner``; values are returned sorted. The
    extreme Ritz values bracket the spectrum from inside.
    """
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n) if start is None else np.array(start, dtype=float)
    q /= np.sqrt(inner(q, q))
    basis = [q]
    alphas, betas = [], []
    for j in range(min(n_iter, n)):
        w = op(basis[-1])
        a = inner(w, basis[-1])
        alphas.append(a)
        for v in basis:  # two passes of Gram-Schmidt
            w = w - inner(w, v) * v
        for v in basis:
            w = w - inner(w, v) * v
        b = np.sqrt(max(inner(w, w), 0.0))
        if j == min(n_iter, n) - 1 or b < 1e-12 * max(abs(a), 1.0):
            break
        betas.append(b)
        basis.append(w / b)
    t = np.diag(alphas) + np.diag(betas[: len(alphas) - 1], 1) + np.diag(betas[: len(alphas) - 1], -1)
    return np.linalg.eigvalsh(t)
