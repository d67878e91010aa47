"""Discrete TM Maxwell system on the unit square.

Fields ``(E_z, H_x, H_y)`` are staggered with ``E_z`` on grid nodes, so the
tangential electric trace on the boundary is read off directly. The
semi-discrete dynamics is a finite-volume balance on the dual cells::

    M y' = (K - Sigma) y + E g

with ``M`` the diagonal energy mass, ``K`` the Euclidean-antisymmetric
circulation matrix, ``Sigma`` the conductivity mass and ``E`` the boundary
injection of the tangential magnetic datum ``g = (nu x h)_z``. Hence
``A = M^{-1}(K - Sigma)`` is skew-adjoint in the energy pairing when
``sigma = 0`` and dissipative otherwise.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .space import InnerProducts, StateLayout, inner_y

__all__ = [
    "MaterialField",
    "BoundaryMesh",
    "MaxwellOperators",
    "assemble_system",
    "apply_a",
    "resolvent_solve",
    "apply_b",
    "apply_b_star",
    "green_map",
    "boundary_frac_laplacian",
    "dissipation",
    "node_coordinates",
    "gaussian_pulse",
    "boundary_silent",
    "random_state",
]

Direction = Literal["forward", "adjoint"]


@dataclass(frozen=True)
class MaterialField:
    """Scalar coefficients sampled where the fields live.

    ``eps`` and ``sigma`` on ``E_z`` nodes, ``mu_hx``/``mu_hy`` on the
    ``H_x``/``H_y`` positions.
    """

    eps: np.ndarray
    mu_hx: np.ndarray
    mu_hy: np.ndarray
    sigma: np.ndarray

    @classmethod
    def constant(cls, layout: StateLayout, eps: float = 1.0, mu: float = 1.0,
                 sigma: float = 0.0) -> "MaterialField":
        return cls(np.full(layout.ez_shape, float(eps)), np.full(layout.hx_shape, float(mu)),
                   np.full(layout.hy_shape, float(mu)), np.full(layout.ez_shape, float(sigma)))

    @classmethod
    def gaussian_bump(cls, layout: StateLayout, eps0: float, amplitude: float,
                      center=(0.5, 0.5), width: float = 0.15, mu: float = 1.0,
                      sigma: float = 0.0) -> "MaterialField":
        """Permittivity ``eps0 + amplitude * exp(-|x - c|^2 / (2 width^2))``."""
        x = np.linspace(0.0, 1.0, layout.nx + 1)[:, None]
        y = np.linspace(0.0, 1.0, layout.ny + 1)[None, :]
        bump = np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2) / (2 * width**2))
        base = cls.constant(layout, eps0, mu, sigma)
        return cls(eps0 + amplitude * bump, base.mu_hx, base.mu_hy, base.sigma)

    @property
    def is_lossless(self) -> bool:
        return bool(np.all(self.sigma == 0))

    def validate(self, layout: StateLayout):
        for name, arr, shape in (("eps", self.eps, layout.ez_shape),
                                 ("mu_hx", self.mu_hx, layout.hx_shape),
                                 ("mu_hy", self.mu_hy, layout.hy_shape),
                                 ("sigma", self.sigma, layout.ez_shape)):
            arr = np.asarray(arr)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        if np.any(self.eps <= 0) or np.any(self.mu_hx <= 0) or np.any(self.mu_hy <= 0):
            raise ValueError("eps and mu must be strictly positive")
        if np.any(self.sigma < 0):
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True)
class BoundaryMesh:
    """Perimeter nodes and the spectral calculus of the boundary Laplacian.

    Nodes run counterclockwise from the lower-left corner. ``eigvals`` and
    ``eigvecs`` diagonalise ``-Laplace_Gamma`` (periodic second difference
    along the perimeter), with eigenvectors orthonormal in the arc-length
    pairing ``(f, g)_w = sum_i weights_i f_i g_i``.
    """

    ez_index: np.ndarray  # flat E_z index of each perimeter node
    weights: np.ndarray
    normals: np.ndarray  # outward normal of the segment leaving each node
    eigvals: np.ndarray
    eigvecs: np.ndarray
    kappa: float
    s_plus: np.ndarray = field(repr=False)
    s_minus: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.weights.size

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        """Spectral coefficients ``(f, phi_m)_w`` (rows for stacked input)."""
        return (np.asarray(f) * self.weights) @ self.eigvecs

    def synthesize(self, c: np.ndarray) -> np.ndarray:
        return np.asarray(c) @ self.eigvecs.T


def _perimeter(nx: int, ny: int, hx: float, hy: float):
    nodes, normals, seg = [], [], []
    for i in range(nx):
        nodes.append((i, 0)); normals.append((0.0, -1.0)); seg.append(hx)
    for j in range(ny):
        nodes.append((nx, j)); normals.append((1.0, 0.0)); seg.append(hy)
    for i in range(nx, 0, -1):
        nodes.append((i, ny)); normals.append((0.0, 1.0)); seg.append(hx)
    for j in range(ny, 0, -1):
        nodes.append((0, j)); normals.append((-1.0, 0.0)); seg.append(hy)
    return nodes, np.array(normals), np.array(seg)


def _build_boundary(nx: int, ny: int, kappa: float) -> BoundaryMesh:
    hx, hy = 1.0 / nx, 1.0 / ny
    nodes, normals, seg = _perimeter(nx, ny, hx, hy)
    n = len(nodes)
    ez_index = np.array([i * (ny + 1) + j for i, j in nodes])
    # seg[k] joins node k to node k+1
    weights = 0.5 * (seg + np.roll(seg, 1))
    stiff = np.zeros((n, n))
    for k in range(n):
        k1 = (k + 1) % n
        c = 1.0 / seg[k]
        stiff[k, k] += c; stiff[k1, k1] += c
        stiff[k, k1] -= c; stiff[k1, k] -= c
    lam, phi = scipy.linalg.eigh(stiff, np.diag(weights))
    lam = np.clip(lam, 0.0, None)
    lam[0] = 0.0
    phi[:, 0] = 1.0 / np.sqrt(weights.sum())
    scale_p = (kappa + lam) ** 0.5
    # S^p f = Phi diag(scale^p) Phi^T W f; stored so that S^p(rows) = rows @ mat.T
    s_plus = (phi * scale_p) @ (phi.T * weights)
    s_minus = (phi / scale_p) @ (phi.T * weights)
    return BoundaryMesh(ez_index, weights, normals, lam, phi, float(kappa), s_plus, s_minus)


def boundary_frac_laplacian(mesh: BoundaryMesh, p: int, f: np.ndarray) -> np.ndarray:
    """Apply ``(kappa - Laplace_Gamma)^{p/2}`` for ``p = +1`` or ``-1``.

    Accepts a single slice or a stack of slices along the last axis.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != mesh.size:
        raise ValueError(f"slice length {f.shape[-1]} != {mesh.size}")
    if p == 1:
        return f @ mesh.s_plus.T
    if p == -1:
        return f @ mesh.s_minus.T
    raise ValueError(f"p must be +1 or -1, got {p}")


@dataclass(eq=False)
class MaxwellOperators:
    """Assembled sparse operators; treat as immutable after construction."""

    layout: StateLayout
    materials: MaterialField
    ip: InnerProducts
    boundary: BoundaryMesh
    a_fwd: sp.csr_matrix = field(repr=False)
    a_adj: sp.csr_matrix = field(repr=False)
    b_mat: sp.csr_matrix = field(repr=False)
    _factors: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def n_state(self) -> int:
        return self.layout.size

    @property
    def n_gamma(self) -> int:
        return self.boundary.size

    @property
    def h(self) -> tuple[float, float]:
        return 1.0 / self.layout.nx, 1.0 / self.layout.ny

    @property
    def lossless(self) -> bool:
        return self.materials.is_lossless

    def factor(self, shift: float, scale: float, direction: Direction):
        """Cached sparse LU of ``shift*I - scale*A`` (or ``A*``)."""
        key = (float(shift), float(scale), direction)
        lu = self._factors.get(key)
        if lu is None:
            with self._lock:
                lu = self._factors.get(key)
                if lu is None:
                    a = self.a_fwd if direction == "forward" else self.a_adj
                    mat = (shift * sp.identity(self.n_state, format="csc") - scale * a).tocsc()
                    try:
                        lu = spla.splu(mat)
                    except RuntimeError as exc:
                        raise np.linalg.LinAlgError(
                            f"singular factorization for shift={shift}, scale={scale}") from exc
                    self._factors[key] = lu
        return lu


def _circulation(layout: StateLayout):
    """Euclidean circulation matrix ``K`` and the diagonal dual-cell areas."""
    nx, ny = layout.nx, layout.ny
    hx, hy = 1.0 / nx, 1.0 / ny
    wi = np.ones(nx + 1); wi[[0, -1]] = 0.5
    wj = np.ones(ny + 1); wj[[0, -1]] = 0.5
    se, sx, sy = layout.slices
    ez_id = np.arange(layout.n_ez).reshape(layout.ez_shape)
    hx_id = (sx.start + np.arange(layout.n_hx)).reshape(layout.hx_shape)
    hy_id = (sy.start + np.arange(layout.n_hy)).reshape(layout.hy_shape)

    rows, cols, vals = [], [], []

    def couple(r, c, v):
        # K[r, c] = v and K[c, r] = -v
        r, c, v = (np.ravel(a) for a in np.broadcast_arrays(r, c, v))
        rows.extend([r, c]); cols.extend([c, r]); vals.extend([v, -v])

    # E_z(i,j) <- +hy w_j (Hy(i+1/2,j) - Hy(i-1/2,j))
    len_y = hy * wj[None, :] * np.ones((nx, 1))
    couple(ez_id[:-1, :], hy_id, len_y)
    couple(ez_id[1:, :], hy_id, -len_y)
    # E_z(i,j) <- -hx w_i (Hx(i,j+1/2) - Hx(i,j-1/2))
    len_x = hx * wi[:, None] * np.ones((1, ny))
    couple(ez_id[:, :-1], hx_id, -len_x)
    couple(ez_id[:, 1:], hx_id, len_x)

    n = layout.size
    k = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    area_ez = hx * hy * np.outer(wi, wj)
    area_hx = hx * hy * np.repeat(wi[:, None], ny, axis=1)
    area_hy = hx * hy * np.repeat(wj[None, :], nx, axis=0)
    return k, area_ez, area_hx, area_hy


def assemble_system(nx: int, ny: int, materials: MaterialField | None = None,
                    kappa: float = 1.0) -> MaxwellOperators:
    """Assemble ``A``, ``A*``, ``B`` and the two inner products.

    Parameters
    ----------
    nx, ny
        Number of cells per direction (``>= 4``).
    materials
        Coefficients; defaults to vacuum ``eps = mu = 1``, ``sigma = 0``.
    kappa
        Shift of the boundary operator ``S = (kappa - Laplace_Gamma)^{1/2}``.
    """
    if nx < 4 or ny < 4:
        raise ValueError(f"grid must be at least 4x4, got {nx}x{ny}")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    layout = StateLayout(nx, ny)
    if materials is None:
        materials = MaterialField.constant(layout)
    materials.validate(layout)

    k, area_ez, area_hx, area_hy = _circulation(layout)
    mass = np.concatenate([(materials.eps * area_ez).ravel(), (materials.mu_hx * area_hx).ravel(),
                           (materials.mu_hy * area_hy).ravel()])
    damp = np.zeros(layout.size)
    damp[: layout.n_ez] = (materials.sigma * area_ez).ravel()
    minv = sp.diags(1.0 / mass)
    a_fwd = (minv @ (k - sp.diags(damp))).tocsr()
    a_adj = (minv @ (k.T - sp.diags(damp))).tocsr()

    boundary = _build_boundary(nx, ny, kappa)
    b_vals = boundary.weights / mass[boundary.ez_index]
    b_mat = sp.csr_matrix((b_vals, (boundary.ez_index, np.arange(boundary.size))),
                          shape=(layout.size, boundary.size))
    ip = InnerProducts(mass, boundary.weights, lambda f: f @ boundary.s_plus.T)
    return MaxwellOperators(layout, materials, ip, boundary, a_fwd, a_adj, b_mat)


def _state(ops: MaxwellOperators, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (ops.n_state,):
        raise ValueError(f"state has shape {y.shape}, expected ({ops.n_state},)")
    return y


def _slice(ops: MaxwellOperators, g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (ops.n_gamma,):
        raise ValueError(f"boundary slice has shape {g.shape}, expected ({ops.n_gamma},)")
    return g


def apply_a(ops: MaxwellOperators, direction: Direction, y) -> np.ndarray:
    """``A y`` or ``A* y``; the adjoint is the exact energy-pairing transpose."""
    y = _state(ops, y)
    if direction == "forward":
        return ops.a_fwd @ y
    if direction == "adjoint":
        return ops.a_adj @ y
    raise ValueError(f"unknown direction {direction!r}")


def resolvent_solve(ops: MaxwellOperators, lam: float, rhs, direction: Direction = "forward"
                    ) -> np.ndarray:
    """Solve ``(lam I - A) x = rhs`` (or with ``A*``) by cached sparse LU."""
    if lam < 1:
        raise ValueError(f"resolvent parameter must be >= 1, got {lam}")
    rhs = _state(ops, rhs)
    return ops.factor(lam, 1.0, direction).solve(rhs)


def apply_b(ops: MaxwellOperators, g) -> np.ndarray:
    """Inject boundary data into the ``E_z`` balance of the perimeter nodes."""
    return ops.b_mat @ _slice(ops, g)


def apply_b_star(ops: MaxwellOperators, y) -> np.ndarray:
    """Exact adjoint of :func:`apply_b` from the energy pairing to the ``U`` pairing.

    Works out to ``S^{-1}`` applied to the perimeter trace of ``E_z``.
    """
    y = _state(ops, y)
    trace = (ops.b_mat.T @ (ops.ip.y_weights * y)) / ops.boundary.weights
    return trace @ ops.boundary.s_minus.T


def green_map(ops: MaxwellOperators, g) -> np.ndarray:
    """Static solution with tangential magnetic datum ``g``: ``(I - A)^{-1} B g``."""
    return resolvent_solve(ops, 1.0, apply_b(ops, g))


def dissipation(ops: MaxwellOperators, y) -> float:
    """``(A y, y)_Y``; zero for lossless media, ``-||sigma^{1/2} E_z||^2`` otherwise."""
    y = _state(ops, y)
    return inner_y(ops.a_fwd @ y, y, ops.ip)


def node_coordinates(layout: StateLayout):
    """Physical coordinates ``(x, y)`` of every state entry, in flat order."""
    nx, ny = layout.nx, layout.ny
    xs, ys = np.arange(nx + 1) / nx, np.arange(ny + 1) / ny
    xh, yh = (np.arange(nx) + 0.5) / nx, (np.arange(ny) + 0.5) / ny
    blocks = [np.meshgrid(xs, ys, indexing="ij"), np.meshgrid(xs, yh, indexing="ij"),
              np.meshgrid(xh, ys, indexing="ij")]
    return (np.concatenate([b[0].ravel() for b in blocks]),
            np.concatenate([b[1].ravel() for b in blocks]))


def gaussian_pulse(layout: StateLayout, center=(0.5, 0.5), width: float = 0.25,
                   amplitude: float = 1.0, fields: str = "ez") -> np.ndarray:
    """Gaussian bump placed in the listed field blocks (``"ez"``, ``"hx"``, ``"hy"``)."""
    x, y = node_coordinates(layout)
    bump = amplitude * np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2) / (2 * width**2))
    keep = np.zeros(layout.size, dtype=bool)
    for name, sl in zip(("ez", "hx", "hy"), layout.slices):
        if name in fields:
            keep[sl] = True
    return np.where(keep, bump, 0.0)


def boundary_silent(layout: StateLayout, amplitude: float = 1.0) -> np.ndarray:
    """``E_z = sin^2(pi x) sin^2(pi y)``, zero with its gradient on the boundary; ``H = 0``."""
    x, y = node_coordinates(layout)
    ez = np.arange(layout.size) < layout.n_ez
    return np.where(ez, amplitude * np.sin(np.pi * x) ** 2 * np.sin(np.pi * y) ** 2, 0.0)


def random_state(layout: StateLayout, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(layout.size)
