"""Leaf discretization: corner-free tensor Chebyshev grids and leaf operators.

A leaf carries the classic n_c x n_c product grid with the four corner points
removed. Tensor index of point (x_i, y_j) is ``i * n_c + j``. The discrete
unknowns of a leaf are ordered ``[I_b, I_i]`` with ``I_b = [I_s, I_e, I_n, I_w]``
(4 n_c - 8 points) and ``I_i`` the (n_c - 2)^2 interior points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np

from . import _linalg
from .errors import InvalidArgument, LeafFactorizationError
from .spectral1d import cheb_nodes, diff_matrix, interp_matrix

Coefficient = Union[None, float, complex, Callable]


@dataclass(frozen=True)
class PdeOperatorSpec:
    """Coefficients of -c11 u_xx - 2 c12 u_xy - c22 u_yy + c1 u_x + c2 u_y + c0 u = g.

    Each entry is ``None`` (identically zero), a constant, or a vectorized
    callable ``f(x, y)``.
    """

    c11: Coefficient = 1.0
    c12: Coefficient = None
    c22: Coefficient = 1.0
    c1: Coefficient = None
    c2: Coefficient = None
    c0: Coefficient = None
    g: Coefficient = None

    def coefficient_names(self):
        return ("c11", "c12", "c22", "c1", "c2", "c0")

    def functions(self):
        """Non-zero coefficient functions followed by the body load."""
        names = self.coefficient_names() + ("g",)
        return [getattr(self, k) for k in names if getattr(self, k) is not None]

    @property
    def has_body_load(self):
        return self.g is not None

    def is_complex(self):
        for k in self.coefficient_names() + ("g",):
            v = getattr(self, k)
            if v is None:
                continue
            if callable(v):
                probe = np.asarray(v(np.array([0.3]), np.array([0.7])))
                if np.iscomplexobj(probe):
                    return True
            elif isinstance(v, complex):
                return True
        return False


def evaluate(coef, x, y):
    """Sample a coefficient at points; ``None`` gives ``None``."""
    if coef is None:
        return None
    if callable(coef):
        v = np.asarray(coef(x, y))
        if v.shape != np.shape(x):
            v = np.broadcast_to(v, np.shape(x)).copy()
        return v
    return np.full(np.shape(x), coef, dtype=np.result_type(coef, float))


@dataclass(frozen=True)
class _GridIndex:
    n: int
    s: np.ndarray
    e: np.ndarray
    n_: np.ndarray
    w: np.ndarray
    boundary: np.ndarray
    interior: np.ndarray
    corners: np.ndarray
    disc: np.ndarray  # [boundary, interior]


@lru_cache(maxsize=None)
def grid_index(n_c):
    if n_c < 4:
        raise InvalidArgument(f"leaf order n_c must be >= 4, got {n_c}")
    n = n_c
    inner = np.arange(1, n - 1)
    s = inner * n + 0
    e = (n - 1) * n + inner
    nn = inner * n + (n - 1)
    w = 0 * n + inner
    boundary = np.concatenate([s, e, nn, w])
    ii, jj = np.meshgrid(inner, inner, indexing="ij")
    interior = (ii * n + jj).ravel()
    corners = np.array([0, n - 1, (n - 1) * n, n * n - 1])
    disc = np.concatenate([boundary, interior])
    for a in (s, e, nn, w, boundary, interior, corners, disc):
        a.setflags(write=False)
    return _GridIndex(n, s, e, nn, w, boundary, interior, corners, disc)


@dataclass(frozen=True)
class LeafGrid:
    rect: object
    n_c: int
    xs: np.ndarray
    ys: np.ndarray
    points: np.ndarray  # (n_c^2, 2), row-major over (x_i, y_j)

    @property
    def index(self):
        return grid_index(self.n_c)

    @property
    def idx_interior(self):
        return self.index.interior

    @property
    def idx_boundary(self):
        return self.index.boundary

    @property
    def idx_corners(self):
        return self.index.corners

    @property
    def idx_s(self):
        return self.index.s

    @property
    def idx_e(self):
        return self.index.e

    @property
    def idx_n(self):
        return self.index.n_

    @property
    def idx_w(self):
        return self.index.w


def build_leaf_grid(rect, n_c):
    idx = grid_index(n_c)  # validates n_c
    xs = cheb_nodes(n_c, (rect.x0, rect.x1)).points
    ys = cheb_nodes(n_c, (rect.y0, rect.y1)).points
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    del idx
    return LeafGrid(rect=rect, n_c=n_c, xs=xs, ys=ys, points=pts)


def _derivatives(grid):
    n = grid.n_c
    Dx1 = diff_matrix(cheb_nodes(n, (grid.rect.x0, grid.rect.x1)))
    Dy1 = diff_matrix(cheb_nodes(n, (grid.rect.y0, grid.rect.y1)))
    eye = np.eye(n)
    return Dx1, Dy1, eye


def assemble_operator(grid, pde):
    """Dense collocation matrix of the PDE operator on the full n_c^2 grid."""
    Dx1, Dy1, eye = _derivatives(grid)
    x, y = grid.points[:, 0], grid.points[:, 1]
    terms = [
        (pde.c11, -1.0, lambda: np.kron(Dx1 @ Dx1, eye)),
        (pde.c12, -2.0, lambda: np.kron(Dx1, Dy1)),
        (pde.c22, -1.0, lambda: np.kron(eye, Dy1 @ Dy1)),
        (pde.c1, 1.0, lambda: np.kron(Dx1, eye)),
        (pde.c2, 1.0, lambda: np.kron(eye, Dy1)),
    ]
    N = grid.n_c ** 2
    A = None
    for coef, sign, make in terms:
        c = evaluate(coef, x, y)
        if c is None:
            continue
        term = (sign * c)[:, None] * make()
        A = term if A is None else A + term
    if A is None:
        A = np.zeros((N, N))
    c0 = evaluate(pde.c0, x, y)
    if c0 is not None:
        A = A.astype(np.result_type(A, c0))
        A[np.arange(N), np.arange(N)] += c0
    return A


def _edge_derivative_rows(grid, outward):
    Dx1, Dy1, eye = _derivatives(grid)
    Dx = np.kron(Dx1, eye)
    Dy = np.kron(eye, Dy1)
    idx = grid.index
    sgn = -1.0 if outward else 1.0
    return np.vstack([sgn * Dy[idx.s], Dx[idx.e], Dy[idx.n_], sgn * Dx[idx.w]])


def flux_matrix(grid):
    """Edge derivatives in fixed coordinate directions (d/dy on S,N; d/dx on E,W)."""
    return _edge_derivative_rows(grid, outward=False)


def outward_flux_matrix(grid):
    """Edge derivatives along the outward normal (-d/dy, +d/dx, +d/dy, -d/dx)."""
    return _edge_derivative_rows(grid, outward=True)


@lru_cache(maxsize=None)
def corner_fill_matrix(n_c):
    """Map discretization values ``[u_b; u_i]`` to all n_c^2 tensor values.

    Corner values are the mean of the extrapolations of the two adjacent
    edge interpolants. Affine invariance means the reference interval suffices.
    """
    idx = grid_index(n_c)
    n = n_c
    E = np.zeros((n * n, n * n - 4))
    E[idx.disc, np.arange(n * n - 4)] = 1.0
    t = cheb_nodes(n).points
    inner = t[1:-1]
    lo = interp_matrix(inner, [t[0]])[0]
    hi = interp_matrix(inner, [t[-1]])[0]
    m = n - 2
    # column offsets of each edge inside the disc ordering
    off = {"s": 0, "e": m, "n": 2 * m, "w": 3 * m}
    corner_rules = {
        0: (("s", lo), ("w", lo)),  # (x0, y0)
        n - 1: (("n", lo), ("w", hi)),  # (x0, y1)
        (n - 1) * n: (("s", hi), ("e", lo)),  # (x1, y0)
        n * n - 1: (("n", hi), ("e", hi)),  # (x1, y1)
    }
    for row, rules in corner_rules.items():
        for edge, wts in rules:
            E[row, off[edge]: off[edge] + m] += 0.5 * wts
    E.setflags(write=False)
    return E


def disc_to_full(n_c, u_disc):
    """Full n_c x n_c tensor array (corners filled) from discretization values."""
    return (corner_fill_matrix(n_c) @ u_disc).reshape(n_c, n_c)


@dataclass
class LeafOperators:
    """Leaf solution/boundary operators.

    DtN: ``psi`` maps boundary values to interior values, ``bop`` is T.
    ItI: ``psi`` maps incoming impedance data to all discretization values
    (boundary and interior), ``bop`` is R.
    ``z_part``/``h_part`` hold the particular solution of the body load;
    ``None`` when there is no body load.
    """

    variant: str
    psi: np.ndarray
    bop: Optional[np.ndarray]
    z_part: Optional[np.ndarray] = None
    h_part: Optional[np.ndarray] = None
    eta: Optional[complex] = None
    body_solver: Optional[tuple] = field(default=None, repr=False)

    @property
    def T(self):
        return self.bop

    @property
    def R(self):
        return self.bop


LeafOperatorsDtN = LeafOperators
LeafOperatorsItI = LeafOperators


def _disc_operator(grid, pde):
    A = assemble_operator(grid, pde)
    E = corner_fill_matrix(grid.n_c)
    return A[grid.idx_interior] @ E  # rows: interior; cols: [I_b, I_i]


def _body_samples(grid, pde):
    g = evaluate(pde.g, grid.points[grid.idx_interior, 0], grid.points[grid.idx_interior, 1])
    if g is None or not np.any(g):
        return None
    return g


def build_leaf_dtn(grid, pde, node_id=None, keep_body_solver=False):
    nb = 4 * grid.n_c - 8
    Ai = _disc_operator(grid, pde)
    A_ib, A_ii = Ai[:, :nb], Ai[:, nb:]
    fac = _linalg.factor(A_ii, LeafFactorizationError, "interior block A_ii singular",
                         node_id=node_id, stage="leaf")
    psi = -_linalg.solve(fac, A_ib)
    L = flux_matrix(grid)[:, grid.index.disc]
    L_b, L_i = L[:, :nb], L[:, nb:]
    T = L_b + L_i @ psi
    ops = LeafOperators("dtn", psi=psi, bop=T)
    g = _body_samples(grid, pde)
    if g is not None:
        z = _linalg.solve(fac, g)
        ops.z_part = z
        ops.h_part = L_i @ z
    if keep_body_solver:
        ops.body_solver = (fac, L_i)
    return ops


def build_leaf_iti(grid, pde, eta, node_id=None, keep_body_solver=False):
    eta = complex(eta)
    if eta.real == 0.0:
        raise InvalidArgument("impedance parameter needs Re(eta) != 0")
    nb = 4 * grid.n_c - 8
    nd = grid.n_c ** 2 - 4
    N = outward_flux_matrix(grid)[:, grid.index.disc]
    sel = np.zeros((nb, nd))
    sel[np.arange(nb), np.arange(nb)] = 1.0
    F = N + 1j * eta * sel
    G = N - 1j * eta * sel
    Ai = _disc_operator(grid, pde)
    B = np.vstack([F, Ai.astype(complex)])
    fac = _linalg.factor(B, LeafFactorizationError, "impedance leaf system singular",
                         node_id=node_id, stage="leaf")
    rhs = np.zeros((nd, nb), dtype=complex)
    rhs[:nb] = np.eye(nb)
    psi = _linalg.solve(fac, rhs)
    R = G @ psi
    ops = LeafOperators("iti", psi=psi, bop=R, eta=eta)
    s = _body_samples(grid, pde)
    if s is not None:
        z = _linalg.solve(fac, np.concatenate([np.zeros(nb, complex), s]))
        ops.z_part = z
        ops.h_part = G @ z
    if keep_body_solver:
        ops.body_solver = (fac, G)
    return ops


def leaf_body_load(grid, ops, g_interior):
    """Particular solution data for a new body load using a kept factorization."""
    if ops.body_solver is None:
        raise InvalidArgument("leaf was built without keep_body_solver")
    fac, M = ops.body_solver
    if ops.variant == "dtn":
        z = _linalg.solve(fac, g_interior)
    else:
        nb = 4 * grid.n_c - 8
        z = _linalg.solve(fac, np.concatenate([np.zeros(nb, complex), g_interior]))
    return z, M @ z
