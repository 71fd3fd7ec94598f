"""Dense global collocation solve used as a reference for small meshes.

All leaf unknowns (corner-free grids) are solved for at once. Every leaf
edge point gets exactly one equation:

* domain boundary: Dirichlet value or incoming impedance data;
* matching interface: value continuity on one side, flux continuity on the other;
* coarse/fine interface: fine values equal the coarse edge interpolant, and
  the coarse flux equals the piecewise interpolant of the fine fluxes.

Neighbours are found by a brute-force geometric scan, independently of the
merge-tree bookkeeping. Intended for a few dozen leaves at most.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .leafops import (assemble_operator, build_leaf_grid, corner_fill_matrix, evaluate,
                      flux_matrix, grid_index, outward_flux_matrix)
from .solver import SolutionField
from .spectral1d import cheb_nodes, interp_matrix

_SIDE_ROWS = {"S": 0, "E": 1, "N": 2, "W": 3}
_OPPOSITE = {"S": "N", "N": "S", "E": "W", "W": "E"}


def _side_line(r, side):
    """(fixed coordinate, t0, t1) of a leaf side."""
    if side == "S":
        return r.y0, r.x0, r.x1
    if side == "N":
        return r.y1, r.x0, r.x1
    if side == "W":
        return r.x0, r.y0, r.y1
    return r.x1, r.y0, r.y1


def _across(rects, leaf, side):
    c, t0, t1 = _side_line(rects[leaf], side)
    opp = _OPPOSITE[side]
    out = []
    for k, r in rects.items():
        if k == leaf:
            continue
        c2, s0, s1 = _side_line(r, opp)
        if c2 == c and min(t1, s1) > max(t0, s0):
            out.append((s0, k, s1))
    out.sort()
    return out


def dense_solve(mesh, pde, formulation="dtn", bc=None, eta=None):
    """Solve the global collocation system; ``bc`` as for the hierarchical solvers."""
    n = mesh.n_c
    m = n - 2
    nd = n * n - 4
    nb = 4 * n - 8
    idx = grid_index(n)
    E = corner_fill_matrix(n)
    leaves = mesh.leaves()
    rects = {t: mesh.nodes[t].rect for t in leaves}
    off = {t: k * nd for k, t in enumerate(leaves)}
    N = nd * len(leaves)
    complex_ = formulation == "iti" or pde.is_complex()
    dt = complex if complex_ else float
    rows, cols, vals = [], [], []
    rhs = np.zeros(N, dt)
    grids, flux, oflux = {}, {}, {}

    def put(r, c0, block_row):
        nz = np.flatnonzero(block_row)
        rows.extend([r] * len(nz))
        cols.extend((c0 + nz).tolist())
        vals.extend(block_row[nz].tolist())

    for t in leaves:
        g = build_leaf_grid(rects[t], n)
        grids[t] = g
        flux[t] = flux_matrix(g) @ E
        oflux[t] = outward_flux_matrix(g) @ E
        A = assemble_operator(g, pde)[idx.interior] @ E
        o = off[t]
        src = evaluate(pde.g, g.points[idx.interior, 0], g.points[idx.interior, 1])
        for k in range(m * m):
            put(o + nb + k, o, A[k])
            if src is not None:
                rhs[o + nb + k] = src[k]

    def side_rows(side):
        k = _SIDE_ROWS[side]
        return np.arange(k * m, (k + 1) * m)

    def tangential(t, side):
        _, t0, t1 = _side_line(rects[t], side)
        return cheb_nodes(n, (t0, t1)).points[1:-1]

    for t in leaves:
        o = off[t]
        g = grids[t]
        for side in ("S", "E", "N", "W"):
            rs = side_rows(side)
            nbrs = _across(rects, t, side)
            if not nbrs:
                pts = g.points[idx.boundary[rs]]
                if formulation == "dtn":
                    vals_b = evaluate(bc, pts[:, 0], pts[:, 1])
                    for k, r in enumerate(rs):
                        put(o + r, o, np.eye(1, nd, r)[0])
                        rhs[o + r] = vals_b[k]
                else:
                    nx, ny = {"S": (0, -1), "E": (1, 0), "N": (0, 1), "W": (-1, 0)}[side]
                    tv = bc(pts[:, 0], pts[:, 1], np.full(m, nx, float), np.full(m, ny, float))
                    for k, r in enumerate(rs):
                        row = oflux[t][r] + 1j * eta * np.eye(1, nd, r)[0]
                        put(o + r, o, row)
                        rhs[o + r] = tv[k]
                continue
            mine = tangential(t, side)
            if len(nbrs) == 1 and nbrs[0][0] == _side_line(rects[t], side)[1] \
                    and nbrs[0][2] == _side_line(rects[t], side)[2]:
                if side not in ("E", "N"):
                    continue
                k_nb = nbrs[0][1]
                o2 = off[k_nb]
                rs2 = side_rows(_OPPOSITE[side])
                for r, r2 in zip(rs, rs2):
                    # value continuity on this side's rows
                    put(o + r, o, np.eye(1, nd, r)[0])
                    put(o + r, o2, -np.eye(1, nd, r2)[0])
                    # flux continuity on the neighbour's rows
                    put(o2 + r2, o, flux[t][r])
                    put(o2 + r2, o2, -flux[k_nb][r2])
                continue
            if len(nbrs) == 1:
                continue  # this leaf is the fine side; the coarse neighbour emits
            # coarse side with two fine neighbours
            fine = [k for _, k, _ in nbrs]
            mid = nbrs[0][2]
            ft = [tangential(k, _OPPOSITE[side]) for k in fine]
            for k_f, tf in zip(fine, ft):
                L = interp_matrix(mine, tf)
                rs_f = side_rows(_OPPOSITE[side])
                of = off[k_f]
                for p, r_f in enumerate(rs_f):
                    put(of + r_f, of, np.eye(1, nd, r_f)[0])
                    row = np.zeros(nd)
                    row[rs] = -L[p]
                    put(of + r_f, o, row)
            for p, r in enumerate(rs):
                which = 0 if mine[p] <= mid else 1
                k_f = fine[which]
                w = interp_matrix(ft[which], [mine[p]])[0]
                rs_f = side_rows(_OPPOSITE[side])
                put(o + r, o, flux[t][r])
                put(o + r, off[k_f], -(w @ flux[k_f][rs_f]))

    M = sp.csc_matrix((np.asarray(vals, dtype=dt), (rows, cols)), shape=(N, N))
    u = spla.spsolve(M, rhs)
    values = {t: (E @ u[off[t]: off[t] + nd]).reshape(n, n) for t in leaves}
    return SolutionField(mesh, n, values)
