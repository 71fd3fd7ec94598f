"""Hierarchical direct solver over a :class:`~hpsadapt.meshtree.MeshTree`.

``build`` constructs leaf operators and merges them bottom-up (descending
node id, which is always children-before-parent). ``solve_dirichlet`` and
``solve_impedance`` sweep the tree top-down. Body-load data is merged during
the build, so a solve is a single downward pass; with ``keep_body_solver``
the factorizations are kept and :func:`set_body_load` recomputes the
particular data for a new right-hand side without rebuilding.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import leafops, mergeops
from .errors import InvalidArgument, PreconditionViolation, UnbuiltTree
from .leafops import LeafOperators, build_leaf_grid, corner_fill_matrix, evaluate, grid_index
from .meshtree import MeshTree
from .spectral1d import cheb_nodes, interp_matrix


@dataclass
class SolutionField:
    """Per-leaf values on the full n_c x n_c tensor grid (corners filled for output)."""

    mesh: MeshTree
    n_c: int
    values: dict  # leaf id -> (n_c, n_c) array, [i, j] <-> (x_i, y_j)

    def leaves(self):
        return sorted(self.values)

    @property
    def is_complex(self):
        return any(np.iscomplexobj(v) for v in self.values.values())

    def rect(self, leaf):
        return self.mesh.nodes[leaf].rect

    def disc_values(self, leaf):
        """Values at the n_c^2 - 4 corner-free discretization points."""
        return self.values[leaf].ravel()[grid_index(self.n_c).disc]

    def points(self, leaf):
        return build_leaf_grid(self.rect(leaf), self.n_c).points

    def evaluate(self, x, y):
        """Tensor Chebyshev interpolant of the containing leaf at each point."""
        x = np.atleast_1d(np.asarray(x, float)).ravel()
        y = np.atleast_1d(np.asarray(y, float)).ravel()
        ids = self.mesh.locate(x, y)
        dt = complex if self.is_complex else float
        out = np.empty(len(x), dt)
        for leaf in np.unique(ids):
            sel = ids == leaf
            r = self.rect(int(leaf))
            Lx = interp_matrix(cheb_nodes(self.n_c, (r.x0, r.x1)), x[sel])
            Ly = interp_matrix(cheb_nodes(self.n_c, (r.y0, r.y1)), y[sel])
            V = self.values[int(leaf)]
            out[sel] = np.einsum("pi,ij,pj->p", Lx, V, Ly)
        return out


@dataclass
class MemoryReport:
    total: int
    per_level: dict
    leaves: int
    parents: int


@dataclass
class SolverTree:
    mesh: MeshTree
    pde: leafops.PdeOperatorSpec
    formulation: str = "dtn"
    eta: Optional[complex] = None
    retain_for_update: bool = True
    keep_body_solver: bool = False
    threads: int = 1
    ops: dict = field(default_factory=dict)
    build_stats: dict = field(default_factory=dict)

    @property
    def n_c(self):
        return self.mesh.n_c

    @property
    def built(self):
        return 1 in self.ops and len(self.ops) == len(self.mesh.nodes)


def _check_formulation(formulation, eta):
    if formulation not in ("dtn", "iti"):
        raise InvalidArgument(f"unknown formulation {formulation!r} (expected dtn or iti)")
    if formulation == "iti":
        if eta is None:
            raise InvalidArgument("ItI formulation needs an impedance parameter eta")
        if complex(eta).real == 0.0:
            raise InvalidArgument("impedance parameter needs Re(eta) != 0")


def build(mesh, pde, formulation="dtn", eta=None, retain_for_update=True,
          keep_body_solver=False, threads=1):
    """Build leaf operators and merge them up to the root."""
    _check_formulation(formulation, eta)
    tree = SolverTree(mesh, pde, formulation, None if eta is None else complex(eta),
                      retain_for_update, keep_body_solver, max(1, int(threads)))
    _rebuild(tree, sorted(mesh.nodes, reverse=True))
    return tree


def _build_leaf(tree, tid):
    grid = build_leaf_grid(tree.mesh.nodes[tid].rect, tree.n_c)
    if tree.formulation == "dtn":
        return leafops.build_leaf_dtn(grid, tree.pde, node_id=tid,
                                      keep_body_solver=tree.keep_body_solver)
    return leafops.build_leaf_iti(grid, tree.pde, tree.eta, node_id=tid,
                                  keep_body_solver=tree.keep_body_solver)


def _rebuild(tree, ids):
    """(Re)build the given nodes; ``ids`` must be closed under 'parent of a rebuilt node'."""
    mesh = tree.mesh
    t0 = time.perf_counter()
    ids = sorted(ids, reverse=True)
    leaves = [t for t in ids if mesh.nodes[t].is_leaf]
    if tree.threads > 1 and len(leaves) > 1:
        with ThreadPoolExecutor(tree.threads) as pool:
            built = list(pool.map(lambda t: _build_leaf(tree, t), leaves))
    else:
        built = [_build_leaf(tree, t) for t in leaves]
    for t, ops in zip(leaves, built):
        tree.ops[t] = ops
    t1 = time.perf_counter()
    for t in ids:
        node = mesh.nodes[t]
        if node.is_leaf:
            continue
        a, b = node.children
        oa, ob = tree.ops.get(a), tree.ops.get(b)
        if oa is None or ob is None or oa.bop is None or ob.bop is None:
            raise PreconditionViolation(
                "child boundary operator unavailable (build with retain_for_update to allow updates)",
                node_id=t, stage="merge")
        maps = mesh.interface_maps(t)
        tree.ops[t] = mergeops.merge(oa, ob, maps, node_id=t,
                                     keep_load_ops=tree.keep_body_solver)
        if not tree.retain_for_update:
            for c in (oa, ob):
                c.bop = None
                c.h_part = None
    t2 = time.perf_counter()
    tree.build_stats = {"leaf_time": t1 - t0, "merge_time": t2 - t1, "build_time": t2 - t0,
                        "n_rebuilt": len(ids)}


def update_after_refinement(tree, refined_leaf_ids):
    """Rebuild only what a refinement invalidated.

    Dirty nodes are the new descendants of every refined leaf plus all of its
    ancestors. Nodes that appear in the mesh without operators (for instance
    from extra level-restriction splits) are picked up too.
    """
    mesh = tree.mesh
    dirty = set()
    for t in refined_leaf_ids:
        node = mesh.nodes.get(t)
        if node is None:
            raise InvalidArgument(f"box {t} is not in the mesh", node_id=t)
        old = tree.ops.get(t)
        if node.is_leaf or (old is not None and not isinstance(old, LeafOperators)):
            raise InvalidArgument(f"box {t} was not a refined leaf", node_id=t)
        dirty.add(t)
        dirty.update(mesh.descendants(t))
        dirty.update(mesh.ancestors(t))
    for t in mesh.nodes:
        if t not in tree.ops:
            dirty.add(t)
            dirty.update(mesh.ancestors(t))
    if not dirty:
        return tree
    _rebuild(tree, dirty)
    return tree


def _require_built(tree, variant):
    if not tree.built:
        raise UnbuiltTree("solver tree has not been built")
    if tree.formulation != variant:
        raise InvalidArgument(f"tree was built with {tree.formulation}, not {variant}")


def _leaf_full(tree, tid, data):
    ops = tree.ops[tid]
    n = tree.n_c
    if ops.variant == "dtn":
        inner = ops.psi @ data
        if ops.z_part is not None:
            inner = inner + ops.z_part
        disc = np.concatenate([data, inner])
    else:
        disc = ops.psi @ data
        if ops.z_part is not None:
            disc = disc + ops.z_part
    return (corner_fill_matrix(n) @ disc).reshape(n, n)


def _sweep_down(tree, root_data):
    mesh = tree.mesh
    values = {}
    stack = [(1, root_data)]
    while stack:
        t, data = stack.pop()
        node = mesh.nodes[t]
        if node.is_leaf:
            values[t] = _leaf_full(tree, t, data)
            continue
        da, db = mergeops.split_down(tree.ops[t], mesh.interface_maps(t), data)
        stack.append((node.children[1], db))
        stack.append((node.children[0], da))
    return SolutionField(mesh, tree.n_c, values)


def solve_dirichlet(tree, f):
    """Solve with Dirichlet data ``f(x, y)`` (callable) or root boundary values (array)."""
    _require_built(tree, "dtn")
    t0 = time.perf_counter()
    if callable(f):
        pts = tree.mesh.boundary_points(1)
        u_b = np.asarray(evaluate(f, pts[:, 0], pts[:, 1]))
    else:
        u_b = np.asarray(f)
    if u_b.shape != (tree.mesh.n_boundary(1),):
        raise InvalidArgument("boundary data has the wrong length")
    sol = _sweep_down(tree, u_b)
    tree.build_stats["solve_time"] = time.perf_counter() - t0
    return sol


def solve_impedance(tree, t):
    """Solve with incoming impedance data.

    ``t`` is an array over the root boundary points or a callable
    ``t(x, y, nx, ny)`` receiving the outward normal.
    """
    _require_built(tree, "iti")
    t0 = time.perf_counter()
    if callable(t):
        pts = tree.mesh.boundary_points(1)
        nrm = tree.mesh.boundary_normals(1)
        data = np.asarray(t(pts[:, 0], pts[:, 1], nrm[:, 0], nrm[:, 1]), dtype=complex)
    else:
        data = np.asarray(t, dtype=complex)
    if data.shape != (tree.mesh.n_boundary(1),):
        raise InvalidArgument("impedance data has the wrong length")
    sol = _sweep_down(tree, data)
    tree.build_stats["solve_time"] = time.perf_counter() - t0
    return sol


def solve(tree, data):
    if tree.formulation == "dtn":
        return solve_dirichlet(tree, data)
    return solve_impedance(tree, data)


def set_body_load(tree, g: Callable):
    """Replace the body load and redo the upward particular-data sweep."""
    if not tree.keep_body_solver:
        raise InvalidArgument("tree was built without keep_body_solver")
    if not tree.built:
        raise UnbuiltTree("solver tree has not been built")
    mesh = tree.mesh
    for t in sorted(mesh.nodes, reverse=True):
        node = mesh.nodes[t]
        ops = tree.ops[t]
        if node.is_leaf:
            grid = build_leaf_grid(node.rect, tree.n_c)
            pts = grid.points[grid.idx_interior]
            s = evaluate(g, pts[:, 0], pts[:, 1])
            ops.z_part, ops.h_part = leafops.leaf_body_load(grid, ops, s)
            continue
        a, b = node.children
        maps = mesh.interface_maps(t)
        ha, hb = tree.ops[a].h_part, tree.ops[b].h_part
        if ops.variant == "dtn":
            ops.w_part, ops.h_part = mergeops.dtn_load_sweep(ops, maps, ha, hb)
        else:
            ops.w_part, ops.b_part, ops.h_part = mergeops.iti_load_sweep(ops, maps, ha, hb)
    return tree


def _nbytes(obj):
    if obj is None:
        return 0
    if isinstance(obj, np.ndarray):
        return obj.nbytes
    if isinstance(obj, dict):
        return sum(_nbytes(v) for v in obj.values())
    if isinstance(obj, (tuple, list)):
        return sum(_nbytes(v) for v in obj)
    return 0


def node_bytes(ops):
    total = 0
    for name in ("psi", "bop", "z_part", "h_part", "w_part", "psi_b", "b_part", "load", "body_solver"):
        total += _nbytes(getattr(ops, name, None))
    return total


def memory_report(tree):
    """Bytes held by stored operators, in total and per binary tree level."""
    if not tree.ops:
        raise UnbuiltTree("solver tree has no operators")
    per_level = {}
    leaves = parents = 0
    for t, ops in tree.ops.items():
        nb = node_bytes(ops)
        lvl = tree.mesh.nodes[t].rect.level
        per_level[lvl] = per_level.get(lvl, 0) + nb
        if isinstance(ops, LeafOperators):
            leaves += nb
        else:
            parents += nb
    return MemoryReport(total=leaves + parents, per_level=dict(sorted(per_level.items())),
                        leaves=leaves, parents=parents)
