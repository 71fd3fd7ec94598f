"""Adaptive meshing and the refine/solve/compare driver.

Three ingredients:

* :func:`adaptive_interp_mesh` splits boxes until every input function is
  resolved by the tensor Chebyshev interpolant of the box (tested against the
  four quarter boxes).
* :func:`leaf_indicator` / :func:`mark_leaves` look at the last Chebyshev
  coefficients of the computed solution along interior grid lines.
* :func:`convergence_error` compares solutions before and after a refinement.

:func:`adaptive_solve` runs them in a loop until two consecutive solutions
agree to the requested tolerance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import solver as hps
from .errors import DegenerateField, EvaluationError, InvalidArgument
from .leafops import grid_index
from .meshtree import Rect, level_restrict, root_tree, uniform_tree
from .spectral1d import cheb_coeffs, cheb_nodes, interp_matrix


# -- adaptive interpolation ----------------------------------------------------

@lru_cache(maxsize=None)
def _half_maps(n_c):
    ref = cheb_nodes(n_c)
    lo = interp_matrix(ref, cheb_nodes(n_c, (-1.0, 0.0)).points)
    hi = interp_matrix(ref, cheb_nodes(n_c, (0.0, 1.0)).points)
    return lo, hi


def _tensor_points(rects, n_c):
    """(len(rects), n_c, n_c) arrays of x and y on each rect's tensor grid."""
    t = cheb_nodes(n_c).points
    r = np.array([[q.x0, q.x1, q.y0, q.y1] for q in rects])
    xs = 0.5 * (r[:, 0:1] + r[:, 1:2]) + 0.5 * (r[:, 1:2] - r[:, 0:1]) * t
    ys = 0.5 * (r[:, 2:3] + r[:, 3:4]) + 0.5 * (r[:, 3:4] - r[:, 2:3]) * t
    xs[:, 0], xs[:, -1] = r[:, 0], r[:, 1]
    ys[:, 0], ys[:, -1] = r[:, 2], r[:, 3]
    X = np.broadcast_to(xs[:, :, None], (len(rects), n_c, n_c))
    Y = np.broadcast_to(ys[:, None, :], (len(rects), n_c, n_c))
    return X, Y


def _quarters(rect):
    xm = 0.5 * (rect.x0 + rect.x1)
    ym = 0.5 * (rect.y0 + rect.y1)
    # order: (lo x, lo y), (lo x, hi y), (hi x, lo y), (hi x, hi y)
    return [Rect(rect.x0, xm, rect.y0, ym), Rect(rect.x0, xm, ym, rect.y1),
            Rect(xm, rect.x1, rect.y0, ym), Rect(xm, rect.x1, ym, rect.y1)]


def _sample(func, X, Y):
    v = np.asarray(func(X, Y))
    if v.shape != X.shape:
        v = np.broadcast_to(v, X.shape)
    return v


def _sampled_max(func, rects, n_c):
    """Largest finite |func| on the box grids and their quarter grids."""
    quads = [q for r in rects for q in _quarters(r)]
    best = 0.0
    for X, Y in (_tensor_points(rects, n_c), _tensor_points(quads, n_c)):
        with np.errstate(all="ignore"):
            v = np.abs(_sample(func, X, Y))
        v = v[np.isfinite(v)]
        if v.size:
            best = max(best, float(v.max()))
    return best


def interp_errors(func, rects, n_c, on_nonfinite="error", node_ids=None, floor=0.0, scale=0.0):
    """Relative interpolation error of ``func`` for each rect (NaN when skipped).

    The denominator is ``max(||f||, floor * scale * sqrt(#points))``: with a
    positive ``floor`` a box whose values are negligible next to ``scale``
    is measured in absolute terms instead of relative to its own tiny values.
    """
    lo, hi = _half_maps(n_c)
    X, Y = _tensor_points(rects, n_c)
    quads = [q for r in rects for q in _quarters(r)]
    Xq, Yq = _tensor_points(quads, n_c)
    with np.errstate(all="ignore"):
        F = _sample(func, X, Y)
        K = _sample(func, Xq, Yq).reshape(len(rects), 4, n_c, n_c)
    bad = ~(np.isfinite(F).all(axis=(1, 2)) & np.isfinite(K).all(axis=(1, 2, 3)))
    if bad.any() and on_nonfinite == "error":
        k = int(np.flatnonzero(bad)[0])
        pts = np.concatenate([np.stack([X[k], Y[k]], -1).reshape(-1, 2),
                              np.stack([Xq[4 * k:4 * k + 4], Yq[4 * k:4 * k + 4]], -1).reshape(-1, 2)])
        vals = np.concatenate([F[k].ravel(), K[k].ravel()])
        p = pts[np.flatnonzero(~np.isfinite(vals))[0]]
        nid = None if node_ids is None else node_ids[k]
        raise EvaluationError(f"non-finite function value at ({float(p[0])!r}, {float(p[1])!r})",
                              node_id=nid, stage="interp")
    with np.errstate(all="ignore"):
        approx = np.stack([lo @ F @ lo.T, lo @ F @ hi.T, hi @ F @ lo.T, hi @ F @ hi.T], axis=1)
        num = np.sqrt(np.sum(np.abs(K - approx) ** 2, axis=(1, 2, 3)))
        den = np.sqrt(np.sum(np.abs(K) ** 2, axis=(1, 2, 3)))
        if floor > 0:
            den = np.maximum(den, floor * scale * np.sqrt(K[0].size))
        err = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num <= 1e-300, 0.0, np.inf))
    err[bad] = np.nan
    return err


def adaptive_interp_mesh(funcs, eps, n_c, domain, seed_mesh=None, seed_depth=0,
                         max_depth=30, on_nonfinite="error", floor=1e-12):
    """Split boxes until every function passes the interpolation test.

    A box is split (into quarters) when the relative error of interpolating
    any function from the box grid to the four quarter grids exceeds ``eps``.
    With ``on_nonfinite='ignore'`` a function that cannot be sampled on a box
    (infinite or NaN values) does not drive refinement of that box.

    ``floor > 0`` stops refinement where a function is below ``floor`` times
    the largest magnitude sampled so far (see :func:`interp_errors`). Without
    it a rapidly decaying function (a narrow Gaussian, say) is refined down
    to ``max_depth`` in regions where it is below 1e-100; ``floor=0`` gives
    the purely relative test.
    """
    if not eps > 0:
        raise InvalidArgument(f"tolerance must be positive, got {eps}")
    funcs = [f for f in funcs if f is not None]
    if not funcs:
        raise InvalidArgument("need at least one function")
    if on_nonfinite not in ("error", "ignore"):
        raise InvalidArgument(f"unknown non-finite policy {on_nonfinite!r}")
    if seed_mesh is not None:
        tree = seed_mesh.copy()
    elif seed_depth:
        tree = uniform_tree(domain, n_c, seed_depth, max_depth=max_depth)
    else:
        tree = root_tree(domain, n_c, max_depth=max_depth)
    if not floor >= 0:
        raise InvalidArgument(f"floor must be non-negative, got {floor}")
    varying = [f for f in funcs if callable(f)]
    scales = [0.0] * len(varying)
    todo = tree.leaves()
    while todo and varying:
        rects = [tree.nodes[t].rect for t in todo]
        split = np.zeros(len(todo), dtype=bool)
        for k, f in enumerate(varying):
            if floor > 0:
                scales[k] = max(scales[k], _sampled_max(f, rects, n_c))
            e = interp_errors(f, rects, n_c, on_nonfinite, node_ids=todo,
                              floor=floor, scale=scales[k])
            split |= e > eps  # NaN (skipped) compares False
        nxt = []
        for t, s in zip(todo, split):
            if s:
                nxt.extend(tree.split_leaf(t))
        todo = nxt
    return tree


# -- refinement indicator ------------------------------------------------------

def leaf_indicator(values, n_c=None):
    """Tail of the directional Chebyshev coefficients on one leaf.

    ``values`` is the (n_c, n_c) tensor field, ``values[i, j]`` at (x_i, y_j).
    Only interior grid lines are used so the (extrapolated) corners never
    enter.
    """
    V = np.asarray(values)
    n = V.shape[0] if n_c is None else n_c
    V = V.reshape(n, n)
    if not np.all(np.isfinite(V)):
        raise InvalidArgument("indicator needs a finite field")
    B = cheb_coeffs(V[1:-1, :], axis=1)  # along y on lines x = x_i
    C = cheb_coeffs(V[:, 1:-1], axis=0)  # along x on lines y = y_j
    s_y = np.max(np.abs(B[:, n - 2]) + np.abs(B[:, n - 1] - B[:, n - 3]))
    s_x = np.max(np.abs(C[n - 2, :]) + np.abs(C[n - 1, :] - C[n - 3, :]))
    return float(max(s_x, s_y))


@dataclass
class RefinementReport:
    S: dict
    S_div: float
    marked: list
    iteration: int = 0


def rounding_level(solution):
    """Indicator values at or below this are coefficient round-off, not a tail."""
    peak = max(float(np.abs(v).max()) for v in solution.values.values())
    return 64 * np.finfo(float).eps * solution.n_c * peak


def mark_leaves(solution, tree=None, iteration=0):
    """Mark every leaf whose indicator exceeds a quarter of the largest one.

    Leaves whose indicator is at round-off level (see :func:`rounding_level`)
    are never marked, so a field that is polynomial on every leaf marks
    nothing. The level scales with the field, which keeps the marked set
    invariant under global scaling.
    """
    if not solution.values:
        raise InvalidArgument("solution has no leaves")
    S = {t: leaf_indicator(v, solution.n_c) for t, v in solution.values.items()}
    S_div = 0.25 * max(S.values())
    cut = max(S_div, rounding_level(solution))
    marked = sorted(t for t, s in S.items() if s > cut)
    return RefinementReport(S, S_div, marked, iteration)


# -- convergence check ---------------------------------------------------------

@dataclass
class ConvergenceReport:
    per_leaf: dict
    E_rel: float
    converged: bool
    eps: Optional[float] = None


def _disc_points(rect, n_c):
    X, Y = _tensor_points([rect], n_c)
    d = grid_index(n_c).disc
    return X[0].ravel()[d], Y[0].ravel()[d]


def convergence_error(old_solution, new_solution, old_tree=None, new_tree=None, eps=None):
    """Mean over old leaves of |old - new| / |old + new| on the discretization points.

    Leaves refined in the meantime compare against the new field interpolated
    back to the old points.
    """
    n_c = old_solution.n_c
    d = grid_index(n_c).disc
    per = {}
    for t in old_solution.leaves():
        u_old = old_solution.values[t].ravel()[d]
        if t in new_solution.values:
            u_new = new_solution.values[t].ravel()[d]
        else:
            x, y = _disc_points(old_solution.rect(t), n_c)
            u_new = new_solution.evaluate(x, y)
        num = np.linalg.norm(u_old - u_new)
        den = np.linalg.norm(u_old + u_new)
        if den < 1e-300:
            if num > 0:
                raise DegenerateField("old and new fields cancel on a leaf", node_id=t)
            per[t] = 0.0
        else:
            per[t] = float(num / den)
    E = float(np.mean(list(per.values())))
    return ConvergenceReport(per, E, eps is not None and E <= eps, eps)


# -- driver ----------------------------------------------------------------------

@dataclass
class AdaptiveOptions:
    seed_depth: int = 0
    max_iterations: int = 20
    max_depth: int = 30
    eta: Optional[complex] = None
    on_nonfinite: str = "error"
    interp_floor: float = 1e-12
    retain_for_update: bool = True  # False: rebuild from scratch after each refinement
    threads: int = 1


@dataclass
class AdaptiveResult:
    tree: "hps.SolverTree"
    solution: "hps.SolutionField"
    converged: bool
    N_i: int
    N_f: int
    T_i: float
    T_f: float
    T_s: float
    R: int
    E_conv: float
    iterations: list = field(default_factory=list)


def _snapshot(tree):
    return hps.SolverTree(tree.mesh.copy(), tree.pde, tree.formulation, tree.eta,
                          tree.retain_for_update, tree.keep_body_solver, tree.threads,
                          ops=dict(tree.ops), build_stats=dict(tree.build_stats))


def interp_functions(pde):
    """Functions the initial mesh must resolve: all coefficients and the body load."""
    return [getattr(pde, k) for k in ("c11", "c12", "c22", "c1", "c2", "c0", "g")
            if getattr(pde, k) is not None]


def adaptive_solve(pde, bc, eps, n_c, domain, formulation="dtn", options=None, log=None):
    """Adaptive mesh + direct solver to tolerance ``eps``.

    On convergence the returned tree and field are the ones that were
    *verified*: the solution before the last refinement, whose agreement with
    the refined solution is at most ``eps``. If the iteration cap is reached
    the latest tree and field are returned with ``converged=False``.
    """
    opt = options or AdaptiveOptions()
    if not eps > 0:
        raise InvalidArgument(f"tolerance must be positive, got {eps}")
    t0 = time.perf_counter()
    mesh = adaptive_interp_mesh(interp_functions(pde) or [1.0], eps, n_c, domain,
                                seed_depth=opt.seed_depth, max_depth=opt.max_depth,
                                on_nonfinite=opt.on_nonfinite, floor=opt.interp_floor)
    level_restrict(mesh)
    T_i = time.perf_counter() - t0
    N_i = mesh.n_leaves()

    t1 = time.perf_counter()
    tree = hps.build(mesh, pde, formulation, eta=opt.eta,
                     retain_for_update=opt.retain_for_update, threads=opt.threads)
    sol_old = hps.solve(tree, bc)
    iterations = []
    converged = False
    E = float("nan")
    final_tree, final_sol = tree, sol_old
    for it in range(1, opt.max_iterations + 1):
        rep = mark_leaves(sol_old, iteration=it)
        if not rep.marked:
            # nothing to refine: the field is resolved to rounding on every leaf
            converged, E = True, 0.0
            row = {"iter": it, "n_leaves": mesh.n_leaves(), "n_marked": 0,
                   "S_div": rep.S_div, "E_rel": 0.0}
            iterations.append(row)
            if log is not None:
                log(row)
            final_tree, final_sol = tree, sol_old
            break
        snap = _snapshot(tree)
        for t in rep.marked:
            mesh.split_leaf(t)
        extra = level_restrict(mesh)
        if opt.retain_for_update:
            hps.update_after_refinement(tree, rep.marked + extra)
        else:
            tree = hps.build(mesh, pde, formulation, eta=opt.eta, retain_for_update=False,
                             threads=opt.threads)
        sol_new = hps.solve(tree, bc)
        conv = convergence_error(sol_old, sol_new, eps=eps)
        E = conv.E_rel
        row = {"iter": it, "n_leaves": mesh.n_leaves(), "n_marked": len(rep.marked),
               "S_div": rep.S_div, "E_rel": E}
        iterations.append(row)
        if log is not None:
            log(row)
        if conv.converged:
            converged = True
            final_tree, final_sol = snap, sol_old
            break
        sol_old = sol_new
        final_tree, final_sol = tree, sol_new
    T_f = time.perf_counter() - t1

    ts = time.perf_counter()
    final_sol = hps.solve(final_tree, bc)
    T_s = time.perf_counter() - ts
    R = hps.memory_report(final_tree).total
    return AdaptiveResult(final_tree, final_sol, converged, N_i, final_tree.mesh.n_leaves(),
                          T_i, T_f, T_s, R, E, iterations)
