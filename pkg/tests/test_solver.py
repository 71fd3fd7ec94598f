import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_poly
from hpsadapt import mergeops
from hpsadapt import solver as hps
from hpsadapt.errors import InvalidArgument, MergeError, PreconditionViolation, UnbuiltTree
from hpsadapt.leafops import PdeOperatorSpec
from hpsadapt.meshtree import Rect, level_restrict, root_tree, uniform_tree
from hpsadapt.oracle import dense_solve
from hpsadapt.problems import catalog

UNIT = Rect(0.0, 1.0, 0.0, 1.0)


def variable_pde():
    return PdeOperatorSpec(c11=lambda x, y: 1 + 0.3 * x * y, c22=lambda x, y: 1.2 + 0.0 * x,
                           c1=lambda x, y: np.sin(x), c2=0.5, c0=lambda x, y: 1 + y,
                           g=lambda x, y: np.exp(x) * np.cos(3 * y))


def bc(x, y):
    return np.sin(2 * x) + np.cosh(y)


def rel(a, b):
    num = sum(np.linalg.norm(a.values[t] - b.values[t]) ** 2 for t in a.leaves())
    den = sum(np.linalg.norm(b.values[t]) ** 2 for t in b.leaves())
    return np.sqrt(num / den)


def nonuniform_mesh(n_c=8):
    t = uniform_tree(UNIT, n_c, 1)
    t.split_leaf(t.leaves()[0])
    level_restrict(t)
    return t


@pytest.mark.parametrize("mesh_fn", [lambda: uniform_tree(UNIT, 8, 1), lambda: uniform_tree(UNIT, 8, 2),
                                     nonuniform_mesh])
def test_dtn_matches_dense_oracle(mesh_fn):
    mesh = mesh_fn()
    pde = variable_pde()
    sol = hps.solve(hps.build(mesh, pde), bc)
    assert rel(sol, dense_solve(mesh, pde, "dtn", bc)) < 1e-10


def test_iti_matches_dense_oracle():
    p = catalog("helmholtz_constant", omega=8.0)
    mesh = uniform_tree(p.domain, 12, 1)
    sol = hps.solve(hps.build(mesh, p.pde, "iti", eta=p.eta), p.impedance)
    ref = dense_solve(mesh, p.pde, "iti", p.impedance, eta=p.eta)
    assert rel(sol, ref) < 1e-10


@given(st.integers(0, 10 ** 6))
@settings(max_examples=10)
def test_merged_solver_exact_for_polynomials(seed):
    n = 8
    u = random_poly(np.random.default_rng(seed), n - 3)
    pde = PdeOperatorSpec(g=lambda x, y: -u.d(2, 0)(x, y) - u.d(0, 2)(x, y))
    mesh = nonuniform_mesh(n)
    sol = hps.solve(hps.build(mesh, pde), u)
    for t in sol.leaves():
        p = sol.points(t)
        exact = u(p[:, 0], p[:, 1]).reshape(n, n)
        assert np.allclose(sol.values[t], exact, atol=1e-9 * max(1, np.abs(exact).max()))


def test_update_after_refinement_equals_rebuild():
    pde = variable_pde()
    mesh = uniform_tree(UNIT, 8, 1)
    tree = hps.build(mesh, pde)
    refined = [mesh.leaves()[2]]
    mesh.split_leaf(refined[0])
    extra = level_restrict(mesh)
    hps.update_after_refinement(tree, refined + extra)
    fresh = hps.build(mesh.copy(), pde)
    assert rel(hps.solve(tree, bc), hps.solve(fresh, bc)) < 1e-12


def test_update_needs_retained_operators():
    mesh = uniform_tree(UNIT, 6, 1)
    tree = hps.build(mesh, PdeOperatorSpec(), retain_for_update=False)
    mesh.split_leaf(mesh.leaves()[0])
    with pytest.raises(PreconditionViolation):
        hps.update_after_refinement(tree, [4])


def test_set_body_load_equals_rebuild():
    mesh = uniform_tree(UNIT, 8, 1)
    pde = variable_pde()
    tree = hps.build(mesh, pde, keep_body_solver=True)

    def g2(x, y):
        return x ** 2 - y

    hps.set_body_load(tree, g2)
    fresh = hps.build(mesh, PdeOperatorSpec(c11=pde.c11, c22=pde.c22, c1=pde.c1, c2=pde.c2,
                                            c0=pde.c0, g=g2))
    assert rel(hps.solve(tree, bc), hps.solve(fresh, bc)) < 1e-12


def test_threads_do_not_change_results():
    mesh = uniform_tree(UNIT, 8, 2)
    pde = variable_pde()
    a = hps.solve(hps.build(mesh, pde, threads=1), bc)
    b = hps.solve(hps.build(mesh, pde, threads=3), bc)
    assert all(np.array_equal(a.values[t], b.values[t]) for t in a.leaves())


def test_evaluate_interpolates_inside_leaves():
    u = random_poly(np.random.default_rng(1), 4)
    pde = PdeOperatorSpec(g=lambda x, y: -u.d(2, 0)(x, y) - u.d(0, 2)(x, y))
    sol = hps.solve(hps.build(uniform_tree(UNIT, 8, 1), pde), u)
    x = np.array([0.13, 0.77, 0.5])
    y = np.array([0.91, 0.21, 0.5])
    assert np.allclose(sol.evaluate(x, y), u(x, y), atol=1e-10)


def test_single_leaf_memory_accounting():
    tree = hps.build(root_tree(UNIT, 16), PdeOperatorSpec())
    rep = hps.memory_report(tree)
    m = 4 * 16 - 8
    assert rep.total == 8 * (m * 14 * 14 + m * m)
    assert rep.parents == 0


def test_errors():
    mesh = uniform_tree(UNIT, 6, 1)
    with pytest.raises(InvalidArgument):
        hps.build(mesh, PdeOperatorSpec(), "bogus")
    with pytest.raises(InvalidArgument):
        hps.build(mesh, PdeOperatorSpec(), "iti")
    tree = hps.build(mesh, PdeOperatorSpec())
    with pytest.raises(InvalidArgument):
        hps.solve_impedance(tree, lambda x, y, nx, ny: 0 * x)
    with pytest.raises(InvalidArgument):
        hps.solve_dirichlet(tree, np.zeros(3))
    empty = hps.SolverTree(mesh, PdeOperatorSpec())
    with pytest.raises(UnbuiltTree):
        hps.solve_dirichlet(empty, bc)
    with pytest.raises(UnbuiltTree):
        hps.memory_report(empty)


def test_merge_rejects_mixed_formulations():
    mesh = uniform_tree(UNIT, 6, 1)
    a = hps.build(mesh, PdeOperatorSpec())
    b = hps.build(mesh, PdeOperatorSpec(c0=-1.0), "iti", eta=1.0)
    with pytest.raises(MergeError):
        mergeops.merge(a.ops[2], b.ops[3], mesh.interface_maps(1))


def test_dtn_children_agree_on_interface_flux():
    # the merged interface values make both children report the same flux
    n = 10
    u = random_poly(np.random.default_rng(7), n - 3)
    pde = PdeOperatorSpec(g=lambda x, y: -u.d(2, 0)(x, y) - u.d(0, 2)(x, y))
    mesh = uniform_tree(UNIT, n, 1)
    tree = hps.build(mesh, pde)
    pts = mesh.boundary_points(1)
    ua, ub = mergeops.split_down(tree.ops[1], mesh.interface_maps(1), u(pts[:, 0], pts[:, 1]))
    maps = mesh.interface_maps(1)
    fa = tree.ops[2].T @ ua + tree.ops[2].h_part
    fb = tree.ops[3].T @ ub + tree.ops[3].h_part
    assert np.allclose(fa[maps.i3a], fb[maps.i3b], atol=1e-9)
