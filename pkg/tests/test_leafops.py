import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_poly
from hpsadapt.errors import InvalidArgument
from hpsadapt.leafops import (PdeOperatorSpec, build_leaf_dtn, build_leaf_grid, build_leaf_iti,
                              corner_fill_matrix, disc_to_full, flux_matrix, grid_index,
                              outward_flux_matrix)
from hpsadapt.meshtree import Rect

RECT = Rect(0.2, 0.7, -0.3, 0.1)


def apply_operator(u, c11=1.0, c22=1.0, c1=0.0, c2=0.0, c0=0.0):
    def g(x, y):
        return (-c11 * u.d(2, 0)(x, y) - c22 * u.d(0, 2)(x, y) + c1 * u.d(1, 0)(x, y)
                + c2 * u.d(0, 1)(x, y) + c0 * u(x, y))
    return g


def test_grid_index_partition():
    for n in (4, 5, 8):
        idx = grid_index(n)
        allpts = np.concatenate([idx.boundary, idx.interior, idx.corners])
        assert sorted(allpts) == list(range(n * n))
        assert len(idx.boundary) == 4 * n - 8
        assert np.array_equal(idx.disc, np.concatenate([idx.boundary, idx.interior]))


def test_boundary_ordering_is_s_e_n_w_ascending():
    g = build_leaf_grid(Rect(0, 1, 0, 1), 6)
    p = g.points[grid_index(6).boundary]
    m = 4
    s, e, n, w = p[:m], p[m:2 * m], p[2 * m:3 * m], p[3 * m:]
    assert np.all(s[:, 1] == 0) and np.all(np.diff(s[:, 0]) > 0)
    assert np.all(e[:, 0] == 1) and np.all(np.diff(e[:, 1]) > 0)
    assert np.all(n[:, 1] == 1) and np.all(np.diff(n[:, 0]) > 0)
    assert np.all(w[:, 0] == 0) and np.all(np.diff(w[:, 1]) > 0)


@given(st.integers(5, 16), st.integers(0, 10 ** 6))
def test_corner_fill_exact_for_degree_nc_minus_3(n, seed):
    u = random_poly(np.random.default_rng(seed), n - 3)
    g = build_leaf_grid(RECT, n)
    full = u(g.points[:, 0], g.points[:, 1])
    filled = disc_to_full(n, full[grid_index(n).disc]).ravel()
    assert np.allclose(filled, full, atol=1e-10 * np.abs(full).max())


def test_corner_fill_is_identity_off_corners():
    n = 7
    E = corner_fill_matrix(n)
    d = grid_index(n).disc
    assert np.array_equal(E[d], np.eye(n * n - 4))


def test_flux_sign_conventions():
    g = build_leaf_grid(Rect(0, 1, 0, 1), 6)
    x, y = g.points[:, 0], g.points[:, 1]
    u = 2 * x + 3 * y
    fx = flux_matrix(g) @ u
    fo = outward_flux_matrix(g) @ u
    m = 4
    assert np.allclose(fx, np.repeat([3, 2, 3, 2], m))
    assert np.allclose(fo, np.repeat([-3, 2, 3, -2], m))


@given(st.sampled_from([6, 8, 10]), st.integers(0, 10 ** 6))
def test_dtn_leaf_reproduces_polynomials_with_load(n, seed):
    u = random_poly(np.random.default_rng(seed), n - 3)
    coeffs = dict(c11=1.3, c22=0.7, c1=0.4, c2=-1.1, c0=2.0)
    pde = PdeOperatorSpec(**coeffs, g=apply_operator(u, **coeffs))
    g = build_leaf_grid(RECT, n)
    ops = build_leaf_dtn(g, pde)
    idx = grid_index(n)
    pts = g.points
    ub = u(pts[idx.boundary, 0], pts[idx.boundary, 1])
    ui = ops.psi @ ub + ops.z_part
    exact_i = u(pts[idx.interior, 0], pts[idx.interior, 1])
    scale = np.abs(exact_i).max()
    assert np.allclose(ui, exact_i, atol=1e-9 * scale)
    flux = ops.T @ ub + ops.h_part
    exact_flux = flux_matrix(g) @ u(pts[:, 0], pts[:, 1])
    assert np.allclose(flux, exact_flux, atol=1e-8 * max(1, np.abs(exact_flux).max()))


def test_iti_leaf_outgoing_data_matches_exact():
    n, eta = 10, 3.0
    u = random_poly(np.random.default_rng(5), n - 3)
    pde = PdeOperatorSpec(c0=-4.0, g=apply_operator(u, c0=-4.0))
    g = build_leaf_grid(RECT, n)
    ops = build_leaf_iti(g, pde, eta)
    idx = grid_index(n)
    full = u(g.points[:, 0], g.points[:, 1])
    dn = outward_flux_matrix(g) @ full
    ub = full[idx.boundary]
    t_in = dn + 1j * eta * ub
    t_out = dn - 1j * eta * ub
    assert np.allclose(ops.R @ t_in + ops.h_part, t_out, atol=1e-9)
    assert np.allclose(ops.psi @ t_in + ops.z_part, full[idx.disc], atol=1e-10)


def test_iti_rejects_purely_imaginary_eta():
    g = build_leaf_grid(RECT, 6)
    with pytest.raises(InvalidArgument):
        build_leaf_iti(g, PdeOperatorSpec(), 2j)


def test_no_body_load_means_no_particular_data():
    ops = build_leaf_dtn(build_leaf_grid(RECT, 6), PdeOperatorSpec())
    assert ops.z_part is None and ops.h_part is None


def test_dtn_of_laplace_is_symmetric_on_square():
    # on a square leaf the Laplace DtN map is symmetric under the 90-degree rotation
    g = build_leaf_grid(Rect(0, 1, 0, 1), 8)
    T = build_leaf_dtn(g, PdeOperatorSpec()).T
    m = 6
    # constant boundary data gives zero flux
    assert np.abs(T @ np.ones(4 * m)).max() < 1e-10
