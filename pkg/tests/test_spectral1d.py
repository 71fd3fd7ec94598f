import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import chebyshev as C

from hpsadapt.errors import InvalidArgument
from hpsadapt.spectral1d import (barycentric_weights, cheb_coeffs, cheb_eval, cheb_nodes,
                                 diff_matrix, interp_matrix)

intervals = st.tuples(st.floats(-5, 5), st.floats(0.01, 10)).map(lambda t: (t[0], t[0] + t[1]))


@given(st.integers(2, 40), intervals)
def test_nodes_ascending_with_exact_endpoints(n, iv):
    x = cheb_nodes(n, iv).points
    assert x[0] == iv[0] and x[-1] == iv[1]
    assert np.all(np.diff(x) > 0)


def test_nodes_match_cosine_formula():
    n = 9
    x = cheb_nodes(n).points
    assert np.allclose(x, -np.cos(np.pi * np.arange(n) / (n - 1)), atol=1e-15)


@given(st.integers(3, 32), intervals, st.data())
def test_diff_matrix_exact_on_polynomials(n, iv, data):
    deg = data.draw(st.integers(0, n - 1))
    c = np.random.default_rng(deg).standard_normal(deg + 1)
    nodes = cheb_nodes(n, iv)
    a, b = iv
    t = (2 * nodes.points - a - b) / (b - a)
    u = C.chebval(t, c)
    du = C.chebval(t, C.chebder(c)) * 2 / (b - a)
    D = diff_matrix(nodes)
    assert np.allclose(D @ u, du, atol=1e-9 * max(1.0, np.abs(du).max()) * n)


def test_diff_matrix_rows_annihilate_constants():
    D = diff_matrix(cheb_nodes(24, (0.0, 1e-3)))
    assert np.abs(D @ np.ones(24)).max() < 1e-9 * np.abs(D).max()


def test_generic_points_diff_matches_chebyshev():
    nodes = cheb_nodes(10, (-1, 2))
    assert np.allclose(diff_matrix(nodes.points), diff_matrix(nodes), atol=1e-11)


@given(st.integers(2, 30), st.lists(st.floats(-1, 1), min_size=1, max_size=10))
def test_interp_exact_and_partition_of_unity(n, pts):
    nodes = cheb_nodes(n)
    M = interp_matrix(nodes, pts)
    assert np.allclose(M.sum(axis=1), 1.0)
    c = np.arange(1, n + 1, dtype=float) / n
    assert np.allclose(M @ C.chebval(nodes.points, c), C.chebval(np.asarray(pts), c), atol=1e-12)


def test_interp_at_node_is_unit_row():
    nodes = cheb_nodes(7)
    M = interp_matrix(nodes, nodes.points[[0, 3]])
    assert np.array_equal(M, np.eye(7)[[0, 3]])


def test_generic_weights_match_chebyshev_pattern():
    w = barycentric_weights(cheb_nodes(8).points)
    ref = (-1.0) ** np.arange(8)
    ref[[0, -1]] *= 0.5
    assert np.allclose(w / w[1], ref / ref[1])


def test_weights_reject_duplicates():
    with pytest.raises(InvalidArgument):
        barycentric_weights([0.0, 0.5, 0.5])


@given(st.integers(2, 33))
def test_coefficients_round_trip(n):
    rng = np.random.default_rng(n)
    c = rng.standard_normal(n)
    t = cheb_nodes(n).points
    assert np.allclose(cheb_coeffs(C.chebval(t, c)), c, atol=1e-12)
    s = np.linspace(-1, 1, 11)
    assert np.allclose(cheb_eval(c, s), C.chebval(s, c), atol=1e-12)


def test_coefficients_batched_along_axis():
    t = cheb_nodes(6).points
    V = np.stack([t ** 2, t ** 3])
    B = cheb_coeffs(V.T, axis=0)
    assert np.allclose(B[:, 0], [0.5, 0, 0.5, 0, 0, 0])
    assert np.allclose(B[:, 1], [0, 0.75, 0, 0.25, 0, 0])
