"""One-dimensional Chebyshev primitives.

Second-kind (Chebyshev-Lobatto) nodes, differentiation matrices, barycentric
interpolation matrices and the values-to-coefficients transform. Everything
is small and dense (n <= 32 in practice) so plain matrices are used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class NodeSet1D:
    points: np.ndarray
    interval: tuple

    def __len__(self):
        return len(self.points)


def _readonly(a):
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def _reference_nodes(n):
    # sin form keeps the set exactly symmetric about 0
    k = np.arange(n)
    t = np.sin(np.pi * (2 * k - (n - 1)) / (2 * (n - 1)))
    t[0], t[-1] = -1.0, 1.0
    return _readonly(t)


def cheb_nodes(n, interval=(-1.0, 1.0)):
    """Chebyshev points of the second kind on ``interval``, ascending."""
    a, b = float(interval[0]), float(interval[1])
    if n < 2:
        raise InvalidArgument(f"need at least 2 nodes, got n={n}")
    if not a < b:
        raise InvalidArgument(f"empty interval [{a}, {b}]")
    t = _reference_nodes(n)
    x = 0.5 * (a + b) + 0.5 * (b - a) * t
    x[0], x[-1] = a, b
    return NodeSet1D(points=x, interval=(a, b))


def _as_points(nodes):
    if isinstance(nodes, NodeSet1D):
        return nodes.points
    return np.asarray(nodes, dtype=float)


def barycentric_weights(points):
    """Generic barycentric weights 1/prod_{j!=k}(x_k - x_j), rescaled to max 1."""
    x = _as_points(points)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    if np.any(diff == 0.0):
        raise InvalidArgument("interpolation nodes must be pairwise distinct")
    # scale by the interval length first so the product neither over- nor underflows
    scale = (x.max() - x.min()) / 4.0 if len(x) > 1 else 1.0
    w = 1.0 / np.prod(diff / scale, axis=1)
    return w / np.abs(w).max()


@lru_cache(maxsize=None)
def _reference_diff(n):
    t = _reference_nodes(n)
    # closed-form weights for second-kind nodes: (-1)^k, halved at the ends
    w = (-1.0) ** np.arange(n)
    w[0] *= 0.5
    w[-1] *= 0.5
    D = _diff_from_weights(t, w)
    return _readonly(D)


def _diff_from_weights(x, w):
    n = len(x)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    # negative-sum trick: rows annihilate constants to rounding
    D[np.arange(n), np.arange(n)] = -D.sum(axis=1)
    return D


def diff_matrix(nodes):
    """Spectral differentiation matrix on ``nodes``.

    For a :class:`NodeSet1D` of Chebyshev points the cached reference matrix
    is rescaled by 2/(b-a); arbitrary distinct points use generic weights.
    """
    if isinstance(nodes, NodeSet1D):
        a, b = nodes.interval
        return _reference_diff(len(nodes)) * (2.0 / (b - a))
    x = _as_points(nodes)
    return _diff_from_weights(x, barycentric_weights(x))


def interp_matrix(src, dst):
    """Barycentric Lagrange interpolation matrix from ``src`` nodes to ``dst`` points.

    Rows sum to one; a destination that coincides with a source node gets the
    corresponding unit row.
    """
    x = _as_points(src)
    y = np.atleast_1d(np.asarray(dst, dtype=float))
    if isinstance(src, NodeSet1D):
        n = len(x)
        w = (-1.0) ** np.arange(n)
        w[0] *= 0.5
        w[-1] *= 0.5
    else:
        w = barycentric_weights(x)
    diff = y[:, None] - x[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    M = w[None, :] / diff
    M /= M.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if hit.any():
        M[hit] = exact[hit].astype(float)
    return M


@lru_cache(maxsize=None)
def _coeff_matrix(n):
    # discrete cosine transform of type I written as a matrix; entry [m, k]
    k = np.arange(n)
    theta = np.pi - np.pi * k / (n - 1)  # ascending nodes t_k = cos(theta_k)
    m = np.arange(n)
    C = np.cos(np.outer(m, theta)) * (2.0 / (n - 1))
    C[:, 0] *= 0.5
    C[:, -1] *= 0.5
    C[0, :] *= 0.5
    C[-1, :] *= 0.5
    return _readonly(C)


def cheb_coeffs(values, axis=-1):
    """Chebyshev coefficients of the interpolant through second-kind samples.

    Coefficient of T_k is stored at index k. Works along ``axis`` of a batch.
    """
    v = np.asarray(values)
    n = v.shape[axis]
    if n < 2:
        raise InvalidArgument(f"need at least 2 samples, got {n}")
    C = _coeff_matrix(n)
    v = np.moveaxis(v, axis, -1)
    out = v @ C.T
    return np.moveaxis(out, -1, axis)


def cheb_eval(coeffs, t):
    """Evaluate a Chebyshev series on [-1, 1] (used by the round-trip checks)."""
    return np.polynomial.chebyshev.chebval(np.asarray(t), np.asarray(coeffs))
