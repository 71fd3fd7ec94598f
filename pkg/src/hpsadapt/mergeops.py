"""Merging two sibling boxes into their parent.

Both merges work on a *master* interface discretization: the coarser panel
of every interface segment (see :class:`~hpsadapt.meshtree.InterfaceMaps`).
For matching panels all interpolation maps are identities and the formulas
reduce to the classic same-level merge.

DtN merge (fixed-direction fluxes, so flux continuity is plain equality)::

    S   = Ra T33a Pa - Rb T33b Pb
    Psi = S^-1 [-Ra T31a | Rb T32b]
    T   = diag(T11a, T22b) + [T13a Pa; T23b Pb] Psi
    w   = S^-1 (Rb h3b - Ra h3a)
    h   = [T13a Pa; T23b Pb] w + [h1a; h2b]

ItI merge: with opposite normals the incoming data on one side is minus the
outgoing data on the other, t3a = -g3b and t3b = -g3a. On the master points
(tilde = sandwiched between R and P)::

    W = I - R~33b R~33a
    a = W^-1 (R~33b R~31a t1 - R~32b t2 + R~33b h~3a - h~3b)
    b = -R~31a t1 - R~33a a - h~3a

where a and b are the incoming data of alpha and beta on the interface.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _linalg
from .errors import MergeError


@dataclass
class NodeOperators:
    """Operators of a parent box.

    ``psi`` maps parent boundary data to the interface unknowns on the master
    points (DtN: values u3; ItI: alpha's incoming data a). ItI additionally
    stores ``psi_b`` for beta's incoming data b. ``w_part``/``b_part`` are the
    particular (body-load) parts of those interface vectors, ``h_part`` the
    outgoing particular data on the parent boundary. ``load`` holds the small
    operators needed to redo the body-load sweep for a new right-hand side.
    """

    variant: str
    psi: np.ndarray
    bop: Optional[np.ndarray]
    w_part: Optional[np.ndarray] = None
    h_part: Optional[np.ndarray] = None
    psi_b: Optional[np.ndarray] = None
    b_part: Optional[np.ndarray] = None
    load: Optional[dict] = field(default=None, repr=False)

    @property
    def T(self):
        return self.bop

    @property
    def R(self):
        return self.bop


def _left(M, A):
    """M @ A with ``None`` meaning identity."""
    return A if M is None else M @ A


def _right(A, M):
    return A if M is None else A @ M


def _check_dims(A, maps, side):
    n = A.shape[0]
    own = len(maps.i1) + len(maps.i3a) if side == "a" else len(maps.i2) + len(maps.i3b)
    if n != own:
        raise MergeError(f"child {side} operator has size {n}, interface maps expect {own}")


def _dtn_load(K, Q, maps, ha, hb):
    if ha is None and hb is None:
        return None, None
    dt = np.result_type(K, *(v for v in (ha, hb) if v is not None))
    rhs = np.zeros(maps.m, dt)
    if hb is not None:
        rhs += _left(maps.rb, hb[maps.i3b])
    if ha is not None:
        rhs -= _left(maps.ra, ha[maps.i3a])
    w = K @ rhs
    h = (Q @ w).astype(dt)
    n1 = len(maps.i1)
    if ha is not None:
        h[:n1] += ha[maps.i1]
    if hb is not None:
        h[n1:] += hb[maps.i2]
    return w, h


def merge_dtn(ops_a, ops_b, maps, node_id=None, keep_load_ops=False):
    """General DtN merge; handles both matching and one-level-mismatched interfaces."""
    Ta, Tb = ops_a.bop, ops_b.bop
    _check_dims(Ta, maps, "a")
    _check_dims(Tb, maps, "b")
    i1, i2, i3a, i3b = maps.i1, maps.i2, maps.i3a, maps.i3b
    pa, ra, pb, rb = maps.pa, maps.ra, maps.pb, maps.rb
    S = _left(ra, _right(Ta[np.ix_(i3a, i3a)], pa)) - _left(rb, _right(Tb[np.ix_(i3b, i3b)], pb))
    fac = _linalg.factor(S, MergeError, "interface system singular (artificial resonance? try ItI)",
                         node_id=node_id, stage="merge")
    rhs = np.hstack([-_left(ra, Ta[np.ix_(i3a, i1)]), _left(rb, Tb[np.ix_(i3b, i2)])])
    psi = _linalg.solve(fac, rhs)
    Q = np.vstack([_right(Ta[np.ix_(i1, i3a)], pa), _right(Tb[np.ix_(i2, i3b)], pb)])
    n1 = len(i1)
    T = Q @ psi
    T[:n1, :n1] += Ta[np.ix_(i1, i1)]
    T[n1:, n1:] += Tb[np.ix_(i2, i2)]
    out = NodeOperators("dtn", psi=psi, bop=T)
    if ops_a.h_part is not None or ops_b.h_part is not None or keep_load_ops:
        K = _linalg.solve(fac, np.eye(maps.m, dtype=S.dtype))
        out.w_part, out.h_part = _dtn_load(K, Q, maps, ops_a.h_part, ops_b.h_part)
        if keep_load_ops:
            out.load = {"K": K, "Q": Q}
    return out


def merge_dtn_nonuniform(ops_a, ops_b, maps, L_2t1, L_1t2, node_id=None, keep_load_ops=False):
    """DtN merge with beta one level finer: beta's interface sees L_1t2, reports through L_2t1."""
    maps = dataclasses.replace(maps, pb=L_1t2, rb=L_2t1)
    return merge_dtn(ops_a, ops_b, maps, node_id=node_id, keep_load_ops=keep_load_ops)


def merge_dtn_bodyload(ops_a, ops_b, maps, node_id=None):
    """Same as :func:`merge_dtn`; kept as a named entry point for the body-load path."""
    return merge_dtn(ops_a, ops_b, maps, node_id=node_id)


def dtn_load_sweep(node, maps, ha, hb):
    """Recompute (w, h) for new child particular data using stored load operators."""
    return _dtn_load(node.load["K"], node.load["Q"], maps, ha, hb)


def _iti_load(L, maps, ha, hb):
    if ha is None and hb is None:
        return None, None, None
    ht_a = np.zeros(maps.m, complex) if ha is None else _left(maps.ra, ha[maps.i3a])
    ht_b = np.zeros(maps.m, complex) if hb is None else _left(maps.rb, hb[maps.i3b])
    a = L["Winv"] @ (L["R33b"] @ ht_a - ht_b)
    b = -L["R33a"] @ a - ht_a
    n1 = len(maps.i1)
    h = np.concatenate([L["Q1"] @ a, L["Q2"] @ b])
    if ha is not None:
        h[:n1] += ha[maps.i1]
    if hb is not None:
        h[n1:] += hb[maps.i2]
    return a, b, h


def merge_iti(ops_a, ops_b, maps, node_id=None, keep_load_ops=False):
    """Impedance merge on the master interface points."""
    Ra, Rb = ops_a.bop, ops_b.bop
    _check_dims(Ra, maps, "a")
    _check_dims(Rb, maps, "b")
    i1, i2, i3a, i3b = maps.i1, maps.i2, maps.i3a, maps.i3b
    pa, ra, pb, rb = maps.pa, maps.ra, maps.pb, maps.rb
    R33a = _left(ra, _right(Ra[np.ix_(i3a, i3a)], pa))
    R33b = _left(rb, _right(Rb[np.ix_(i3b, i3b)], pb))
    R31a = _left(ra, Ra[np.ix_(i3a, i1)])
    R32b = _left(rb, Rb[np.ix_(i3b, i2)])
    W = np.eye(maps.m, dtype=complex) - R33b @ R33a
    fac = _linalg.factor(W, MergeError, "impedance interface system singular",
                         node_id=node_id, stage="merge")
    psi_a = _linalg.solve(fac, np.hstack([R33b @ R31a, -R32b]))
    psi_b = -R33a @ psi_a
    psi_b[:, : len(i1)] -= R31a
    Q1 = _right(Ra[np.ix_(i1, i3a)], pa)
    Q2 = _right(Rb[np.ix_(i2, i3b)], pb)
    n1 = len(i1)
    R = np.vstack([Q1 @ psi_a, Q2 @ psi_b])
    R[:n1, :n1] += Ra[np.ix_(i1, i1)]
    R[n1:, n1:] += Rb[np.ix_(i2, i2)]
    out = NodeOperators("iti", psi=psi_a, bop=R, psi_b=psi_b)
    if ops_a.h_part is not None or ops_b.h_part is not None or keep_load_ops:
        L = {"Winv": _linalg.solve(fac, np.eye(maps.m, dtype=complex)),
             "R33a": R33a, "R33b": R33b, "Q1": Q1, "Q2": Q2}
        out.w_part, out.b_part, out.h_part = _iti_load(L, maps, ops_a.h_part, ops_b.h_part)
        if keep_load_ops:
            out.load = L
    return out


def iti_load_sweep(node, maps, ha, hb):
    return _iti_load(node.load, maps, ha, hb)


def merge(ops_a, ops_b, maps, node_id=None, keep_load_ops=False):
    if ops_a.variant != ops_b.variant:
        raise MergeError("children built with different formulations", node_id=node_id)
    fn = merge_dtn if ops_a.variant == "dtn" else merge_iti
    return fn(ops_a, ops_b, maps, node_id=node_id, keep_load_ops=keep_load_ops)


def split_down(node, maps, u_b):
    """Children's boundary data from the parent's boundary data.

    DtN: Dirichlet values; ItI: incoming impedance data.
    """
    n1 = len(maps.i1)
    x = node.psi @ u_b
    if node.w_part is not None:
        x = x + node.w_part
    na = len(maps.i1) + len(maps.i3a)
    nb = len(maps.i2) + len(maps.i3b)
    dt = np.result_type(u_b, x)
    ua = np.empty(na, dt)
    ub = np.empty(nb, dt)
    ua[maps.i1] = u_b[:n1]
    ub[maps.i2] = u_b[n1:]
    if node.variant == "dtn":
        ua[maps.i3a] = _left(maps.pa, x)
        ub[maps.i3b] = _left(maps.pb, x)
    else:
        y = node.psi_b @ u_b
        if node.b_part is not None:
            y = y + node.b_part
        ua[maps.i3a] = _left(maps.pa, x)
        ub[maps.i3b] = _left(maps.pb, y)
    return ua, ub
