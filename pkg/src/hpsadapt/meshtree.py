"""Binary merge tree over quadtree leaf boxes.

Refinement happens in quadrant splits: a leaf becomes the parent of two half
boxes, each of which is the parent of two quarter-box leaves. The half boxes
exist only so that every merge glues exactly two boxes.

Leaves carry dyadic indices ``(q, i, j)`` (quadrant level and integer
position) which makes neighbour queries exact. Box boundaries are described
as lists of *panels*: one leaf edge with its n_c - 2 Chebyshev points.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CorruptTree, DepthExceeded, InvalidArgument, PreconditionViolation
from .spectral1d import cheb_nodes, interp_matrix

SIDES = ("S", "E", "N", "W")
OUTWARD = {"S": (0.0, -1.0), "E": (1.0, 0.0), "N": (0.0, 1.0), "W": (-1.0, 0.0)}


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float
    level: int = 0  # binary depth in the merge tree

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise InvalidArgument(f"degenerate rectangle {self}")

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def area(self):
        return self.width * self.height

    def halves(self, axis):
        if axis == "vertical":
            xm = 0.5 * (self.x0 + self.x1)
            return (Rect(self.x0, xm, self.y0, self.y1, self.level + 1),
                    Rect(xm, self.x1, self.y0, self.y1, self.level + 1))
        ym = 0.5 * (self.y0 + self.y1)
        return (Rect(self.x0, self.x1, self.y0, ym, self.level + 1),
                Rect(self.x0, self.x1, ym, self.y1, self.level + 1))

    def first_split_axis(self):
        return "horizontal" if self.height > self.width else "vertical"


def _other(axis):
    return "horizontal" if axis == "vertical" else "vertical"


@dataclass
class BoxNode:
    id: int
    rect: Rect
    parent: Optional[int] = None
    children: Optional[tuple] = None
    split_axis: Optional[str] = None
    qidx: Optional[tuple] = None  # (q, i, j) for quadrant-aligned boxes

    @property
    def is_leaf(self):
        return self.children is None

    @property
    def kind(self):
        return "leaf" if self.children is None else "parent"


@dataclass(frozen=True)
class Panel:
    """One leaf edge on the boundary of some box."""

    side: str
    t0: float
    t1: float
    c: float  # fixed coordinate of the edge
    leaf: int
    q: Optional[int]

    def tangential(self, n_c):
        return cheb_nodes(n_c, (self.t0, self.t1)).points[1:-1]

    def points(self, n_c):
        t = self.tangential(n_c)
        if self.side in ("S", "N"):
            return np.column_stack([t, np.full_like(t, self.c)])
        return np.column_stack([np.full_like(t, self.c), t])


@dataclass
class InterfaceMaps:
    """Index bookkeeping for merging children alpha and beta.

    ``i1``/``i2`` are the exterior indices into the children's boundary
    orderings, ``i3a``/``i3b`` the interface indices (ascending tangential
    coordinate). Interface unknowns live on the coarser panel of every
    interface segment; ``pa``/``pb`` interpolate them to each child's own
    interface points and ``ra``/``rb`` project child data back. ``None``
    means identity (matching panels).
    """

    alpha: int
    beta: int
    axis: str
    i1: np.ndarray
    i2: np.ndarray
    i3a: np.ndarray
    i3b: np.ndarray
    m: int
    pa: Optional[np.ndarray] = None
    ra: Optional[np.ndarray] = None
    pb: Optional[np.ndarray] = None
    rb: Optional[np.ndarray] = None
    segments: list = field(default_factory=list)

    @property
    def uniform(self):
        return self.pa is None and self.pb is None

    @property
    def n_boundary(self):
        return len(self.i1) + len(self.i2)


def _apply(M, v):
    return v if M is None else M @ v


class MeshTree:
    def __init__(self, domain: Rect, n_c: int, max_depth: int = 30):
        if n_c < 4:
            raise InvalidArgument(f"leaf order n_c must be >= 4, got {n_c}")
        self.domain = Rect(domain.x0, domain.x1, domain.y0, domain.y1, 0)
        self.n_c = n_c
        self.max_depth = max_depth
        self.nodes = {1: BoxNode(1, self.domain, qidx=(0, 0, 0))}
        self._leaf_at = {(0, 0, 0): 1}
        self._panels = {}
        self._maps = {}

    # -- basic queries -------------------------------------------------
    root_id = 1

    def __len__(self):
        return len(self.nodes)

    def __getitem__(self, tid):
        return self.nodes[tid]

    def leaves(self):
        return sorted(t for t, nd in self.nodes.items() if nd.children is None)

    def n_leaves(self):
        return sum(1 for nd in self.nodes.values() if nd.children is None)

    def max_id(self):
        return max(self.nodes)

    def ancestors(self, tid):
        out = []
        p = self.nodes[tid].parent
        while p is not None:
            out.append(p)
            p = self.nodes[p].parent
        return out

    def descendants(self, tid):
        out, stack = [], list(self.nodes[tid].children or ())
        while stack:
            t = stack.pop()
            out.append(t)
            stack.extend(self.nodes[t].children or ())
        return out

    def leaf_level(self, tid):
        q = self.nodes[tid].qidx
        return None if q is None else q[0]

    def copy(self):
        """Structural copy; nodes are re-created so splits do not leak back."""
        other = MeshTree.__new__(MeshTree)
        other.domain = self.domain
        other.n_c = self.n_c
        other.max_depth = self.max_depth
        other.nodes = {t: BoxNode(nd.id, nd.rect, nd.parent, nd.children, nd.split_axis, nd.qidx)
                       for t, nd in self.nodes.items()}
        other._leaf_at = dict(self._leaf_at)
        other._panels = dict(self._panels)
        other._maps = dict(self._maps)
        return other

    # -- mutation ------------------------------------------------------
    def _add(self, rect, parent, qidx=None):
        tid = self.max_id() + 1
        self.nodes[tid] = BoxNode(tid, rect, parent=parent, qidx=qidx)
        return tid

    def _invalidate(self, tid):
        for t in [tid] + self.ancestors(tid):
            self._panels.pop(t, None)
            self._maps.pop(t, None)

    def split_leaf(self, tid):
        """Quadrant split of leaf ``tid``; returns the four new leaf ids."""
        node = self.nodes.get(tid)
        if node is None or not node.is_leaf:
            raise InvalidArgument(f"box {tid} is not a leaf", node_id=tid)
        if node.qidx is None:
            raise InvalidArgument(f"box {tid} is not quadrant aligned", node_id=tid)
        q, i, j = node.qidx
        if q + 1 > self.max_depth:
            raise DepthExceeded(f"refinement beyond max_depth={self.max_depth}", node_id=tid, level=q)
        axis = node.rect.first_split_axis()
        ra, rb = node.rect.halves(axis)
        a = self._add(ra, tid)
        b = self._add(rb, tid)
        node.children, node.split_axis = (a, b), axis
        new_leaves = []
        for half, hrect, (di, dj) in ((a, ra, (0, 0)), (b, rb, (1, 0) if axis == "vertical" else (0, 1))):
            sub = _other(axis)
            r1, r2 = hrect.halves(sub)
            offs = ((0, 0), (0, 1)) if sub == "horizontal" else ((0, 0), (1, 0))
            kids = []
            for r, (ei, ej) in zip((r1, r2), offs):
                qx = (q + 1, 2 * i + di + ei, 2 * j + dj + ej)
                k = self._add(r, half, qidx=qx)
                self._leaf_at[qx] = k
                kids.append(k)
            hn = self.nodes[half]
            hn.children, hn.split_axis = tuple(kids), sub
            new_leaves.extend(kids)
        del self._leaf_at[node.qidx]
        self._invalidate(tid)
        return new_leaves

    # -- neighbours ----------------------------------------------------
    def covering_leaf(self, q, i, j):
        """Leaf containing the dyadic cell (q, i, j), or None if it is subdivided."""
        if i < 0 or j < 0 or i >= (1 << q) or j >= (1 << q):
            return None
        for k in range(q, -1, -1):
            s = q - k
            t = self._leaf_at.get((k, i >> s, j >> s))
            if t is not None:
                return t
        return None

    def edge_neighbors(self, tid):
        """Leaves sharing an edge segment of positive length with leaf ``tid``."""
        q, i, j = self.nodes[tid].qidx
        out = set()
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            if ni < 0 or nj < 0 or ni >= (1 << q) or nj >= (1 << q):
                continue
            cov = self.covering_leaf(q, ni, nj)
            if cov is not None:
                out.add(cov)
                continue
            # finer neighbours: descend along the shared edge
            stack = [(q, ni, nj)]
            while stack:
                k, a, b = stack.pop()
                for ca in (0, 1):
                    for cb in (0, 1):
                        # keep only children touching the shared edge
                        if di == 1 and ca != 0 or di == -1 and ca != 1:
                            continue
                        if dj == 1 and cb != 0 or dj == -1 and cb != 1:
                            continue
                        key = (k + 1, 2 * a + ca, 2 * b + cb)
                        t = self._leaf_at.get(key)
                        if t is not None:
                            out.add(t)
                        else:
                            stack.append(key)
        return sorted(out)

    def locate(self, x, y):
        """Leaf id containing each point (ties go to the upper/right box)."""
        x = np.atleast_1d(np.asarray(x, float))
        y = np.atleast_1d(np.asarray(y, float))
        d = self.domain
        out = np.zeros(x.shape, dtype=np.int64)
        todo = np.ones(x.shape, dtype=bool)
        qmax = max(k[0] for k in self._leaf_at)
        u = (x - d.x0) / d.width
        v = (y - d.y0) / d.height
        for q in range(qmax + 1):
            if not todo.any():
                break
            m = 1 << q
            ii = np.clip(np.floor(u * m).astype(np.int64), 0, m - 1)
            jj = np.clip(np.floor(v * m).astype(np.int64), 0, m - 1)
            for p in np.flatnonzero(todo):
                t = self._leaf_at.get((q, int(ii[p]), int(jj[p])))
                if t is not None:
                    out[p] = t
                    todo[p] = False
        return out

    # -- panels and interface maps ------------------------------------
    def boundary_panels(self, tid):
        if tid in self._panels:
            return self._panels[tid]
        node = self.nodes[tid]
        if node.is_leaf:
            r = node.rect
            q = node.qidx[0] if node.qidx else None
            panels = [Panel("S", r.x0, r.x1, r.y0, tid, q), Panel("E", r.y0, r.y1, r.x1, tid, q),
                      Panel("N", r.x0, r.x1, r.y1, tid, q), Panel("W", r.y0, r.y1, r.x0, tid, q)]
        else:
            a, b = node.children
            sa, sb = _interface_sides(node.split_axis)
            panels = ([p for p in self.boundary_panels(a) if p.side != sa]
                      + [p for p in self.boundary_panels(b) if p.side != sb])
        self._panels[tid] = panels
        return panels

    def n_boundary(self, tid):
        return len(self.boundary_panels(tid)) * (self.n_c - 2)

    def boundary_points(self, tid):
        return np.vstack([p.points(self.n_c) for p in self.boundary_panels(tid)])

    def boundary_normals(self, tid):
        m = self.n_c - 2
        return np.vstack([np.tile(OUTWARD[p.side], (m, 1)) for p in self.boundary_panels(tid)])

    def interface_maps(self, tid):
        if tid in self._maps:
            return self._maps[tid]
        node = self.nodes[tid]
        if node.is_leaf:
            raise InvalidArgument(f"box {tid} is a leaf", node_id=tid)
        maps = build_interface_maps(self, tid)
        self._maps[tid] = maps
        return maps

    # -- export --------------------------------------------------------
    def export(self, path):
        """One row per leaf: id, x0, x1, y0, y1, level (binary depth)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "x0", "x1", "y0", "y1", "level"])
            for t in self.leaves():
                r = self.nodes[t].rect
                w.writerow([t, repr(r.x0), repr(r.x1), repr(r.y0), repr(r.y1), r.level])


def read_mesh(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append((int(rec["id"]), float(rec["x0"]), float(rec["x1"]),
                         float(rec["y0"]), float(rec["y1"]), int(rec["level"])))
    return rows


def _interface_sides(axis):
    # alpha is the west/south child
    return ("E", "W") if axis == "vertical" else ("N", "S")


def _segment_blocks(coarse, fines, n_c):
    """Interpolation P (coarse -> fine points) and projection R (fine -> coarse)."""
    xc = coarse.tangential(n_c)
    xf = [p.tangential(n_c) for p in fines]
    P = interp_matrix(xc, np.concatenate(xf))
    mid = fines[0].t1
    m = len(xc)
    R = np.zeros((m, 2 * m))
    left = xc <= mid
    R[left, :m] = interp_matrix(xf[0], xc[left])
    R[~left, m:] = interp_matrix(xf[1], xc[~left])
    return P, R


def build_interface_maps(tree, tid):
    node = tree.nodes[tid]
    a, b = node.children
    if a == b:
        raise CorruptTree("box merged with itself", node_id=tid)
    ra, rb = tree.nodes[a].rect, tree.nodes[b].rect
    if node.split_axis == "vertical":
        ok = ra.x1 == rb.x0 and ra.y0 == rb.y0 and ra.y1 == rb.y1
    else:
        ok = ra.y1 == rb.y0 and ra.x0 == rb.x0 and ra.x1 == rb.x1
    if not ok:
        raise CorruptTree("children are not adjacent along the split line", node_id=tid)
    sa, sb = _interface_sides(node.split_axis)
    n_c = tree.n_c
    m = n_c - 2
    pa_list, pb_list = tree.boundary_panels(a), tree.boundary_panels(b)

    def split(panels, side):
        ext, itf = [], []
        for k, p in enumerate(panels):
            idx = np.arange(k * m, (k + 1) * m)
            (itf if p.side == side else ext).append((p, idx))
        itf.sort(key=lambda e: e[0].t0)
        return ext, itf

    ext_a, itf_a = split(pa_list, sa)
    ext_b, itf_b = split(pb_list, sb)
    i1 = np.concatenate([ix for _, ix in ext_a]) if ext_a else np.zeros(0, int)
    i2 = np.concatenate([ix for _, ix in ext_b]) if ext_b else np.zeros(0, int)
    i3a = np.concatenate([ix for _, ix in itf_a])
    i3b = np.concatenate([ix for _, ix in itf_b])

    # walk the interface pairing panels into 1:1, 1:2 or 2:1 segments
    segs = []
    ia = ib = 0
    A = [p for p, _ in itf_a]
    B = [p for p, _ in itf_b]
    while ia < len(A) and ib < len(B):
        pa, pb = A[ia], B[ib]
        if pa.t0 != pb.t0:
            raise CorruptTree("interface panels misaligned", node_id=tid)
        if pa.t1 == pb.t1:
            segs.append(("match", [pa], [pb]))
            ia, ib = ia + 1, ib + 1
        elif pa.t1 > pb.t1:
            if ib + 1 >= len(B) or B[ib + 1].t1 != pa.t1:
                raise PreconditionViolation(
                    "interface level gap >= 2; level restriction was skipped", node_id=tid)
            segs.append(("alpha_coarse", [pa], [pb, B[ib + 1]]))
            ia, ib = ia + 1, ib + 2
        else:
            if ia + 1 >= len(A) or A[ia + 1].t1 != pb.t1:
                raise PreconditionViolation(
                    "interface level gap >= 2; level restriction was skipped", node_id=tid)
            segs.append(("beta_coarse", [pa, A[ia + 1]], [pb]))
            ia, ib = ia + 2, ib + 1
    if ia != len(A) or ib != len(B):
        raise CorruptTree("interface panels do not cover the same edge", node_id=tid)

    n_master = m * len(segs)
    maps = InterfaceMaps(a, b, node.split_axis, i1, i2, i3a, i3b, n_master, segments=segs)
    if all(kind == "match" for kind, _, _ in segs):
        return maps
    na, nb = len(i3a), len(i3b)
    Pa = np.zeros((na, n_master))
    Ra = np.zeros((n_master, na))
    Pb = np.zeros((nb, n_master))
    Rb = np.zeros((n_master, nb))
    ra_off = rb_off = 0
    for s, (kind, A_, B_) in enumerate(segs):
        ms = slice(s * m, (s + 1) * m)
        la, lb = len(A_) * m, len(B_) * m
        sa_, sb_ = slice(ra_off, ra_off + la), slice(rb_off, rb_off + lb)
        eye = np.eye(m)
        if kind == "match":
            Pa[sa_, ms] = eye
            Ra[ms, sa_] = eye
            Pb[sb_, ms] = eye
            Rb[ms, sb_] = eye
        elif kind == "alpha_coarse":
            P, R = _segment_blocks(A_[0], B_, n_c)
            Pa[sa_, ms] = eye
            Ra[ms, sa_] = eye
            Pb[sb_, ms] = P
            Rb[ms, sb_] = R
        else:
            P, R = _segment_blocks(B_[0], A_, n_c)
            Pa[sa_, ms] = P
            Ra[ms, sa_] = R
            Pb[sb_, ms] = eye
            Rb[ms, sb_] = eye
        ra_off += la
        rb_off += lb
    maps.pa, maps.ra, maps.pb, maps.rb = Pa, Ra, Pb, Rb
    return maps


def interface_maps(tree, tid):
    return tree.interface_maps(tid)


# -- constructors -------------------------------------------------------------

def root_tree(domain, n_c, max_depth=30):
    return MeshTree(domain, n_c, max_depth=max_depth)


def uniform_tree(domain, n_c, levels, max_depth=30):
    """Uniform 2^levels x 2^levels mesh with heap numbering (children of k: 2k, 2k+1)."""
    return binary_uniform_tree(domain, n_c, 2 * levels, max_depth=max_depth)


def binary_uniform_tree(domain, n_c, depth, max_depth=30):
    """Uniform binary tree of the given binary depth (odd depth gives 2:1 leaves)."""
    tree = MeshTree(domain, n_c, max_depth=max_depth)
    tree._leaf_at.clear()
    tree.nodes = {}
    root = BoxNode(1, tree.domain, qidx=(0, 0, 0))
    tree.nodes[1] = root
    frontier = [1]
    for d in range(depth):
        nxt = []
        for k in frontier:
            nd = tree.nodes[k]
            if d % 2 == 0:
                axis = nd.rect.first_split_axis()
            else:
                axis = _other(tree.nodes[nd.parent].split_axis)
            r1, r2 = nd.rect.halves(axis)
            nd.children, nd.split_axis = (2 * k, 2 * k + 1), axis
            for c, r in zip((2 * k, 2 * k + 1), (r1, r2)):
                tree.nodes[c] = BoxNode(c, r, parent=k)
            nxt.extend([2 * k, 2 * k + 1])
        if d % 2 == 1:
            # children now quadrant aligned
            for k in frontier:
                nd = tree.nodes[k]
                pq, pi, pj = tree.nodes[nd.parent].qidx
                first = tree.nodes[nd.parent].split_axis
                second_half = 1 if k == tree.nodes[nd.parent].children[1] else 0
                for pos, c in enumerate(nd.children):
                    if first == "vertical":
                        ci, cj = second_half, pos
                    else:
                        ci, cj = pos, second_half
                    tree.nodes[c].qidx = (pq + 1, 2 * pi + ci, 2 * pj + cj)
        frontier = nxt
    for k in frontier:
        q = tree.nodes[k].qidx
        if q is not None:
            tree._leaf_at[q] = k
    return tree


def split_leaf(tree, tid):
    return tree.split_leaf(tid)


def level_restrict(tree):
    """Split leaves until edge-adjacent leaves differ by at most one quadrant level.

    Returns the ids of the leaves that were split.
    """
    split = []
    work = deque(sorted(tree.leaves(), key=lambda t: -tree.nodes[t].qidx[0]))
    queued = set(work)
    while work:
        t = work.popleft()
        queued.discard(t)
        nd = tree.nodes.get(t)
        if nd is None or not nd.is_leaf:
            continue
        q, i, j = nd.qidx
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            cov = tree.covering_leaf(q, i + di, j + dj)
            if cov is None:
                continue
            if tree.nodes[cov].qidx[0] < q - 1:
                kids = tree.split_leaf(cov)
                split.append(cov)
                for k in kids + [t]:
                    if k not in queued:
                        work.append(k)
                        queued.add(k)
                break
    return split


def is_balanced(tree):
    """Brute-force check of the 2:1 condition over all edge-adjacent leaf pairs."""
    leaves = tree.leaves()
    rects = {t: tree.nodes[t].rect for t in leaves}
    for a_idx, a in enumerate(leaves):
        ra = rects[a]
        for b in leaves[a_idx + 1:]:
            rb = rects[b]
            if _share_edge(ra, rb):
                if abs(tree.nodes[a].qidx[0] - tree.nodes[b].qidx[0]) > 1:
                    return False
    return True


def _share_edge(ra, rb):
    if ra.x1 == rb.x0 or rb.x1 == ra.x0:
        return min(ra.y1, rb.y1) > max(ra.y0, rb.y0)
    if ra.y1 == rb.y0 or rb.y1 == ra.y0:
        return min(ra.x1, rb.x1) > max(ra.x0, rb.x0)
    return False
