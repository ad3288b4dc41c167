"""Convex polytopes with dual vertex/halfspace representations, and unions of them.

A :class:`ConvexPolytope` is built either as the convex hull of points or as
the intersection of halfspaces ``a . x <= b``; both representations are kept
in sync. Halfspace input is converted through the Chebyshev center and
point/plane duality. :class:`SpaceRegion` represents finite unions of
polytopes and supports union, intersection, complement within a bounding
box, and difference. Bounded polytopes in 2-D and 3-D only.
"""

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ._simplex import LPInfeasible, LPUnbounded, linprog_max
from .core import PointCloud, as_points

MERGE_ANGLE = 1e-8
VERTEX_TOL = 1e-9
FACET_TOL = 1e-9
EMPTY_RADIUS = 1e-9


class DegenerateInputError(ValueError):
    pass


class UnboundedPolytopeError(ValueError):
    pass


def _affine_rank(P):
    if len(P) == 0:
        return -1
    sv = np.linalg.svd(P - P.mean(axis=0), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int((sv > 1e-12 * sv[0]).sum())


def _angle(a, b):
    if a.shape[0] == 2:
        cr = abs(a[0] * b[1] - a[1] * b[0])
    else:
        cr = np.linalg.norm(np.cross(a, b))
    return np.arctan2(cr, a @ b)


def _order_facet(V, members, a):
    """Order facet vertex indices counter-clockwise as seen from outside."""
    members = np.asarray(members, dtype=np.int64)
    pts = V[members]
    if V.shape[1] == 2:
        t = np.array([-a[1], a[0]])
        return members[np.argsort(pts @ t, kind="stable")]
    ref = np.eye(3)[np.argmin(np.abs(a))]
    u = np.cross(a, ref)
    u /= np.linalg.norm(u)
    w = np.cross(a, u)
    c = pts.mean(axis=0)
    ang = np.arctan2((pts - c) @ w, (pts - c) @ u)
    return members[np.argsort(ang, kind="stable")]


def _facets_by_tolerance(V, A, b):
    facets = []
    for a, off in zip(A, b):
        on = np.flatnonzero(np.abs(V @ a - off) <= FACET_TOL * max(1.0, abs(off)))
        facets.append(_order_facet(V, on, a))
    return facets


def _dedupe(V):
    keep = []
    for i, v in enumerate(V):
        if all(np.max(np.abs(v - V[j])) > VERTEX_TOL for j in keep):
            keep.append(i)
    return V[keep]


class ConvexPolytope:
    """Bounded convex polytope in 2-D or 3-D.

    Attributes
    ----------
    vertices : ndarray, shape (V, D)
    normals, offsets : ndarray
        Halfspaces ``normals[i] . x <= offsets[i]`` with unit normals.
    facets : list of ndarray
        Vertex indices of each facet, ordered counter-clockwise seen from
        outside (in 2-D, the two endpoints of each edge in boundary order).
    interior_point : ndarray
        Strictly interior witness point.
    """

    def __init__(self, vertices, normals, offsets, facets, interior_point, dim=None):
        self.vertices = np.asarray(vertices, dtype=np.float64)
        self.normals = np.asarray(normals, dtype=np.float64)
        self.offsets = np.asarray(offsets, dtype=np.float64)
        self.facets = [np.asarray(f, dtype=np.int64) for f in facets]
        self.interior_point = None if interior_point is None else np.asarray(interior_point, float)
        self.dim = dim if dim is not None else self.vertices.shape[1]

    @classmethod
    def empty(cls, dim=3):
        return cls(np.empty((0, dim)), np.empty((0, dim)), np.empty(0), [], None, dim)

    @property
    def is_empty(self):
        return len(self.vertices) == 0

    @property
    def halfspaces(self):
        return list(zip(self.normals, self.offsets))

    def contains(self, x, tol=1e-9):
        if self.is_empty:
            return False
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(self.normals @ x <= self.offsets + tol))

    def contains_points(self, X, tol=1e-9):
        X = np.asarray(X, dtype=np.float64)
        if self.is_empty:
            return np.zeros(len(X), dtype=bool)
        return np.all(X @ self.normals.T <= self.offsets + tol, axis=1)

    def volume(self):
        """Volume in 3-D, area in 2-D."""
        if self.is_empty:
            return 0.0
        c = self.interior_point
        V = self.vertices
        total = 0.0
        for f in self.facets:
            if self.dim == 2:
                if len(f) < 2:
                    continue
                e0, e1 = V[f[0]] - c, V[f[-1]] - c
                total += 0.5 * (e0[0] * e1[1] - e0[1] * e1[0])
                continue
            for i in range(1, len(f) - 1):
                a, b2, d = V[f[0]] - c, V[f[i]] - c, V[f[i + 1]] - c
                total += np.dot(a, np.cross(b2, d)) / 6.0
        return float(total)

    def intersect(self, other):
        return intersect_polytopes(self, other)

    def transform(self, motion):
        return transform_polytope(self, motion)

    def triangles(self):
        """Fan triangulation of the facets (3-D), as vertex index triples."""
        tris = [(f[0], f[i], f[i + 1]) for f in self.facets for i in range(1, len(f) - 1)]
        return np.asarray(tris, dtype=np.int64).reshape(-1, 3)

    def __repr__(self):
        if self.is_empty:
            return f"ConvexPolytope(empty, dim={self.dim})"
        return (f"ConvexPolytope(dim={self.dim}, vertices={len(self.vertices)}, "
                f"facets={len(self.facets)})")


def hull_from_points(points):
    """Convex hull of a 2-D or 3-D point set.

    Coplanar facets are merged; the V-rep holds hull vertices only and the
    interior point is their centroid.
    """
    P = as_points(points)
    D = P.shape[1]
    if D not in (2, 3):
        raise ValueError(f"hulls are supported in 2-D and 3-D, got dimension {D}")
    rank = _affine_rank(P)
    if rank < D:
        raise DegenerateInputError(f"input points are degenerate: affine rank {rank} < {D}")
    try:
        hull = ConvexHull(P)
    except QhullError as exc:
        raise DegenerateInputError(f"convex hull failed: {exc}") from None
    vidx = np.sort(hull.vertices)
    remap = np.full(len(P), -1, dtype=np.int64)
    remap[vidx] = np.arange(len(vidx))
    V = P[vidx]

    eqn = hull.equations[:, :D] / np.linalg.norm(hull.equations[:, :D], axis=1)[:, None]
    reps = np.empty_like(eqn)  # one unit normal per group
    groups = []
    for simplex, n in zip(hull.simplices, eqn):
        # chord length equals the angle to first order at this tolerance
        hit = np.flatnonzero(np.linalg.norm(reps[:len(groups)] - n, axis=1) < MERGE_ANGLE)
        if hit.size:
            groups[hit[0]][1].append(simplex)
        else:
            reps[len(groups)] = n
            groups.append([n, [simplex]])
    normals, offsets, facets = [], [], []
    for n, simplices in groups:
        members = np.unique(remap[np.concatenate(simplices)])
        members = members[members >= 0]
        normals.append(n)
        offsets.append(float((V[members] @ n).max()))
        facets.append(_order_facet(V, members, n))
    return ConvexPolytope(V, np.array(normals), np.array(offsets), facets, V.mean(axis=0), D)


def box(lo, hi):
    """Axis-aligned box ``[lo, hi]`` as a polytope."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    D = lo.shape[0]
    I = np.eye(D)
    return polytope_from_halfspaces(np.vstack([I, -I]), np.concatenate([hi, -lo]))


def chebyshev_center(A, b):
    """Center and radius of the largest ball inside ``{x : A x <= b}`` (unit-norm rows)."""
    m, D = A.shape
    # x = xp - xm, both >= 0; r >= 0
    M = np.hstack([A, -A, np.ones((m, 1))])
    c = np.zeros(2 * D + 1)
    c[-1] = 1.0
    z, r = linprog_max(c, M, b)
    return z[:D] - z[D:2 * D], r


def polytope_from_halfspaces(normals, offsets):
    """Polytope ``{x : normals @ x <= offsets}``.

    Returns an empty polytope for infeasible (or measure-zero) systems and
    raises :class:`UnboundedPolytopeError` when the region is unbounded.
    Redundant halfspaces are dropped.
    """
    A = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    b = np.asarray(offsets, dtype=np.float64).reshape(-1)
    if A.shape[0] == 0:
        raise ValueError("at least one halfspace is required")
    if A.shape[0] != b.shape[0]:
        raise ValueError("normals and offsets differ in length")
    D = A.shape[1]
    if D not in (2, 3):
        raise ValueError(f"polytopes are supported in 2-D and 3-D, got dimension {D}")
    lengths = np.linalg.norm(A, axis=1)
    zero = lengths == 0.0
    if np.any(zero & (b < 0)):
        return ConvexPolytope.empty(D)
    A, b = A[~zero] / lengths[~zero, None], b[~zero] / lengths[~zero]
    if A.shape[0] == 0:
        raise UnboundedPolytopeError("no constraints bound the region")
    try:
        center, radius = chebyshev_center(A, b)
    except LPInfeasible:
        return ConvexPolytope.empty(D)
    except LPUnbounded:
        raise UnboundedPolytopeError("halfspace intersection is unbounded") from None
    if radius <= EMPTY_RADIUS:
        return ConvexPolytope.empty(D)

    slack = b - A @ center
    dual = A / slack[:, None]
    if len(dual) <= D or _affine_rank(dual) < D:
        raise UnboundedPolytopeError("halfspace intersection is unbounded")
    try:
        dhull = ConvexHull(dual)
    except QhullError:
        raise UnboundedPolytopeError("halfspace intersection is unbounded") from None
    # the origin must be strictly inside the dual hull
    offs = -dhull.equations[:, D]
    if np.any(offs <= 1e-12 * np.abs(dual).max()):
        raise UnboundedPolytopeError("halfspace intersection is unbounded")
    V = center + dhull.equations[:, :D] / offs[:, None]
    V = _dedupe(V)
    V = V[np.lexsort(V.T[::-1])]

    cand = np.sort(dhull.vertices)
    facets = _facets_by_tolerance(V, A[cand], b[cand])
    real = [i for i, f in enumerate(facets) if len(f) >= D]
    # drop duplicates of the same supporting plane
    chosen = []
    for i in real:
        if all(_angle(A[cand[i]], A[cand[j]]) >= MERGE_ANGLE
               or abs(b[cand[i]] - b[cand[j]]) > FACET_TOL for j in chosen):
            chosen.append(i)
    keep = cand[chosen]
    return ConvexPolytope(V, A[keep], b[keep], [facets[i] for i in chosen], center, D)


def intersect_polytopes(A, B):
    if A.dim != B.dim:
        raise ValueError("polytope dimensions differ")
    if A.is_empty or B.is_empty:
        return ConvexPolytope.empty(A.dim)
    return polytope_from_halfspaces(np.vstack([A.normals, B.normals]),
                                    np.concatenate([A.offsets, B.offsets]))


def transform_polytope(target, motion):
    """Apply a rigid motion to a polytope or region."""
    if isinstance(target, SpaceRegion):
        return SpaceRegion([transform_polytope(p, motion) for p in target.polytopes], target.dim)
    if motion.dim != target.dim:
        raise ValueError("motion dimension does not match the polytope")
    if target.is_empty:
        return ConvexPolytope.empty(target.dim)
    R, t = motion.rotation, motion.translation
    N = target.normals @ R.T
    return ConvexPolytope(target.vertices @ R.T + t, N, target.offsets + N @ t,
                          target.facets, R @ target.interior_point + t, target.dim)


def _flip_pieces(poly, bbox):
    """Complement of ``poly`` within ``bbox`` as pairwise-disjoint pieces."""
    pieces = []
    for i in range(len(poly.offsets)):
        An = np.vstack([bbox.normals, -poly.normals[i:i + 1], poly.normals[:i]])
        bn = np.concatenate([bbox.offsets, -poly.offsets[i:i + 1], poly.offsets[:i]])
        p = polytope_from_halfspaces(An, bn)
        if not p.is_empty:
            pieces.append(p)
    return pieces


class SpaceRegion:
    """Finite union of convex polytopes; an empty list is the empty set."""

    def __init__(self, polytopes=(), dim=None):
        polys = [p for p in polytopes if not p.is_empty]
        dims = {p.dim for p in polytopes}
        if len(dims) > 1:
            raise ValueError("region members differ in dimension")
        self.dim = dim if dim is not None else (dims.pop() if dims else 3)
        self.polytopes = polys

    @property
    def is_empty(self):
        return not self.polytopes

    def _check(self, other):
        if other.dim != self.dim and not (self.is_empty or other.is_empty):
            raise ValueError("region dimensions differ")

    def union(self, other):
        other = _as_region(other)
        self._check(other)
        return SpaceRegion(self.polytopes + other.polytopes, self.dim)

    def intersection(self, other):
        other = _as_region(other)
        self._check(other)
        out = [intersect_polytopes(a, b) for a in self.polytopes for b in other.polytopes]
        return SpaceRegion(out, self.dim)

    def complement(self, bbox):
        """Complement within ``bbox`` (a polytope, or ``(lo, hi)`` box corners)."""
        if bbox is None:
            raise ValueError("complement requires a bounding box")
        if not isinstance(bbox, ConvexPolytope):
            bbox = box(*bbox)
        result = SpaceRegion([bbox], bbox.dim)
        for p in self.polytopes:
            result = result.intersection(SpaceRegion(_flip_pieces(p, bbox), bbox.dim))
            if result.is_empty:
                break
        return result

    def difference(self, other):
        """``self \\ other``; the complement is taken within this region's bounding box."""
        other = _as_region(other)
        self._check(other)
        if self.is_empty or other.is_empty:
            return SpaceRegion(list(self.polytopes), self.dim)
        V = np.vstack([p.vertices for p in self.polytopes])
        pad = 1e-6 * max(1.0, np.abs(V).max())
        bb = box(V.min(axis=0) - pad, V.max(axis=0) + pad)
        return self.intersection(other.complement(bb))

    def contains(self, x, tol=1e-9):
        return any(p.contains(x, tol) for p in self.polytopes)

    def contains_points(self, X, tol=1e-9):
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(len(X), dtype=bool)
        for p in self.polytopes:
            out |= p.contains_points(X, tol)
        return out

    def volume(self):
        """Measure of the union, by inclusion-exclusion over member intersections."""
        polys = self.polytopes

        def rec(start, current, sign):
            total = 0.0
            for i in range(start, len(polys)):
                inter = polys[i] if current is None else intersect_polytopes(current, polys[i])
                if inter.is_empty:
                    continue
                total += sign * inter.volume() + rec(i + 1, inter, -sign)
            return total

        return float(rec(0, None, 1.0))

    def transform(self, motion):
        return transform_polytope(self, motion)

    def __or__(self, other):
        return self.union(other)

    def __and__(self, other):
        return self.intersection(other)

    def __sub__(self, other):
        return self.difference(other)

    def __repr__(self):
        return f"SpaceRegion(dim={self.dim}, members={len(self.polytopes)})"


def _as_region(x):
    if isinstance(x, SpaceRegion):
        return x
    if isinstance(x, ConvexPolytope):
        return SpaceRegion([x], x.dim)
    raise TypeError(f"expected a SpaceRegion or ConvexPolytope, got {type(x).__name__}")


def contains(target, x, tol=1e-9):
    return target.contains(x, tol)


def volume(target):
    return target.volume()


def save_polytope_ply(poly, path, format="ascii"):
    """Write a 3-D polytope's vertices and triangulated facets to PLY."""
    from .ply import save_ply
    if poly.dim != 3:
        raise ValueError("PLY export needs a 3-D polytope")
    save_ply(PointCloud(poly.vertices), path, format=format, faces=poly.triangles())

