"""Exact k-NN, radius and hybrid neighbor queries in arbitrary dimension.

The spatial index is scipy's ``cKDTree`` built with median splits on the
widest-spread axis. Candidate sets returned by it are re-ranked here with
distances computed by one fixed formula and sorted by ``(distance, index)``,
which makes every query reproduce a linear scan exactly, ties included.
"""

from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from ._threads import get_num_threads
from .core import as_points

# relative slack when asking the index for candidates; results are filtered
# again with exact distances afterwards
_SLACK = 1e-9


class Neighbor(NamedTuple):
    index: int
    distance: float


def point_distances(points, query, metric="l2"):
    """Distances from ``query`` to each row of ``points`` (the reference formula)."""
    diff = points - query
    if metric == "l2":
        return np.sqrt((diff * diff).sum(axis=1))
    if metric == "l1":
        return np.abs(diff).sum(axis=1)
    raise ValueError(f"unknown metric {metric!r}")


def _order(idx, dist):
    o = np.lexsort((idx, dist))
    return idx[o], dist[o]


class KdTree:
    """Immutable kd-tree over an ``(N, D)`` point set.

    Parameters
    ----------
    points : array_like, shape (N, D)
    max_leaf_size : int
        Maximum number of points stored in a leaf.
    metric : {"l2", "l1"}
    """

    def __init__(self, points, max_leaf_size=16, metric="l2"):
        if max_leaf_size < 1:
            raise ValueError("max_leaf_size must be positive")
        if metric not in ("l2", "l1"):
            raise ValueError(f"unknown metric {metric!r}")
        self.points = as_points(points)
        self.points.setflags(write=False)
        self.max_leaf_size = int(max_leaf_size)
        self.metric = metric
        self._p = 2 if metric == "l2" else 1
        self._tree = None
        if len(self.points):
            self._tree = cKDTree(self.points, leafsize=self.max_leaf_size,
                                 balanced_tree=True, compact_nodes=False, copy_data=False)

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def _check_query(self, q):
        q = np.asarray(q, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.dim:
            raise ValueError(f"query has dimension {q.shape[0]}, tree has dimension {self.dim}")
        return q

    def _exact(self, q, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return _order(idx, point_distances(self.points[idx], q, self.metric))

    def _ball(self, q, r):
        cand = self._tree.query_ball_point(q, r * (1.0 + _SLACK) + 1e-300, p=self._p)
        return np.asarray(cand, dtype=np.int64)

    def knn_arrays(self, query, k):
        q = self._check_query(query)
        if k < 1:
            raise ValueError("k must be positive")
        n = len(self)
        if n == 0:
            return np.empty(0, np.int64), np.empty(0)
        k = min(int(k), n)
        kk = min(k + 1, n)
        d, i = self._tree.query(q, k=kk, p=self._p)
        d, i = np.atleast_1d(d), np.atleast_1d(i)
        if kk > k and d[k] > d[k - 1] * (1.0 + 4 * _SLACK) + 1e-300:
            idx, dist = self._exact(q, i[:k])
        else:
            # possible tie at the k-th position: take every point at that range
            idx, dist = self._exact(q, self._ball(q, d[k - 1]))
        return idx[:k], dist[:k]

    def radius_arrays(self, query, r):
        q = self._check_query(query)
        if not r > 0:
            raise ValueError("radius must be positive")
        if len(self) == 0:
            return np.empty(0, np.int64), np.empty(0)
        idx, dist = self._exact(q, self._ball(q, r))
        keep = dist <= r
        return idx[keep], dist[keep]

    def hybrid_arrays(self, query, k, r):
        if k < 1:
            raise ValueError("k must be positive")
        idx, dist = self.radius_arrays(query, r)
        return idx[:k], dist[:k]

    def knn(self, query, k):
        """At most ``k`` nearest points, ascending distance, ties by index."""
        return [Neighbor(int(i), float(d)) for i, d in zip(*self.knn_arrays(query, k))]

    def radius(self, query, r):
        """All points within distance ``r`` (inclusive), sorted."""
        return [Neighbor(int(i), float(d)) for i, d in zip(*self.radius_arrays(query, r))]

    def hybrid(self, query, k, r):
        """The first ``k`` entries of :meth:`radius`."""
        return [Neighbor(int(i), float(d)) for i, d in zip(*self.hybrid_arrays(query, k, r))]

    # batch queries --------------------------------------------------------

    def knn_batch(self, queries, k, threads=None):
        """Fixed-size k-NN for many queries.

        Returns ``(indices, distances)`` of shape ``(M, min(k, N))`` with the
        same ordering and tie rule as :meth:`knn`.
        """
        Q = as_points(queries, dim=self.dim, name="queries")
        n = len(self)
        if k < 1:
            raise ValueError("k must be positive")
        k = min(int(k), n)
        if n == 0 or len(Q) == 0:
            return np.empty((len(Q), k), np.int64), np.empty((len(Q), k))
        workers = get_num_threads() if threads is None else threads
        idx = np.empty((len(Q), k), np.int64)
        dist = np.empty((len(Q), k))
        rows = np.arange(len(Q))
        kq = min(k + 1, n)
        while rows.size:
            d, i = self._tree.query(Q[rows], k=kq, p=self._p, workers=workers)
            d = d.reshape(len(rows), kq)
            i = i.reshape(len(rows), kq).astype(np.int64)
            # a candidate list is complete once its last entry is clearly
            # farther than the k-th, otherwise ties may hide beyond it
            done = np.full(len(rows), kq == n)
            if kq > k:
                done |= d[:, kq - 1] > d[:, k - 1] * (1.0 + 4 * _SLACK) + 1e-300
            sel = rows[done]
            ii = i[done]
            ee = self._batch_distances(Q[sel], ii)
            o = np.lexsort((ii, ee), axis=-1)[:, :k]
            idx[sel] = np.take_along_axis(ii, o, axis=1)
            dist[sel] = np.take_along_axis(ee, o, axis=1)
            rows = rows[~done]
            kq = min(2 * kq, n)
        return idx, dist

    def _batch_distances(self, Q, idx):
        diff = self.points[idx] - Q[:, None, :]
        if self.metric == "l2":
            return np.sqrt((diff * diff).sum(axis=2))
        return np.abs(diff).sum(axis=2)

    def radius_batch(self, queries, r, threads=None):
        """Radius query for many points; returns a list of ``(indices, distances)``."""
        Q = as_points(queries, dim=self.dim, name="queries")
        if not r > 0:
            raise ValueError("radius must be positive")
        if len(self) == 0:
            return [(np.empty(0, np.int64), np.empty(0)) for _ in range(len(Q))]
        workers = get_num_threads() if threads is None else threads
        cands = self._tree.query_ball_point(Q, r * (1.0 + _SLACK) + 1e-300, p=self._p,
                                            workers=workers)
        out = []
        for q, c in zip(Q, cands):
            idx, dist = self._exact(q, c)
            keep = dist <= r
            out.append((idx[keep], dist[keep]))
        return out

    def radius_flat(self, queries, r, threads=None):
        """Unordered radius query in flat form.

        Returns ``(counts, indices, distances)``: neighbors of query ``i`` are
        the ``counts[i]`` entries following ``counts[:i].sum()``, in no
        particular order. Cheaper than :meth:`radius_batch` for large radii.
        """
        Q = as_points(queries, dim=self.dim, name="queries")
        if not r > 0:
            raise ValueError("radius must be positive")
        if len(self) == 0 or len(Q) == 0:
            return np.zeros(len(Q), np.int64), np.empty(0, np.int64), np.empty(0)
        workers = get_num_threads() if threads is None else threads
        cands = self._tree.query_ball_point(Q, r * (1.0 + _SLACK) + 1e-300, p=self._p,
                                            workers=workers)
        counts = np.fromiter((len(c) for c in cands), np.int64, len(Q))
        idx = np.concatenate([np.asarray(c, dtype=np.int64) for c in cands])
        owner = np.repeat(np.arange(len(Q)), counts)
        diff = self.points[idx] - Q[owner]
        if self.metric == "l2":
            dist = np.sqrt((diff * diff).sum(axis=1))
        else:
            dist = np.abs(diff).sum(axis=1)
        keep = dist <= r
        return np.bincount(owner[keep], minlength=len(Q)), idx[keep], dist[keep]

    def hybrid_batch(self, queries, k, r, threads=None):
        return [(i[:k], d[:k]) for i, d in self.radius_batch(queries, r, threads=threads)]

    # structure ------------------------------------------------------------

    def leaves(self):
        """Index arrays of the tree's leaves (each dataset index occurs once)."""
        if self._tree is None:
            return []
        out = []
        stack = [self._tree.tree]
        while stack:
            node = stack.pop()
            if node.split_dim == -1:
                out.append(np.asarray(node.indices, dtype=np.int64))
            else:
                stack.append(node.greater)
                stack.append(node.lesser)
        return out

    def depth(self):
        if self._tree is None:
            return 0
        best = 0
        stack = [(self._tree.tree, 1)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if node.split_dim != -1:
                stack.append((node.lesser, d + 1))
                stack.append((node.greater, d + 1))
        return best


def build(points, max_leaf_size=16, metric="l2"):
    return KdTree(points, max_leaf_size=max_leaf_size, metric=metric)

