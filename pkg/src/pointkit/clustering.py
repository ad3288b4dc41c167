"""k-means, connected-component segmentation, mean-shift and spectral clustering.

Every method returns :class:`ClusterLabels` in canonical order: clusters
numbered by descending size, ties broken by smallest member index, with -1
marking discarded points.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _csgraph_components

from .core import as_points
from .embedding import sym_eigh
from .features import KNN, Radius, neighborhoods
from .kdtree import KdTree


@dataclass(eq=False)
class ClusterLabels:
    labels: np.ndarray
    k: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)

    def __len__(self):
        return self.labels.shape[0]

    def sizes(self):
        return np.bincount(self.labels[self.labels >= 0], minlength=self.k)

    def members(self, c):
        return np.flatnonzero(self.labels == c)

    def is_canonical(self):
        lab = self.labels
        if np.any(lab < -1) or np.any(lab >= self.k):
            return False
        if self.k == 0:
            return True
        sizes = self.sizes()
        if np.any(sizes == 0):
            return False
        first = np.array([np.flatnonzero(lab == c)[0] for c in range(self.k)])
        key = list(zip(-sizes, first))
        return key == sorted(key)


def canonical_labels(raw, min_size=1):
    """Relabel arbitrary integer cluster ids canonically.

    Negative ids are treated as noise; clusters smaller than ``min_size``
    become noise as well.
    """
    raw = np.asarray(raw, dtype=np.int64).reshape(-1)
    out = np.full(raw.shape[0], -1, dtype=np.int64)
    valid = raw >= 0
    if not np.any(valid):
        return ClusterLabels(out, 0), np.empty(0, np.int64)
    ids, first, inv, counts = np.unique(raw[valid], return_index=True,
                                        return_inverse=True, return_counts=True)
    first = np.flatnonzero(valid)[first]
    keep = counts >= min_size
    order = np.lexsort((first, -counts))
    order = order[keep[order]]
    new_id = np.full(len(ids), -1, dtype=np.int64)
    new_id[order] = np.arange(len(order))
    out[valid] = new_id[inv.reshape(-1)]
    # order maps new label -> old position in ids
    return ClusterLabels(out, len(order)), ids[order]


# k-means --------------------------------------------------------------------

@dataclass
class KMeansConfig:
    k: int
    max_iters: int = 100
    tol: float = 1e-7
    seed: Optional[int] = 0
    use_kdtree: bool = False


@dataclass(eq=False)
class KMeansResult:
    labels: ClusterLabels
    centroids: np.ndarray
    objective: float
    iterations: int
    objective_history: list = field(default_factory=list)


def _assign(X, C, use_kdtree):
    if use_kdtree:
        idx, dist = KdTree(C).knn_batch(X, 1)
        return idx[:, 0], dist[:, 0] ** 2
    d = np.empty(len(X), dtype=np.int64)
    best = np.empty(len(X))
    step = max(1, 2_000_000 // max(1, len(C)))
    for a in range(0, len(X), step):
        blk = X[a:a + step]
        # exact differences keep ties reproducible
        D2 = ((blk[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
        d[a:a + step] = np.argmin(D2, axis=1)
        best[a:a + step] = D2[np.arange(len(blk)), d[a:a + step]]
    return d, best


def kmeans_plus_plus(X, k, rng):
    n = len(X)
    centers = [int(rng.integers(n))]
    d2 = ((X - X[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            rest = np.setdiff1d(np.arange(n), centers)
            nxt = int(rng.choice(rest))
        centers.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[centers].copy()


def kmeans(points, cfg):
    """Lloyd's algorithm from a seeded k-means++ start.

    Assignment ties go to the lowest centroid index. Empty clusters are
    reseeded with the point farthest from its centroid. Stops after
    ``max_iters`` or when no centroid moves by ``tol`` or more.
    """
    X = as_points(points)
    n = len(X)
    k = int(cfg.k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points {n}")
    rng = np.random.default_rng(cfg.seed)
    C = kmeans_plus_plus(X, k, rng)
    history = []
    it = 0
    assign, d2 = _assign(X, C, cfg.use_kdtree)
    history.append(float(d2.sum()))
    for it in range(1, cfg.max_iters + 1):
        counts = np.bincount(assign, minlength=k)
        newC = np.zeros_like(C)
        np.add.at(newC, assign, X)
        filled = counts > 0
        newC[filled] /= counts[filled, None]
        if not np.all(filled):
            taken = set()
            order = np.argsort(-d2, kind="stable")
            empty = np.flatnonzero(~filled)
            pos = 0
            for c in empty:
                while int(order[pos]) in taken:
                    pos += 1
                p = int(order[pos])
                taken.add(p)
                newC[c] = X[p]
        shift = np.sqrt(((newC - C) ** 2).sum(axis=1)).max()
        C = newC
        assign, d2 = _assign(X, C, cfg.use_kdtree)
        history.append(float(d2.sum()))
        if shift < cfg.tol:
            break
    labels, remap = canonical_labels(assign)
    return KMeansResult(labels, C[remap], history[-1], it, history)


# connected components -------------------------------------------------------

def neighbor_pairs(points, nbhd, tree=None):
    """Directed (i, j) neighbor pairs, self pairs excluded."""
    P = as_points(points)
    tree = KdTree(P) if tree is None else tree
    nb = neighborhoods(tree, P, nbhd)
    if isinstance(nb, np.ndarray):
        i = np.repeat(np.arange(len(P)), nb.shape[1])
        j = nb.reshape(-1)
    else:
        i = np.repeat(np.arange(len(P)), [len(x) for x in nb])
        j = np.concatenate(nb) if nb else np.empty(0, np.int64)
    keep = i != j
    return i[keep].astype(np.int64), j[keep].astype(np.int64)


def connected_components(points, nbhd, predicate=None, min_size=1, tree=None):
    """Segment points into connected components of a similarity graph.

    An undirected edge joins ``i`` and ``j`` when ``j`` is a neighbor of
    ``i`` (or vice versa) and ``predicate`` accepts the pair in that
    direction.

    Parameters
    ----------
    predicate : callable or None
        Vectorized test ``predicate(i, j) -> bool array`` over index arrays.
        ``None`` accepts every neighbor pair.
    min_size : int
        Components smaller than this are labeled -1.
    """
    P = as_points(points)
    n = len(P)
    if n == 0:
        return ClusterLabels(np.empty(0, np.int64), 0)
    i, j = neighbor_pairs(P, nbhd, tree)
    if predicate is not None and len(i):
        ok = np.asarray(predicate(i, j), dtype=bool).reshape(-1)
        if ok.shape[0] != i.shape[0]:
            raise ValueError("predicate must return one boolean per pair")
        i, j = i[ok], j[ok]
    graph = coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n)).tocsr()
    _, raw = _csgraph_components(graph, directed=True, connection="weak")
    return canonical_labels(raw, min_size)[0]


def normal_angle_predicate(normals, angle_thresh):
    """Orientation-agnostic normal angle test ``arccos(min(1, |n_i.n_j|)) <= thresh``."""
    N = np.asarray(normals, dtype=np.float64)

    def pred(i, j):
        dots = np.abs((N[i] * N[j]).sum(axis=1))
        return np.arccos(np.minimum(1.0, dots)) <= angle_thresh

    return pred


def smooth_segments(cloud, k=30, angle_thresh=2.8, min_size=1):
    """Connected components over kNN neighborhoods with similar normals."""
    if not cloud.has_normals:
        raise ValueError("smooth_segments requires a cloud with normals")
    return connected_components(cloud.points, KNN(k),
                                normal_angle_predicate(cloud.normals, angle_thresh), min_size)


def euclidean_segments(points, radius, min_size=1):
    """Components of the radius graph (no similarity test)."""
    return connected_components(points, Radius(radius), None, min_size)


# mean shift -----------------------------------------------------------------

@dataclass
class MeanShiftConfig:
    bandwidth: float
    kernel: str = "gaussian"
    max_iters: int = 500
    tol: Optional[float] = None
    merge_radius: Optional[float] = None

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.kernel not in ("flat", "gaussian"):
            raise ValueError(f"unknown kernel {self.kernel!r}")


@dataclass(eq=False)
class MeanShiftResult:
    labels: ClusterLabels
    modes: np.ndarray
    positions: np.ndarray


_SHIFT_CHUNK = 256


def _shift_step(X, Y, counts, idx, dist, h, kernel):
    """One kernel-weighted mean per query; an empty neighborhood keeps its position."""
    out = Y.copy()
    nz = np.flatnonzero(counts)
    if nz.size == 0:
        return out
    w = np.ones(idx.size) if kernel == "flat" else np.exp(-(dist * dist) / (2.0 * h * h))
    starts = np.concatenate([[0], np.cumsum(counts[nz])[:-1]])
    num = np.add.reduceat(w[:, None] * X[idx], starts, axis=0)
    out[nz] = num / np.add.reduceat(w, starts)[:, None]
    return out


def mean_shift(points, cfg):
    """Mean-shift mode seeking with a flat or truncated Gaussian kernel.

    Every point climbs toward a density mode; converged positions closer
    than the merge radius are grouped and each group's mean is its mode.
    """
    X = as_points(points)
    n = len(X)
    if n == 0:
        return MeanShiftResult(ClusterLabels(np.empty(0, np.int64), 0), np.empty((0, X.shape[1])),
                               X.copy())
    h = float(cfg.bandwidth)
    tol = 1e-7 * h if cfg.tol is None else cfg.tol
    merge = h / 2.0 if cfg.merge_radius is None else cfg.merge_radius
    support = h if cfg.kernel == "flat" else 3.0 * h
    tree = KdTree(X)
    Y = X.copy()
    active = np.arange(n)
    for _ in range(cfg.max_iters):
        if active.size == 0:
            break
        newY = np.empty((active.size, X.shape[1]))
        for a in range(0, active.size, _SHIFT_CHUNK):
            rows = active[a:a + _SHIFT_CHUNK]
            newY[a:a + rows.size] = _shift_step(X, Y[rows], *tree.radius_flat(Y[rows], support),
                                                h, cfg.kernel)
        shift = np.sqrt(((newY - Y[active]) ** 2).sum(axis=1))
        Y[active] = newY
        active = active[shift >= tol]

    i, j = neighbor_pairs(Y, Radius(merge))
    graph = coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n)).tocsr()
    _, raw = _csgraph_components(graph, directed=True, connection="weak")
    labels, _ = canonical_labels(raw)
    modes = np.stack([Y[labels.labels == c].mean(axis=0) for c in range(labels.k)])
    return MeanShiftResult(labels, modes, Y)


# spectral -------------------------------------------------------------------

@dataclass
class SpectralConfig:
    k: int
    variant: str = "symmetric"
    sigma: Optional[float] = None
    seed: Optional[int] = 0
    kmeans_iters: int = 100

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("spectral clustering needs k >= 2")
        if self.variant not in ("unnormalized", "random_walk", "symmetric"):
            raise ValueError(f"unknown spectral variant {self.variant!r}")


def gaussian_affinity(points, sigma):
    X = as_points(points)
    diff = X[:, None, :] - X[None, :, :]
    W = np.exp(-(diff * diff).sum(axis=2) / (2.0 * sigma * sigma))
    np.fill_diagonal(W, 0.0)
    return W


def spectral_embedding(W, k, variant):
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("affinity must be a square matrix")
    if np.max(np.abs(W - W.T), initial=0.0) > 1e-9:
        raise ValueError("affinity matrix is not symmetric")
    if np.any(W < 0):
        raise ValueError("affinity matrix has negative entries")
    deg = W.sum(axis=1)
    n = W.shape[0]
    if variant == "unnormalized":
        L = np.diag(deg) - W
        w, V = sym_eigh(L)
        return V[:, ::-1][:, :k]
    isolated = np.flatnonzero(deg <= 0)
    if isolated.size:
        raise ValueError(f"vertex {int(isolated[0])} has zero degree; "
                         f"the {variant} Laplacian is undefined")
    s = 1.0 / np.sqrt(deg)
    Lsym = np.eye(n) - s[:, None] * W * s[None, :]
    w, U = sym_eigh(Lsym)
    U = U[:, ::-1][:, :k]
    if variant == "random_walk":
        # generalized problem L v = lambda D v: v = D^{-1/2} u
        return s[:, None] * U
    norms = np.linalg.norm(U, axis=1)
    out = np.zeros_like(U)
    ok = norms > 0
    out[ok] = U[ok] / norms[ok, None]
    return out


def spectral(cfg, points=None, affinity=None):
    """Spectral clustering with the unnormalized, random-walk or symmetric Laplacian.

    Pass either an explicit affinity matrix or points plus ``cfg.sigma`` for
    a Gaussian kernel. The embedding is clustered with seeded k-means.
    Dense eigendecomposition, intended for a few thousand points at most.
    """
    if affinity is None:
        if points is None or cfg.sigma is None:
            raise ValueError("spectral needs an affinity matrix or points with sigma")
        affinity = gaussian_affinity(points, cfg.sigma)
    n = np.asarray(affinity).shape[0]
    if cfg.k > n:
        raise ValueError(f"k={cfg.k} exceeds the number of points {n}")
    emb = spectral_embedding(affinity, cfg.k, cfg.variant)
    res = kmeans(emb, KMeansConfig(cfg.k, max_iters=cfg.kmeans_iters, seed=cfg.seed))
    return res.labels
