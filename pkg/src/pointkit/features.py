"""PCA, surface normal / curvature estimation and voxel-grid downsampling."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._threads import get_num_threads, parallel_chunks
from .core import PointCloud, as_points
from .embedding import fix_signs
from .kdtree import KdTree


class PcaResult(NamedTuple):
    mean: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class KNN:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class Radius:
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("radius must be > 0")


@dataclass(frozen=True)
class KNNInRadius:
    k: int
    r: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.r > 0:
            raise ValueError("radius must be > 0")


def neighborhoods(tree, queries, nbhd, threads=None):
    """Neighbor index lists for every query point under a neighborhood spec.

    KNN neighborhoods come back as a 2-D index array; radius-based ones as a
    list of index arrays.
    """
    if isinstance(nbhd, KNN):
        return tree.knn_batch(queries, nbhd.k, threads=threads)[0]
    if isinstance(nbhd, Radius):
        return [i for i, _ in tree.radius_batch(queries, nbhd.r, threads=threads)]
    if isinstance(nbhd, KNNInRadius):
        return [i for i, _ in tree.hybrid_batch(queries, nbhd.k, nbhd.r, threads=threads)]
    raise TypeError(f"unsupported neighborhood spec {nbhd!r}")


def _sorted_eigh(C):
    w, V = np.linalg.eigh(C)
    w = w[..., ::-1]
    V = V[..., ::-1]
    return np.maximum(w, 0.0), V


def pca(points):
    """Principal component analysis with 1/N covariance normalization.

    Eigenvalues are sorted descending and clipped at zero; each eigenvector's
    largest-magnitude component is positive.
    """
    X = as_points(points)
    if len(X) == 0:
        raise ValueError("pca requires at least one point")
    mean = X.mean(axis=0)
    Y = X - mean
    C = (Y.T @ Y) / len(X)
    w, V = _sorted_eigh(C)
    return PcaResult(mean, w, fix_signs(V))


def _batched_sign_fix(V):
    # V: (m, D, D) eigenvectors in columns
    m, D, _ = V.shape
    piv = np.argmax(np.abs(V), axis=1)  # (m, D)
    vals = np.take_along_axis(V, piv[:, None, :], axis=1)[:, 0, :]
    return V * np.where(vals < 0, -1.0, 1.0)[:, None, :]


def _normals_from_covariances(C, counts, dim):
    w, V = _sorted_eigh(C)
    V = _batched_sign_fix(V)
    normals = V[:, :, dim - 1].copy()
    total = w.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        curv = np.where(total > 0, w[:, dim - 1] / np.where(total > 0, total, 1.0), 0.0)
    bad = counts < dim
    normals[bad] = 0.0
    curv[bad] = 0.0
    return normals, curv


def _knn_covariances(points, idx):
    nb = points[idx]  # (m, k, D)
    mean = nb.mean(axis=1, keepdims=True)
    Y = nb - mean
    return np.einsum("mki,mkj->mij", Y, Y) / idx.shape[1]


def _list_covariances(points, lists):
    D = points.shape[1]
    C = np.zeros((len(lists), D, D))
    counts = np.array([len(ix) for ix in lists], dtype=np.int64)
    for i, ix in enumerate(lists):
        if len(ix) == 0:
            continue
        nb = points[ix]
        Y = nb - nb.mean(axis=0)
        C[i] = (Y.T @ Y) / len(ix)
    return C, counts


def estimate_normals(cloud, nbhd, viewpoint=None, tree=None, threads=None):
    """Estimate per-point normals and curvature from local PCA.

    The normal is the smallest-eigenvalue eigenvector of the neighborhood
    covariance, flipped toward ``viewpoint`` (default: the origin).
    Curvature is ``lambda_min / sum(lambda)``. Points with fewer than D
    neighbors (self included) get a zero normal and zero curvature.

    Returns a new cloud with ``normals`` and ``curvature`` filled.
    """
    if len(cloud) == 0:
        raise ValueError("estimate_normals requires a non-empty cloud")
    P = cloud.points
    n, D = P.shape
    vp = np.zeros(D) if viewpoint is None else np.asarray(viewpoint, dtype=np.float64).reshape(-1)
    if vp.shape[0] != D:
        raise ValueError("viewpoint dimension does not match the cloud")
    threads = get_num_threads() if threads is None else threads
    tree = KdTree(P) if tree is None else tree

    if isinstance(nbhd, KNN):
        k = min(nbhd.k, n)

        def work(a, b):
            idx, _ = tree.knn_batch(P[a:b], k, threads=1)
            C = _knn_covariances(P, idx)
            return _normals_from_covariances(C, np.full(b - a, k), D)
    else:
        def work(a, b):
            lists = neighborhoods(tree, P[a:b], nbhd, threads=1)
            C, counts = _list_covariances(P, lists)
            return _normals_from_covariances(C, counts, D)

    parts = parallel_chunks(work, n, threads=threads)
    normals = np.concatenate([p[0] for p in parts])
    curv = np.concatenate([p[1] for p in parts])

    side = ((vp - P) * normals).sum(axis=1)
    normals[side < 0] *= -1.0
    out = cloud.copy()
    out.normals = normals
    out.curvature = curv
    return out


def grid_keys(points, bin_size, origin=None):
    P = as_points(points)
    o = np.zeros(P.shape[1]) if origin is None else np.asarray(origin, dtype=np.float64)
    return np.floor((P - o) / bin_size).astype(np.int64)


def grid_downsample(cloud, bin_size, origin=None, return_keys=False):
    """Replace the points of each occupied voxel by their centroid.

    Bin keys are ``floor((p - origin) / bin_size)`` per axis; output points
    are ordered by ascending lexicographic key. Colors are averaged, normals
    averaged and renormalized (zero when the mean is shorter than 1e-12).
    """
    if not bin_size > 0:
        raise ValueError("bin_size must be positive")
    D = cloud.dim
    if len(cloud) == 0:
        out = PointCloud(np.empty((0, D)),
                         np.empty((0, D)) if cloud.has_normals else None,
                         np.empty((0, 3)) if cloud.has_colors else None)
        return (out, np.empty((0, D), np.int64)) if return_keys else out
    keys = grid_keys(cloud.points, bin_size, origin)
    ukeys, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)

    def mean_of(values):
        acc = np.zeros((len(ukeys), values.shape[1]))
        np.add.at(acc, inv, values)
        return acc / counts[:, None]

    pts = mean_of(cloud.points)
    normals = None
    if cloud.has_normals:
        m = mean_of(cloud.normals)
        length = np.linalg.norm(m, axis=1)
        ok = length >= 1e-12
        normals = np.zeros_like(m)
        normals[ok] = m[ok] / length[ok, None]
    colors = None
    if cloud.has_colors:
        colors = np.clip(mean_of(cloud.colors), 0.0, 1.0)
    out = PointCloud(pts, normals, colors)
    return (out, ukeys) if return_keys else out
