"""Dense symmetric eigendecomposition and classical multidimensional scaling."""

from typing import NamedTuple

import numpy as np


class SymEig(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def fix_signs(vectors):
    """Flip columns so each one's largest-magnitude entry is positive.

    Ties between equal magnitudes resolve to the first such entry.
    """
    V = np.array(vectors, dtype=np.float64, copy=True)
    if V.size == 0:
        return V
    pivot = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[pivot, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return V * signs


def _jacobi(A, tol, max_sweeps):
    A = A.copy()
    n = A.shape[0]
    V = np.eye(n)
    fro = np.linalg.norm(A)
    if fro == 0.0:
        return np.zeros(n), V
    thresh = tol * fro
    for _ in range(max_sweeps):
        off = A - np.diag(np.diag(A))
        if np.max(np.abs(off)) < thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < thresh * 1e-3:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise RuntimeError("Jacobi eigensolver did not converge")
    return np.diag(A).copy(), V


def sym_eigh(A, method="lapack", tol=1e-12, max_sweeps=100):
    """Eigendecomposition of a symmetric matrix.

    Eigenvalues are returned in descending order with matching eigenvector
    columns; each eigenvector's largest-magnitude entry is made positive.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Symmetrized internally as ``(A + A.T) / 2``.
    method : {"lapack", "jacobi"}
        ``"jacobi"`` runs cyclic Jacobi sweeps until the largest off-diagonal
        entry drops below ``tol * ||A||_F``; it is exact but O(n^3) per
        sweep in Python and meant for small matrices.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    A = 0.5 * (A + A.T)
    if method == "lapack":
        w, V = np.linalg.eigh(A)
    elif method == "jacobi":
        w, V = _jacobi(A, tol, max_sweeps)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(-w, kind="stable")
    return SymEig(w[order], fix_signs(V[:, order]))


def double_center(sq):
    """``-1/2 J S J`` with ``J`` the centering matrix."""
    row = sq.mean(axis=1, keepdims=True)
    col = sq.mean(axis=0, keepdims=True)
    return -0.5 * (sq - row - col + sq.mean())


def classical_mds(dist, target_dim):
    """Classical (Torgerson) MDS.

    Parameters
    ----------
    dist : array_like, shape (n, n)
        Pairwise distances.
    target_dim : int
        Embedding dimension, at most n.

    Returns
    -------
    coords : ndarray, shape (n, target_dim)
        Coordinate column j is ``v_j * sqrt(max(lambda_j, 0))``.
    eigenvalues : ndarray, shape (n,)
        All eigenvalues of the double-centered Gram matrix, descending and
        unclipped.
    """
    D = np.asarray(dist, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {D.shape}")
    if not np.all(np.isfinite(D)):
        raise ValueError("distance matrix has non-finite entries")
    n = D.shape[0]
    if not 1 <= target_dim <= n:
        raise ValueError(f"target_dim must lie in [1, {n}]")
    B = double_center(D * D)
    w, V = sym_eigh(B)
    coords = V[:, :target_dim] * np.sqrt(np.maximum(w[:target_dim], 0.0))
    return coords, w


def pairwise_distances(points):
    X = np.asarray(points, dtype=np.float64)
    sq = (X * X).sum(axis=1)
    G = X @ X.T
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * G, 0.0)
    np.fill_diagonal(D2, 0.0)
    return np.sqrt(D2)
