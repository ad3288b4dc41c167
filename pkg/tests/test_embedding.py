import numpy as np
import pytest

from pointkit import classical_mds, sym_eigh
from pointkit.embedding import pairwise_distances


def test_sym_eigh_examples():
    e = sym_eigh(np.diag([3.0, 1.0, 2.0]))
    assert np.array_equal(e.eigenvalues, [3, 2, 1])
    assert np.array_equal(e.eigenvectors, np.eye(3)[:, [0, 2, 1]])
    assert np.array_equal(sym_eigh(np.eye(4)).eigenvalues, np.ones(4))


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_sym_eigh_reconstruction(method):
    X = np.random.default_rng(0).normal(size=(50, 50))
    A = X + X.T
    w, V = sym_eigh(A, method=method)
    assert np.abs(V @ np.diag(w) @ V.T - A).max() <= 1e-9 * np.abs(A).max()
    assert np.abs(V.T @ V - np.eye(50)).max() <= 1e-9
    assert np.all(np.diff(w) <= 0)
    big = np.argmax(np.abs(V), axis=0)
    assert np.all(V[big, np.arange(50)] > 0)


def test_methods_agree():
    X = np.random.default_rng(1).normal(size=(12, 12))
    a, b = sym_eigh(X + X.T), sym_eigh(X + X.T, method="jacobi")
    assert np.abs(a.eigenvalues - b.eigenvalues).max() <= 1e-10
    assert np.abs(a.eigenvectors - b.eigenvectors).max() <= 1e-8


def test_sym_eigh_errors():
    with pytest.raises(ValueError):
        sym_eigh(np.array([[1.0, np.nan], [np.nan, 1.0]]))
    with pytest.raises(ValueError):
        sym_eigh(np.ones((2, 3)))
    with pytest.raises(ValueError):
        sym_eigh(np.eye(2), method="qr")


def test_mds_collinear():
    D = pairwise_distances([[-1.0], [0.0], [1.0]])
    coords, w = classical_mds(D, 1)
    assert np.allclose(np.abs(coords[:, 0]), [1, 0, 1], atol=1e-12)
    assert coords[0, 0] == pytest.approx(-coords[2, 0], abs=1e-12)
    assert w[0] == pytest.approx(2.0) and np.allclose(w[1:], 0, atol=1e-12)


def test_mds_recovers_distances():
    P = np.random.default_rng(2).normal(size=(30, 3))
    coords, w = classical_mds(pairwise_distances(P), 3)
    assert np.abs(coords.mean(axis=0)).max() <= 1e-12
    assert np.abs(pairwise_distances(coords) - pairwise_distances(P)).max() <= 1e-9
    zero, wz = classical_mds(np.zeros((4, 4)), 2)
    assert np.all(zero == 0) and np.all(wz == 0)
    with pytest.raises(ValueError):
        classical_mds(np.zeros((3, 3)), 4)
