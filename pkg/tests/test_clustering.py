import numpy as np
import pytest

from pointkit import (KNN, KMeansConfig, MeanShiftConfig, PointCloud, Radius, SpectralConfig,
                      canonical_labels, connected_components, euclidean_segments, kmeans,
                      mean_shift, smooth_segments, spectral)
from pointkit.clustering import gaussian_affinity, normal_angle_predicate, spectral_embedding
from pointkit.scenes import blobs


def nearest_center(P, centers):
    d = ((P[:, None] - np.asarray(centers)[None]) ** 2).sum(-1)
    return canonical_labels(np.argmin(d, axis=1))[0].labels


def test_canonical_labels():
    lab, ids = canonical_labels([5, 5, 2, 2, 2, 9, -1, 7])
    assert list(lab.labels) == [1, 1, 0, 0, 0, 2, -1, 3] and lab.k == 4
    assert list(ids) == [2, 5, 9, 7] and lab.is_canonical()
    lab, _ = canonical_labels([0, 0, 1, 2, 2], min_size=2)
    assert list(lab.labels) == [0, 0, -1, 1, 1]


def test_kmeans_trivial():
    P = np.random.default_rng(0).normal(size=(12, 3))
    r = kmeans(P, KMeansConfig(12))
    assert r.objective == 0 and sorted(r.labels.labels) == list(range(12))
    one = kmeans(P, KMeansConfig(1))
    assert np.abs(one.centroids[0] - P.mean(axis=0)).max() <= 1e-12
    with pytest.raises(ValueError):
        kmeans(P, KMeansConfig(13))
    with pytest.raises(ValueError):
        kmeans(P, KMeansConfig(0))


def test_kmeans_blobs_and_permutation():
    P, _ = blobs([[0, 0], [100, 0]], 60, 0.1, seed=1)
    r = kmeans(P, KMeansConfig(2, seed=3))
    assert np.array_equal(r.labels.labels, nearest_center(P, [[0, 0], [100, 0]]))
    P, _ = blobs([[0, 0, 0], [5, 0, 0], [0, 5, 0]], 40, 0.5, seed=2)
    r = kmeans(P, KMeansConfig(3, seed=0))
    assert np.all(np.diff(r.objective_history) <= 1e-12)
    perm = np.random.default_rng(4).permutation(len(P))
    rp = kmeans(P[perm], KMeansConfig(3, seed=0))
    same = canonical_labels(r.labels.labels[perm])[0].labels
    assert np.array_equal(rp.labels.labels, same)
    rt = kmeans(P, KMeansConfig(3, seed=0, use_kdtree=True))
    assert np.array_equal(rt.labels.labels, r.labels.labels)


def test_components_examples():
    P = np.array([[0, 0, 0], [0.5, 0, 0], [10, 0, 0]], float)
    assert list(connected_components(P, Radius(1.0)).labels) == [0, 0, 1]
    never = connected_components(P, Radius(1.0), predicate=lambda i, j: np.zeros(len(i), bool))
    assert never.k == 3
    gone = connected_components(P, Radius(1.0), predicate=lambda i, j: np.zeros(len(i), bool),
                                min_size=2)
    assert np.all(gone.labels == -1) and gone.k == 0


def test_asymmetric_predicate_is_or_symmetrized():
    P = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    one_way = connected_components(P, Radius(2.0), predicate=lambda i, j: i < j)
    assert one_way.k == 1


def _corner(n=400, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 1, size=(n, 2))
    floor = np.column_stack([a, np.zeros(n)])
    wall = np.column_stack([a[:, 0], np.zeros(n), a[:, 1] + 0.02])
    P = np.vstack([floor, wall])
    N = np.vstack([np.tile([0, 0, 1.0], (n, 1)), np.tile([0, 1.0, 0], (n, 1))])
    return PointCloud(P, N)


def test_smooth_segments():
    c = _corner()
    assert smooth_segments(c, k=10, angle_thresh=0.2).k == 2
    assert smooth_segments(c, k=10, angle_thresh=2.0).k == 1
    direct = connected_components(c.points, KNN(30), normal_angle_predicate(c.normals, 2.8))
    assert np.array_equal(smooth_segments(c).labels, direct.labels)
    a = np.random.default_rng(1).uniform(size=(200, 2))
    two = PointCloud(np.vstack([np.column_stack([a, np.zeros(200)]),
                                np.column_stack([a, np.full(200, 5.0)])]),
                     np.tile([0, 0, 1.0], (400, 1)))
    assert smooth_segments(two, k=10).k == 2
    with pytest.raises(ValueError):
        smooth_segments(PointCloud(c.points))
    assert euclidean_segments(two.points, 0.5).k == 2


def test_mean_shift():
    P, _ = blobs([[0, 0]], 80, 0.05, seed=5)
    r = mean_shift(P, MeanShiftConfig(1.0))
    assert r.labels.k == 1 and np.linalg.norm(r.modes[0] - P.mean(axis=0)) <= 0.05
    P, _ = blobs([[0, 0], [10, 0]], 50, 0.1, seed=6)
    for kern in ("flat", "gaussian"):
        r = mean_shift(P, MeanShiftConfig(1.0, kernel=kern))
        assert np.array_equal(r.labels.labels, nearest_center(P, [[0, 0], [10, 0]]))
    single = mean_shift(np.array([[1.0, 2.0]]), MeanShiftConfig(0.5))
    assert single.labels.k == 1 and np.array_equal(single.modes[0], [1.0, 2.0])


def test_spectral_variants():
    W = np.zeros((10, 10))
    W[:4, :4] = 1
    W[4:, 4:] = 1
    np.fill_diagonal(W, 0)
    for v in ("unnormalized", "random_walk", "symmetric"):
        lab = spectral(SpectralConfig(2, variant=v), affinity=W)
        assert list(lab.labels) == [1] * 4 + [0] * 6
    P, _ = blobs([[0, 0], [3, 0]], 50, 0.3, seed=7)
    lab = spectral(SpectralConfig(2, sigma=0.3), points=P)
    assert np.array_equal(lab.labels, nearest_center(P, [[0, 0], [3, 0]]))
    Q = np.random.default_rng(8).uniform(size=(6, 2))
    assert spectral(SpectralConfig(6, variant="unnormalized", sigma=0.5), points=Q).k == 6


def test_spectral_errors():
    W = np.ones((4, 4))
    W[3, :] = W[:, 3] = 0
    with pytest.raises(ValueError, match="3"):
        spectral(SpectralConfig(2, variant="symmetric"), affinity=W)
    with pytest.raises(ValueError, match="symmetric"):
        spectral_embedding(np.triu(np.ones((3, 3))), 2, "unnormalized")
    with pytest.raises(ValueError):
        SpectralConfig(1)
    assert gaussian_affinity(np.zeros((3, 2)), 1.0)[0, 0] == 0
