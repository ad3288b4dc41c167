"""Acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line with the measured
numbers. Run ``pytest tests/test_acceptance.py -s`` to see them inline, or
``python tests/test_acceptance.py`` for just the summary.
"""

import os
import subprocess
import sys
import time
from collections import deque

import numpy as np
import pytest

from pointkit import (KNN, KdTree, KMeansConfig, PointCloud, RansacConfig, SpectralConfig,
                      box, classical_mds, connected_components, estimate_normals,
                      estimate_rigid_point_to_point, grid_downsample, hull_from_points, kmeans,
                      polytope_from_halfspaces, ransac_plane, spectral, transform)
from pointkit._threads import num_threads
from pointkit.clustering import canonical_labels
from pointkit.core import random_motion
from pointkit.features import Radius
from pointkit.registration import IcpConfig, icp
from pointkit.scenes import SceneSpec, blobs, corner_scene, generate_scene, planted_motion, planted_plane
from pointkit.spatial import SpaceRegion


def report(capsys, tag, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


def rot_err(Ra, Rb):
    """Angle of Ra^T Rb in 2-D or 3-D; atan2 keeps tiny angles accurate."""
    M = Ra.T @ Rb
    c = (np.trace(M) - (M.shape[0] - 2)) / 2.0
    s = np.linalg.norm(M - M.T) / (2.0 * np.sqrt(2.0))
    return float(np.arctan2(s, c))


# 1 ---------------------------------------------------------------------------

def _scan(P, q):
    d = np.sqrt(((P - q) * (P - q)).sum(axis=1))
    o = np.lexsort((np.arange(len(P)), d))
    return o, d[o]


def test_ac01_kdtree_oracle(capsys):
    t0 = time.perf_counter()
    bad = 0
    total = 0
    for D in (3, 5):
        rng = np.random.default_rng(100 + D)
        P = rng.uniform(size=(2000, D))
        tree = KdTree(P)
        for qi in range(200):
            q = rng.uniform(size=D) if qi % 2 else P[rng.integers(len(P))]
            order, dist = _scan(P, q)
            kind = qi % 3
            k = int(rng.integers(1, 30))
            r = float(rng.uniform(0.05, 0.3))
            if kind == 0:
                idx, d = tree.knn_arrays(q, k)
                ei, ed = order[:k], dist[:k]
            elif kind == 1:
                idx, d = tree.radius_arrays(q, r)
                m = dist <= r
                ei, ed = order[m], dist[m]
            else:
                idx, d = tree.hybrid_arrays(q, k, r)
                m = dist <= r
                ei, ed = order[m][:k], dist[m][:k]
            total += 1
            if not (np.array_equal(idx, ei) and np.array_equal(d, ed)):
                bad += 1
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 2.0
    report(capsys, "AC1 kd-tree vs linear scan", ok,
           f"{total - bad}/{total} exact, {elapsed:.3f}s (< 2 s)")
    assert ok


# 2 ---------------------------------------------------------------------------

def _hash_group(P, s):
    groups = {}
    for p in P:
        key = tuple(int(v) for v in np.floor(p / s))
        acc = groups.setdefault(key, [np.zeros(P.shape[1]), 0])
        acc[0] = acc[0] + p
        acc[1] += 1
    keys = sorted(groups)
    return np.array(keys), np.array([groups[k][0] / groups[k][1] for k in keys])


def test_ac02_voxel_downsample(capsys):
    rng = np.random.default_rng(2)
    P = rng.uniform(-1.0, 1.0, size=(10_000, 3))
    s = 0.1
    out, keys = grid_downsample(PointCloud(P), s, return_keys=True)
    ekeys, ecent = _hash_group(P, s)
    same_keys = np.array_equal(keys, ekeys)
    err = np.abs(out.points - ecent).max() if same_keys else np.inf
    again = grid_downsample(out, s)
    idem = len(again) == len(out) and np.abs(again.points - out.points).max() <= 1e-12
    ok = same_keys and err <= 1e-12 and idem
    report(capsys, "AC2 voxel downsampling", ok,
           f"{len(keys)} bins, keys equal={same_keys}, max centroid err={err:.2e}, idempotent={idem}")
    assert ok


# 3 ---------------------------------------------------------------------------

def test_ac03_normals_plane(capsys):
    rng = np.random.default_rng(3)
    a = rng.normal(size=3)
    a /= np.linalg.norm(a)
    u = np.cross(a, [1.0, 0.0, 0.0])
    u /= np.linalg.norm(u)
    v = np.cross(a, u)
    s = rng.uniform(-1.0, 1.0, size=(2000, 2))
    P = 0.3 * a + s[:, :1] * u + s[:, 1:] * v
    vp = 2.0 * a + np.array([0.1, -0.2, 0.3])
    out = estimate_normals(PointCloud(P), KNN(10), viewpoint=vp)
    n = out.normals
    ang = np.arctan2(np.linalg.norm(np.cross(n, a), axis=1), np.abs(n @ a))
    facing = ((vp - P) * n).sum(axis=1)
    ok = ang.max() <= 1e-9 and out.curvature.max() <= 1e-12 and np.all(facing >= -1e-12)
    report(capsys, "AC3 normals on a plane", ok,
           f"max angle {ang.max():.2e} rad, max curvature {out.curvature.max():.2e}, "
           f"viewpoint-consistent {np.mean(facing >= -1e-12) * 100:.1f}%")
    assert ok


# 4 ---------------------------------------------------------------------------

def test_ac04_point_to_point(capsys):
    worst_r = worst_t = 0.0
    for D in (2, 3):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            m = random_motion(rng, dim=D)
            src = rng.normal(size=(40, D))
            est = estimate_rigid_point_to_point(src, m.apply(src))
            worst_r = max(worst_r, rot_err(est.rotation, m.rotation))
            worst_t = max(worst_t, float(np.linalg.norm(est.translation - m.translation)))
    ok = worst_r < 1e-9 and worst_t < 1e-9
    report(capsys, "AC4 point-to-point estimator", ok,
           f"200 motions, worst rotation err {worst_r:.2e} rad, worst translation err {worst_t:.2e}")
    assert ok


# 5 ---------------------------------------------------------------------------

def test_ac05_icp_corner(capsys):
    src = corner_scene(2000, seed=5)
    motion = planted_motion(5, angle_deg=5.0, translation=0.05)
    t0 = time.perf_counter()
    s = grid_downsample(src, 0.01)
    t = grid_downsample(transform(src, motion), 0.01)
    t = estimate_normals(t, KNN(10), viewpoint=t.points.mean(axis=0))
    res = icp(s, t, IcpConfig(max_iters=15, max_corr_dist=0.05))
    elapsed = time.perf_counter() - t0
    r_err = np.degrees(rot_err(res.motion.rotation, motion.rotation))
    t_err = float(np.linalg.norm(res.motion.translation - motion.translation))
    h = np.array(res.rmse_history)
    mono = bool(np.all(np.diff(h) <= 1e-12))
    ok = r_err < 0.1 and t_err < 1e-3 and mono and elapsed < 1.0
    report(capsys, "AC5 ICP on planted corner scene", ok,
           f"rot err {r_err:.2e} deg, trans err {t_err:.2e}, {res.iterations} iters, "
           f"RMSE non-increasing={mono}, {elapsed:.3f}s")
    assert ok


# 6 ---------------------------------------------------------------------------

def test_ac06_ransac_plane(capsys):
    wins = 0
    for seed in range(50):
        P, n, d, mask = planted_plane(1000, 0.7, 0.001, seed=seed)
        res = ransac_plane(P, RansacConfig(inlier_threshold=0.01, seed=seed))
        ang = np.degrees(np.arccos(min(1.0, abs(float(res.model.normal @ n)))))
        found = np.isin(np.flatnonzero(mask), res.inliers).mean()
        wins += ang <= 1.0 and found >= 0.95
    ok = wins >= 48
    report(capsys, "AC6 RANSAC plane", ok, f"{wins}/50 successes (need 48)")
    assert ok


# 7 ---------------------------------------------------------------------------

def _bfs_labels(P, r):
    n = len(P)
    D = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=2))
    adj = [np.flatnonzero((D[i] <= r) & (np.arange(n) != i)) for i in range(n)]
    lab = np.full(n, -1)
    c = 0
    for s in range(n):
        if lab[s] >= 0:
            continue
        lab[s] = c
        q = deque([s])
        while q:
            i = q.popleft()
            for j in adj[i]:
                if lab[j] < 0:
                    lab[j] = c
                    q.append(j)
        c += 1
    # canonical: size descending, then smallest member
    sizes = np.bincount(lab)
    first = np.array([np.flatnonzero(lab == k)[0] for k in range(c)])
    order = sorted(range(c), key=lambda k: (-sizes[k], first[k]))
    remap = np.empty(c, int)
    remap[order] = np.arange(c)
    return remap[lab]


def test_ac07_clustering(capsys):
    cc_ok = 0
    for g in range(20):
        rng = np.random.default_rng(700 + g)
        P = rng.uniform(size=(500, 3))
        r = 0.06 + 0.004 * g
        got = connected_components(P, Radius(r)).labels
        cc_ok += np.array_equal(got, _bfs_labels(P, r))

    P, truth = blobs([[0, 0], [10, 0], [0, 10], [10, 10]], 50, 1.0, seed=7)
    km = kmeans(P, KMeansConfig(4, seed=7))
    km_exact = np.array_equal(km.labels.labels, canonical_labels(truth)[0].labels)
    hist = np.array(km.objective_history)
    km_mono = bool(np.all(np.diff(hist) <= 1e-9 * hist[0]))

    rng = np.random.default_rng(77)
    sizes = [12, 9, 15]
    block = np.repeat(np.arange(3), sizes)
    W = rng.uniform(0.5, 1.0, size=(36, 36))
    W = (W + W.T) / 2.0
    W[block[:, None] != block[None, :]] = 0.0
    np.fill_diagonal(W, 0.0)
    perm = rng.permutation(36)
    W, block = W[np.ix_(perm, perm)], block[perm]
    expect = canonical_labels(block)[0].labels
    sp = {v: np.array_equal(spectral(SpectralConfig(3, variant=v), affinity=W).labels, expect)
          for v in ("unnormalized", "random_walk", "symmetric")}
    ok = cc_ok == 20 and km_exact and km_mono and all(sp.values())
    report(capsys, "AC7 clustering", ok,
           f"components {cc_ok}/20 exact, k-means exact={km_exact} monotone={km_mono}, "
           f"spectral {sum(sp.values())}/3 variants exact")
    assert ok


# 8 ---------------------------------------------------------------------------

def test_ac08_spatial(capsys):
    corners = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], float)
    cube = hull_from_points(corners)
    A, b = cube.normals, cube.offsets
    back = polytope_from_halfspaces(A, b)
    va = np.array(sorted(map(tuple, np.round(cube.vertices, 12))))
    vb = np.array(sorted(map(tuple, np.round(back.vertices, 12))))
    rt = va.shape == vb.shape == (8, 3) and np.abs(va - vb).max() <= 1e-9 and \
        np.abs(va - np.array(sorted(map(tuple, corners)))).max() <= 1e-9
    vol = cube.volume()
    shifted = box([0.5, 0, 0], [1.5, 1, 1])
    inter = cube.intersect(shifted).volume()
    union = SpaceRegion([cube]).union(SpaceRegion([shifted])).volume()

    rng = np.random.default_rng(8)
    pts = rng.normal(size=(40, 3))
    hull = hull_from_points(pts)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    S = rng.uniform(lo, hi, size=(1_000_000, 3))
    mc = hull.contains_points(S).mean() * np.prod(hi - lo)
    rel = abs(mc - hull.volume()) / hull.volume()
    ok = rt and abs(vol - 1) <= 1e-9 and abs(inter - 0.5) <= 1e-9 and abs(union - 1.5) <= 1e-9 \
        and rel <= 0.01
    report(capsys, "AC8 spatial", ok,
           f"round trip={rt}, cube {vol:.12f}, intersection {inter:.12f}, union {union:.12f}, "
           f"Monte-Carlo rel diff {rel:.2e}")
    assert ok


# 9 ---------------------------------------------------------------------------

def test_ac09_mds(capsys):
    rng = np.random.default_rng(9)
    P = rng.normal(size=(50, 3))
    Dm = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=2))
    X, lam = classical_mds(Dm, 3)
    Dx = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    err = np.abs(Dx - Dm).max()
    trail = np.abs(lam[3:]).max() / lam[0]
    ok = err <= 1e-9 and trail <= 1e-9
    report(capsys, "AC9 classical MDS", ok,
           f"max distance err {err:.2e}, trailing eigenvalue ratio {trail:.2e}")
    assert ok


# 10 --------------------------------------------------------------------------

def _cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "pointkit", *args], cwd=cwd,
                          capture_output=True, text=True)


def test_ac10_cli_benchmark_configs(tmp_path, capsys):
    steps = [
        ("gen", "scene.ply", "--points", "1500", "--moved", "moved.ply", "--no-normals"),
        ("normals", "scene.ply", "normals.ply"),
        ("normals", "scene.ply", "normals_r.ply", "--radius"),
        ("segment", "normals.ply", "seg.ply", "--labels", "labels.csv"),
        ("icp", "scene.ply", "moved.ply"),
    ]
    codes = [_cli(*s, cwd=tmp_path).returncode for s in steps]
    files = all((tmp_path / f).exists() for f in
                ("scene.ply", "moved.ply", "normals.ply", "normals_r.ply", "seg.ply", "labels.csv"))
    helps = {c: _cli(c, "--help", cwd=tmp_path).stdout.replace("\n", " ") for c in
             ("segment", "icp", "normals")}
    want = {
        "segment": ["default: 30", "default: 2.8"],
        "icp": ["default: 0.01", "default: 10", "default: 15", "default: 0.05"],
        "normals": ["default: 10", "0.01"],
    }
    helps_ok = all(all(w in " ".join(helps[c].split()) for w in ws) for c, ws in want.items())
    ok = codes == [0] * len(steps) and files and helps_ok
    report(capsys, "AC10 CLI benchmark configurations", ok,
           f"exit codes {codes}, outputs written={files}, help lists defaults={helps_ok}")
    assert ok


# 11 --------------------------------------------------------------------------

def _usable_cores():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


@pytest.mark.slow
@pytest.mark.xfail(_usable_cores() < 2, strict=False,
                   reason="thread speedup cannot exceed 1 with fewer than 2 usable cores")
def test_ac11_parallel_normals(capsys):
    cloud, _ = generate_scene(SceneSpec(planes=3, spheres=0, points_per_surface=100_000, seed=11))
    vp = np.full(3, 2.0)
    times = {}
    for t in (1, 4):
        with num_threads(t):
            estimate_normals(cloud, KNN(10), vp)
            runs = []
            for _ in range(3):
                t0 = time.perf_counter()
                estimate_normals(cloud, KNN(10), vp)
                runs.append(time.perf_counter() - t0)
        times[t] = float(np.median(runs))
    speed = times[1] / times[4]
    ok = speed > 1.0
    report(capsys, "AC11 parallel normals (soft)", ok,
           f"{len(cloud)} points, 1 thread {times[1]:.3f}s, 4 threads {times[4]:.3f}s, "
           f"speedup {speed:.2f}x on {_usable_cores()} usable core(s)")
    assert ok


if __name__ == "__main__":
    import pathlib
    import tempfile

    results = []
    for name, fn in sorted(globals().items()):
        if name.startswith("test_ac"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(pathlib.Path(d), None)
                else:
                    fn(None)
                results.append(True)
            except AssertionError:
                results.append(False)
    print(f"{sum(results)}/{len(results)} criteria passed")
