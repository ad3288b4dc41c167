"""Seeded synthetic scenes: planar patches, spheres and room corners."""

from dataclasses import dataclass

import numpy as np

from .core import PointCloud, RigidMotion, rotation_about_axis


@dataclass
class SceneSpec:
    planes: int = 3
    spheres: int = 1
    points_per_surface: int = 2000
    noise: float = 0.0
    outlier_fraction: float = 0.0
    seed: int = 0
    extent: float = 1.0

    def __post_init__(self):
        if self.planes < 0 or self.spheres < 0 or self.points_per_surface < 0:
            raise ValueError("scene counts must be non-negative")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if not 0 <= self.outlier_fraction < 1:
            raise ValueError("outlier_fraction must lie in [0, 1)")


def _patch(rng, n, origin, u, v, extent):
    s = rng.uniform(0.0, extent, size=(n, 2))
    return origin + s[:, :1] * u + s[:, 1:] * v


def corner_scene(n=2000, extent=0.5, seed=0, center=True):
    """Three mutually orthogonal square patches meeting at a corner.

    Returns a cloud with exact normals pointing into the corner's open side.
    With ``center`` the scene is shifted so its centroid sits at the origin.
    """
    rng = np.random.default_rng(seed)
    counts = np.full(3, n // 3)
    counts[: n - counts.sum()] += 1
    axes = np.eye(3)
    pts, nrm = [], []
    for k in range(3):
        u, v = axes[(k + 1) % 3], axes[(k + 2) % 3]
        pts.append(_patch(rng, counts[k], np.zeros(3), u, v, extent))
        nrm.append(np.tile(axes[k], (counts[k], 1)))
    P = np.vstack(pts)
    if center:
        P = P - P.mean(axis=0)
    return PointCloud(P, np.vstack(nrm))


def generate_scene(spec):
    """Build a scene from a :class:`SceneSpec`.

    The first three planes form a room corner (floor and two walls); further
    planes are randomly tilted patches. Returns ``(cloud, labels)`` where
    labels give the generating surface per point and -1 for outliers.
    """
    rng = np.random.default_rng(spec.seed)
    L = spec.extent
    n = spec.points_per_surface
    pts, nrm, lab = [], [], []
    axes = np.eye(3)
    for k in range(spec.planes):
        if k < 3:
            a = axes[(2 - k) % 3]
            u, v = axes[(3 - k) % 3], axes[(4 - k) % 3]
            origin = np.zeros(3)
        else:
            a = rng.normal(size=3)
            a /= np.linalg.norm(a)
            u = np.cross(a, axes[np.argmin(np.abs(a))])
            u /= np.linalg.norm(u)
            v = np.cross(a, u)
            origin = rng.uniform(0.5 * L, 1.5 * L, size=3) + 2.0 * L * k * a
        pts.append(_patch(rng, n, origin, u, v, L))
        nrm.append(np.tile(a, (n, 1)))
        lab.append(np.full(n, len(lab)))
    for _ in range(spec.spheres):
        r = 0.15 * L
        c = rng.uniform(0.3 * L, 0.7 * L, size=3)
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1)[:, None]
        pts.append(c + r * d)
        nrm.append(d)
        lab.append(np.full(n, len(lab)))
    if pts:
        P, N, lbl = np.vstack(pts), np.vstack(nrm), np.concatenate(lab)
    else:
        P, N, lbl = np.empty((0, 3)), np.empty((0, 3)), np.empty(0, np.int64)
    if spec.noise > 0 and len(P):
        P = P + rng.normal(scale=spec.noise, size=P.shape)
    if spec.outlier_fraction > 0 and len(P):
        m = int(round(spec.outlier_fraction * len(P) / (1.0 - spec.outlier_fraction)))
        lo, hi = P.min(axis=0), P.max(axis=0)
        O = rng.uniform(lo, hi, size=(m, 3))
        d = rng.normal(size=(m, 3))
        P = np.vstack([P, O])
        N = np.vstack([N, d / np.linalg.norm(d, axis=1)[:, None]])
        lbl = np.concatenate([lbl, np.full(m, -1)])
    return PointCloud(P, N), lbl


def planted_motion(seed=0, angle_deg=5.0, translation=0.05):
    """Rotation by ``angle_deg`` about a random axis plus a translation of the given norm."""
    rng = np.random.default_rng(seed)
    R = rotation_about_axis(rng.normal(size=3), np.deg2rad(angle_deg))
    t = rng.normal(size=3)
    t *= translation / np.linalg.norm(t)
    return RigidMotion(R, t)


def planted_plane(n=1000, inlier_fraction=0.7, noise=0.001, seed=0):
    """Points on a random plane plus uniform outliers in the unit cube.

    Returns ``(points, normal, offset, inlier_mask)``.
    """
    rng = np.random.default_rng(seed)
    a = rng.normal(size=3)
    a /= np.linalg.norm(a)
    c = rng.uniform(0.3, 0.7, size=3)
    u = np.cross(a, np.eye(3)[np.argmin(np.abs(a))])
    u /= np.linalg.norm(u)
    v = np.cross(a, u)
    m = int(round(inlier_fraction * n))
    s = rng.uniform(-0.5, 0.5, size=(m, 2))
    inl = c + s[:, :1] * u + s[:, 1:] * v + rng.normal(scale=noise, size=(m, 1)) * a
    out = rng.uniform(-0.2, 1.2, size=(n - m, 3))
    P = np.vstack([inl, out])
    mask = np.zeros(n, dtype=bool)
    mask[:m] = True
    return P, a, float(a @ c), mask


def blobs(centers, n_per, sigma, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    P = np.vstack([c + rng.normal(scale=sigma, size=(n_per, centers.shape[1])) for c in centers])
    return P, np.repeat(np.arange(len(centers)), n_per)
