"""Point-set data model, rigid motions and RGBD conversions.

Point sets are ``(N, D)`` float64 arrays in C order, one point per row.
The memory layout is identical to a column-major ``D x N`` matrix with one
point per column, so buffers can be shared with code that expects that
convention without copying.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ORTHO_TOL = 1e-9
NORMAL_TOL = 1e-6


def as_points(points, dim=None, name="points"):
    """Validate and return an ``(N, D)`` float64 C-contiguous array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and dim is not None and arr.size == 0:
        arr = arr.reshape(0, dim)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array of shape (N, D), got shape {arr.shape}")
    if arr.shape[1] < 1:
        raise ValueError(f"{name} must have dimension >= 1")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return np.ascontiguousarray(arr)


def round_half_away(x):
    """Round to nearest integer, halves away from zero."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True, eq=False)
class RigidMotion:
    """Proper rigid transform ``p -> R p + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.translation, dtype=np.float64).reshape(-1)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError(f"rotation must be square, got shape {R.shape}")
        if t.shape[0] != R.shape[0]:
            raise ValueError("translation length does not match rotation size")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("rigid motion contains non-finite values")
        if np.max(np.abs(R.T @ R - np.eye(R.shape[0]))) > ORTHO_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation determinant is not +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @property
    def dim(self):
        return self.rotation.shape[0]

    @classmethod
    def identity(cls, dim=3):
        return cls(np.eye(dim), np.zeros(dim))

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, dtype=np.float64)
        d = T.shape[0] - 1
        return cls(T[:d, :d], T[:d, d])

    def as_matrix(self):
        d = self.dim
        T = np.eye(d + 1)
        T[:d, :d] = self.rotation
        T[:d, d] = self.translation
        return T

    def apply(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def apply_vectors(self, vectors):
        return np.asarray(vectors, dtype=np.float64) @ self.rotation.T

    def compose(self, other):
        """Return ``self o other`` (apply ``other`` first)."""
        return RigidMotion(self.rotation @ other.rotation,
                           self.rotation @ other.translation + self.translation)

    def __matmul__(self, other):
        return self.compose(other)

    def inverse(self):
        Rt = self.rotation.T
        return RigidMotion(Rt, -Rt @ self.translation)

    def rotation_angle(self):
        """Rotation angle in radians (2-D or 3-D)."""
        R = self.rotation
        if self.dim == 2:
            return abs(np.arctan2(R[1, 0], R[0, 0]))
        c = (np.trace(R) - 1.0) / 2.0
        s = np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
        return float(np.arctan2(s, c))

    def __repr__(self):
        return f"RigidMotion(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


def rotation_about_axis(axis, angle):
    """Rodrigues rotation about ``axis`` by ``angle`` radians."""
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return np.eye(3)
    k = axis / n
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rotation_2d(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def random_motion(rng, dim=3, angle=None, translation_norm=1.0):
    """Random proper rigid motion; ``angle`` in radians (uniform in [0, pi) if None)."""
    rng = np.random.default_rng(rng)
    if angle is None:
        angle = rng.uniform(0.0, np.pi)
    if dim == 2:
        R = rotation_2d(angle)
    elif dim == 3:
        R = rotation_about_axis(rng.normal(size=3), angle)
    else:
        raise ValueError("random_motion supports dim 2 or 3")
    t = rng.normal(size=dim)
    t *= translation_norm / np.linalg.norm(t)
    return RigidMotion(R, t)


@dataclass(eq=False)
class PointCloud:
    """Points with optional unit normals, RGB colors in [0, 1] and curvature."""

    points: np.ndarray
    normals: Optional[np.ndarray] = None
    colors: Optional[np.ndarray] = None
    curvature: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = as_points(self.points)
        n, d = self.points.shape
        if self.normals is not None:
            nrm = as_points(self.normals, dim=d, name="normals")
            if nrm.shape[0] != n:
                raise ValueError("normals count does not match points")
            lengths = np.linalg.norm(nrm, axis=1)
            bad = (np.abs(lengths - 1.0) > NORMAL_TOL) & np.any(nrm != 0.0, axis=1)
            if np.any(bad):
                raise ValueError(f"normal {int(np.flatnonzero(bad)[0])} is neither unit length nor zero")
            self.normals = nrm
        if self.colors is not None:
            col = as_points(self.colors, dim=3, name="colors")
            if col.shape[0] != n:
                raise ValueError("colors count does not match points")
            if np.any(col < 0.0) or np.any(col > 1.0):
                raise ValueError("colors must lie in [0, 1]")
            self.colors = col
        if self.curvature is not None:
            cur = np.asarray(self.curvature, dtype=np.float64).reshape(-1)
            if cur.shape[0] != n:
                raise ValueError("curvature count does not match points")
            self.curvature = cur

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    @property
    def has_normals(self):
        return self.normals is not None

    @property
    def has_colors(self):
        return self.colors is not None

    def copy(self):
        return PointCloud(self.points.copy(),
                          None if self.normals is None else self.normals.copy(),
                          None if self.colors is None else self.colors.copy(),
                          None if self.curvature is None else self.curvature.copy())

    def equals(self, other):
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and np.array_equal(a, b)
        return (same(self.points, other.points) and same(self.normals, other.normals)
                and same(self.colors, other.colors))

    # chaining helpers
    def transformed(self, motion):
        return transform(self, motion)

    def selected(self, indices):
        return select(self, indices)

    def grid_downsample(self, bin_size, origin=None):
        from .features import grid_downsample
        return grid_downsample(self, bin_size, origin=origin)

    def estimate_normals_knn(self, k, viewpoint=None):
        from .features import KNN, estimate_normals
        return estimate_normals(self, KNN(k), viewpoint)

    def estimate_normals_radius(self, r, viewpoint=None):
        from .features import Radius, estimate_normals
        return estimate_normals(self, Radius(r), viewpoint)

    def to_ply(self, path, format="binary_little_endian"):
        from .ply import save_ply
        save_ply(self, path, format=format)
        return self

    @classmethod
    def from_ply(cls, path):
        from .ply import load_ply
        return load_ply(path)


def transform(cloud, motion):
    """Apply a rigid motion to points and normals; colors are carried over."""
    if motion.dim != cloud.dim:
        raise ValueError(f"motion dimension {motion.dim} does not match cloud dimension {cloud.dim}")
    R, t = motion.rotation, motion.translation
    if np.array_equal(R, np.eye(cloud.dim)) and not np.any(t):
        return cloud.copy()
    pts = cloud.points @ R.T + t
    nrm = None if cloud.normals is None else cloud.normals @ R.T
    if nrm is not None:
        # keep the zero vector an exact degeneracy marker
        nrm[~np.any(cloud.normals != 0.0, axis=1)] = 0.0
    return PointCloud(pts, nrm,
                      None if cloud.colors is None else cloud.colors.copy(),
                      None if cloud.curvature is None else cloud.curvature.copy())


def select(cloud, indices):
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    n = len(cloud)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        bad = idx[(idx < 0) | (idx >= n)][0]
        raise IndexError(f"index {int(bad)} out of range for cloud of {n} points")
    pick = lambda a: None if a is None else a[idx]  # noqa: E731
    return PointCloud(cloud.points[idx].reshape(idx.size, cloud.dim), pick(cloud.normals),
                      pick(cloud.colors), pick(cloud.curvature))


@dataclass(frozen=True)
class DepthIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    depth_scale: float = 1000.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not self.depth_scale > 0:
            raise ValueError("depth_scale must be positive")

    def project(self, points):
        """Pixel coordinates ``(u, v)`` (rounded) and depth for each point."""
        pts = np.asarray(points, dtype=np.float64)
        z = pts[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = round_half_away(self.fx * pts[:, 0] / z + self.cx)
            v = round_half_away(self.fy * pts[:, 1] / z + self.cy)
        return u, v, z


@dataclass(eq=False)
class DepthImage:
    """Raw depth values, ``values[v, u]``; 0 marks an invalid pixel."""

    values: np.ndarray
    width: int = field(init=False)
    height: int = field(init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError(f"depth image must be a non-empty 2-D array, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("depth values must be finite and non-negative")
        self.values = vals
        self.height, self.width = vals.shape


def depth_to_cloud(depth, intr, organized=False):
    """Back-project valid pixels to 3-D, in row-major scan order.

    With ``organized=True`` every pixel is kept (invalid ones as the zero
    point) so the result can serve as a projective-association target.
    """
    vals = depth.values
    v, u = np.mgrid[0:depth.height, 0:depth.width]
    z = vals / intr.depth_scale
    x = (u - intr.cx) * z / intr.fx
    y = (v - intr.cy) * z / intr.fy
    pts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    if organized:
        return PointCloud(pts)
    return PointCloud(pts[vals.ravel() > 0])


def cloud_to_depth(cloud, intr, width, height):
    """Render a depth image; colliding points keep the nearest depth."""
    if cloud.dim != 3:
        raise ValueError("cloud_to_depth requires a 3-D cloud")
    if width < 1 or height < 1:
        raise ValueError("width and height must be positive")
    img = np.zeros((height, width))
    pts = cloud.points[cloud.points[:, 2] > 0]
    if len(pts) == 0:
        return DepthImage(img)
    u, v, z = intr.project(pts)
    ok = (u >= 0) & (u < width) & (v >= 0) & (v < height)
    u, v, z = u[ok].astype(np.int64), v[ok].astype(np.int64), z[ok]
    flat = v * width + u
    best = np.full(width * height, np.inf)
    np.minimum.at(best, flat, z)
    hit = np.isfinite(best)
    img.ravel()[hit] = round_half_away(best[hit] * intr.depth_scale)
    return DepthImage(img)
