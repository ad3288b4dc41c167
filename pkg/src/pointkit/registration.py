"""Rigid ICP with pluggable correspondence search and transform estimation.

:func:`icp` alternates between a correspondence engine (kd-tree nearest
neighbor or projective data association) and a rigid estimator
(point-to-point, point-to-plane or a weighted combination), composing the
per-iteration updates into the running motion.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import DepthIntrinsics, PointCloud, RigidMotion, as_points
from .embedding import sym_eigh
from .kdtree import KdTree


class DegenerateConfigurationError(ValueError):
    """The correspondences do not determine a unique rigid motion."""


@dataclass(eq=False)
class CorrespondenceSet:
    src: np.ndarray
    tgt: np.ndarray
    distances: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.tgt = np.asarray(self.tgt, dtype=np.int64)
        self.distances = np.asarray(self.distances, dtype=np.float64)
        if self.weights is None:
            self.weights = np.ones(len(self.src))
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not (len(self.src) == len(self.tgt) == len(self.distances) == len(self.weights)):
            raise ValueError("correspondence arrays differ in length")

    def __len__(self):
        return len(self.src)

    @property
    def pairs(self):
        return list(zip(self.src.tolist(), self.tgt.tolist()))


# correspondence engines ------------------------------------------------------

def correspondences_kdtree(src, tgt_tree, max_dist):
    """Nearest target neighbor of each source point, rejecting pairs farther than ``max_dist``."""
    S = as_points(src, dim=tgt_tree.dim, name="source")
    if len(tgt_tree) == 0:
        raise ValueError("target point set is empty")
    idx, dist = tgt_tree.knn_batch(S, 1)
    idx, dist = idx[:, 0], dist[:, 0]
    keep = dist <= max_dist
    return CorrespondenceSet(np.flatnonzero(keep), idx[keep], dist[keep])


def correspondences_projective(src, tgt_points, intr, width, height, max_dist):
    """Projective data association against an organized target.

    ``tgt_points`` holds ``width * height`` points in row-major pixel order;
    points with ``z <= 0`` are invalid.
    """
    S = as_points(src, dim=3, name="source")
    T = as_points(tgt_points, dim=3, name="target")
    if len(T) != width * height:
        raise ValueError(f"organized target has {len(T)} points, expected {width}x{height}")
    front = S[:, 2] > 0
    cand = np.flatnonzero(front)
    u, v, _ = intr.project(S[cand])
    inb = (u >= 0) & (u < width) & (v >= 0) & (v < height)
    cand = cand[inb]
    pix = v[inb].astype(np.int64) * width + u[inb].astype(np.int64)
    valid = T[pix, 2] > 0
    cand, pix = cand[valid], pix[valid]
    diff = S[cand] - T[pix]
    dist = np.sqrt((diff * diff).sum(axis=1))
    keep = dist <= max_dist
    return CorrespondenceSet(cand[keep], pix[keep], dist[keep])


# estimators -----------------------------------------------------------------

def _weights(w, n):
    if w is None:
        return np.ones(n)
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.shape[0] != n:
        raise ValueError("weights length does not match pairs")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    return w


def _quat_to_rot(q):
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [w*w + x*x - y*y - z*z, 2*(x*y - w*z), 2*(x*z + w*y)],
        [2*(x*y + w*z), w*w - x*x + y*y - z*z, 2*(y*z - w*x)],
        [2*(x*z - w*y), 2*(y*z + w*x), w*w - x*x - y*y + z*z],
    ])


def estimate_rigid_point_to_point(src_pts, tgt_pts, weights=None):
    """Weighted least-squares rigid motion mapping ``src_pts`` onto ``tgt_pts``.

    Minimizes ``sum w_i ||R p_i + t - q_i||^2`` in closed form: Horn's unit
    quaternion method in 3-D, the atan2 solution in 2-D.
    """
    P = as_points(src_pts, name="source")
    D = P.shape[1]
    Q = as_points(tgt_pts, dim=D, name="target")
    if len(P) != len(Q):
        raise ValueError("source and target must have the same number of points")
    if D not in (2, 3):
        raise ValueError(f"rigid estimation supports dimension 2 or 3, got {D}")
    n = len(P)
    if n < D:
        raise DegenerateConfigurationError(f"need at least {D} pairs, got {n}")
    w = _weights(weights, n)
    wsum = w.sum()
    pm = (w[:, None] * P).sum(axis=0) / wsum
    qm = (w[:, None] * Q).sum(axis=0) / wsum
    Pc, Qc = P - pm, Q - qm
    H = (w[:, None] * Pc).T @ Qc  # sum w p q^T
    sv = np.linalg.svd(H, compute_uv=False)
    # a unique rotation needs rank >= D - 1
    if sv[0] == 0.0 or sv[D - 2] < 1e-12 * sv[0]:
        raise DegenerateConfigurationError(
            f"degenerate correspondence configuration (singular values {sv.tolist()})")
    if D == 2:
        theta = np.arctan2(H[0, 1] - H[1, 0], H[0, 0] + H[1, 1])
        c, s = np.cos(theta), np.sin(theta)
        R = np.array([[c, -s], [s, c]])
    else:
        Sxx, Sxy, Sxz = H[0]
        Syx, Syy, Syz = H[1]
        Szx, Szy, Szz = H[2]
        N = np.array([
            [Sxx + Syy + Szz, Syz - Szy, Szx - Sxz, Sxy - Syx],
            [Syz - Szy, Sxx - Syy - Szz, Sxy + Syx, Szx + Sxz],
            [Szx - Sxz, Sxy + Syx, -Sxx + Syy - Szz, Syz + Szy],
            [Sxy - Syx, Szx + Sxz, Syz + Szy, -Sxx - Syy + Szz],
        ])
        _, V = sym_eigh(N)
        R = _quat_to_rot(V[:, 0])
        # re-orthonormalize against rounding in the quaternion products
        U, _, Vt = np.linalg.svd(R)
        R = U @ Vt
    t = qm - R @ pm
    return RigidMotion(R, t)


def skew(v):
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def exp_so3(alpha):
    """Rotation about ``alpha / |alpha|`` by angle ``|alpha|``."""
    theta = np.linalg.norm(alpha)
    if theta < 1e-300:
        return np.eye(3)
    K = skew(alpha / theta)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def _solve_gauss_newton(JtJ, Jtr):
    cond = np.linalg.cond(JtJ)
    if not np.isfinite(cond) or cond > 1e12:
        raise DegenerateConfigurationError(
            f"linearized system is singular (condition number {cond:.3g})")
    x = np.linalg.solve(JtJ, -Jtr)
    return RigidMotion(exp_so3(x[:3]), x[3:])


def _plane_system(P, Q, Nrm, w):
    r = ((P - Q) * Nrm).sum(axis=1)
    J = np.hstack([np.cross(P, Nrm), Nrm])
    Jw = J * w[:, None]
    return Jw.T @ J, Jw.T @ r


def _point_system(P, Q, w):
    # rows per pair: d/d(alpha) of alpha x p is -[p]x, d/dt is I
    n = len(P)
    J = np.zeros((n, 3, 6))
    J[:, 0, 1], J[:, 0, 2] = P[:, 2], -P[:, 1]
    J[:, 1, 0], J[:, 1, 2] = -P[:, 2], P[:, 0]
    J[:, 2, 0], J[:, 2, 1] = P[:, 1], -P[:, 0]
    J[:, :, 3:] = np.eye(3)
    r = P - Q
    JtJ = np.einsum("n,nki,nkj->ij", w, J, J)
    Jtr = np.einsum("n,nki,nk->i", w, J, r)
    return JtJ, Jtr


def _check_plane_inputs(src_pts, tgt_pts, tgt_normals):
    P = as_points(src_pts, dim=3, name="source")
    Q = as_points(tgt_pts, dim=3, name="target")
    Nrm = as_points(tgt_normals, dim=3, name="normals")
    if not (len(P) == len(Q) == len(Nrm)):
        raise ValueError("source, target and normals must have equal length")
    return P, Q, Nrm


def estimate_rigid_point_to_plane(src_pts, tgt_pts, tgt_normals, weights=None):
    """One Gauss-Newton step of the linearized point-to-plane objective.

    Minimizes ``sum w_i ((R p_i + t - q_i) . n_i)^2`` with ``R`` linearized
    as ``I + [alpha]x``; the rotation is rebuilt from ``alpha`` through the
    exponential map.
    """
    P, Q, Nrm = _check_plane_inputs(src_pts, tgt_pts, tgt_normals)
    if len(P) < 6:
        raise DegenerateConfigurationError(f"need at least 6 pairs, got {len(P)}")
    w = _weights(weights, len(P))
    return _solve_gauss_newton(*_plane_system(P, Q, Nrm, w))


def estimate_rigid_combined(src_pts, tgt_pts, tgt_normals, w_point, w_plane, weights=None):
    """Joint point-to-point / point-to-plane Gauss-Newton step.

    A zero weight on either term falls back to the pure estimator.
    """
    if w_point < 0 or w_plane < 0 or (w_point == 0 and w_plane == 0):
        raise ValueError("combined metric weights must be non-negative and not both zero")
    if w_plane == 0:
        return estimate_rigid_point_to_point(src_pts, tgt_pts, weights)
    if w_point == 0:
        return estimate_rigid_point_to_plane(src_pts, tgt_pts, tgt_normals, weights)
    P, Q, Nrm = _check_plane_inputs(src_pts, tgt_pts, tgt_normals)
    if len(P) < 3:
        raise DegenerateConfigurationError(f"need at least 3 pairs, got {len(P)}")
    w = _weights(weights, len(P))
    A1, b1 = _point_system(P, Q, w)
    A2, b2 = _plane_system(P, Q, Nrm, w)
    return _solve_gauss_newton(w_point * A1 + w_plane * A2, w_point * b1 + w_plane * b2)


# ICP ------------------------------------------------------------------------

@dataclass(frozen=True)
class PointToPoint:
    pass


@dataclass(frozen=True)
class PointToPlane:
    pass


@dataclass(frozen=True)
class Combined:
    w_point: float = 1.0
    w_plane: float = 1.0

    def __post_init__(self):
        if self.w_point < 0 or self.w_plane < 0 or (self.w_point == 0 and self.w_plane == 0):
            raise ValueError("combined metric weights must be non-negative and not both zero")


@dataclass(frozen=True)
class KdTreeEngine:
    pass


@dataclass(frozen=True)
class ProjectiveEngine:
    intrinsics: DepthIntrinsics
    width: int
    height: int


@dataclass
class IcpConfig:
    max_iters: int = 15
    max_corr_dist: float = 0.05
    rot_tol: float = 1e-5
    trans_tol: float = 1e-6
    metric: object = field(default_factory=PointToPlane)
    engine: object = field(default_factory=KdTreeEngine)

    def __post_init__(self):
        if not self.max_corr_dist > 0:
            raise ValueError("max_corr_dist must be positive")
        if not (self.rot_tol > 0 and self.trans_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(eq=False)
class IcpResult:
    motion: RigidMotion
    iterations: int
    terminal_rmse: float
    correspondence_count: int
    converged: bool
    rmse_history: list = field(default_factory=list)


def _uses_normals(metric):
    return isinstance(metric, PointToPlane) or (isinstance(metric, Combined) and metric.w_plane > 0)


def residual_rmse(metric, P, Q, Nrm):
    """RMS residual of paired points under the ICP metric."""
    if len(P) == 0:
        return 0.0
    d = P - Q
    if isinstance(metric, PointToPoint):
        return float(np.sqrt((d * d).sum(axis=1).mean()))
    plane = ((d * Nrm).sum(axis=1)) ** 2
    if isinstance(metric, PointToPlane):
        return float(np.sqrt(plane.mean()))
    return float(np.sqrt((metric.w_point * (d * d).sum(axis=1) + metric.w_plane * plane).mean()))


class Icp:
    """ICP driver.

    ``correspondences`` and ``estimate`` are the two extension points;
    subclasses may override either to build other variants.
    """

    def __init__(self, src, tgt, cfg=None):
        self.cfg = IcpConfig() if cfg is None else cfg
        self.src = src
        self.tgt = tgt
        if src.dim != tgt.dim:
            raise ValueError("source and target dimensions differ")
        if _uses_normals(self.cfg.metric) and not tgt.has_normals:
            raise ValueError("point-to-plane metrics require target normals")
        if isinstance(self.cfg.engine, KdTreeEngine):
            self._tree = KdTree(tgt.points)
        elif isinstance(self.cfg.engine, ProjectiveEngine):
            if src.dim != 3:
                raise ValueError("projective association requires 3-D clouds")
        else:
            raise TypeError(f"unknown correspondence engine {self.cfg.engine!r}")

    def correspondences(self, moved):
        eng = self.cfg.engine
        if isinstance(eng, KdTreeEngine):
            return correspondences_kdtree(moved, self._tree, self.cfg.max_corr_dist)
        return correspondences_projective(moved, self.tgt.points, eng.intrinsics,
                                          eng.width, eng.height, self.cfg.max_corr_dist)

    def estimate(self, P, Q, Nrm, weights):
        m = self.cfg.metric
        if isinstance(m, PointToPoint):
            return estimate_rigid_point_to_point(P, Q, weights)
        if isinstance(m, PointToPlane):
            return estimate_rigid_point_to_plane(P, Q, Nrm, weights)
        return estimate_rigid_combined(P, Q, Nrm, m.w_point, m.w_plane, weights)

    def run(self, init=None):
        cfg = self.cfg
        motion = RigidMotion.identity(self.src.dim) if init is None else init
        history = []
        count = 0
        converged = False
        it = 0
        Nall = self.tgt.normals
        for it in range(1, cfg.max_iters + 1):
            moved = motion.apply(self.src.points)
            corr = self.correspondences(moved)
            count = len(corr)
            if count == 0:
                return IcpResult(motion, it, 0.0, 0, False, history)
            P = moved[corr.src]
            Q = self.tgt.points[corr.tgt]
            Nrm = None if Nall is None else Nall[corr.tgt]
            history.append(residual_rmse(cfg.metric, P, Q, Nrm))
            step = self.estimate(P, Q, Nrm, corr.weights)
            motion = step.compose(motion)
            if (step.rotation_angle() < cfg.rot_tol
                    and np.linalg.norm(step.translation) < cfg.trans_tol):
                converged = True
                break
        moved = motion.apply(self.src.points)
        corr = self.correspondences(moved)
        P = moved[corr.src]
        Q = self.tgt.points[corr.tgt]
        Nrm = None if Nall is None else Nall[corr.tgt]
        rmse = residual_rmse(cfg.metric, P, Q, Nrm)
        return IcpResult(motion, it, rmse, len(corr), converged, history)


def icp(src, tgt, cfg=None, init=None):
    """Register ``src`` to ``tgt``; the returned motion maps source into the target frame."""
    if not isinstance(src, PointCloud):
        src = PointCloud(src)
    if not isinstance(tgt, PointCloud):
        tgt = PointCloud(tgt)
    return Icp(src, tgt, cfg).run(init)
