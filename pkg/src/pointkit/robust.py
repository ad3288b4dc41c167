"""RANSAC driver with hyperplane and rigid-alignment models."""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from .core import as_points
from .embedding import fix_signs
from .features import pca
from .registration import DegenerateConfigurationError, estimate_rigid_point_to_point


class NoConsensusError(RuntimeError):
    pass


@dataclass
class RansacConfig:
    inlier_threshold: float
    max_iters: int = 1000
    min_inliers: Union[int, float, None] = None
    seed: Optional[int] = 0
    adaptive_stop: bool = True
    confidence: float = 0.99
    refine: bool = True

    def __post_init__(self):
        if not self.inlier_threshold > 0:
            raise ValueError("inlier_threshold must be positive")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def min_count(self, n, sample_size):
        m = self.min_inliers
        if m is None:
            return sample_size
        if isinstance(m, float) and m < 1.0:
            return int(np.ceil(m * n))
        return int(m)


class PlaneModel(NamedTuple):
    """Hyperplane ``{x : normal . x = offset}`` with a unit normal."""

    normal: np.ndarray
    offset: float

    def residuals(self, points):
        return np.abs(np.asarray(points) @ self.normal - self.offset)


@dataclass(eq=False)
class RansacResult:
    model: object
    inliers: np.ndarray
    iterations_run: int
    inlier_rmse: float


def _rmse(res):
    return float(np.sqrt(np.mean(res * res))) if res.size else 0.0


def required_iterations(inlier_ratio, sample_size, confidence):
    """Standard bound ``log(1 - confidence) / log(1 - w^s)``."""
    ws = inlier_ratio ** sample_size
    if ws >= 1.0:
        return 0.0
    if ws <= 0.0:
        return np.inf
    return np.log(1.0 - confidence) / np.log1p(-ws)


class Ransac:
    """Hypothesize-and-verify loop.

    A model class supplies ``sample_size``, ``fit_minimal`` (returning
    ``None`` for degenerate samples), ``residuals`` and ``fit_refined``.
    """

    sample_size = None

    def __init__(self, cfg):
        self.cfg = cfg

    def n_items(self):
        raise NotImplementedError

    def fit_minimal(self, sample):
        raise NotImplementedError

    def residuals(self, model):
        raise NotImplementedError

    def fit_refined(self, inliers):
        raise NotImplementedError

    def run(self):
        cfg = self.cfg
        n = self.n_items()
        s = self.sample_size
        if n < s:
            raise ValueError(f"need at least {s} items, got {n}")
        rng = np.random.default_rng(cfg.seed)
        best = None  # (count, rmse, model, inlier mask)
        it = 0
        draws = 0
        cap = 100 * cfg.max_iters
        while it < cfg.max_iters and draws < cap:
            draws += 1
            sample = rng.choice(n, size=s, replace=False)
            model = self.fit_minimal(sample)
            if model is None:
                continue
            it += 1
            res = self.residuals(model)
            mask = res <= cfg.inlier_threshold
            count = int(mask.sum())
            rmse = _rmse(res[mask])
            if best is None or count > best[0] or (count == best[0] and rmse < best[1]):
                best = (count, rmse, model, mask)
            if cfg.adaptive_stop and it >= required_iterations(best[0] / n, s, cfg.confidence):
                break
        need = cfg.min_count(n, s)
        if best is None or best[0] < max(need, 1):
            got = 0 if best is None else best[0]
            raise NoConsensusError(f"no model reached {need} inliers (best: {got}) "
                                   f"after {it} iterations")
        count, rmse, model, mask = best
        if cfg.refine:
            try:
                refined = self.fit_refined(np.flatnonzero(mask))
            except DegenerateConfigurationError:
                refined = None
            if refined is not None:
                r_res = self.residuals(refined)
                r_mask = r_res <= cfg.inlier_threshold
                if r_mask.sum() >= count:
                    model, mask = refined, r_mask
        res = self.residuals(model)
        return RansacResult(model, np.flatnonzero(mask), it, _rmse(res[mask]))


def plane_through(points):
    """Exact hyperplane through D points, or ``None`` if their affine span is too small."""
    P = np.asarray(points, dtype=np.float64)
    D = P.shape[1]
    if D == 1:
        return PlaneModel(np.ones(1), float(P[0, 0]))
    A = P[1:] - P[0]
    _, sv, Vt = np.linalg.svd(A, full_matrices=True)
    scale = max(np.abs(A).max(), 1e-300)
    if len(sv) < D - 1 or sv[D - 2] <= 1e-10 * scale:
        return None
    nrm = fix_signs(Vt[-1][:, None])[:, 0]
    return PlaneModel(nrm, float(nrm @ P[0]))


def fit_plane_lsq(points):
    """Total-least-squares hyperplane via PCA."""
    res = pca(points)
    nrm = res.eigenvectors[:, -1]
    return PlaneModel(nrm, float(nrm @ res.mean))


class PlaneRansac(Ransac):
    def __init__(self, points, cfg):
        super().__init__(cfg)
        self.points = as_points(points)
        self.sample_size = self.points.shape[1]

    def n_items(self):
        return len(self.points)

    def fit_minimal(self, sample):
        return plane_through(self.points[sample])

    def residuals(self, model):
        return model.residuals(self.points)

    def fit_refined(self, inliers):
        return fit_plane_lsq(self.points[inliers])


class RigidRansac(Ransac):
    def __init__(self, src, tgt, cfg):
        super().__init__(cfg)
        self.src = as_points(src, name="source")
        self.tgt = as_points(tgt, dim=self.src.shape[1], name="target")
        if len(self.src) != len(self.tgt):
            raise ValueError("source and target must pair up")
        D = self.src.shape[1]
        if D not in (2, 3):
            raise ValueError("rigid RANSAC supports dimension 2 or 3")
        self.sample_size = D

    def n_items(self):
        return len(self.src)

    def fit_minimal(self, sample):
        P = self.src[sample]
        if P.shape[1] == 3:
            cross = np.cross(P[1] - P[0], P[2] - P[0])
            scale = max(np.abs(P - P[0]).max(), 1e-300)
            if np.linalg.norm(cross) <= 1e-10 * scale * scale:
                return None
        try:
            return estimate_rigid_point_to_point(P, self.tgt[sample])
        except DegenerateConfigurationError:
            return None

    def residuals(self, model):
        d = model.apply(self.src) - self.tgt
        return np.sqrt((d * d).sum(axis=1))

    def fit_refined(self, inliers):
        return estimate_rigid_point_to_point(self.src[inliers], self.tgt[inliers])


def ransac_plane(points, cfg):
    """Robust hyperplane fit; the result's model is a :class:`PlaneModel`."""
    return PlaneRansac(points, cfg).run()


def ransac_rigid(src, tgt, cfg):
    """Robust rigid alignment from candidate correspondences ``src[i] <-> tgt[i]``."""
    return RigidRansac(src, tgt, cfg).run()

