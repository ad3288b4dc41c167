"""Registering two scans of a room corner.

We synthesize a scene, move a copy by a known rigid motion, and recover the
motion with ICP under each error metric. Run with ``python3 demos/registration_walkthrough.py``.
"""

import numpy as np

from pointkit import (KNN, Combined, IcpConfig, PointToPlane, PointToPoint, estimate_normals,
                      grid_downsample, icp, transform)
from pointkit.scenes import SceneSpec, generate_scene, planted_motion

# %% A scene: floor, two walls and a sphere, with a little sensor noise.
scene, _ = generate_scene(SceneSpec(planes=3, spheres=1, points_per_surface=5000,
                                    noise=0.001, seed=1))
print(f"scene: {len(scene)} points, extent {np.ptp(scene.points, axis=0).round(3)}")

# %% The "second scan" is the same surface seen after a 5 degree turn and a 5 cm shift.
truth = planted_motion(seed=4, angle_deg=5.0, translation=0.05)
target = transform(scene, truth)

# %% Thin both clouds on a 1 cm grid, then fit target normals from 10 neighbors.
src = grid_downsample(scene, 0.01)
tgt = estimate_normals(grid_downsample(target, 0.01), KNN(10))
print(f"after downsampling: {len(src)} source / {len(tgt)} target points")


def angle_deg(Ra, Rb):
    c = (np.trace(Ra.T @ Rb) - 1) / 2
    return np.degrees(np.arccos(np.clip(c, -1, 1)))


# %% Point-to-plane usually needs a handful of steps; point-to-point creeps along the walls.
for name, metric in (("point-to-point", PointToPoint()), ("point-to-plane", PointToPlane()),
                     ("combined", Combined(1.0, 1.0))):
    r = icp(src, tgt, IcpConfig(metric=metric, max_iters=30, max_corr_dist=0.05))
    print(f"\n{name}: {r.iterations} iterations, converged={r.converged}")
    print("  rmse:", " ".join(f"{v:.2e}" for v in r.rmse_history[:8]),
          "..." if len(r.rmse_history) > 8 else "")
    print(f"  rotation error {angle_deg(r.motion.rotation, truth.rotation):.4f} deg, "
          f"translation error {np.linalg.norm(r.motion.translation - truth.translation):.2e}")
