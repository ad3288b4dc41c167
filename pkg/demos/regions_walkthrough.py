"""Convex hulls and boolean regions.

A hull of sphere samples approaches the ball's volume as the sampling
densifies; unions and differences of boxes have volumes we can check by hand.
"""

import numpy as np

from pointkit import SpaceRegion, box, hull_from_points

# %% Hull volume converges to 4/3 pi from below.
rng = np.random.default_rng(0)
for n in (50, 500, 5000):
    d = rng.normal(size=(n, 3))
    hull = hull_from_points(d / np.linalg.norm(d, axis=1)[:, None])
    print(f"{n:5d} samples: {len(hull.vertices)} vertices, {len(hull.facets)} facets, "
          f"volume {hull.volume():.4f} (ball {4 / 3 * np.pi:.4f})")

# %% Two overlapping unit cubes.
a = SpaceRegion([box([0, 0, 0], [1, 1, 1])])
b = SpaceRegion([box([0.5, 0.5, 0.5], [1.5, 1.5, 1.5])])
print(f"\n|a| = {a.volume():.3f}, |a & b| = {(a & b).volume():.3f}")
print(f"|a | b| = {(a | b).volume():.3f}, expected {2 - 0.125:.3f}")
print(f"|a - b| = {(a - b).volume():.3f} in {len((a - b).polytopes)} convex pieces")

# %% Membership agrees with the set algebra pointwise.
X = rng.uniform(-0.25, 1.75, size=(20000, 3))
ina, inb = a.contains_points(X), b.contains_points(X)
frac = (a - b).contains_points(X).mean() * 2.0 ** 3
print(f"Monte-Carlo |a - b| from 20000 probes: {frac:.3f}")
print("union membership matches:", np.array_equal((a | b).contains_points(X), ina | inb))
