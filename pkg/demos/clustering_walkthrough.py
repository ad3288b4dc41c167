"""Three ways to cluster the same blobs, then a distance-only embedding.

k-means needs k, mean-shift needs a bandwidth and spectral clustering needs an
affinity scale. Classical MDS recovers a layout from pairwise distances alone.
"""

import numpy as np

from pointkit import (KMeansConfig, MeanShiftConfig, SpectralConfig, classical_mds, kmeans,
                      mean_shift, spectral)
from pointkit.embedding import pairwise_distances
from pointkit.scenes import blobs

P, truth = blobs([[0, 0], [4, 0], [2, 3]], 100, 0.5, seed=2)


def agreement(labels):
    # fraction of pairs on which two labelings agree about "same cluster"
    same_a = labels[:, None] == labels[None]
    same_b = truth[:, None] == truth[None]
    return np.mean(same_a == same_b)


km = kmeans(P, KMeansConfig(3, seed=0))
print(f"k-means: objective {km.objective:.2f} after {len(km.objective_history)} iterations, "
      f"pair agreement {agreement(km.labels.labels):.3f}")
ms = mean_shift(P, MeanShiftConfig(1.0))
print(f"mean-shift: {ms.labels.k} modes at {np.round(ms.modes, 2).tolist()}, "
      f"pair agreement {agreement(ms.labels.labels):.3f}")
for variant in ("unnormalized", "random_walk", "symmetric"):
    sp = spectral(SpectralConfig(3, sigma=0.7, variant=variant), points=P)
    print(f"spectral ({variant}): pair agreement {agreement(sp.labels):.3f}")

# %% MDS gives back the 2-D layout up to a rigid motion.
coords, eig = classical_mds(pairwise_distances(P), 2)
print("\nleading Gram eigenvalues:", np.round(eig[:4], 3))
err = np.abs(pairwise_distances(coords) - pairwise_distances(P)).max()
print(f"max distance distortion of the embedding: {err:.2e}")
