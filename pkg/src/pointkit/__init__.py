"""pointkit: point cloud processing with numpy and scipy.

Point sets are ``(N, D)`` float64 arrays, one point per row.
"""

__version__ = "0.1.0"

from ._threads import get_num_threads, num_threads, set_num_threads
from .clustering import (ClusterLabels, KMeansConfig, MeanShiftConfig, SpectralConfig,
                         canonical_labels, connected_components, euclidean_segments, kmeans,
                         mean_shift, smooth_segments, spectral)
from .core import (DepthImage, DepthIntrinsics, PointCloud, RigidMotion, cloud_to_depth,
                   depth_to_cloud, rotation_about_axis, select, transform)
from .embedding import classical_mds, sym_eigh
from .features import KNN, KNNInRadius, Radius, estimate_normals, grid_downsample, pca
from .kdtree import KdTree, Neighbor
from .ply import PlyError, load_ply, save_ply
from .registration import (Combined, DegenerateConfigurationError, Icp, IcpConfig, IcpResult,
                           KdTreeEngine, PointToPlane, PointToPoint, ProjectiveEngine,
                           estimate_rigid_combined, estimate_rigid_point_to_plane,
                           estimate_rigid_point_to_point, icp)
from .robust import NoConsensusError, RansacConfig, ransac_plane, ransac_rigid
from .spatial import (ConvexPolytope, SpaceRegion, box, hull_from_points,
                      polytope_from_halfspaces)
