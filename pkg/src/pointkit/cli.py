"""Command-line front end.

Defaults follow the reference experimental setups: 5 mm voxels and 0.02 m
radius normals for the basic pipeline, 10-NN (or 1 cm radius) normals,
k=30 / 2.8 rad smooth segmentation, and ICP with 1 cm voxels, 10-NN
normals, 15 iterations and a 5 cm rejection distance.
"""

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from ._threads import ENV_VAR, set_num_threads
from .bench import TASKS, report_csv, run_bench, speedup
from .clustering import (KMeansConfig, MeanShiftConfig, SpectralConfig, kmeans, mean_shift,
                         smooth_segments, spectral)
from .core import DepthImage, DepthIntrinsics, PointCloud, depth_to_cloud, transform
from .embedding import classical_mds
from .features import KNN, Radius, estimate_normals, grid_downsample
from .ply import load_ply, save_ply
from .registration import Combined, IcpConfig, PointToPlane, PointToPoint, icp
from .robust import RansacConfig, ransac_plane
from .scenes import SceneSpec, generate_scene, planted_motion
from .spatial import hull_from_points, save_polytope_ply


class CliError(Exception):
    pass


def _atomic(path, writer):
    """Write through a temporary file so a failed run leaves no partial output."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=os.path.splitext(path)[1] or ".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _write_ply(cloud, path, fmt):
    _atomic(path, lambda p: save_ply(cloud, p, format=fmt))


def _write_csv(path, header, rows, fmt):
    _atomic(path, lambda p: np.savetxt(p, rows, delimiter=",", header=",".join(header),
                                       comments="", fmt=fmt))


def _vec3(text):
    try:
        v = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y,Z, got {text!r}") from None
    if len(v) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return np.array(v)


def _distinct_colors(labels):
    k = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 0
    rng = np.random.default_rng(12345)
    palette = rng.uniform(0.2, 1.0, size=(max(k, 1), 3))
    colors = np.zeros((labels.size, 3))
    ok = labels >= 0
    colors[ok] = palette[labels[ok]]
    return colors


def _ensure_normals(cloud, knn, viewpoint=None):
    if cloud.has_normals and np.all(np.any(cloud.normals != 0, axis=1)):
        return cloud
    vp = cloud.points.mean(axis=0) if viewpoint is None else viewpoint
    return estimate_normals(cloud, KNN(knn), vp)


# subcommands ---------------------------------------------------------------

def cmd_downsample(args):
    cloud = load_ply(args.input)
    out = grid_downsample(cloud, args.voxel)
    _write_ply(out, args.output, args.format)
    print(f"input points: {len(cloud)}")
    print(f"output points: {len(out)}")


def cmd_normals(args):
    if args.knn is not None and args.radius is not None:
        raise CliError("give either --knn or --radius, not both")
    nbhd = Radius(args.radius) if args.radius is not None else KNN(args.knn or 10)
    cloud = load_ply(args.input)
    vp = np.zeros(3) if args.viewpoint is None else args.viewpoint
    out = estimate_normals(cloud, nbhd, vp)
    _write_ply(out, args.output, args.format)
    print(f"points: {len(out)}")


def cmd_segment(args):
    cloud = _ensure_normals(load_ply(args.input), args.normals_knn)
    labels = smooth_segments(cloud, k=args.knn, angle_thresh=args.angle, min_size=args.min_size)
    colored = PointCloud(cloud.points, cloud.normals, _distinct_colors(labels.labels))
    _write_ply(colored, args.output, args.format)
    rows = np.column_stack([np.arange(len(labels)), labels.labels])
    _write_csv(args.labels, ["index", "label"], rows, "%d")
    print(f"segments: {labels.k}")
    print(f"discarded points: {int((labels.labels < 0).sum())}")


def cmd_icp(args):
    src = load_ply(args.source)
    tgt = load_ply(args.target)
    if args.voxel > 0:
        src = grid_downsample(src, args.voxel)
        tgt = grid_downsample(tgt, args.voxel)
    if args.metric == "pp":
        metric = PointToPoint()
    elif args.metric == "pl":
        metric = PointToPlane()
    else:
        metric = Combined(args.w_point, args.w_plane)
    if not isinstance(metric, PointToPoint) and (args.voxel > 0 or not tgt.has_normals):
        vp = tgt.points.mean(axis=0) if args.viewpoint is None else args.viewpoint
        tgt = estimate_normals(tgt, KNN(args.normals_knn), vp)
    cfg = IcpConfig(max_iters=args.iters, max_corr_dist=args.max_dist, metric=metric)
    res = icp(src, tgt, cfg)
    T = res.motion.as_matrix()
    for row in T:
        print(" ".join("%.17g" % v for v in row))
    info = {
        "iterations": res.iterations,
        "converged": res.converged,
        "terminal_rmse": res.terminal_rmse,
        "correspondence_count": res.correspondence_count,
        "rmse_history": res.rmse_history,
        "source_points": len(src),
        "target_points": len(tgt),
    }
    print(json.dumps(info), file=sys.stderr)


def cmd_plane(args):
    cloud = load_ply(args.input)
    mi = args.min_inliers
    cfg = RansacConfig(inlier_threshold=args.threshold, max_iters=args.max_iters,
                       min_inliers=float(mi) if mi < 1 else int(mi), seed=args.seed)
    res = ransac_plane(cloud.points, cfg)
    n, d = res.model
    row = np.array([[n[0], n[1], n[2], d, len(res.inliers), res.inlier_rmse, res.iterations_run]])
    header = ["nx", "ny", "nz", "d", "inliers", "inlier_rmse", "iterations"]
    if args.output:
        _write_csv(args.output, header, row, "%.17g")
    else:
        print(",".join(header))
        print(",".join("%.17g" % v for v in row[0]))
    if args.inliers:
        _write_ply(cloud.selected(res.inliers), args.inliers, args.format)


def cmd_cluster(args):
    cloud = load_ply(args.input)
    P = cloud.points
    if args.method == "kmeans":
        labels = kmeans(P, KMeansConfig(args.k, max_iters=args.max_iters, seed=args.seed)).labels
    elif args.method == "meanshift":
        if args.bandwidth is None:
            raise CliError("--bandwidth is required for mean-shift")
        labels = mean_shift(P, MeanShiftConfig(args.bandwidth, kernel=args.kernel)).labels
    else:
        if args.sigma is None:
            raise CliError("--sigma is required for spectral clustering")
        labels = spectral(SpectralConfig(args.k, variant=args.variant, sigma=args.sigma,
                                         seed=args.seed), points=P)
    rows = np.column_stack([np.arange(len(labels)), labels.labels])
    _write_csv(args.labels, ["index", "label"], rows, "%d")
    if args.output:
        _write_ply(PointCloud(P, cloud.normals, _distinct_colors(labels.labels)), args.output,
                   args.format)
    print(f"clusters: {labels.k}")


def cmd_hull(args):
    cloud = load_ply(args.input)
    poly = hull_from_points(cloud.points)
    _atomic(args.output, lambda p: save_polytope_ply(poly, p, format=args.format))
    print(f"vertices: {len(poly.vertices)}")
    print(f"facets: {len(poly.facets)}")
    print(f"volume: {poly.volume():.17g}")


def _read_matrix_csv(path):
    with open(path) as f:
        first = f.readline()
    try:
        [float(x) for x in first.strip().split(",")]
        skip = 0
    except ValueError:
        skip = 1
    return np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)


def cmd_mds(args):
    D = _read_matrix_csv(args.input)
    coords, _ = classical_mds(D, args.dim)
    _write_csv(args.output, [f"x{i}" for i in range(args.dim)], coords, "%.17g")
    print(f"points: {len(coords)}")


def _load_depth(path):
    if path.endswith(".npy"):
        return np.load(path)
    from PIL import Image
    return np.asarray(Image.open(path), dtype=np.float64)


def cmd_depth(args):
    intr = DepthIntrinsics(args.fx, args.fy, args.cx, args.cy, args.depth_scale)
    cloud = depth_to_cloud(DepthImage(_load_depth(args.input)), intr)
    _write_ply(cloud, args.output, args.format)
    print(f"points: {len(cloud)}")


def _spec_from(args):
    return SceneSpec(planes=args.planes, spheres=args.spheres, points_per_surface=args.points,
                     noise=args.noise, outlier_fraction=args.outliers, seed=args.seed)


def cmd_gen(args):
    cloud, _ = generate_scene(_spec_from(args))
    if args.no_normals:
        cloud = PointCloud(cloud.points)
    _write_ply(cloud, args.output, args.format)
    print(f"points: {len(cloud)}")
    if args.moved:
        motion = planted_motion(args.seed, args.angle, args.translation)
        _write_ply(transform(cloud, motion), args.moved, args.format)
        if args.motion:
            _atomic(args.motion, lambda p: np.savetxt(p, motion.as_matrix(), fmt="%.17g"))


def cmd_bench(args):
    threads = 1 if args.threads is None else args.threads
    records = run_bench(args.task, _spec_from(args), threads=threads, repeats=args.repeats)
    text = report_csv(records)
    if args.output:
        _atomic(args.output, lambda p: Path(p).write_text(text))
    else:
        sys.stdout.write(text)
    print(f"speedup: {speedup(records):.3f}x (1 -> {records[-1].threads} threads)",
          file=sys.stderr)


# parser --------------------------------------------------------------------

def _add_scene_flags(p):
    p.add_argument("--planes", type=int, default=3, help="number of planar patches")
    p.add_argument("--spheres", type=int, default=1, help="number of spheres")
    p.add_argument("--points", type=int, default=20000, help="points per surface")
    p.add_argument("--noise", type=float, default=0.0, help="Gaussian noise sigma")
    p.add_argument("--outliers", type=float, default=0.0, help="outlier fraction")
    p.add_argument("--seed", type=int, default=0, help="random seed")


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="pointkit", description="Point cloud processing tools.",
                                     formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads; unset means ${ENV_VAR} or all cores")
    common.add_argument("--format", choices=["ascii", "binary_little_endian"],
                        default="binary_little_endian", help="PLY output format")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text,
                           formatter_class=fmt)
        p.set_defaults(func=func)
        return p

    p = add("downsample", cmd_downsample, "Voxel-grid downsampling (centroid per voxel).")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--voxel", type=float, default=0.005, help="voxel bin size")

    p = add("normals", cmd_normals,
            "Estimate surface normals. Neighborhood: --knn K (default 10) or --radius R "
            "(--radius alone uses 0.01).")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--knn", type=int, default=None, help="k nearest neighbors (default: 10)")
    p.add_argument("--radius", type=float, nargs="?", const=0.01, default=None,
                   help="radius neighborhood; a bare flag uses 0.01 (the example pipeline uses 0.02)")
    p.add_argument("--viewpoint", type=_vec3, default=None,
                   help="X,Y,Z viewpoint for orientation (default: 0,0,0)")

    p = add("segment", cmd_segment, "Smooth-surface segmentation by normal-angle connectivity.")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--labels", required=True, help="output CSV of per-point labels")
    p.add_argument("--knn", type=int, default=30, help="neighbors per point")
    p.add_argument("--angle", type=float, default=2.8, help="normal angle threshold (radians)")
    p.add_argument("--min-size", type=int, default=1, help="smaller segments get label -1")
    p.add_argument("--normals-knn", type=int, default=10,
                   help="k for normal estimation when the input has none")

    p = add("icp", cmd_icp, "Rigid ICP; prints the 4x4 source-to-target transform.")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--metric", choices=["pp", "pl", "combined"], default="pl",
                   help="point-to-point, point-to-plane or combined")
    p.add_argument("--w-point", type=float, default=1.0, help="combined: point-to-point weight")
    p.add_argument("--w-plane", type=float, default=1.0, help="combined: point-to-plane weight")
    p.add_argument("--voxel", type=float, default=0.01, help="voxel size (0 disables)")
    p.add_argument("--normals-knn", type=int, default=10, help="k for target normals")
    p.add_argument("--iters", type=int, default=15, help="maximum iterations")
    p.add_argument("--max-dist", type=float, default=0.05, help="correspondence rejection distance")
    p.add_argument("--viewpoint", type=_vec3, default=None, help="X,Y,Z for normal orientation")

    p = add("plane", cmd_plane, "RANSAC plane fit; writes nx,ny,nz,d CSV.")
    p.add_argument("input")
    p.add_argument("--output", help="CSV path (default: stdout)")
    p.add_argument("--inliers", help="PLY path for the inlier points")
    p.add_argument("--threshold", type=float, default=0.01, help="inlier distance threshold")
    p.add_argument("--max-iters", type=int, default=1000, help="maximum RANSAC iterations")
    p.add_argument("--min-inliers", type=float, default=0.1,
                   help="minimum consensus (fraction of N if < 1, else a count)")
    p.add_argument("--seed", type=int, default=0, help="random seed")

    p = add("cluster", cmd_cluster, "k-means, mean-shift or spectral clustering of point coordinates.")
    p.add_argument("input")
    p.add_argument("--labels", required=True, help="output CSV of per-point labels")
    p.add_argument("--output", help="optional colored PLY")
    p.add_argument("--method", choices=["kmeans", "meanshift", "spectral"], default="kmeans")
    p.add_argument("--k", type=int, default=2, help="number of clusters")
    p.add_argument("--max-iters", type=int, default=100, help="k-means iterations")
    p.add_argument("--bandwidth", type=float, default=None, help="mean-shift bandwidth")
    p.add_argument("--kernel", choices=["flat", "gaussian"], default="gaussian")
    p.add_argument("--sigma", type=float, default=None, help="spectral Gaussian affinity scale")
    p.add_argument("--variant", choices=["unnormalized", "random_walk", "symmetric"],
                   default="symmetric")
    p.add_argument("--seed", type=int, default=0, help="random seed")

    p = add("hull", cmd_hull, "Convex hull; writes a triangulated PLY and prints the volume.")
    p.add_argument("input")
    p.add_argument("output")

    p = add("mds", cmd_mds, "Classical MDS of a CSV distance matrix.")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--dim", type=int, default=2, help="embedding dimension")

    p = add("depth", cmd_depth, "Back-project a depth image (.npy or 16-bit PNG) to a PLY cloud.")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--fx", type=float, default=525.0)
    p.add_argument("--fy", type=float, default=525.0)
    p.add_argument("--cx", type=float, default=319.5)
    p.add_argument("--cy", type=float, default=239.5)
    p.add_argument("--depth-scale", type=float, default=1000.0, help="raw depth units per meter")

    p = add("gen", cmd_gen, "Generate a synthetic scene, optionally with a moved copy.")
    p.add_argument("output")
    _add_scene_flags(p)
    p.add_argument("--moved", help="also write the scene under a planted motion to this PLY")
    p.add_argument("--motion", help="write the planted 4x4 motion to this text file")
    p.add_argument("--angle", type=float, default=5.0, help="planted rotation (degrees)")
    p.add_argument("--translation", type=float, default=0.05, help="planted translation norm")
    p.add_argument("--no-normals", action="store_true", help="omit ground-truth normals")

    p = add("bench", cmd_bench, "Time a task on a synthetic scene (CSV report).")
    p.add_argument("--task", choices=TASKS, required=True)
    _add_scene_flags(p)
    p.add_argument("--repeats", type=int, default=3, help="timed repetitions (>= 3)")
    p.add_argument("--output", help="CSV path (default: stdout)")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "bench" and args.threads is not None:
        set_num_threads(args.threads)
    try:
        args.func(args)
    except (CliError, ValueError, OSError, RuntimeError) as exc:
        print(f"pointkit {args.command}: error: {exc}", file=sys.stderr)
        return 1
    finally:
        set_num_threads(None)
    return 0


if __name__ == "__main__":
    sys.exit(main())
