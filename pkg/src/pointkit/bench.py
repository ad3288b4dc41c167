"""Timing harness over synthetic scenes."""

import csv
import io
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from ._threads import num_threads
from .clustering import smooth_segments
from .core import transform
from .features import KNN, estimate_normals, grid_downsample
from .registration import IcpConfig, icp
from .scenes import generate_scene, planted_motion

TASKS = ("normals", "downsample", "icp", "segment")


@dataclass
class BenchRecord:
    task: str
    n_points: int
    params: str
    threads: int
    timings_ms: list
    extra: dict = field(default_factory=dict)

    @property
    def mean_ms(self):
        return statistics.fmean(self.timings_ms)

    @property
    def median_ms(self):
        return statistics.median(self.timings_ms)


def _task(task, cloud, spec):
    if task == "normals":
        return "knn=10", lambda: estimate_normals(cloud, KNN(10), viewpoint=np.full(3, 2.0))
    if task == "downsample":
        return "voxel=0.005", lambda: grid_downsample(cloud, 0.005)
    if task == "segment":
        def run():
            c = estimate_normals(cloud, KNN(10), viewpoint=np.full(3, 2.0))
            return smooth_segments(c, k=30, angle_thresh=2.8)
        return "knn=30 angle=2.8 normals_knn=10", run
    if task == "icp":
        motion = planted_motion(spec.seed, 5.0, 0.05)
        src = grid_downsample(cloud, 0.01)
        tgt = estimate_normals(transform(src, motion), KNN(10), viewpoint=np.full(3, 2.0))
        return "voxel=0.01 normals_knn=10 iters=15 max_dist=0.05", lambda: icp(src, tgt, IcpConfig())
    raise ValueError(f"unknown bench task {task!r}; choose from {', '.join(TASKS)}")


def run_bench(task, spec, threads=1, repeats=3):
    """Time ``task`` on the scene with 1 thread and with ``threads`` threads."""
    if repeats < 3:
        raise ValueError("repeats must be >= 3")
    if task not in TASKS:
        raise ValueError(f"unknown bench task {task!r}; choose from {', '.join(TASKS)}")
    cloud, _ = generate_scene(spec)
    params, fn = _task(task, cloud, spec)
    records = []
    for t in sorted({1, int(threads)}):
        times = []
        result = None
        with num_threads(t):
            fn()  # warm-up
            for _ in range(repeats):
                t0 = time.perf_counter()
                result = fn()
                times.append(max((time.perf_counter() - t0) * 1e3, 1e-6))
        extra = {}
        if task == "icp":
            extra["rmse_history"] = ";".join("%.9g" % v for v in result.rmse_history)
        records.append(BenchRecord(task, len(cloud), params, t, times, extra))
    return records


def speedup(records):
    base = records[0].median_ms
    return base / records[-1].median_ms


def report_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["task", "n_points", "params", "threads", "repeats", "mean_ms", "median_ms",
                "speedup_vs_1", "rmse_history"])
    base = records[0].median_ms
    for r in records:
        w.writerow([r.task, r.n_points, r.params, r.threads, len(r.timings_ms),
                    "%.6f" % r.mean_ms, "%.6f" % r.median_ms, "%.6f" % (base / r.median_ms),
                    r.extra.get("rmse_history", "")])
    return buf.getvalue()
