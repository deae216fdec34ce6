"""Throughput benchmark for the deformable aggregation kernels.

The workload is synthesized deterministically from a seed, so two runs of
the same descriptor produce identical inputs (verified via a checksum in
the report).  Timings use ``time.perf_counter``; the report records host
metadata and the timer resolution, plus the derived figure "how many
cameras can be aggregated at K frames per second".
"""

from __future__ import annotations

import hashlib
import json
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .configio import validate_document
from .features import FeatureGrid, FeaturePyramid, PrecisionMode, SamplePlan, msda_optimized, msda_reference
from .rng import substream


@dataclass(frozen=True)
class BenchWorkload:
    """Synthetic aggregation workload descriptor."""

    cameras: int = 6
    levels: int = 4
    channels: int = 256
    queries: int = 900
    points_per_query: int = 13
    level0_size: tuple = (64, 64)
    repetitions: int = 3
    seed: int = 0
    fps_targets: tuple = (30.0,)

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchWorkload":
        validate_document(doc, "bench_workload_v1")
        kwargs = {k: v for k, v in doc.items() if k != "schema_version"}
        if "level0_size" in kwargs:
            kwargs["level0_size"] = tuple(kwargs["level0_size"])
        if "fps_targets" in kwargs:
            kwargs["fps_targets"] = tuple(kwargs["fps_targets"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "cameras": self.cameras,
            "levels": self.levels,
            "channels": self.channels,
            "queries": self.queries,
            "points_per_query": self.points_per_query,
            "level0_size": list(self.level0_size),
            "repetitions": self.repetitions,
            "seed": self.seed,
            "fps_targets": list(self.fps_targets),
        }


def generate_workload(workload: BenchWorkload):
    """Materialize pyramids and a sampling plan for a workload descriptor.

    Every query samples ``points_per_query`` locations in each level of each
    camera; feature values are uniform in [-1, 1].  Returns
    ``(pyramids, plan, checksum)`` where the checksum covers the exact bytes
    of all generated arrays.
    """
    rng = substream(workload.seed, "bench", "inputs")
    digest = hashlib.sha256()
    pyramids = []
    dims = []
    for cam in range(workload.cameras):
        levels = []
        for m in range(workload.levels):
            h = max(1, workload.level0_size[0] >> m)
            w = max(1, workload.level0_size[1] >> m)
            vals = rng.uniform(-1.0, 1.0, (h, w, workload.channels)).astype(np.float32)
            digest.update(vals.tobytes())
            levels.append(FeatureGrid(stride=8.0 * 2**m, values=vals))
            if cam == 0:
                dims.append((h, w))
        pyramids.append(FeaturePyramid(cam, levels))

    n = workload.queries * workload.cameras * workload.levels * workload.points_per_query
    qidx = np.repeat(
        np.arange(workload.queries, dtype=np.int64),
        workload.cameras * workload.levels * workload.points_per_query,
    )
    cams = np.tile(
        np.repeat(np.arange(workload.cameras, dtype=np.int32), workload.levels * workload.points_per_query),
        workload.queries,
    )
    lvls = np.tile(
        np.tile(
            np.repeat(np.arange(workload.levels, dtype=np.int32), workload.points_per_query),
            workload.cameras,
        ),
        workload.queries,
    )
    heights = np.array([dims[m][0] for m in range(workload.levels)], dtype=np.float64)
    widths = np.array([dims[m][1] for m in range(workload.levels)], dtype=np.float64)
    us = rng.uniform(-1.0, widths[lvls], n).astype(np.float32)
    vs = rng.uniform(-1.0, heights[lvls], n).astype(np.float32)
    ws = rng.uniform(0.01, 1.0, n).astype(np.float32)
    for arr in (us, vs, ws):
        digest.update(arr.tobytes())
    plan = SamplePlan.from_arrays(qidx, cams, lvls, us, vs, ws, workload.queries)
    return pyramids, plan, "sha256:" + digest.hexdigest()


def _time_path(fn, repetitions: int) -> dict:
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return {
        "mean_s": float(np.mean(times)),
        "min_s": float(np.min(times)),
        "max_s": float(np.max(times)),
        "times_s": [float(t) for t in times],
    }


def _host_metadata() -> dict:
    import os

    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "cpu_count": os.cpu_count(),
    }


def bench_msda(workload: BenchWorkload, mode: PrecisionMode = PrecisionMode.FULL, workers: int = 1) -> dict:
    """Time the scalar reference against the optimized path.

    With ``repetitions == 0`` no measurement happens and an empty report is
    returned.  The "cameras at K fps" figure is
    ``floor(1 / (K * per_camera_time))`` with per-camera time taken as the
    mean invocation time divided by the camera count.
    """
    report = {
        "schema_version": 1,
        "tool_version": __version__,
        "workload": workload.to_dict(),
        "mode": mode.value,
        "workers": int(workers),
        "host": _host_metadata(),
        "timer": {
            "name": "perf_counter",
            "resolution_s": time.get_clock_info("perf_counter").resolution,
        },
    }
    if workload.repetitions == 0:
        report["measured"] = False
        return report

    pyramids, plan, checksum = generate_workload(workload)
    report["input_checksum"] = checksum

    # one untimed warm-up per path, then timed repetitions
    msda_reference(pyramids, plan)
    msda_optimized(pyramids, plan, mode, workers=workers)
    ref_stats = _time_path(lambda: msda_reference(pyramids, plan), workload.repetitions)
    opt_stats = _time_path(lambda: msda_optimized(pyramids, plan, mode, workers=workers), workload.repetitions)

    report["measured"] = True
    report["reference"] = ref_stats
    report["optimized"] = opt_stats
    report["speedup"] = ref_stats["mean_s"] / opt_stats["mean_s"] if opt_stats["mean_s"] > 0 else float("inf")
    cameras_at = {}
    for fps in workload.fps_targets:
        per_cam_ref = ref_stats["mean_s"] / workload.cameras
        per_cam_opt = opt_stats["mean_s"] / workload.cameras
        cameras_at[f"{fps:g}"] = {
            "reference": int(1.0 / (fps * per_cam_ref)) if per_cam_ref > 0 else 0,
            "optimized": int(1.0 / (fps * per_cam_opt)) if per_cam_opt > 0 else 0,
        }
    report["cameras_at_fps"] = cameras_at
    return report


def write_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
