"""Synthetic multi-camera scene generator.

A scene document (see the packaged ``scene_config_v1`` schema) describes
cameras, static occluder boxes, and moving objects with piecewise-linear
waypoint trajectories.  From it this module produces, per frame:

  * ground-truth object states with exact segment velocities,
  * per-camera visibility fractions (rect occlusion model),
  * noisy detections with identity-signature embeddings,
  * feature pyramids painted with the signature of the nearest entity
    covering each cell, on top of Gaussian background noise.

All randomness flows through named substreams keyed by (seed, purpose,
frame, ...), so output is byte-identical regardless of worker count or
generation order.
"""

from __future__ import annotations

import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .configio import validate_document
from .errors import FullyBehindCamera, InvalidWaypoints
from .features import FeatureGrid, FeaturePyramid
from .geometry import ObjectState3D, camera_from_json_dict
from .oae import Embedding
from .rng import substream
from .tracker import Detection
from .trajectories import TrajectorySet
from .visibility import projected_rect, visible_fraction

_SPEED_EPS = 1e-9
PYRAMID_MAGIC = b"FPYR"
PYRAMID_VERSION = 1


@dataclass(frozen=True)
class NoiseParams:
    sigma_center: float = 0.0
    sigma_dims: float = 0.0
    sigma_yaw: float = 0.0
    p_dropout: float = 0.0
    sigma_embedding: float = 0.0


@dataclass(frozen=True)
class FeatureParams:
    channels: int = 32
    strides: tuple = (8.0, 16.0)
    background_sigma: float = 0.01


@dataclass(frozen=True)
class SceneObject:
    category: str
    identity: int
    dims: tuple  # (w, l, h)
    waypoints: np.ndarray  # (n, 4) rows of [time, x, y, z]

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float)
        if wp.ndim != 2 or wp.shape[1] != 4 or wp.shape[0] < 1:
            raise InvalidWaypoints("waypoints must be an (n, 4) array of [t, x, y, z]")
        if not np.all(np.isfinite(wp)):
            raise InvalidWaypoints("waypoints must be finite")
        times = wp[:, 0]
        if np.any(np.diff(times) <= 0.0):
            raise InvalidWaypoints("waypoint times must be strictly increasing")
        object.__setattr__(self, "waypoints", wp)


@dataclass
class SceneConfig:
    seed: int
    frame_rate: float
    duration: float
    cameras: dict  # camera_id -> CameraModel
    objects: list  # SceneObject
    occluders: list = field(default_factory=list)  # ObjectState3D, zero velocity
    noise: NoiseParams = NoiseParams()
    features: FeatureParams = FeatureParams()
    visibility_grid: int = 64

    @property
    def num_frames(self) -> int:
        """Frames cover [0, duration] inclusive at the configured rate."""
        return int(round(self.duration * self.frame_rate)) + 1

    def frame_time(self, frame_index: int) -> float:
        return frame_index / self.frame_rate

    @classmethod
    def from_dict(cls, doc: dict) -> "SceneConfig":
        validate_document(doc, "scene_config_v1")
        cameras = {}
        for entry in doc["cameras"]:
            cam_id, cam = camera_from_json_dict(entry)
            if cam_id in cameras:
                raise ValueError(f"duplicate camera id {cam_id}")
            cameras[cam_id] = cam
        objects = []
        seen_ids = set()
        for obj in doc["objects"]:
            if obj["identity"] in seen_ids:
                raise ValueError(f"duplicate object identity {obj['identity']}")
            seen_ids.add(obj["identity"])
            objects.append(
                SceneObject(
                    category=obj["category"],
                    identity=int(obj["identity"]),
                    dims=(obj["dims"]["w"], obj["dims"]["l"], obj["dims"]["h"]),
                    waypoints=np.asarray(obj["waypoints"], dtype=float),
                )
            )
        occluders = [
            ObjectState3D(
                x=box["x"], y=box["y"], z=box["z"],
                w=box["w"], l=box["l"], h=box["h"],
                yaw=box.get("yaw", 0.0),
            )
            for box in doc.get("occluders", [])
        ]
        noise_doc = doc.get("noise", {})
        feat_doc = doc.get("features", {})
        return cls(
            seed=int(doc["seed"]),
            frame_rate=float(doc["frame_rate"]),
            duration=float(doc["duration"]),
            cameras=cameras,
            objects=objects,
            occluders=occluders,
            noise=NoiseParams(
                sigma_center=noise_doc.get("sigma_center", 0.0),
                sigma_dims=noise_doc.get("sigma_dims", 0.0),
                sigma_yaw=noise_doc.get("sigma_yaw", 0.0),
                p_dropout=noise_doc.get("p_dropout", 0.0),
                sigma_embedding=noise_doc.get("sigma_embedding", 0.0),
            ),
            features=FeatureParams(
                channels=int(feat_doc.get("channels", 32)),
                strides=tuple(float(s) for s in feat_doc.get("strides", [8, 16])),
                background_sigma=float(feat_doc.get("background_sigma", 0.01)),
            ),
            visibility_grid=int(doc.get("visibility_grid", 64)),
        )

    @classmethod
    def from_json(cls, path) -> "SceneConfig":
        from .configio import load_json_config

        return cls.from_dict(load_json_config(path))


def waypoint_state(obj: SceneObject, t: float) -> ObjectState3D:
    """Object state at time ``t``: piecewise-linear position, exact
    per-segment velocity, heading from the velocity direction.

    Outside the waypoint time span the object parks at the nearest
    endpoint with zero velocity.  On a knot the outgoing segment wins,
    so center(t + dt) - center(t) == velocity(t) * dt holds exactly for
    any t, t + dt inside one segment.
    """
    wp = obj.waypoints
    times = wp[:, 0]
    w, l, h = obj.dims
    if t <= times[0]:
        pos = wp[0, 1:]
        vel = np.zeros(3)
    elif t >= times[-1]:
        pos = wp[-1, 1:]
        vel = np.zeros(3)
    else:
        k = int(np.searchsorted(times, t, side="right") - 1)
        dt_seg = times[k + 1] - times[k]
        vel = (wp[k + 1, 1:] - wp[k, 1:]) / dt_seg
        pos = wp[k, 1:] + vel * (t - times[k])
    speed = math.hypot(vel[0], vel[1])
    yaw = math.atan2(vel[1], vel[0]) if speed > _SPEED_EPS else 0.0
    return ObjectState3D(
        x=pos[0], y=pos[1], z=pos[2], w=w, l=l, h=h, yaw=yaw,
        vx=vel[0], vy=vel[1], vz=vel[2],
    )


def identity_signature(seed: int, identity: int, dim: int) -> np.ndarray:
    """Deterministic unit-norm appearance vector for one identity."""
    rng = substream(seed, "signature", identity)
    raw = rng.standard_normal(dim)
    return raw / np.linalg.norm(raw)


@dataclass(frozen=True)
class TruthObject:
    identity: int
    category: str
    state: ObjectState3D
    visibility: dict  # camera_id -> visible fraction


@dataclass(frozen=True)
class FrameTruth:
    frame_index: int
    time: float
    objects: tuple  # TruthObject


def _frame_truth(cfg: SceneConfig, frame_index: int) -> FrameTruth:
    t = cfg.frame_time(frame_index)
    states = [waypoint_state(obj, t) for obj in cfg.objects]
    all_blockers = states + list(cfg.occluders)
    truths = []
    for obj, state in zip(cfg.objects, states):
        vis = {}
        for cam_id in sorted(cfg.cameras):
            score = visible_fraction(
                cfg.cameras[cam_id], state, all_blockers,
                grid=cfg.visibility_grid, camera_id=cam_id, object_id=obj.identity,
            )
            vis[cam_id] = score.value
        truths.append(TruthObject(identity=obj.identity, category=obj.category, state=state, visibility=vis))
    return FrameTruth(frame_index=frame_index, time=t, objects=tuple(truths))


def simulate_truth(cfg: SceneConfig, workers: int = 1) -> list:
    """Ground truth for every frame.  Frames are independent, so extra
    workers change wall time only, never the result."""
    indices = range(cfg.num_frames)
    if workers <= 1:
        return [_frame_truth(cfg, i) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: _frame_truth(cfg, i), indices))


def truth_to_trajectories(truth_frames) -> TrajectorySet:
    """Ground truth as a TrajectorySet keyed by identity."""
    frames = [
        [(tobj.identity, tobj.state, 1.0) for tobj in ft.objects]
        for ft in truth_frames
    ]
    return TrajectorySet(frames=frames)


def _paint_grid(cfg: SceneConfig, ft: FrameTruth, cam_id: int, level: int, signatures: dict) -> FeatureGrid:
    cam = cfg.cameras[cam_id]
    stride = cfg.features.strides[level]
    height = int(math.ceil(cam.height / stride))
    width = int(math.ceil(cam.width / stride))
    channels = cfg.features.channels

    rng = substream(cfg.seed, "paint", ft.frame_index, cam_id, level)
    values = rng.normal(0.0, cfg.features.background_sigma, size=(height, width, channels))

    # entity rects: moving objects carry their signature, occluders paint nothing
    rects = []
    for tobj in ft.objects:
        try:
            rects.append((projected_rect(cam, tobj.state), signatures[tobj.identity]))
        except FullyBehindCamera:
            continue
    for occ in cfg.occluders:
        try:
            rects.append((projected_rect(cam, occ), None))
        except FullyBehindCamera:
            continue

    if rects:
        # pixel coordinates of cell centers
        uu = (np.arange(width, dtype=float) + 0.5) * stride
        vv = (np.arange(height, dtype=float) + 0.5) * stride
        uu, vv = np.meshgrid(uu, vv)
        best_depth = np.full((height, width), np.inf)
        winner = np.full((height, width), -1, dtype=np.int64)
        for idx, (rect, _) in enumerate(rects):
            inside = rect.contains(uu, vv) & (rect.mean_depth < best_depth)
            best_depth[inside] = rect.mean_depth
            winner[inside] = idx
        for idx, (_, signature) in enumerate(rects):
            if signature is None:
                continue
            mask = winner == idx
            if mask.any():
                values[mask] += signature
    return FeatureGrid(stride=stride, values=values.astype(np.float32))


def paint_pyramids(cfg: SceneConfig, ft: FrameTruth, signatures: dict | None = None) -> dict:
    """Per-camera feature pyramids for one frame.

    Every cell gets Gaussian background noise; the signature of the
    nearest entity whose projected rect covers the cell center is added
    on top.  Occluders win the depth contest but contribute a zero
    signature, which is what erases occluded objects from the features.
    """
    if signatures is None:
        signatures = {
            obj.identity: identity_signature(cfg.seed, obj.identity, cfg.features.channels)
            for obj in cfg.objects
        }
    out = {}
    for cam_id in sorted(cfg.cameras):
        grids = [
            _paint_grid(cfg, ft, cam_id, level, signatures)
            for level in range(len(cfg.features.strides))
        ]
        out[cam_id] = FeaturePyramid(camera_id=cam_id, levels=grids)
    return out


def simulate_pyramids(cfg: SceneConfig, truth_frames, workers: int = 1) -> list:
    """Painted pyramids for every frame (list of camera_id -> pyramid)."""
    signatures = {
        obj.identity: identity_signature(cfg.seed, obj.identity, cfg.features.channels)
        for obj in cfg.objects
    }
    if workers <= 1:
        return [paint_pyramids(cfg, ft, signatures) for ft in truth_frames]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ft: paint_pyramids(cfg, ft, signatures), truth_frames))


def _frame_detections(cfg: SceneConfig, ft: FrameTruth, signatures: dict) -> list:
    noise = cfg.noise
    dets = []
    for tobj in ft.objects:
        rng = substream(cfg.seed, "detections", ft.frame_index, tobj.identity)
        if rng.uniform() < noise.p_dropout:
            continue
        s = tobj.state
        center = np.array([s.x, s.y, s.z]) + noise.sigma_center * rng.standard_normal(3)
        dims = np.array([s.w, s.l, s.h]) + noise.sigma_dims * rng.standard_normal(3)
        dims = np.maximum(dims, 1e-3)
        yaw = s.yaw + noise.sigma_yaw * rng.standard_normal()
        raw = signatures[tobj.identity] + noise.sigma_embedding * rng.standard_normal(cfg.features.channels)
        state = ObjectState3D(
            x=center[0], y=center[1], z=center[2],
            w=dims[0], l=dims[1], h=dims[2], yaw=yaw,
            vx=s.vx, vy=s.vy, vz=s.vz,
        )
        confidence = float(np.mean(list(tobj.visibility.values()))) if tobj.visibility else 0.0
        dets.append(
            Detection(
                state=state,
                embedding=Embedding.normalize(raw),
                confidence=confidence,
                per_camera_visibility=dict(tobj.visibility),
                truth_identity=tobj.identity,
            )
        )
    return dets


def detections_from_truth(cfg: SceneConfig, truth_frames, workers: int = 1) -> list:
    """Noisy detections per frame.

    Noise for each (frame, identity) comes from its own substream, so
    dropout of one object never perturbs another, and worker count does
    not matter.  Velocities are copied exactly from truth; confidence is
    the mean visibility across cameras.
    """
    signatures = {
        obj.identity: identity_signature(cfg.seed, obj.identity, cfg.features.channels)
        for obj in cfg.objects
    }
    if workers <= 1:
        return [_frame_detections(cfg, ft, signatures) for ft in truth_frames]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ft: _frame_detections(cfg, ft, signatures), truth_frames))


# ---------------------------------------------------------------------------
# NDJSON serialization


def write_truth_ndjson(path, truth_frames) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ft in truth_frames:
            for tobj in ft.objects:
                s = tobj.state
                record = {
                    "frame": ft.frame_index,
                    "time": ft.time,
                    "identity": tobj.identity,
                    "category": tobj.category,
                    "x": s.x, "y": s.y, "z": s.z,
                    "w": s.w, "l": s.l, "h": s.h,
                    "yaw": s.yaw,
                    "vx": s.vx, "vy": s.vy, "vz": s.vz,
                    "visibility": {str(k): v for k, v in sorted(tobj.visibility.items())},
                }
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_truth_ndjson(path) -> list:
    """Rebuild FrameTruth frames from an NDJSON truth file."""
    by_frame: dict = {}
    times: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from exc
            state = ObjectState3D(
                x=rec["x"], y=rec["y"], z=rec["z"],
                w=rec["w"], l=rec["l"], h=rec["h"], yaw=rec["yaw"],
                vx=rec.get("vx", 0.0), vy=rec.get("vy", 0.0), vz=rec.get("vz", 0.0),
            )
            tobj = TruthObject(
                identity=int(rec["identity"]),
                category=rec.get("category", ""),
                state=state,
                visibility={int(k): float(v) for k, v in rec.get("visibility", {}).items()},
            )
            by_frame.setdefault(int(rec["frame"]), []).append(tobj)
            times[int(rec["frame"])] = float(rec["time"])
    frames = []
    for idx in range(max(by_frame) + 1 if by_frame else 0):
        frames.append(
            FrameTruth(frame_index=idx, time=times.get(idx, 0.0), objects=tuple(by_frame.get(idx, ())))
        )
    return frames


def write_detections_ndjson(path, detection_frames) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for frame_idx, dets in enumerate(detection_frames):
            for det in dets:
                s = det.state
                record = {
                    "frame": frame_idx,
                    "x": s.x, "y": s.y, "z": s.z,
                    "w": s.w, "l": s.l, "h": s.h,
                    "yaw": s.yaw,
                    "vx": s.vx, "vy": s.vy, "vz": s.vz,
                    "confidence": det.confidence,
                    "embedding": [float(x) for x in det.embedding.values],
                    "visibility": {str(k): v for k, v in sorted(det.per_camera_visibility.items())},
                }
                if det.truth_identity is not None:
                    record["truth_identity"] = det.truth_identity
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_detections_ndjson(path, num_frames: int | None = None) -> list:
    by_frame: dict = {}
    max_frame = -1
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from exc
            state = ObjectState3D(
                x=rec["x"], y=rec["y"], z=rec["z"],
                w=rec["w"], l=rec["l"], h=rec["h"], yaw=rec["yaw"],
                vx=rec.get("vx", 0.0), vy=rec.get("vy", 0.0), vz=rec.get("vz", 0.0),
            )
            det = Detection(
                state=state,
                embedding=Embedding.normalize(np.asarray(rec["embedding"], dtype=float)),
                confidence=float(rec["confidence"]),
                per_camera_visibility={int(k): float(v) for k, v in rec.get("visibility", {}).items()},
                truth_identity=rec.get("truth_identity"),
            )
            frame_idx = int(rec["frame"])
            by_frame.setdefault(frame_idx, []).append(det)
            max_frame = max(max_frame, frame_idx)
    count = num_frames if num_frames is not None else max_frame + 1
    return [by_frame.get(i, []) for i in range(count)]


# ---------------------------------------------------------------------------
# Binary pyramid container
#
# Layout (all integers little-endian u32 unless noted):
#   magic b"FPYR" | version | n_frames | n_cameras | n_levels | channels
#   per camera (sorted by id): camera_id, then per level: stride f32, H, W
#   then frame-major, camera-major (sorted), level-major raw float32 LE
#   buffers, each H*W*C values in row-major (H, W, C) order.


def write_pyramid_sequence(path, pyramid_frames) -> None:
    if not pyramid_frames:
        raise ValueError("no frames to write")
    first = pyramid_frames[0]
    cam_ids = sorted(first)
    n_levels = len(first[cam_ids[0]].levels)
    channels = first[cam_ids[0]].channels
    with open(path, "wb") as fh:
        fh.write(PYRAMID_MAGIC)
        fh.write(struct.pack("<5I", PYRAMID_VERSION, len(pyramid_frames), len(cam_ids), n_levels, channels))
        for cam_id in cam_ids:
            fh.write(struct.pack("<I", cam_id))
            for grid in first[cam_id].levels:
                fh.write(struct.pack("<fII", grid.stride, grid.height, grid.width))
        for frame in pyramid_frames:
            if sorted(frame) != cam_ids:
                raise ValueError("camera set differs between frames")
            for cam_id in cam_ids:
                for grid in frame[cam_id].levels:
                    fh.write(np.ascontiguousarray(grid.values, dtype="<f4").tobytes())


def read_pyramid_sequence(path) -> list:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != PYRAMID_MAGIC:
            raise ValueError(f"not a pyramid container (magic {magic!r})")
        version, n_frames, n_cameras, n_levels, channels = struct.unpack("<5I", fh.read(20))
        if version != PYRAMID_VERSION:
            raise ValueError(f"unsupported container version {version}")
        headers = []
        for _ in range(n_cameras):
            (cam_id,) = struct.unpack("<I", fh.read(4))
            shapes = [struct.unpack("<fII", fh.read(12)) for _ in range(n_levels)]
            headers.append((cam_id, shapes))
        frames = []
        for _ in range(n_frames):
            frame = {}
            for cam_id, shapes in headers:
                grids = []
                for stride, height, width in shapes:
                    count = height * width * channels
                    buf = fh.read(count * 4)
                    if len(buf) != count * 4:
                        raise ValueError("truncated pyramid container")
                    values = np.frombuffer(buf, dtype="<f4").reshape(height, width, channels)
                    grids.append(FeatureGrid(stride=stride, values=values.astype(np.float32)))
                frame[cam_id] = FeaturePyramid(camera_id=cam_id, levels=grids)
            frames.append(frame)
        if fh.read(1):
            raise ValueError("trailing bytes after pyramid container payload")
    return frames
