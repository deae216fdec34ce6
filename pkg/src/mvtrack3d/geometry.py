"""Pinhole cameras, oriented 3D boxes, and keypoint generation.

Conventions used everywhere in this package:

* World and camera frames are right-handed.  A camera maps a world point p
  to its frame via ``p_cam = R @ p + t`` and then projects with the pinhole
  model ``u = fx * x / z + cx``, ``v = fy * y / z + cy``.  Depth is the
  camera-frame z coordinate.
* Pixel coordinates are continuous; the image occupies ``[0, width) x
  [0, height)``.
* Boxes are axis-aligned in their own frame with length ``l`` along local x,
  width ``w`` along local y and height ``h`` along z, then rotated by ``yaw``
  counter-clockwise about world +z and translated to their center.
* Yaw is normalized to ``[-pi, pi)``.

Corner order of :func:`box_corners` is fixed: for corner index ``i`` in
``0..7``, bit 0 selects the +l/2 face, bit 1 the +w/2 face and bit 2 the
+h/2 face (a set bit means the positive half).  Corner 0 is therefore
``(-l/2, -w/2, -h/2)`` in the local frame and corner 7 is
``(+l/2, +w/2, +h/2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import BehindCamera, OffsetOutOfRange

DEPTH_EPSILON = 1e-6
_ORTHONORMAL_TOL = 1e-9

# Fixed keypoints: box center plus the six face centers.
FIXED_KEYPOINT_COUNT = 7


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    wrapped = math.fmod(float(yaw) + math.pi, 2.0 * math.pi)
    if wrapped < 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def rot_z(yaw: float) -> np.ndarray:
    """Rotation matrix about +z by ``yaw`` (counter-clockwise from above)."""
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class CameraModel:
    """Calibrated pinhole camera with a world-to-camera rigid transform.

    Attributes:
        focal_x, focal_y: focal lengths in pixels.
        principal_x, principal_y: principal point in pixels.
        rotation: 3x3 world-to-camera rotation (orthonormal, det +1).
        translation: world-to-camera translation (p_cam = R @ p + t).
        width, height: image extent in pixels.
    """

    focal_x: float
    focal_y: float
    principal_x: float
    principal_y: float
    rotation: np.ndarray
    translation: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        err = np.abs(R.T @ R - np.eye(3)).max()
        if err > _ORTHONORMAL_TOL:
            raise ValueError(f"rotation is not orthonormal: |R^T R - I|_inf = {err:.3g}")
        if np.linalg.det(R) < 0.0:
            raise ValueError("rotation must be proper (det +1), got a reflection")
        if self.focal_x <= 0.0 or self.focal_y <= 0.0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates (-R^T t)."""
        return -self.rotation.T @ self.translation


@dataclass(frozen=True)
class ObjectState3D:
    """Center position, box dimensions, heading and velocity of one object."""

    x: float
    y: float
    z: float
    w: float
    l: float  # noqa: E741 - established box-dimension name
    h: float
    yaw: float
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0

    def __post_init__(self):
        if not (self.w > 0.0 and self.l > 0.0 and self.h > 0.0):
            raise ValueError(f"box dimensions must be positive, got w={self.w} l={self.l} h={self.h}")
        object.__setattr__(self, "yaw", normalize_yaw(self.yaw))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.vz])

    def shifted(self, dt: float) -> "ObjectState3D":
        """State with the center advanced by velocity * dt."""
        return replace(
            self,
            x=self.x + self.vx * dt,
            y=self.y + self.vy * dt,
            z=self.z + self.vz * dt,
        )


class KeypointKind(Enum):
    FIXED = "fixed"
    LEARNED = "learned"


@dataclass(frozen=True)
class KeypointSet:
    """World-space keypoints with their provenance kind, index-aligned."""

    points: np.ndarray
    kinds: tuple

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if len(self.kinds) != pts.shape[0]:
            raise ValueError("kinds must align one-to-one with points")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "kinds", tuple(self.kinds))

    def __len__(self) -> int:
        return self.points.shape[0]


def project_point(cam: CameraModel, point, depth_epsilon: float = DEPTH_EPSILON):
    """Project a world point into a camera.

    Args:
        cam: camera model.
        point: world point, shape (3,).
        depth_epsilon: minimum camera-frame depth considered in front.

    Returns:
        (u, v, depth) with u, v in pixels and depth in world units.

    Raises:
        BehindCamera: when the camera-frame depth is <= depth_epsilon.
    """
    p_cam = cam.rotation @ np.asarray(point, dtype=float).reshape(3) + cam.translation
    depth = p_cam[2]
    if depth <= depth_epsilon:
        raise BehindCamera(f"point depth {depth:.3g} <= {depth_epsilon:.3g}")
    u = cam.focal_x * p_cam[0] / depth + cam.principal_x
    v = cam.focal_y * p_cam[1] / depth + cam.principal_y
    return float(u), float(v), float(depth)


def backproject_point(cam: CameraModel, u: float, v: float, depth: float) -> np.ndarray:
    """Invert :func:`project_point`: pixel + depth back to a world point."""
    if depth <= 0.0:
        raise ValueError("depth must be positive")
    x = (u - cam.principal_x) * depth / cam.focal_x
    y = (v - cam.principal_y) * depth / cam.focal_y
    p_cam = np.array([x, y, depth])
    return cam.rotation.T @ (p_cam - cam.translation)


def box_corners(state: ObjectState3D) -> np.ndarray:
    """The 8 world-space corners of an oriented box, shape (8, 3).

    Corner index bit layout: bit 0 -> +l/2, bit 1 -> +w/2, bit 2 -> +h/2
    (set bit = positive half in the box's local frame).
    """
    signs = np.array([[(i >> b) & 1 for b in range(3)] for i in range(8)], dtype=float)
    signs = signs * 2.0 - 1.0  # bits {0,1} -> {-1,+1}
    local = signs * np.array([state.l / 2.0, state.w / 2.0, state.h / 2.0])
    return local @ rot_z(state.yaw).T + state.center


def generate_keypoints(state: ObjectState3D, learned_offsets=None) -> KeypointSet:
    """Fixed plus learned keypoints for a box.

    The 7 fixed keypoints are the center and the six face centers.  Each
    learned offset is a unit-cube coordinate scaled by the half-dimensions,
    rotated by yaw and added to the center:
    ``p = center + R(yaw) @ (offset * (l/2, w/2, h/2))``.

    Args:
        state: box state.
        learned_offsets: optional (N, 3) array with components in [-1, 1].

    Raises:
        OffsetOutOfRange: if any offset component falls outside [-1, 1].
    """
    R = rot_z(state.yaw)
    half = np.array([state.l / 2.0, state.w / 2.0, state.h / 2.0])
    center = state.center
    face_dirs = np.array(
        [
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ]
    )
    fixed = np.vstack([center, (face_dirs * half) @ R.T + center])
    kinds = [KeypointKind.FIXED] * FIXED_KEYPOINT_COUNT

    if learned_offsets is None:
        return KeypointSet(fixed, tuple(kinds))

    offsets = np.asarray(learned_offsets, dtype=float).reshape(-1, 3)
    worst = np.abs(offsets).max() if offsets.size else 0.0
    if worst > 1.0:
        raise OffsetOutOfRange(f"offset component magnitude {worst:.3g} exceeds 1")
    learned = (offsets * half) @ R.T + center
    kinds += [KeypointKind.LEARNED] * offsets.shape[0]
    return KeypointSet(np.vstack([fixed, learned]), tuple(kinds))


def motion_compensate(keypoints: KeypointSet, velocity, dt: float) -> KeypointSet:
    """Shift every keypoint by ``velocity * dt`` (first-order motion model)."""
    if dt < 0.0:
        raise ValueError("dt must be non-negative")
    vel = np.asarray(velocity, dtype=float).reshape(3)
    return KeypointSet(keypoints.points + vel * dt, keypoints.kinds)


def camera_looking_at(position, target, focal: float, principal, image_size, up=(0.0, 0.0, 1.0)) -> CameraModel:
    """Build a camera at ``position`` whose optical axis points at ``target``.

    Camera x points right, y points down, z points forward along the view
    direction; ``up`` breaks the roll ambiguity.
    """
    position = np.asarray(position, dtype=float).reshape(3)
    target = np.asarray(target, dtype=float).reshape(3)
    forward = target - position
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("camera position and target coincide")
    z_axis = forward / norm
    up = np.asarray(up, dtype=float).reshape(3)
    x_axis = np.cross(z_axis, up)
    xn = np.linalg.norm(x_axis)
    if xn < 1e-12:
        raise ValueError("view direction is parallel to the up vector")
    x_axis /= xn
    y_axis = np.cross(z_axis, x_axis)
    R = np.vstack([x_axis, y_axis, z_axis])
    t = -R @ position
    width, height = image_size
    return CameraModel(
        focal_x=float(focal),
        focal_y=float(focal),
        principal_x=float(principal[0]),
        principal_y=float(principal[1]),
        rotation=R,
        translation=t,
        width=int(width),
        height=int(height),
    )


def camera_to_json_dict(camera_id: int, cam: CameraModel) -> dict:
    """Serialize one camera to the network-document layout."""
    return {
        "id": int(camera_id),
        "K": [cam.focal_x, cam.focal_y, cam.principal_x, cam.principal_y],
        "R": [float(x) for x in cam.rotation.reshape(-1)],
        "t": [float(x) for x in cam.translation],
        "width": cam.width,
        "height": cam.height,
    }


def camera_from_json_dict(entry: dict) -> tuple[int, CameraModel]:
    fx, fy, cx, cy = entry["K"]
    cam = CameraModel(
        focal_x=fx,
        focal_y=fy,
        principal_x=cx,
        principal_y=cy,
        rotation=np.array(entry["R"], dtype=float).reshape(3, 3),
        translation=np.array(entry["t"], dtype=float),
        width=int(entry["width"]),
        height=int(entry["height"]),
    )
    return int(entry["id"]), cam


def load_camera_network(path) -> dict[int, CameraModel]:
    """Load a camera network document: a JSON array of camera entries.

    Each entry has fields ``id``, ``K`` = [fx, fy, cx, cy], ``R`` (9 numbers,
    row-major) and ``t`` (3 numbers) with p_cam = R @ p + t, plus ``width``
    and ``height``.  See the packaged schema ``camera_network_v1``.
    """
    from .configio import validate_document  # local import to avoid a cycle

    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    validate_document(doc, "camera_network_v1")
    cameras: dict[int, CameraModel] = {}
    for entry in doc:
        cam_id, cam = camera_from_json_dict(entry)
        if cam_id in cameras:
            raise ValueError(f"duplicate camera id {cam_id}")
        cameras[cam_id] = cam
    return cameras


def save_camera_network(path, cameras: dict[int, CameraModel]) -> None:
    doc = [camera_to_json_dict(cid, cam) for cid, cam in cameras.items()]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
