"""Image-plane visibility model.

An object's image footprint is approximated by the axis-aligned bounding
rect of its projected box corners (corners behind the camera are excluded).
The visible fraction of a target is estimated by sampling a regular grid of
points on its rect and counting the points that are (a) inside the image
and (b) not covered by any blocker rect with strictly smaller mean corner
depth.  Grid samples sit at cell centers, so a rect half-covered along one
axis scores exactly 0.5 for any even grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera, FullyBehindCamera
from .geometry import CameraModel, ObjectState3D, box_corners, project_point


@dataclass(frozen=True)
class ProjectedRect:
    """Axis-aligned pixel-space rect with the mean depth of its source corners."""

    u_min: float
    u_max: float
    v_min: float
    v_max: float
    mean_depth: float

    def contains(self, u, v):
        return (self.u_min <= u) & (u <= self.u_max) & (self.v_min <= v) & (v <= self.v_max)


@dataclass(frozen=True)
class VisibilityScore:
    """Visible fraction of one object in one camera, in [0, 1]."""

    camera_id: int
    object_id: int
    value: float
    fully_behind: bool = False


def projected_rect(cam: CameraModel, state: ObjectState3D) -> ProjectedRect:
    """Project a box's corners and bound them with an axis-aligned rect.

    Corners behind the camera are skipped; the rect is not clipped to the
    image.  Raises FullyBehindCamera when no corner projects.
    """
    us, vs, depths = [], [], []
    for corner in box_corners(state):
        try:
            u, v, d = project_point(cam, corner)
        except BehindCamera:
            continue
        us.append(u)
        vs.append(v)
        depths.append(d)
    if not us:
        raise FullyBehindCamera("all eight box corners are behind the camera")
    return ProjectedRect(
        u_min=min(us), u_max=max(us), v_min=min(vs), v_max=max(vs), mean_depth=float(np.mean(depths))
    )


def visible_fraction(
    cam: CameraModel,
    target: ObjectState3D,
    blockers,
    grid: int = 64,
    camera_id: int = 0,
    object_id: int = 0,
) -> VisibilityScore:
    """Sampled visible fraction of ``target`` against ``blockers``.

    Args:
        cam: camera model.
        target: the object whose visibility is scored.
        blockers: iterable of ObjectState3D that may occlude the target.
        grid: samples per axis (>= 2); grid**2 points are tested.
        camera_id, object_id: labels recorded on the returned score.

    Returns:
        VisibilityScore; a target fully behind the camera scores 0.0 with
        ``fully_behind`` set instead of raising.
    """
    if grid < 2:
        raise ValueError("grid must be at least 2")
    try:
        rect = projected_rect(cam, target)
    except FullyBehindCamera:
        return VisibilityScore(camera_id=camera_id, object_id=object_id, value=0.0, fully_behind=True)

    blocker_rects = []
    for blocker in blockers:
        if blocker is target:
            continue
        try:
            br = projected_rect(cam, blocker)
        except FullyBehindCamera:
            continue
        if br.mean_depth < rect.mean_depth:
            blocker_rects.append(br)

    steps = (np.arange(grid, dtype=float) + 0.5) / grid
    us = rect.u_min + steps * (rect.u_max - rect.u_min)
    vs = rect.v_min + steps * (rect.v_max - rect.v_min)
    uu, vv = np.meshgrid(us, vs)
    visible = (uu >= 0.0) & (uu < cam.width) & (vv >= 0.0) & (vv < cam.height)
    for br in blocker_rects:
        visible &= ~br.contains(uu, vv)
    value = float(np.count_nonzero(visible)) / float(grid * grid)
    return VisibilityScore(camera_id=camera_id, object_id=object_id, value=value)
