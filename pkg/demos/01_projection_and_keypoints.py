"""
Pinhole projection, box corners and sampling keypoints
======================================================

Walks a 3D box through one camera: project its center, enumerate its
corners, place the fixed + learned sampling keypoints, and round-trip a
pixel back into space.
"""

import numpy as np

from mvtrack3d.geometry import (
    ObjectState3D,
    backproject_point,
    box_corners,
    camera_looking_at,
    generate_keypoints,
    motion_compensate,
    project_point,
)

# An elevated camera at the corner of the room, aimed at the origin.
cam = camera_looking_at(
    position=[6.0, -4.0, 5.0],
    target=[0.0, 0.0, 0.0],
    focal=420.0,
    principal=(320.0, 240.0),
    image_size=(640, 480),
)
print("camera sits at", np.round(cam.position, 6))

# A person-sized box walking through the scene.
state = ObjectState3D(x=0.5, y=1.0, z=0.9, w=0.6, l=0.6, h=1.8, yaw=0.3,
                      vx=1.2, vy=0.0, vz=0.0)

u, v, depth = project_point(cam, np.array([state.x, state.y, state.z]))
print(f"center lands at pixel ({u:.2f}, {v:.2f}) at depth {depth:.3f} m")

# The eight corners: index bit 0 flips length, bit 1 width, bit 2 height.
corners = box_corners(state)
print("lowest corner ", np.round(corners[0], 4))
print("highest corner", np.round(corners[7], 4))

# Seven fixed keypoints (center + face centers) plus one learned offset.
kp = generate_keypoints(state, learned_offsets=np.array([[0.25, -0.5, 0.1]]))
for point, kind in zip(kp.points, kp.kinds):
    uvd = project_point(cam, point)
    print(f"{kind.name:>7} keypoint {np.round(point, 3)} -> pixel "
          f"({uvd[0]:.1f}, {uvd[1]:.1f})")

# A pixel plus a depth pins down the 3D point again.
restored = backproject_point(cam, u, v, depth)
print("backprojected center", np.round(restored, 6))

# Constant-velocity compensation drags the keypoints to the next frame time.
later = motion_compensate(kp, velocity=(state.vx, state.vy, state.vz), dt=0.5)
print("after 0.5 s the center keypoint sits at", np.round(later.points[0], 3))
