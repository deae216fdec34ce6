"""
Occlusion-aware visibility and embedding fusion
===============================================

Slides a blocker across a target under one camera, watching the visible
fraction fall, then fuses two per-view appearance vectors weighted by those
scores.  When every view is blocked, the fusion falls back to the query's
appearance memory instead of emitting garbage.
"""

import numpy as np

from mvtrack3d.geometry import ObjectState3D, camera_looking_at
from mvtrack3d.oae import Embedding, fuse_embedding, fuse_or_memory
from mvtrack3d.visibility import projected_rect, visible_fraction

cam = camera_looking_at(
    position=[0.01, -0.01, 12.0],
    target=[0.0, 0.0, 0.0],
    focal=420.0,
    principal=(320.0, 240.0),
    image_size=(640, 480),
)

target = ObjectState3D(x=0.0, y=0.0, z=0.0, w=1.0, l=1.0, h=1.0, yaw=0.0)
rect = projected_rect(cam, target)
print(f"target covers pixels u [{rect.u_min:.1f}, {rect.u_max:.1f}], "
      f"v [{rect.v_min:.1f}, {rect.v_max:.1f}] at mean depth {rect.mean_depth:.2f} m")

# Slide a slab between camera and target, left to right.
print("\nblocker x  visible fraction")
for bx in np.linspace(-3.0, 0.0, 7):
    blocker = ObjectState3D(x=float(bx), y=0.0, z=6.0, w=3.0, l=1.5, h=0.3, yaw=0.0)
    score = visible_fraction(cam, target, [blocker], grid=64)
    print(f"{bx:9.2f}  {score.value:.3f}")

# Fuse two per-view feature vectors under different visibility mixes.
view_a = (np.array([1.0, 0.0, 0.0, 0.0]), True)
view_b = (np.array([0.0, 1.0, 0.0, 0.0]), True)
for vis in ((1.0, 0.0), (0.5, 0.5), (0.9, 0.1)):
    fused = fuse_embedding([view_a, view_b], list(vis))
    print(f"visibilities {vis} -> fused {np.round(fused.values, 4)}")

# Both views occluded: keep the appearance memory from earlier frames.
memory = Embedding(np.array([0.0, 0.0, 1.0, 0.0]))
kept = fuse_or_memory([view_a, view_b], [0.0, 0.0], memory)
print("all views occluded, memory kept:", kept is memory)
