"""Outside-in multi-camera 3D perception toolkit.

Library layout:

* :mod:`mvtrack3d.geometry` — cameras, oriented boxes, keypoints.
* :mod:`mvtrack3d.features` — feature pyramids and deformable aggregation
  (scalar reference and packed-pair optimized kernels).
* :mod:`mvtrack3d.bench` — aggregation throughput benchmark.
* :mod:`mvtrack3d.visibility` — projected rects and visible fractions.
* :mod:`mvtrack3d.oae` — keypoint feature extraction and visibility-weighted
  embedding fusion.
* :mod:`mvtrack3d.reid` — embedding retrieval evaluation (CMC / mAP).
* :mod:`mvtrack3d.objectives` — training losses with analytic gradients.
* :mod:`mvtrack3d.tracker` — velocity-gated multi-object tracker.
* :mod:`mvtrack3d.simulator` — synthetic scenes with painted pyramids.
* :mod:`mvtrack3d.metrics` — 3D IoU and HOTA evaluation.
* :mod:`mvtrack3d.cli` — command-line entry points.
"""

__version__ = "0.1.0"
