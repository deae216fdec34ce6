"""
Appearance retrieval quality on simulated identities
====================================================

Six stationary people observed for four seconds; every detection carries a
noisy copy of its identity's signature embedding.  Ranking each embedding
against all others yields CMC, mAP and the match/mismatch distance split.
"""

import numpy as np

from mvtrack3d.geometry import camera_looking_at
from mvtrack3d.reid import reid_evaluate
from mvtrack3d.simulator import (
    FeatureParams,
    NoiseParams,
    SceneConfig,
    SceneObject,
    detections_from_truth,
    simulate_truth,
)

people = []
for ident in range(6):
    x = (ident % 3 - 1) * 2.0
    y = (ident // 3) * 2.0 - 1.0
    people.append(
        SceneObject(
            category="person",
            identity=ident,
            dims=(0.6, 0.6, 1.75),
            waypoints=np.array([[0.0, x, y, 0.875]]),
        )
    )

cfg = SceneConfig(
    seed=11,
    frame_rate=10.0,
    duration=4.0,
    cameras={
        0: camera_looking_at(
            position=[0.01, -0.01, 12.0],
            target=[0.0, 0.0, 0.0],
            focal=420.0,
            principal=(320.0, 240.0),
            image_size=(640, 480),
        )
    },
    objects=people,
    noise=NoiseParams(sigma_embedding=0.15),
    features=FeatureParams(channels=32),
    visibility_grid=16,
)

truth = simulate_truth(cfg)
items = [
    (det.embedding, det.truth_identity)
    for dets in detections_from_truth(cfg, truth)
    for det in dets
]
print(f"collected {len(items)} labeled embeddings for 6 identities")

report = reid_evaluate(items, items)
print(f"rank-1 {report.rank1:.4f}, mAP {report.mean_ap:.4f}")
print("CMC[0:5] =", np.round(report.cmc[:5], 4))
print(f"match distances    mean {report.match_stats['mean']:.3f} "
      f"(n={report.match_stats['count']})")
print(f"mismatch distances mean {report.mismatch_stats['mean']:.3f} "
      f"(n={report.mismatch_stats['count']})")
