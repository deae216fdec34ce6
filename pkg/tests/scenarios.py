"""Shared scene builders for the test suite."""

import numpy as np

from mvtrack3d.geometry import camera_looking_at, camera_to_json_dict
from mvtrack3d.simulator import (
    FeatureParams,
    NoiseParams,
    SceneConfig,
    SceneObject,
    detections_from_truth,
    simulate_truth,
)


def overhead_camera(height=12.0, focal=420.0, image=(640, 480)):
    """Camera high above the origin looking straight-ish down the scene."""
    return camera_looking_at(
        position=[0.01, -0.01, height],
        target=[0.0, 0.0, 0.0],
        focal=focal,
        principal=(image[0] / 2.0, image[1] / 2.0),
        image_size=image,
    )


def identity_grid_config(
    seed=7,
    identities=16,
    frames=200,
    sigma_embedding=0.1,
    channels=32,
    frame_rate=10.0,
):
    """Stationary people on a grid under one camera; embedding noise only."""
    side = int(np.ceil(np.sqrt(identities)))
    objects = []
    for ident in range(identities):
        gx = (ident % side - (side - 1) / 2.0) * 2.0
        gy = (ident // side - (side - 1) / 2.0) * 2.0
        objects.append(
            SceneObject(
                category="person",
                identity=ident,
                dims=(0.6, 0.6, 1.75),
                waypoints=np.array([[0.0, gx, gy, 0.875]]),
            )
        )
    duration = (frames - 1) / frame_rate
    return SceneConfig(
        seed=seed,
        frame_rate=frame_rate,
        duration=duration,
        cameras={0: overhead_camera()},
        objects=objects,
        noise=NoiseParams(sigma_embedding=sigma_embedding),
        features=FeatureParams(channels=channels),
        visibility_grid=16,
    )


def collect_labeled_embeddings(cfg, workers=1):
    """Simulate and return [(Embedding, identity)] across all frames."""
    truth = simulate_truth(cfg, workers=workers)
    det_frames = detections_from_truth(cfg, truth, workers=workers)
    items = []
    for dets in det_frames:
        for det in dets:
            items.append((det.embedding, det.truth_identity))
    return items


def scene_doc_from_config(cfg):
    """SceneConfig back to its JSON-document form (for CLI-level tests)."""
    doc = {
        "schema_version": 1,
        "seed": cfg.seed,
        "frame_rate": cfg.frame_rate,
        "duration": cfg.duration,
        "cameras": [camera_to_json_dict(cid, cam) for cid, cam in sorted(cfg.cameras.items())],
        "objects": [
            {
                "category": obj.category,
                "identity": obj.identity,
                "dims": {"w": obj.dims[0], "l": obj.dims[1], "h": obj.dims[2]},
                "waypoints": [[float(x) for x in row] for row in obj.waypoints],
            }
            for obj in cfg.objects
        ],
        "noise": {
            "sigma_center": cfg.noise.sigma_center,
            "sigma_dims": cfg.noise.sigma_dims,
            "sigma_yaw": cfg.noise.sigma_yaw,
            "p_dropout": cfg.noise.p_dropout,
            "sigma_embedding": cfg.noise.sigma_embedding,
        },
        "features": {
            "channels": cfg.features.channels,
            "strides": list(cfg.features.strides),
            "background_sigma": cfg.features.background_sigma,
        },
        "visibility_grid": cfg.visibility_grid,
    }
    if cfg.occluders:
        doc["occluders"] = [
            {"x": o.x, "y": o.y, "z": o.z, "w": o.w, "l": o.l, "h": o.h, "yaw": o.yaw} for o in cfg.occluders
        ]
    return doc
