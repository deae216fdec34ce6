"""Occlusion-aware appearance embeddings.

A query's appearance in one camera is read off the feature pyramid at its
projected keypoints: each keypoint is sampled at every pyramid level (mean
over levels), keypoint vectors are combined with softmax attention scored
against the query's descriptor, and the per-camera vectors are then fused
across cameras weighted by visibility:

    fused = sum_i(v_i * g_i) / sum_i(v_i)

so cameras that barely see the object barely influence the embedding.  When
no camera clears the visibility floor the fusion signals ``AllOccluded``
and the caller keeps the query's memory embedding instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllOccluded, BehindCamera, ChannelMismatch
from .features import FeaturePyramid, bilinear_sample, pixel_to_cell
from .geometry import CameraModel, KeypointSet, ObjectState3D, project_point

DEFAULT_EMBEDDING_DIM = 128
VISIBILITY_FLOOR = 1e-3


@dataclass(frozen=True)
class Embedding:
    """Unit-norm appearance vector."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        norm = np.linalg.norm(vals)
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-6:
            raise ValueError(f"embedding must be unit-norm, got |e| = {norm:.6g}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def normalize(cls, raw) -> "Embedding":
        raw = np.asarray(raw, dtype=float).reshape(-1)
        norm = np.linalg.norm(raw)
        if norm < 1e-12 or not np.isfinite(norm):
            raise ValueError("cannot normalize a zero or non-finite vector")
        return cls(raw / norm)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass
class Query:
    """A tracked object hypothesis with appearance state.

    Attributes:
        track_id: stable identity assigned by the tracker.
        anchor: current 3D box estimate.
        memory: exponentially updated appearance embedding.
        descriptor: conditioning vector that scores keypoint features.
        confidence: last matched detection confidence.
        age: frames since the last successful match.
    """

    track_id: int
    anchor: ObjectState3D
    memory: Embedding
    descriptor: np.ndarray
    confidence: float = 1.0
    age: int = 0

    def __post_init__(self):
        self.descriptor = np.asarray(self.descriptor, dtype=float).reshape(-1)


def extract_view_feature(pyramid: FeaturePyramid, cam: CameraModel, keypoints: KeypointSet, query: Query):
    """Sample one camera's pyramid at a query's keypoints.

    Keypoints behind the camera are skipped.  Each surviving keypoint is
    bilinearly sampled at every level (pixel coordinates divided by the
    level stride, cell centers at integers) and averaged over levels; the
    keypoint vectors are then combined with softmax weights
    ``softmax(descriptor . g_k / sqrt(D))``.

    Returns:
        (vector, valid): a (C,) float vector and False when every keypoint
        was behind the camera (the vector is then all zeros).

    Raises:
        ChannelMismatch: if the pyramid channel count differs from the
            descriptor length.
    """
    dim = query.descriptor.shape[0]
    if pyramid.channels != dim:
        raise ChannelMismatch(f"pyramid has C={pyramid.channels} but descriptor has D={dim}")

    vectors = []
    for point in keypoints.points:
        try:
            u_px, v_px, _ = project_point(cam, point)
        except BehindCamera:
            continue
        level_vecs = [
            bilinear_sample(pyramid, m, pixel_to_cell(u_px, lvl.stride), pixel_to_cell(v_px, lvl.stride))
            for m, lvl in enumerate(pyramid.levels)
        ]
        vectors.append(np.mean(np.asarray(level_vecs, dtype=float), axis=0))

    if not vectors:
        return np.zeros(dim), False

    mat = np.asarray(vectors)  # (K, D)
    scores = mat @ query.descriptor / np.sqrt(dim)
    scores -= scores.max()  # stable softmax
    weights = np.exp(scores)
    weights /= weights.sum()
    return weights @ mat, True


def fuse_embedding_raw(per_view, visibilities) -> np.ndarray:
    """Visibility-weighted mean of per-camera features, before normalization.

    Args:
        per_view: list of (vector, valid) pairs from extract_view_feature.
        visibilities: list of VisibilityScore (or floats), index-aligned
            with per_view.  Invalid views contribute zero visibility.

    Raises:
        AllOccluded: when the summed visibility is at or below the floor;
            the caller should substitute the query's memory embedding.
    """
    if len(per_view) != len(visibilities):
        raise ValueError("per_view and visibilities must align")
    weights = []
    vectors = []
    for (vec, valid), vis in zip(per_view, visibilities):
        value = getattr(vis, "value", vis)
        weights.append(float(value) if valid else 0.0)
        vectors.append(np.asarray(vec, dtype=float))
    total = float(np.sum(weights))
    if not total > VISIBILITY_FLOOR:
        raise AllOccluded(total)
    acc = np.zeros_like(vectors[0])
    for w, vec in zip(weights, vectors):
        acc += w * vec
    return acc / total


def fuse_embedding(per_view, visibilities) -> Embedding:
    """Unit-norm occlusion-aware fusion of per-camera features."""
    return Embedding.normalize(fuse_embedding_raw(per_view, visibilities))


def fuse_or_memory(per_view, visibilities, memory: Embedding) -> Embedding:
    """Fusion with the documented fallback: keep ``memory`` when all views are occluded."""
    try:
        return fuse_embedding(per_view, visibilities)
    except AllOccluded:
        return memory
