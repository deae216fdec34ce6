"""Trajectory containers and their newline-delimited JSON serialization.

One NDJSON record per (frame, track) pair:

    {"frame": 3, "track_id": 1, "x": ..., "y": ..., "z": ..., "w": ...,
     "l": ..., "h": ..., "yaw": ..., "confidence": ...}

Records are written frame-major, track-id-minor, which makes serialization
deterministic for a given trajectory set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import ObjectState3D


@dataclass
class TrajectorySet:
    """Per-frame (track_id, state, confidence) records, frame index = list index."""

    frames: list

    def __post_init__(self):
        for i, frame in enumerate(self.frames):
            seen = set()
            for track_id, _, _ in frame:
                if track_id in seen:
                    raise ValueError(f"frame {i}: duplicate track_id {track_id}")
                seen.add(track_id)

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def track_ids(self) -> set:
        ids = set()
        for frame in self.frames:
            ids.update(track_id for track_id, _, _ in frame)
        return ids

    def to_ndjson(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for frame_idx, frame in enumerate(self.frames):
                for track_id, state, confidence in sorted(frame, key=lambda r: r[0]):
                    record = {
                        "frame": frame_idx,
                        "track_id": int(track_id),
                        "x": state.x,
                        "y": state.y,
                        "z": state.z,
                        "w": state.w,
                        "l": state.l,
                        "h": state.h,
                        "yaw": state.yaw,
                        "confidence": float(confidence),
                    }
                    fh.write(json.dumps(record) + "\n")

    @classmethod
    def from_ndjson(cls, path, num_frames: int | None = None) -> "TrajectorySet":
        """Load records; ``num_frames`` pads or bounds the frame list."""
        records = []
        max_frame = -1
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{line_no}: invalid JSON record: {exc.msg}") from exc
                records.append(rec)
                max_frame = max(max_frame, int(rec["frame"]))
        n = (max_frame + 1) if num_frames is None else int(num_frames)
        frames = [[] for _ in range(n)]
        for rec in records:
            frame_idx = int(rec["frame"])
            if frame_idx >= n:
                raise ValueError(f"record frame {frame_idx} outside expected range [0, {n})")
            state = ObjectState3D(
                x=rec["x"], y=rec["y"], z=rec["z"],
                w=rec["w"], l=rec["l"], h=rec["h"],
                yaw=rec["yaw"],
            )
            frames[frame_idx].append((int(rec["track_id"]), state, float(rec.get("confidence", 1.0))))
        return cls(frames)
