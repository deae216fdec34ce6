"""Velocity-predicted, embedding-gated multi-object tracker.

Each live track is a :class:`~mvtrack3d.oae.Query`.  Per frame the bank is
advanced by a constant-velocity prediction, detections are assigned by
optimal bipartite matching on a combined appearance + geometry cost

    cost = alpha_emb * |memory - embedding|_2
         + alpha_geo * |center_track - center_det|_2 / gate_radius

with pairs beyond ``gate_radius`` inadmissible (the assignment maximizes
match count first, then minimizes cost).  Matched queries adopt the
detection state, blend velocity 50/50 between the frame-difference estimate
and the detection's own velocity, and update their appearance memory by a
normalized exponential moving average.  Unmatched detections above
``birth_confidence`` found new tracks; queries unmatched for more than
``death_age`` frames are retired.  Track ids are never reused.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .configio import validate_document
from .errors import NonMonotonicTimestamps
from .geometry import ObjectState3D
from .oae import Embedding, Query
from .trajectories import TrajectorySet

_INADMISSIBLE = 1e9


@dataclass(frozen=True)
class TrackerParams:
    gate_radius: float = 2.0
    alpha_emb: float = 1.0
    alpha_geo: float = 1.0
    memory_momentum: float = 0.9
    birth_confidence: float = 0.3
    death_age: int = 5
    min_confidence: float = 0.0

    @classmethod
    def from_dict(cls, doc: dict) -> "TrackerParams":
        validate_document(doc, "tracker_params_v1")
        return cls(**{k: v for k, v in doc.items() if k != "schema_version"})

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "gate_radius": self.gate_radius,
            "alpha_emb": self.alpha_emb,
            "alpha_geo": self.alpha_geo,
            "memory_momentum": self.memory_momentum,
            "birth_confidence": self.birth_confidence,
            "death_age": self.death_age,
            "min_confidence": self.min_confidence,
        }


@dataclass(frozen=True)
class Detection:
    """One frame observation: box state, appearance, confidence, visibility."""

    state: ObjectState3D
    embedding: Embedding
    confidence: float
    per_camera_visibility: dict = field(default_factory=dict)
    truth_identity: int | None = None  # simulator label, for benchmarking only


@dataclass
class QueryBank:
    """Live tracks plus bookkeeping for id assignment and timing."""

    queries: list = field(default_factory=list)
    next_track_id: int = 0
    frame_time: float = 0.0
    last_dt: float = 0.0


@dataclass(frozen=True)
class Assignment:
    matches: tuple  # (track_id, detection_index) pairs
    unmatched_queries: tuple  # track ids
    unmatched_detections: tuple  # detection indices
    total_cost: float


def predict(bank: QueryBank, dt: float) -> QueryBank:
    """Advance all anchors by their velocity and age every query by one."""
    if dt < 0.0:
        raise ValueError("dt must be non-negative")
    queries = [replace(q, anchor=q.anchor.shifted(dt), age=q.age + 1) for q in bank.queries]
    return QueryBank(
        queries=queries,
        next_track_id=bank.next_track_id,
        frame_time=bank.frame_time + dt,
        last_dt=dt,
    )


def associate(bank: QueryBank, detections, params: TrackerParams) -> Assignment:
    """Optimal gated assignment between bank queries and detections.

    Queries are ordered by track_id and detections by index before solving,
    which makes tie-breaking deterministic.
    """
    queries = sorted(bank.queries, key=lambda q: q.track_id)
    n_q, n_d = len(queries), len(detections)
    if n_q == 0 or n_d == 0:
        return Assignment((), tuple(q.track_id for q in queries), tuple(range(n_d)), 0.0)

    q_centers = np.stack([q.anchor.center for q in queries])
    d_centers = np.stack([d.state.center for d in detections])
    geo = np.linalg.norm(q_centers[:, None, :] - d_centers[None, :, :], axis=2)
    q_emb = np.stack([q.memory.values for q in queries])
    d_emb = np.stack([d.embedding.values for d in detections])
    emb = np.linalg.norm(q_emb[:, None, :] - d_emb[None, :, :], axis=2)

    admissible = geo <= params.gate_radius
    gate = params.gate_radius if np.isfinite(params.gate_radius) else 1.0
    cost = params.alpha_emb * emb + params.alpha_geo * geo / gate
    solver_cost = np.where(admissible, cost, _INADMISSIBLE)

    rows, cols = linear_sum_assignment(solver_cost)
    matches = []
    matched_q = set()
    matched_d = set()
    total = 0.0
    for r, c in zip(rows, cols):
        if not admissible[r, c]:
            continue
        matches.append((queries[r].track_id, int(c)))
        matched_q.add(r)
        matched_d.add(int(c))
        total += float(cost[r, c])
    unmatched_q = tuple(queries[r].track_id for r in range(n_q) if r not in matched_q)
    unmatched_d = tuple(c for c in range(n_d) if c not in matched_d)
    return Assignment(tuple(matches), unmatched_q, unmatched_d, total)


def update(bank: QueryBank, assignment: Assignment, detections, params: TrackerParams) -> QueryBank:
    """Apply an assignment: refresh matches, spawn births, retire the stale."""
    dt = bank.last_dt
    det_for = dict(assignment.matches)

    queries = []
    for q in sorted(bank.queries, key=lambda q: q.track_id):
        if q.track_id in det_for:
            det = detections[det_for[q.track_id]]
            if dt > 0.0:
                prev_center = q.anchor.center - q.anchor.velocity * dt
                fd_vel = (det.state.center - prev_center) / dt
                vel = 0.5 * fd_vel + 0.5 * det.state.velocity
            else:
                vel = det.state.velocity
            new_state = replace(det.state, vx=float(vel[0]), vy=float(vel[1]), vz=float(vel[2]))
            m = params.memory_momentum
            blended = m * q.memory.values + (1.0 - m) * det.embedding.values
            memory = q.memory if m >= 1.0 else Embedding.normalize(blended)
            queries.append(replace(q, anchor=new_state, memory=memory, confidence=det.confidence, age=0))
        else:
            if q.age <= params.death_age:
                queries.append(q)

    next_id = bank.next_track_id
    for d_idx in assignment.unmatched_detections:
        det = detections[d_idx]
        if det.confidence >= params.birth_confidence:
            queries.append(
                Query(
                    track_id=next_id,
                    anchor=det.state,
                    memory=det.embedding,
                    descriptor=det.embedding.values.copy(),
                    confidence=det.confidence,
                    age=0,
                )
            )
            next_id += 1

    return QueryBank(queries=queries, next_track_id=next_id, frame_time=bank.frame_time, last_dt=dt)


def run_sequence(frames, params: TrackerParams = TrackerParams()) -> TrajectorySet:
    """Track through a sequence of ``(timestamp, detections)`` frames.

    Emits one record per query that was matched (or born) in the frame;
    coasting tracks are kept alive internally but not reported.  Timestamps
    must be strictly increasing.

    Returns a TrajectorySet aligned with the input frames.
    """
    times = [t for t, _ in frames]
    for a, b in zip(times, times[1:]):
        if b <= a:
            raise NonMonotonicTimestamps(f"timestamps must strictly increase, got {a} then {b}")

    bank = QueryBank()
    out_frames = []
    prev_time = None
    for time_s, detections in frames:
        detections = [d for d in detections if d.confidence >= params.min_confidence]
        dt = 0.0 if prev_time is None else time_s - prev_time
        bank = predict(bank, dt)
        assignment = associate(bank, detections, params)
        fresh_ids = {q.track_id for q in bank.queries}
        bank = update(bank, assignment, detections, params)
        refreshed = {tid for tid, _ in assignment.matches}
        born = {q.track_id for q in bank.queries if q.track_id not in fresh_ids}
        records = [
            (q.track_id, q.anchor, q.confidence)
            for q in bank.queries
            if q.track_id in refreshed or q.track_id in born
        ]
        out_frames.append(records)
        prev_time = time_s
    return TrajectorySet(out_frames)
