"""3D IoU and HOTA-family tracking metrics.

``iou3d`` intersects yaw-rotated box footprints with Sutherland-Hodgman
polygon clipping and multiplies by the vertical interval overlap.

``evaluate_hota`` sweeps 19 similarity thresholds alpha in
{0.05, 0.10, ..., 0.95}.  Per alpha and per frame, ground truth and
predictions are matched by an optimal bipartite assignment that maximizes
total similarity with sub-threshold pairs inadmissible (ties therefore
prefer higher similarity).  From the matches:

    DetA  = TP / (TP + FN + FP)
    AssA  = mean over TPs of TPA / (TPA + FNA + FPA)
    HOTA  = sqrt(DetA * AssA), averaged over the alpha sweep
    LocA  = sum of TP similarities / TP count, pooled across alphas

For one TP of (gt i, pred j), TPA counts frames where i is matched to j,
FNA counts the remaining frames where i appears, and FPA the remaining
frames where j appears.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import FrameCountMismatch
from .geometry import ObjectState3D, box_corners
from .trajectories import TrajectorySet

ALPHAS = tuple(np.round(np.linspace(0.05, 0.95, 19), 2))
_ALPHA_EPS = 1e-9  # guards exact-similarity boundaries, e.g. identical boxes at alpha 0.95


def _footprint(state: ObjectState3D) -> np.ndarray:
    """BEV footprint corners, counter-clockwise."""
    corners = box_corners(state)
    # bits: 0 -> +l, 1 -> +w; choose the bottom face and CCW order
    order = [0b011, 0b010, 0b000, 0b001]  # (+,+), (-,+), (-,-), (+,-)
    return corners[order][:, :2]


def _clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clipping of ``subject`` by convex CCW ``clip``."""
    output = list(subject)
    n = len(clip)
    for i in range(n):
        a = clip[i]
        b = clip[(i + 1) % n]
        edge = b - a
        if not output:
            return np.zeros((0, 2))
        input_pts = output
        output = []
        prev = input_pts[-1]
        prev_inside = edge[0] * (prev[1] - a[1]) - edge[1] * (prev[0] - a[0]) >= 0.0
        for curr in input_pts:
            curr_inside = edge[0] * (curr[1] - a[1]) - edge[1] * (curr[0] - a[0]) >= 0.0
            if curr_inside:
                if not prev_inside:
                    output.append(_intersect(prev, curr, a, b))
                output.append(curr)
            elif prev_inside:
                output.append(_intersect(prev, curr, a, b))
            prev, prev_inside = curr, curr_inside
    return np.asarray(output) if output else np.zeros((0, 2))


def _intersect(p, q, a, b):
    """Intersection of segment pq with the infinite line ab."""
    d1 = q - p
    d2 = b - a
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < 1e-16:
        return q
    t = ((a[0] - p[0]) * d2[1] - (a[1] - p[1]) * d2[0]) / denom
    return p + t * d1


def _polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def iou3d(a: ObjectState3D, b: ObjectState3D) -> float:
    """Volumetric IoU of two yaw-rotated boxes."""
    inter_poly = _clip_polygon(_footprint(a), _footprint(b))
    inter_area = _polygon_area(inter_poly)
    z_lo = max(a.z - a.h / 2.0, b.z - b.h / 2.0)
    z_hi = min(a.z + a.h / 2.0, b.z + b.h / 2.0)
    inter_vol = inter_area * max(0.0, z_hi - z_lo)
    vol_a = a.w * a.l * a.h
    vol_b = b.w * b.l * b.h
    union = vol_a + vol_b - inter_vol
    if union <= 0.0:
        return 0.0
    return float(inter_vol / union)


@dataclass
class HotaReport:
    hota: float
    det_a: float
    ass_a: float
    loc_a: float
    per_alpha: list  # dicts with alpha, hota, det_a, ass_a, loc_a, tp, fn, fp

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "hota": self.hota,
            "det_a": self.det_a,
            "ass_a": self.ass_a,
            "loc_a": self.loc_a,
            "per_alpha": self.per_alpha,
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_alpha_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["alpha", "hota", "det_a", "ass_a", "loc_a", "tp", "fn", "fp"])
            for row in self.per_alpha:
                writer.writerow(
                    [row["alpha"], row["hota"], row["det_a"], row["ass_a"], row["loc_a"], row["tp"], row["fn"], row["fp"]]
                )


def _frame_similarities(gt_frame, pred_frame) -> np.ndarray:
    sim = np.zeros((len(gt_frame), len(pred_frame)))
    for i, (_, g_state, _) in enumerate(gt_frame):
        for j, (_, p_state, _) in enumerate(pred_frame):
            sim[i, j] = iou3d(g_state, p_state)
    return sim


def _match_frame(sim: np.ndarray, alpha: float):
    """Max-total-similarity matching with sub-alpha pairs inadmissible."""
    admissible = sim >= alpha - _ALPHA_EPS
    if not admissible.any():
        return []
    benefit = np.where(admissible, sim, 0.0)
    rows, cols = linear_sum_assignment(benefit, maximize=True)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if admissible[r, c]]


def evaluate_hota(gt: TrajectorySet, pred: TrajectorySet) -> HotaReport:
    """Score predicted trajectories against ground truth.

    Frames are aligned by index; the two sets must cover the same frame
    count (FrameCountMismatch otherwise).
    """
    if gt.num_frames != pred.num_frames:
        raise FrameCountMismatch(f"gt has {gt.num_frames} frames, pred has {pred.num_frames}")

    sims = [_frame_similarities(g, p) for g, p in zip(gt.frames, pred.frames)]
    gt_count: dict = {}
    pred_count: dict = {}
    for g_frame in gt.frames:
        for gid, _, _ in g_frame:
            gt_count[gid] = gt_count.get(gid, 0) + 1
    for p_frame in pred.frames:
        for pid, _, _ in p_frame:
            pred_count[pid] = pred_count.get(pid, 0) + 1
    total_gt = sum(gt_count.values())
    total_pred = sum(pred_count.values())

    per_alpha = []
    loc_sum_all = 0.0
    tp_all = 0
    for alpha in ALPHAS:
        pair_matches: dict = {}
        tp = 0
        loc_sum = 0.0
        for sim, g_frame, p_frame in zip(sims, gt.frames, pred.frames):
            for r, c in _match_frame(sim, alpha):
                gid = g_frame[r][0]
                pid = p_frame[c][0]
                pair_matches[(gid, pid)] = pair_matches.get((gid, pid), 0) + 1
                tp += 1
                loc_sum += float(sim[r, c])
        fn = total_gt - tp
        fp = total_pred - tp
        det_a = tp / (tp + fn + fp) if (tp + fn + fp) > 0 else 0.0
        if tp > 0:
            ass_sum = 0.0
            for (gid, pid), m in pair_matches.items():
                ass_sum += m * (m / (gt_count[gid] + pred_count[pid] - m))
            ass_a = ass_sum / tp
            loc_a = loc_sum / tp
        else:
            ass_a = 0.0
            loc_a = 0.0
        per_alpha.append(
            {
                "alpha": float(alpha),
                "hota": float(np.sqrt(det_a * ass_a)),
                "det_a": float(det_a),
                "ass_a": float(ass_a),
                "loc_a": float(loc_a),
                "tp": tp,
                "fn": fn,
                "fp": fp,
            }
        )
        loc_sum_all += loc_sum
        tp_all += tp

    return HotaReport(
        hota=float(np.mean([row["hota"] for row in per_alpha])),
        det_a=float(np.mean([row["det_a"] for row in per_alpha])),
        ass_a=float(np.mean([row["ass_a"] for row in per_alpha])),
        loc_a=float(loc_sum_all / tp_all) if tp_all > 0 else 0.0,
        per_alpha=per_alpha,
    )
