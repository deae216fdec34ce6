import csv
import json
import math

import numpy as np
import numpy.testing as npt
import pytest

from mvtrack3d.errors import FrameCountMismatch
from mvtrack3d.geometry import ObjectState3D
from mvtrack3d.metrics import ALPHAS, evaluate_hota, iou3d
from mvtrack3d.trajectories import TrajectorySet

import oracles


def box(x=0.0, y=0.0, z=0.0, w=1.0, l=1.0, h=1.0, yaw=0.0):
    return ObjectState3D(x=x, y=y, z=z, w=w, l=l, h=h, yaw=yaw)


def rand_box(rng, near=None, jitter=0.4):
    if near is None:
        center = rng.uniform(-5, 5, size=3)
    else:
        center = np.array([near.x, near.y, near.z]) + rng.normal(0, jitter, size=3)
    return ObjectState3D(
        x=center[0], y=center[1], z=center[2],
        w=rng.uniform(0.5, 2.0), l=rng.uniform(0.5, 2.0), h=rng.uniform(0.5, 2.0),
        yaw=rng.uniform(-math.pi, math.pi),
    )


# ---------------------------------------------------------------------------
# iou3d


def test_iou_identical_boxes():
    b = box(yaw=0.3)
    assert iou3d(b, b) == pytest.approx(1.0, abs=1e-12)


def test_iou_disjoint_boxes():
    assert iou3d(box(), box(x=5.0)) == 0.0
    assert iou3d(box(), box(z=5.0)) == 0.0  # vertically disjoint


def test_iou_half_shift_exact():
    # unit cubes offset by half a side: overlap 1/2, union 3/2
    assert iou3d(box(), box(x=0.5)) == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_iou_concentric_rotated_45():
    # octagonal BEV intersection of two concentric unit squares at 45 deg:
    # area 2*(sqrt(2)-1), union 2-area, ratio = 1/sqrt(2)
    value = iou3d(box(), box(yaw=math.pi / 4))
    assert value == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)
    mc = oracles.iou3d_mc(box(), box(yaw=math.pi / 4), n_points=1_000_000, seed=3)
    assert abs(value - mc) <= 1e-3


def test_iou_containment():
    inner = box(w=0.5, l=0.5, h=0.5)
    assert iou3d(inner, box()) == pytest.approx(0.125, abs=1e-12)


def test_iou_symmetric():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = rand_box(rng)
        b = rand_box(rng, near=a, jitter=1.0)
        assert abs(iou3d(a, b) - iou3d(b, a)) <= 1e-9


def test_iou_rigid_motion_invariant():
    rng = np.random.default_rng(1)
    for _ in range(30):
        a = rand_box(rng)
        b = rand_box(rng, near=a, jitter=0.8)
        base = iou3d(a, b)
        dx, dy, dz = rng.uniform(-10, 10, size=3)
        theta = rng.uniform(-math.pi, math.pi)
        c, s = math.cos(theta), math.sin(theta)

        def moved(st):
            x = c * st.x - s * st.y + dx
            y = s * st.x + c * st.y + dy
            return ObjectState3D(x=x, y=y, z=st.z + dz, w=st.w, l=st.l, h=st.h, yaw=st.yaw + theta)

        assert abs(iou3d(moved(a), moved(b)) - base) <= 1e-9


def test_iou_against_monte_carlo():
    rng = np.random.default_rng(2)
    for seed in range(5):
        a = rand_box(rng)
        b = rand_box(rng, near=a, jitter=0.6)
        exact = iou3d(a, b)
        mc = oracles.iou3d_mc(a, b, n_points=400_000, seed=seed)
        assert abs(exact - mc) <= 5e-3


# ---------------------------------------------------------------------------
# HOTA


def tset(frames):
    return TrajectorySet(frames=[[(tid, st, 1.0) for tid, st in f] for f in frames])


def test_hota_perfect_tracking():
    frames = [[(0, box(x=float(i))), (1, box(y=float(i)))] for i in range(10)]
    report = evaluate_hota(tset(frames), tset(frames))
    assert report.hota == pytest.approx(1.0, abs=1e-12)
    assert report.det_a == pytest.approx(1.0, abs=1e-12)
    assert report.ass_a == pytest.approx(1.0, abs=1e-12)
    assert report.loc_a == pytest.approx(1.0, abs=1e-12)


def test_hota_identity_switch_exact():
    # one GT track, prediction switches id at half time: DetA 1, AssA 1/2
    n = 10
    gt = [[(0, box(x=float(i)))] for i in range(2 * n)]
    pred = [[(100 if i < n else 200, box(x=float(i)))] for i in range(2 * n)]
    report = evaluate_hota(tset(gt), tset(pred))
    assert report.det_a == pytest.approx(1.0, abs=1e-9)
    assert report.ass_a == pytest.approx(0.5, abs=1e-9)
    assert report.hota == pytest.approx(math.sqrt(0.5), abs=1e-9)
    assert report.loc_a == pytest.approx(1.0, abs=1e-9)


def test_hota_empty_prediction():
    gt = [[(0, box())]] * 4
    report = evaluate_hota(tset(gt), TrajectorySet(frames=[[] for _ in range(4)]))
    assert report.hota == 0.0
    assert report.det_a == 0.0
    assert report.ass_a == 0.0


def test_hota_empty_both():
    report = evaluate_hota(TrajectorySet(frames=[[]]), TrajectorySet(frames=[[]]))
    assert report.hota == 0.0
    for row in report.per_alpha:
        assert row["tp"] == 0 and row["fn"] == 0 and row["fp"] == 0


def test_hota_swap_gt_pred_symmetric():
    rng = np.random.default_rng(3)
    gt, pred = [], []
    for i in range(4):
        g = [(j, rand_box(rng)) for j in range(int(rng.integers(0, 4)))]
        p = [(50 + j, rand_box(rng, near=g[j][1]) if j < len(g) else rand_box(rng)) for j in range(int(rng.integers(0, 4)))]
        gt.append(g)
        pred.append(p)
    fwd = evaluate_hota(tset(gt), tset(pred))
    rev = evaluate_hota(tset(pred), tset(gt))
    assert fwd.det_a == pytest.approx(rev.det_a, abs=1e-12)
    assert fwd.ass_a == pytest.approx(rev.ass_a, abs=1e-12)
    assert fwd.hota == pytest.approx(rev.hota, abs=1e-12)


def test_hota_per_alpha_consistency():
    rng = np.random.default_rng(4)
    gt = [[(j, rand_box(rng)) for j in range(3)] for _ in range(5)]
    pred = [[(j, rand_box(rng, near=f[j][1], jitter=0.3)) for j in range(3)] for f in gt]
    report = evaluate_hota(tset(gt), tset(pred))
    assert len(report.per_alpha) == len(ALPHAS) == 19
    tps = [row["tp"] for row in report.per_alpha]
    assert all(a >= b for a, b in zip(tps, tps[1:]))  # tp non-increasing in alpha
    for row in report.per_alpha:
        assert row["hota"] == pytest.approx(math.sqrt(row["det_a"] * row["ass_a"]), abs=1e-12)


def test_hota_matches_exhaustive_oracle():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n_frames = int(rng.integers(1, 4))
        gt_frames, pred_frames = [], []
        for _ in range(n_frames):
            n_gt = int(rng.integers(0, 4))
            n_pr = int(rng.integers(0, 4))
            g = [(i, rand_box(rng)) for i in range(n_gt)]
            p = []
            for j in range(n_pr):
                base = g[j][1] if j < len(g) and rng.uniform() < 0.7 else None
                p.append((100 + j, rand_box(rng, near=base)))
            gt_frames.append(g)
            pred_frames.append(p)
        report = evaluate_hota(tset(gt_frames), tset(pred_frames))
        expected = oracles.hota_brute(gt_frames, pred_frames, iou3d, ALPHAS)
        assert report.hota == pytest.approx(expected["hota"], abs=1e-9)
        assert report.det_a == pytest.approx(expected["det_a"], abs=1e-9)
        assert report.ass_a == pytest.approx(expected["ass_a"], abs=1e-9)
        assert report.loc_a == pytest.approx(expected["loc_a"], abs=1e-9)


def test_hota_frame_count_mismatch():
    with pytest.raises(FrameCountMismatch):
        evaluate_hota(TrajectorySet(frames=[[]]), TrajectorySet(frames=[[], []]))


def test_hota_report_files(tmp_path):
    frames = [[(0, box(x=float(i)))] for i in range(5)]
    report = evaluate_hota(tset(frames), tset(frames))
    json_path = tmp_path / "hota.json"
    csv_path = tmp_path / "hota.csv"
    report.write_json(json_path)
    report.write_alpha_csv(csv_path)
    doc = json.loads(json_path.read_text())
    assert doc["schema_version"] == 1
    assert doc["hota"] == pytest.approx(1.0)
    assert len(doc["per_alpha"]) == 19
    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 19
    assert float(rows[0]["alpha"]) == pytest.approx(0.05)
