"""Independent brute-force implementations used to validate the package.

Everything in this file is deliberately naive: plain Python loops, float64
(or float32 where bit-level agreement is the point), no reuse of the
package's kernels.  Slow is fine; wrong is not.
"""

import itertools
import math

import numpy as np


# ---------------------------------------------------------------------------
# sampling / aggregation


def bilinear_f64(values: np.ndarray, u: float, v: float) -> np.ndarray:
    """Zero-padded bilinear interpolation in float64, cell centers at ints."""
    height, width, channels = values.shape
    x0 = math.floor(u)
    y0 = math.floor(v)
    fu = u - x0
    fv = v - y0
    out = np.zeros(channels, dtype=np.float64)
    for yi, wy in ((y0, 1.0 - fv), (y0 + 1, fv)):
        for xi, wx in ((x0, 1.0 - fu), (x0 + 1, fu)):
            if 0 <= xi < width and 0 <= yi < height:
                out += wx * wy * values[yi, xi].astype(np.float64)
    return out


def msda_f64(grids: dict, samples_per_query: list, normalize: bool = True) -> np.ndarray:
    """Straight-loop float64 aggregation.

    grids: {(camera_id, level): float array (H, W, C)}
    samples_per_query: per query, a list of (camera_id, level, u, v, weight).
    """
    channels = next(iter(grids.values())).shape[2]
    out = np.zeros((len(samples_per_query), channels), dtype=np.float64)
    for q, samples in enumerate(samples_per_query):
        if not samples:
            continue
        wsum = sum(float(w) for _, _, _, _, w in samples) if normalize else 1.0
        acc = np.zeros(channels, dtype=np.float64)
        for cam, lvl, u, v, w in samples:
            acc += (float(w) / wsum) * bilinear_f64(grids[(cam, lvl)], float(u), float(v))
        out[q] = acc
    return out


def bilinear_f32(values: np.ndarray, u, v) -> np.ndarray:
    """Float32 bilinear with the fixed expression tree
    (c00*w00 + c10*w10) + (c01*w01 + c11*w11), zero-padded."""
    height, width, channels = values.shape
    uu = np.float32(u)
    vv = np.float32(v)
    x0f = np.floor(uu)
    y0f = np.floor(vv)
    fu = uu - x0f
    fv = vv - y0f
    omu = np.float32(1.0) - fu
    omv = np.float32(1.0) - fv
    x0, y0 = int(x0f), int(y0f)
    zero = np.zeros(channels, dtype=np.float32)

    def cell(yi, xi):
        if 0 <= xi < width and 0 <= yi < height:
            return values[yi, xi]
        return zero

    return (cell(y0, x0) * (omu * omv) + cell(y0, x0 + 1) * (fu * omv)) + (
        cell(y0 + 1, x0) * (omu * fv) + cell(y0 + 1, x0 + 1) * (fu * fv)
    )


def msda_f32_canonical(grids: dict, samples_per_query: list, normalize: bool = True) -> np.ndarray:
    """Pure-Python float32 aggregation in canonical per-query order.

    Samples are visited sorted by (camera, level, v, u, weight); the weight
    sum, the renormalization and the accumulation are all float32, which is
    the exact contract the package kernels promise bit-for-bit.
    """
    channels = next(iter(grids.values())).shape[2]
    out = np.zeros((len(samples_per_query), channels), dtype=np.float32)
    for q, samples in enumerate(samples_per_query):
        if not samples:
            continue
        ordered = sorted(
            samples,
            key=lambda s: (s[0], s[1], np.float32(s[3]), np.float32(s[2]), np.float32(s[4])),
        )
        if normalize:
            wsum = np.float32(0.0)
            for _, _, _, _, w in ordered:
                wsum = wsum + np.float32(w)
        acc = np.zeros(channels, dtype=np.float32)
        for cam, lvl, u, v, w in ordered:
            vec = bilinear_f32(grids[(cam, lvl)], u, v)
            wt = np.float32(w) / wsum if normalize else np.float32(w)
            acc += wt * vec
        out[q] = acc
    return out


# ---------------------------------------------------------------------------
# projection / visibility


def project_f64(K, R, t, point):
    """Pinhole projection from scratch: p_cam = R p + t, u = fx x/z + cx."""
    fx, fy, cx, cy = K
    p = np.asarray(R, dtype=float) @ np.asarray(point, dtype=float) + np.asarray(t, dtype=float)
    if p[2] <= 1e-6:
        return None
    return (fx * p[0] / p[2] + cx, fy * p[1] / p[2] + cy, p[2])


def corners_f64(x, y, z, w, l, h, yaw):
    """All 8 corners, index bits: 0 -> +l/2, 1 -> +w/2, 2 -> +h/2."""
    ca, sa = math.cos(yaw), math.sin(yaw)
    out = []
    for bits in range(8):
        sl = 1.0 if bits & 1 else -1.0
        sw = 1.0 if bits & 2 else -1.0
        sh = 1.0 if bits & 4 else -1.0
        lx, ly, lz = sl * l / 2.0, sw * w / 2.0, sh * h / 2.0
        out.append((x + ca * lx - sa * ly, y + sa * lx + ca * ly, z + lz))
    return np.array(out)


def rect_f64(K, R, t, state):
    """Projected-corner bounding rect + mean depth; None if fully behind."""
    us, vs, ds = [], [], []
    for corner in corners_f64(state.x, state.y, state.z, state.w, state.l, state.h, state.yaw):
        proj = project_f64(K, R, t, corner)
        if proj is None:
            continue
        us.append(proj[0])
        vs.append(proj[1])
        ds.append(proj[2])
    if not us:
        return None
    return (min(us), max(us), min(vs), max(vs), float(np.mean(ds)))


def visible_fraction_dense(K, R, t, width, height, target, blockers, resolution=1024):
    """Dense rasterization of the visibility ratio at ``resolution``^2 samples."""
    rect = rect_f64(K, R, t, target)
    if rect is None:
        return 0.0
    u_min, u_max, v_min, v_max, depth = rect
    brs = []
    for blocker in blockers:
        if blocker is target:
            continue
        br = rect_f64(K, R, t, blocker)
        if br is not None and br[4] < depth:
            brs.append(br)
    steps = (np.arange(resolution) + 0.5) / resolution
    uu = u_min + steps * (u_max - u_min)
    vv = v_min + steps * (v_max - v_min)
    ug, vg = np.meshgrid(uu, vv)
    ok = (ug >= 0.0) & (ug < width) & (vg >= 0.0) & (vg < height)
    for bu0, bu1, bv0, bv1, _ in brs:
        ok &= ~((ug >= bu0) & (ug <= bu1) & (vg >= bv0) & (vg <= bv1))
    return float(np.count_nonzero(ok)) / float(resolution * resolution)


# ---------------------------------------------------------------------------
# retrieval


def reid_rank_f64(gallery, probes):
    """Exhaustive ranking: per probe, distances to every gallery item with a
    stable sort, first-hit rank, precision-at-hit AP.  Returns (cmc, mAP,
    match_distances, mismatch_distances)."""
    g_mat = np.stack([np.asarray(e, dtype=float) for e, _ in gallery])
    g_ids = [i for _, i in gallery]
    cmc_hits = np.zeros(len(gallery), dtype=float)
    aps = []
    match_d, mismatch_d = [], []
    for p_vec, p_id in probes:
        p = np.asarray(p_vec, dtype=float)
        dists = np.sqrt(np.sum((g_mat - p) ** 2, axis=1)).tolist()
        order = sorted(range(len(dists)), key=lambda k: (dists[k], k))
        hits = [g_ids[k] == p_id for k in order]
        first = hits.index(True)
        cmc_hits[first:] += 1.0
        precisions = []
        seen = 0
        for rank, hit in enumerate(hits, start=1):
            if hit:
                seen += 1
                precisions.append(seen / rank)
        aps.append(float(np.mean(precisions)))
        for dist, gid in zip(dists, g_ids):
            (match_d if gid == p_id else mismatch_d).append(dist)
    cmc = cmc_hits / len(probes)
    return cmc, float(np.mean(aps)), np.array(match_d), np.array(mismatch_d)


# ---------------------------------------------------------------------------
# assignment


def assignment_brute(cost: np.ndarray, admissible: np.ndarray):
    """All injective mappings: maximize match count, then minimize cost.

    Returns (best_pairs, best_cost).  Feasible only for small matrices.
    """
    n_rows, n_cols = cost.shape
    best_pairs, best_count, best_cost = [], -1, math.inf
    rows = list(range(n_rows))
    for r_subset_size in range(min(n_rows, n_cols), -1, -1):
        if r_subset_size < best_count:
            break
        for r_subset in itertools.combinations(rows, r_subset_size):
            for c_perm in itertools.permutations(range(n_cols), r_subset_size):
                if not all(admissible[r, c] for r, c in zip(r_subset, c_perm)):
                    continue
                total = sum(float(cost[r, c]) for r, c in zip(r_subset, c_perm))
                if r_subset_size > best_count or (r_subset_size == best_count and total < best_cost - 1e-12):
                    best_pairs = list(zip(r_subset, c_perm))
                    best_count = r_subset_size
                    best_cost = total
    return best_pairs, best_cost


def _matchings(pairs):
    """Yield every matching (set of pairwise-disjoint pairs), including {}."""
    if not pairs:
        yield []
        return
    head, rest = pairs[0], pairs[1:]
    for m in _matchings(rest):
        yield m
    compatible = [p for p in rest if p[0] != head[0] and p[1] != head[1]]
    for m in _matchings(compatible):
        yield [head] + m


def hota_brute(gt_frames, pred_frames, similarity, alphas):
    """Exhaustive HOTA: per frame and alpha, enumerate every matching of
    admissible pairs and keep the one with the largest total similarity.

    gt_frames / pred_frames: per frame, list of (id, payload); ``similarity``
    maps (payload_a, payload_b) to [0, 1].  Assumes no exact similarity ties
    between distinct maximal matchings (random continuous inputs).
    """
    sims = []
    for g_frame, p_frame in zip(gt_frames, pred_frames):
        sim = np.zeros((len(g_frame), len(p_frame)))
        for i, (_, ga) in enumerate(g_frame):
            for j, (_, pb) in enumerate(p_frame):
                sim[i, j] = similarity(ga, pb)
        sims.append(sim)

    gt_count, pred_count = {}, {}
    for frame in gt_frames:
        for gid, _ in frame:
            gt_count[gid] = gt_count.get(gid, 0) + 1
    for frame in pred_frames:
        for pid, _ in frame:
            pred_count[pid] = pred_count.get(pid, 0) + 1
    total_gt = sum(gt_count.values())
    total_pred = sum(pred_count.values())

    per_alpha = []
    loc_num, loc_den = 0.0, 0
    for alpha in alphas:
        tp = 0
        loc_sum = 0.0
        pair_m = {}
        for sim, g_frame, p_frame in zip(sims, gt_frames, pred_frames):
            admissible = [
                (i, j)
                for i in range(sim.shape[0])
                for j in range(sim.shape[1])
                if sim[i, j] >= alpha - 1e-9
            ]
            best, best_total = [], -1.0
            for matching in _matchings(admissible):
                total = sum(sim[i, j] for i, j in matching)
                if total > best_total:
                    best, best_total = matching, total
            for i, j in best:
                gid, pid = g_frame[i][0], p_frame[j][0]
                pair_m[(gid, pid)] = pair_m.get((gid, pid), 0) + 1
                tp += 1
                loc_sum += float(sim[i, j])
        fn = total_gt - tp
        fp = total_pred - tp
        det_a = tp / (tp + fn + fp) if tp + fn + fp else 0.0
        if tp:
            ass_a = sum(m * (m / (gt_count[g] + pred_count[p] - m)) for (g, p), m in pair_m.items()) / tp
        else:
            ass_a = 0.0
        per_alpha.append(
            {"alpha": float(alpha), "det_a": det_a, "ass_a": ass_a, "hota": math.sqrt(det_a * ass_a), "tp": tp}
        )
        loc_num += loc_sum
        loc_den += tp
    return {
        "hota": float(np.mean([r["hota"] for r in per_alpha])),
        "det_a": float(np.mean([r["det_a"] for r in per_alpha])),
        "ass_a": float(np.mean([r["ass_a"] for r in per_alpha])),
        "loc_a": loc_num / loc_den if loc_den else 0.0,
        "per_alpha": per_alpha,
    }


# ---------------------------------------------------------------------------
# volumes


def box_contains(state, points: np.ndarray) -> np.ndarray:
    d = points - np.array([state.x, state.y, state.z])
    ca, sa = math.cos(state.yaw), math.sin(state.yaw)
    lx = ca * d[:, 0] + sa * d[:, 1]
    ly = -sa * d[:, 0] + ca * d[:, 1]
    return (
        (np.abs(lx) <= state.l / 2.0)
        & (np.abs(ly) <= state.w / 2.0)
        & (np.abs(d[:, 2]) <= state.h / 2.0)
    )


def iou3d_mc(a, b, n_points: int = 1_000_000, seed: int = 0) -> float:
    """Monte Carlo IoU over the union's axis-aligned bounding box."""
    rng = np.random.default_rng(seed)
    ca = corners_f64(a.x, a.y, a.z, a.w, a.l, a.h, a.yaw)
    cb = corners_f64(b.x, b.y, b.z, b.w, b.l, b.h, b.yaw)
    lo = np.minimum(ca.min(axis=0), cb.min(axis=0))
    hi = np.maximum(ca.max(axis=0), cb.max(axis=0))
    pts = rng.uniform(lo, hi, size=(n_points, 3))
    in_a = box_contains(a, pts)
    in_b = box_contains(b, pts)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return float(np.count_nonzero(in_a & in_b)) / float(union)
