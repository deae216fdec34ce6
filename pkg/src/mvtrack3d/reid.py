"""Embedding retrieval evaluation: CMC, mAP and distance histograms.

Protocol: every probe is ranked against the full gallery by L2 distance
(stable sort, ties broken by gallery index; no self or same-source
exclusions).  CMC[r] is the fraction of probes whose nearest same-identity
gallery item appears within rank r+1; average precision uses the standard
precision-at-hit formulation.  Histograms of match (same identity) and
mismatch distances use fixed 0.05-wide bins over [0, 2], the attainable
range for unit-norm embeddings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .configio import validate_document
from .errors import DegenerateGallery, MissingIdentity
from .oae import Embedding

HIST_BIN_WIDTH = 0.05
HIST_RANGE = (0.0, 2.0)


@dataclass
class ReidReport:
    cmc: np.ndarray  # ranks 1..len(gallery)
    mean_ap: float
    match_hist: np.ndarray
    mismatch_hist: np.ndarray
    match_stats: dict
    mismatch_stats: dict

    @property
    def rank1(self) -> float:
        return float(self.cmc[0])

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "rank1": self.rank1,
            "map": self.mean_ap,
            "cmc": [float(x) for x in self.cmc],
            "hist_bin_width": HIST_BIN_WIDTH,
            "hist_range": list(HIST_RANGE),
            "match_hist": [int(x) for x in self.match_hist],
            "mismatch_hist": [int(x) for x in self.mismatch_hist],
            "match_stats": self.match_stats,
            "mismatch_stats": self.mismatch_stats,
        }


def _distance_stats(values: np.ndarray) -> dict:
    if values.size == 0:
        return {"count": 0, "min": None, "max": None, "mean": None}
    return {
        "count": int(values.size),
        "min": float(values.min()),
        "max": float(values.max()),
        "mean": float(values.mean()),
    }


def _histogram(values: np.ndarray) -> np.ndarray:
    n_bins = int(round((HIST_RANGE[1] - HIST_RANGE[0]) / HIST_BIN_WIDTH))
    clipped = np.clip(values, HIST_RANGE[0], np.nextafter(HIST_RANGE[1], 0.0))
    hist, _ = np.histogram(clipped, bins=n_bins, range=HIST_RANGE)
    return hist


def reid_evaluate(gallery, probes) -> ReidReport:
    """Score probe embeddings against a gallery.

    Args:
        gallery: list of (Embedding, identity) pairs.
        probes: list of (Embedding, identity) pairs; every probe identity
            must occur in the gallery.

    Raises:
        DegenerateGallery: fewer than two distinct gallery identities.
        MissingIdentity: a probe identity absent from the gallery.
    """
    gallery_ids = np.array([identity for _, identity in gallery])
    probe_ids = np.array([identity for _, identity in probes])
    if len(set(gallery_ids.tolist())) < 2:
        raise DegenerateGallery("gallery needs at least two distinct identities")
    missing = set(probe_ids.tolist()) - set(gallery_ids.tolist())
    if missing:
        raise MissingIdentity(f"probe identities missing from gallery: {sorted(missing)}")

    g_mat = np.stack([emb.values for emb, _ in gallery])
    p_mat = np.stack([emb.values for emb, _ in probes])
    if g_mat.shape[1] != p_mat.shape[1]:
        raise ValueError("gallery and probe embedding dimensions differ")

    # pairwise L2 distances, (num_probes, num_gallery)
    sq = np.sum(p_mat**2, axis=1)[:, None] + np.sum(g_mat**2, axis=1)[None, :] - 2.0 * (p_mat @ g_mat.T)
    dist = np.sqrt(np.maximum(sq, 0.0))

    n_gallery = len(gallery)
    first_hit = np.empty(len(probes), dtype=np.int64)
    ap = np.empty(len(probes))
    for i in range(len(probes)):
        order = np.argsort(dist[i], kind="stable")
        hits = gallery_ids[order] == probe_ids[i]
        hit_ranks = np.nonzero(hits)[0]
        first_hit[i] = hit_ranks[0]
        precision_at_hit = np.arange(1, hit_ranks.size + 1) / (hit_ranks + 1.0)
        ap[i] = precision_at_hit.mean()

    cmc = np.array([(first_hit <= r).mean() for r in range(n_gallery)])

    same = probe_ids[:, None] == gallery_ids[None, :]
    match_d = dist[same]
    mismatch_d = dist[~same]
    return ReidReport(
        cmc=cmc,
        mean_ap=float(ap.mean()),
        match_hist=_histogram(match_d),
        mismatch_hist=_histogram(mismatch_d),
        match_stats=_distance_stats(match_d),
        mismatch_stats=_distance_stats(mismatch_d),
    )


def load_reid_items(path):
    """Read a labeled embedding collection (see schema reid_items_v1)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    validate_document(doc, "reid_items_v1")
    return [(Embedding(np.array(item["embedding"], dtype=float)), int(item["identity"])) for item in doc["items"]]


def save_reid_items(path, items) -> None:
    doc = {
        "schema_version": 1,
        "items": [
            {"identity": int(identity), "embedding": [float(x) for x in emb.values]} for emb, identity in items
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
