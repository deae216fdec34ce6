"""Command-line entry points.

Every subcommand writes its artifacts into ``--out-dir`` plus a
``manifest.json`` describing the run: tool version, resolved
configuration, sha256 checksums of the inputs, the list of outputs and
wall-clock timings.  The manifest is the only output that is allowed to
differ between reruns (it contains timings); everything else is written
deterministically, byte for byte, regardless of ``--workers``.

Exit codes: 0 success, 1 user/configuration error (bad file, schema
violation, failed check), 2 unexpected internal error (traceback goes
to stderr).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
import traceback
from pathlib import Path

from . import __version__
from .bench import BenchWorkload, bench_msda, write_report
from .configio import load_json_config, validate_document
from .features import PrecisionMode
from .metrics import evaluate_hota
from .objectives import run_gradient_checks
from .reid import load_reid_items, reid_evaluate
from .simulator import (
    SceneConfig,
    detections_from_truth,
    read_detections_ndjson,
    simulate_pyramids,
    simulate_truth,
    truth_to_trajectories,
    write_detections_ndjson,
    write_pyramid_sequence,
    write_truth_ndjson,
)
from .tracker import TrackerParams, run_sequence
from .trajectories import TrajectorySet


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


class _Run:
    """Collects inputs, outputs and timings; writes manifest.json last."""

    def __init__(self, subcommand: str, args: argparse.Namespace):
        self.subcommand = subcommand
        self.out_dir = Path(getattr(args, "out_dir", "."))
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.workers = int(getattr(args, "workers", 1))
        self.seed_override = getattr(args, "seed_override", None)
        self.inputs: dict = {}
        self.outputs: list = []
        self.timings: dict = {}
        self.config: dict = {}
        self._t0 = time.perf_counter()

    def read_config(self, path) -> dict:
        doc = load_json_config(path)
        self.inputs[str(path)] = _sha256_file(path)
        return doc

    def note_input(self, path) -> None:
        self.inputs[str(path)] = _sha256_file(path)

    def out_path(self, name: str) -> Path:
        path = self.out_dir / name
        self.outputs.append(name)
        return path

    def out_file(self, explicit, default_name: str) -> Path:
        """Honor an explicit --out path, else fall back to out-dir/default."""
        if explicit is None:
            return self.out_path(default_name)
        path = Path(explicit)
        if path.parent != Path("."):
            path.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(str(path))
        return path

    def time_stage(self, name: str, fn):
        start = time.perf_counter()
        result = fn()
        self.timings[name] = time.perf_counter() - start
        return result

    def write_manifest(self) -> Path:
        self.timings["total"] = time.perf_counter() - self._t0
        manifest = {
            "tool": "mvtrack3d",
            "tool_version": __version__,
            "subcommand": self.subcommand,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
            "workers": self.workers,
            "seed_override": self.seed_override,
            "timings_s": {k: round(v, 6) for k, v in self.timings.items()},
        }
        path = self.out_dir / "manifest.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _scene_from_args(run: _Run, config_path) -> SceneConfig:
    doc = run.read_config(config_path)
    if run.seed_override is not None:
        doc = dict(doc)
        doc["seed"] = run.seed_override
    cfg = SceneConfig.from_dict(doc)
    run.config["scene"] = doc
    return cfg


def _tracker_from_doc(doc: dict | None) -> TrackerParams:
    if doc is None:
        return TrackerParams()
    doc = dict(doc)
    doc.setdefault("schema_version", 1)
    return TrackerParams.from_dict(doc)


def _simulate_artifacts(run: _Run, cfg: SceneConfig, emit_pyramids: bool) -> tuple:
    truth = run.time_stage("simulate", lambda: simulate_truth(cfg, workers=run.workers))
    dets = run.time_stage("detections", lambda: detections_from_truth(cfg, truth, workers=run.workers))
    write_truth_ndjson(run.out_path("truth.ndjson"), truth)
    truth_to_trajectories(truth).to_ndjson(run.out_path("gt.ndjson"))
    write_detections_ndjson(run.out_path("detections.ndjson"), dets)
    if emit_pyramids:
        pyramids = run.time_stage("pyramids", lambda: simulate_pyramids(cfg, truth, workers=run.workers))
        write_pyramid_sequence(run.out_path("pyramids.bin"), pyramids)
    return truth, dets


def _cmd_simulate(args) -> int:
    run = _Run("simulate", args)
    cfg = _scene_from_args(run, args.config)
    _simulate_artifacts(run, cfg, args.emit_pyramids)
    run.write_manifest()
    return 0


def _frames_with_times(detection_frames, frame_rate: float):
    return [(i / frame_rate, dets) for i, dets in enumerate(detection_frames)]


def _cmd_track(args) -> int:
    run = _Run("track", args)
    params = TrackerParams()
    if args.params is not None:
        params = TrackerParams.from_dict(run.read_config(args.params))
    run.config["tracker"] = params.to_dict()
    run.config["frame_rate"] = args.frame_rate
    run.note_input(args.detections)
    detection_frames = read_detections_ndjson(args.detections)
    tracks = run.time_stage(
        "track", lambda: run_sequence(_frames_with_times(detection_frames, args.frame_rate), params)
    )
    tracks.to_ndjson(run.out_file(args.out, "tracks.ndjson"))
    run.write_manifest()
    return 0


def _cmd_eval(args) -> int:
    run = _Run("eval", args)
    run.note_input(args.gt)
    run.note_input(args.pred)
    gt = TrajectorySet.from_ndjson(args.gt)
    pred = TrajectorySet.from_ndjson(args.pred, num_frames=gt.num_frames)
    report = run.time_stage("eval", lambda: evaluate_hota(gt, pred))
    json_path = run.out_file(args.out, "hota.json")
    report.write_json(json_path)
    if args.out is None:
        report.write_alpha_csv(run.out_path("hota.csv"))
    else:
        csv_path = Path(args.out).with_suffix(".csv")
        report.write_alpha_csv(csv_path)
        run.outputs.append(str(csv_path))
    run.write_manifest()
    print(f"HOTA {report.hota:.4f}  DetA {report.det_a:.4f}  AssA {report.ass_a:.4f}  LocA {report.loc_a:.4f}")
    return 0


def _labeled_from_detections(path) -> list:
    labeled = []
    for dets in read_detections_ndjson(path):
        for det in dets:
            if det.truth_identity is not None:
                labeled.append((det.embedding, int(det.truth_identity)))
    return labeled


def _cmd_reid_eval(args) -> int:
    run = _Run("reid-eval", args)
    if args.gallery is not None:
        run.note_input(args.gallery)
        gallery = load_reid_items(args.gallery)
    else:
        run.note_input(args.from_detections)
        gallery = _labeled_from_detections(args.from_detections)
    if args.probes is not None:
        run.note_input(args.probes)
        probes = load_reid_items(args.probes)
    else:
        probes = gallery
    report = run.time_stage("reid", lambda: reid_evaluate(gallery, probes))
    with open(run.out_file(args.out, "reid.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    run.write_manifest()
    print(f"rank-1 {report.rank1:.4f}  mAP {report.mean_ap:.4f}")
    return 0


def _cmd_bench_msda(args) -> int:
    run = _Run("bench-msda", args)
    doc = run.read_config(args.config) if args.config else {"schema_version": 1}
    if run.seed_override is not None:
        doc = dict(doc)
        doc["seed"] = run.seed_override
    workload = BenchWorkload.from_dict(doc)
    run.config["workload"] = workload.to_dict()
    mode = PrecisionMode.PACKED_HALF if args.mode == "half" else PrecisionMode.FULL
    report = run.time_stage("bench", lambda: bench_msda(workload, mode=mode, workers=run.workers))
    write_report(report, run.out_file(args.out, "bench.json"))
    run.write_manifest()
    if report.get("measured", False):
        print(
            f"reference {report['reference']['mean_s']:.4f}s  "
            f"optimized {report['optimized']['mean_s']:.4f}s  "
            f"speedup {report['speedup']:.2f}x"
        )
    return 0


def _cmd_losses_check(args) -> int:
    run = _Run("losses-check", args)
    seed = run.seed_override if run.seed_override is not None else 0
    run.config["seed"] = seed
    run.config["cases"] = args.cases
    report = run.time_stage("gradcheck", lambda: run_gradient_checks(seed=seed, cases=args.cases))
    with open(run.out_path("gradcheck.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    run.write_manifest()
    for name, worst in sorted(report["worst_relative_error"].items()):
        status = "ok" if worst <= report["tolerance"] else "FAILED"
        print(f"{name}: worst relative error {worst:.3g} [{status}]")
    if not report["passed"]:
        print("gradient checks failed", file=sys.stderr)
        return 1
    return 0


def _load_pipeline(run: _Run, config_path):
    doc = run.read_config(config_path)
    validate_document(doc, "pipeline_config_v1")
    scene_doc = dict(doc["scene"])
    if run.seed_override is not None:
        scene_doc["seed"] = run.seed_override
    cfg = SceneConfig.from_dict(scene_doc)
    params = _tracker_from_doc(doc.get("tracker"))
    run.config["scene"] = scene_doc
    run.config["tracker"] = params.to_dict()
    run.config["emit_pyramids"] = bool(doc.get("emit_pyramids", False))
    return cfg, params, bool(doc.get("emit_pyramids", False))


def _cmd_pipeline(args) -> int:
    run = _Run("pipeline", args)
    cfg, params, emit_pyramids = _load_pipeline(run, args.config)
    truth, dets = _simulate_artifacts(run, cfg, emit_pyramids)
    frames = [(cfg.frame_time(i), d) for i, d in enumerate(dets)]
    tracks = run.time_stage("track", lambda: run_sequence(frames, params))
    tracks.to_ndjson(run.out_path("tracks.ndjson"))
    gt = truth_to_trajectories(truth)
    pred = TrajectorySet(frames=tracks.frames + [[] for _ in range(gt.num_frames - tracks.num_frames)])
    report = run.time_stage("eval", lambda: evaluate_hota(gt, pred))
    report.write_json(run.out_path("hota.json"))
    report.write_alpha_csv(run.out_path("hota.csv"))
    run.write_manifest()
    print(f"HOTA {report.hota:.4f}  DetA {report.det_a:.4f}  AssA {report.ass_a:.4f}  LocA {report.loc_a:.4f}")
    return 0


def _cmd_ablate(args) -> int:
    run = _Run("ablate", args)
    cfg, params, _ = _load_pipeline(run, args.config)
    truth = run.time_stage("simulate", lambda: simulate_truth(cfg, workers=run.workers))
    dets = run.time_stage("detections", lambda: detections_from_truth(cfg, truth, workers=run.workers))
    gt = truth_to_trajectories(truth)
    frames = [(cfg.frame_time(i), d) for i, d in enumerate(dets)]

    results = {}
    from dataclasses import replace

    for label, variant in (("emb_on", params), ("emb_off", replace(params, alpha_emb=0.0))):
        tracks = run.time_stage(f"track_{label}", lambda v=variant: run_sequence(frames, v))
        tracks.to_ndjson(run.out_path(f"tracks_{label}.ndjson"))
        pred = TrajectorySet(frames=tracks.frames + [[] for _ in range(gt.num_frames - tracks.num_frames)])
        report = run.time_stage(f"eval_{label}", lambda g=gt, p=pred: evaluate_hota(g, p))
        results[label] = report
    summary = {
        "schema_version": 1,
        "emb_on": results["emb_on"].to_dict(),
        "emb_off": results["emb_off"].to_dict(),
        "assa_delta": results["emb_on"].ass_a - results["emb_off"].ass_a,
    }
    with open(run.out_path("ablation.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    run.write_manifest()
    print(
        f"AssA with embeddings {results['emb_on'].ass_a:.4f}, "
        f"without {results['emb_off'].ass_a:.4f}, "
        f"delta {summary['assa_delta']:+.4f}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvtrack3d",
        description="Synthetic multi-camera 3D tracking toolkit: simulation, "
        "feature aggregation benchmarks, tracking, and evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="subcommand")

    def common(p):
        p.add_argument("--out-dir", default=".", help="directory for output artifacts (default: .)")
        p.add_argument("--workers", type=int, default=1, help="worker threads; never changes results")
        p.add_argument("--seed-override", type=int, default=None, help="replace the seed from the config")

    p = sub.add_parser("simulate", help="generate truth, detections and optional feature pyramids")
    p.add_argument("--config", required=True, help="scene config JSON (schema scene_config_v1)")
    p.add_argument("--emit-pyramids", action="store_true", help="also write painted feature pyramids")
    common(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("track", help="run the tracker over a detections file")
    p.add_argument("--detections", required=True, help="detections NDJSON")
    p.add_argument("--params", default=None, help="tracker params JSON (schema tracker_params_v1)")
    p.add_argument("--frame-rate", type=float, default=10.0, help="frames per second (default 10)")
    p.add_argument("--out", default=None, help="tracks NDJSON path (default: <out-dir>/tracks.ndjson)")
    common(p)
    p.set_defaults(fn=_cmd_track)

    p = sub.add_parser("eval", help="score predicted tracks against ground truth")
    p.add_argument("--gt", required=True, help="ground-truth trajectories NDJSON")
    p.add_argument("--pred", required=True, help="predicted trajectories NDJSON")
    p.add_argument("--out", default=None, help="report JSON path (default: <out-dir>/hota.json)")
    common(p)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("reid-eval", help="rank embeddings and report CMC / mAP / distance stats")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--gallery", default=None, help="labeled embeddings JSON (schema reid_items_v1)")
    src.add_argument("--from-detections", default=None, help="detections NDJSON with truth identities")
    p.add_argument("--probes", default=None, help="probe embeddings JSON (default: the gallery itself)")
    p.add_argument("--out", default=None, help="report JSON path (default: <out-dir>/reid.json)")
    common(p)
    p.set_defaults(fn=_cmd_reid_eval)

    p = sub.add_parser("bench-msda", help="time the reference vs optimized aggregation paths")
    p.add_argument("--config", default=None, help="workload JSON (schema bench_workload_v1); defaults apply")
    p.add_argument("--mode", choices=("full", "half"), default="full", help="optimized-path precision")
    p.add_argument("--out", default=None, help="report JSON path (default: <out-dir>/bench.json)")
    common(p)
    p.set_defaults(fn=_cmd_bench_msda)

    p = sub.add_parser("losses-check", help="finite-difference validation of all loss gradients")
    p.add_argument("--cases", type=int, default=25, help="random instances per loss (default 25)")
    common(p)
    p.set_defaults(fn=_cmd_losses_check)

    p = sub.add_parser("pipeline", help="simulate, track and evaluate in one run")
    p.add_argument("--config", required=True, help="pipeline config JSON (schema pipeline_config_v1)")
    common(p)
    p.set_defaults(fn=_cmd_pipeline)

    p = sub.add_parser("ablate", help="pipeline twice: embedding-driven association on vs off")
    p.add_argument("--config", required=True, help="pipeline config JSON (schema pipeline_config_v1)")
    common(p)
    p.set_defaults(fn=_cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed usage/--help; fold its syntax errors into
        # the validation-error exit code
        return 0 if exc.code in (0, None) else 1
    if getattr(args, "fn", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
