"""Command-line surface: ``dq <subcommand>``.

Exit codes: 0 success, 1 validation failure, 2 parse/IO failure.
Set ``DQ_LOG`` (DEBUG/INFO/WARNING/...) to control verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import report as rpt
from .dataset import load_manifest, load_points, load_rig, save_points, write_manifest
from .errors import DqError, FormatError, MissingImage, ParseError, ValidationError
from .geometry import find_overlap_pairs
from .multimodal import (Detection3D, DetectionSet, load_detection_sets,
                         prune_manifest_by_distance, redundancy_ratio)
from .multisource import export_crops, sweep_bcs
from .synth import SynthSpec, generate_synthetic, nuscenes_like_rig, write_dataset

log = logging.getLogger("dqav")


def parse_sweep(text: str) -> list[float]:
    """Parse ``lo:hi:step`` into an ascending, inclusive grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"sweep must be lo:hi:step, got {text!r}")
    lo, hi, step = (float(p) for p in parts)
    if step <= 0.0 or hi < lo:
        raise ValueError(f"sweep needs step > 0 and hi >= lo, got {text!r}")
    n = int(round((hi - lo) / step))
    values = [round(lo + i * step, 9) for i in range(n + 1)]
    return [v for v in values if v <= hi + 1e-9]


def _parse_range(text: str, kind=float) -> tuple:
    lo, _, hi = text.partition(":")
    return (kind(lo), kind(hi))


def _load_detections(args, dataset_dir: Path | None):
    base_path = args.base
    lidar_path = args.lidar
    if dataset_dir is not None:
        if base_path is None and (dataset_dir / "detections_base.json").is_file():
            base_path = dataset_dir / "detections_base.json"
        if lidar_path is None and (dataset_dir / "detections_lidar.json").is_file():
            lidar_path = dataset_dir / "detections_lidar.json"
    if base_path is None or lidar_path is None:
        raise ValidationError(["need --base and --lidar detection files (or a "
                               "dataset directory that contains "
                               "detections_base.json / detections_lidar.json)"])
    return load_detection_sets(base_path), load_detection_sets(lidar_path)


# ---------------------------------------------------------------------------
# subcommands

def cmd_pairs(args) -> int:
    rig = load_rig(args.rig)
    pairs = find_overlap_pairs(rig)
    print("cam_a,cam_b,overlap_start_deg,overlap_end_deg,overlap_width_deg,"
          "crop_a_lo,crop_a_hi,crop_b_lo,crop_b_hi")
    for p in pairs:
        print(f"{p.cam_a},{p.cam_b},{p.overlap.start_deg!r},{p.overlap.end_deg!r},"
              f"{p.overlap.width_deg!r},{p.crop_a[0]!r},{p.crop_a[1]!r},"
              f"{p.crop_b[0]!r},{p.crop_b[1]!r}")
    return 0


def cmd_synth(args) -> int:
    rig = nuscenes_like_rig() if args.rig is None else load_rig(args.rig)
    spec = SynthSpec(seed=args.seed, frames=args.frames,
                     objects_per_frame=_parse_range(args.objects, int),
                     distance_range=_parse_range(args.distance),
                     shared_prob=args.shared_prob, rig=rig,
                     lidar_match_prob=args.lidar_match_prob,
                     render_images=args.images)
    out = write_dataset(generate_synthetic(spec), args.out)
    print(f"wrote synthetic dataset ({spec.frames} frames) to {out}")
    return 0


def cmd_similarity(args) -> int:
    manifest = load_manifest(args.dataset)
    pairs = find_overlap_pairs(manifest.rig)
    if args.pair is not None:
        want = tuple(sorted(args.pair.split(":")))
        pairs = [p for p in pairs if (p.cam_a, p.cam_b) == want]
        if not pairs:
            raise ValidationError([f"no overlap pair {args.pair!r} in this rig"])
    rows = rpt.similarity_rows(manifest, tau=args.tau, pairs=pairs, jobs=args.jobs)
    rpt.write_similarity_csv(rows, args.out)
    if args.dump_crops is not None:
        for frame in manifest.frames:
            for pair in pairs:
                try:
                    export_crops(frame, pair, manifest.rig, args.dump_crops)
                except MissingImage:
                    pass
        print(f"dumped crops to {args.dump_crops}")
    print(f"wrote {len(rows)} similarity rows (tau={args.tau}) to {args.out}")
    return 0


def cmd_prune_bcs(args) -> int:
    manifest = load_manifest(args.dataset)
    if args.sweep is not None:
        taus = parse_sweep(args.sweep)
    elif args.tau is not None:
        taus = [args.tau]
    else:
        raise ValidationError(["prune-bcs needs --tau or --sweep"])
    out_dir = Path(args.out)
    entries = sweep_bcs(manifest, taus)
    rows = []
    for entry in entries:
        variant_dir = out_dir / f"tau_{entry.tau:g}" if len(entries) > 1 else out_dir
        write_manifest(entry.manifest, variant_dir)
        per_cam = ";".join(f"{k}={v}" for k, v in
                           sorted(entry.per_camera_kept.items()))
        rows.append([f"{entry.tau:g}", entry.kept_annotations,
                     entry.removed_annotations, per_cam])
    if len(entries) > 1:
        rpt.write_csv(out_dir / "retention.csv",
                      ["tau", "kept", "removed", "per_camera_kept"], rows)
    for row in rows:
        print(f"tau={row[0]}: kept {row[1]}, removed {row[2]}")
    return 0


def cmd_mm_redundancy(args) -> int:
    dataset_dir = Path(args.dataset) if args.dataset else None
    base_sets, lidar_sets = _load_detections(args, dataset_dir)
    lidar_by_frame = {s.frame_id: s for s in lidar_sets}
    rows = []
    for base in base_sets:
        lidar = lidar_by_frame.get(base.frame_id)
        if lidar is None:
            raise ValidationError([f"no lidar detections for frame {base.frame_id}"])
        result = redundancy_ratio(base, lidar, args.theta, bev=args.bev)
        rows.append([base.frame_id, rpt.fmt_ratio(result.rr), len(result.matched),
                     len(base.boxes), len(lidar.boxes)])
    rpt.write_csv(args.out, ["frame_id", "rr", "matched", "base_boxes",
                             "lidar_boxes"], rows)
    print(f"wrote {len(rows)} redundancy rows (theta={args.theta}) to {args.out}")
    return 0


def cmd_prune_distance(args) -> int:
    manifest = load_manifest(args.dataset)
    if args.sweep is not None:
        t_values = parse_sweep(args.sweep)
        try:
            base_sets, lidar_sets = _load_detections(args, Path(args.dataset))
        except ValidationError:
            # fall back to the dataset's own 3D annotations as both sets
            base_sets, lidar_sets = _annotation_sets(manifest)
        points = {}
        for frame in manifest.frames:
            view = frame.lidar_view
            if view.points_ref is not None and view.points_path is not None \
                    and view.points_path.is_file():
                points[frame.frame_id] = load_points(view)
        rows = rpt.aggregate_distance_sweep(base_sets, lidar_sets, t_values,
                                            args.theta, points)
        rpt.write_distance_sweep_csv(rows, args.out)
        print(f"wrote {len(rows)} sweep rows to {args.out}")
        return 0
    if args.t_dist is None:
        raise ValidationError(["prune-distance needs --t-dist or --sweep"])
    pruned, clouds = prune_manifest_by_distance(manifest, args.t_dist)
    out_dir = Path(args.out)
    write_manifest(pruned, out_dir)
    for frame in pruned.frames:
        ref = frame.lidar_view.points_ref
        if ref is not None and frame.frame_id in clouds:
            save_points(clouds[frame.frame_id], out_dir / ref)
    removed = pruned.meta.get("dist_boxes_removed", "0")
    print(f"wrote pruned dataset (t_dist={args.t_dist}, {removed} boxes "
          f"removed) to {out_dir}")
    return 0


def _annotation_sets(manifest):
    base, lidar = [], []
    for frame in manifest.frames:
        dets = tuple(Detection3D(box=a.box, score=1.0, category=a.category)
                     for a in frame.lidar_view.annotations)
        base.append(DetectionSet(frame.frame_id, "base", dets))
        lidar.append(DetectionSet(frame.frame_id, "lidar_only", dets))
    return base, lidar


def cmd_ttest(args) -> int:
    dataset_dir = Path(args.dataset) if args.dataset else None
    base_sets, lidar_sets = _load_detections(args, dataset_dir)
    split = args.split
    if split not in ("matched", "median"):
        split = float(split)
    section = rpt.ttest_section(base_sets, lidar_sets, args.theta, split)
    rpt.write_json(section, args.out)
    if section["error"] is not None:
        print(f"t-test not computable: {section['error']}", file=sys.stderr)
        return 1
    print(f"t={section['t_stat']:.6g} dof={section['dof']:.6g} "
          f"p={section['p_value']:.6g} (mode={section['mode']}) -> {args.out}")
    return 0


def cmd_report(args) -> int:
    manifest = load_manifest(args.dataset)
    try:
        base_sets, lidar_sets = _load_detections(args, Path(args.dataset))
    except ValidationError:
        base_sets, lidar_sets = (), ()
    taus = parse_sweep(args.sweep) if args.sweep else [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    t_grid = parse_sweep(args.t_grid) if args.t_grid else [0.0, 5.0, 10.0, 20.0, 40.0]
    split = args.split
    if split not in ("matched", "median"):
        split = float(split)
    obj = rpt.build_report(manifest, base_sets, lidar_sets, taus=taus,
                           t_grid=t_grid, theta=args.theta, split=split,
                           similarity_tau=args.tau, jobs=args.jobs)
    rpt.write_json(obj, args.out)
    print(f"wrote report for {obj['frames']} frames to {args.out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dq",
        description="Redundancy evaluation and pruning for multi-sensor "
                    "driving datasets.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pairs", help="list overlapping camera pairs of a rig")
    p.add_argument("--rig", required=True, help="manifest.json or dataset dir")
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--objects", default="2:6", help="objects per frame lo:hi")
    p.add_argument("--distance", default="8:60", help="distance range lo:hi (m)")
    p.add_argument("--shared-prob", type=float, default=0.5)
    p.add_argument("--lidar-match-prob", type=float, default=0.7)
    p.add_argument("--images", action="store_true", help="render camera images")
    p.add_argument("--rig", default=None, help="rig manifest (default: built-in)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("similarity", help="overlap-crop cosine similarity CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pair", default=None, help="restrict to CAM_A:CAM_B")
    p.add_argument("--tau", type=float, default=0.5,
                   help="threshold for the removed@tau column")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--dump-crops", default=None, metavar="DIR",
                   help="also export the overlap crops as PNGs")
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("prune-bcs", help="completeness-guided annotation pruning")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--sweep", default=None, help="lo:hi:step threshold grid")
    p.set_defaults(func=cmd_prune_bcs)

    p = sub.add_parser("mm-redundancy", help="camera-lidar redundancy ratio CSV")
    p.add_argument("--dataset", default=None)
    p.add_argument("--base", default=None, help="baseline detection JSON")
    p.add_argument("--lidar", default=None, help="lidar-only detection JSON")
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--bev", action="store_true", help="footprint-only IoU")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mm_redundancy)

    p = sub.add_parser("prune-distance", help="centroid-distance pruning")
    p.add_argument("--dataset", required=True)
    p.add_argument("--t-dist", type=float, default=None)
    p.add_argument("--sweep", default=None, help="lo:hi:step distance grid")
    p.add_argument("--base", default=None)
    p.add_argument("--lidar", default=None)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prune_distance)

    p = sub.add_parser("ttest", help="distance vs redundancy Welch t-test")
    p.add_argument("--dataset", default=None)
    p.add_argument("--base", default=None)
    p.add_argument("--lidar", default=None)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--split", default="matched",
                   help="'matched' (per box), 'median' or an rr threshold")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ttest)

    p = sub.add_parser("report", help="bundle every measurement into one JSON")
    p.add_argument("--dataset", required=True)
    p.add_argument("--base", default=None)
    p.add_argument("--lidar", default=None)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--tau", type=float, default=0.5,
                   help="similarity-table pruning threshold")
    p.add_argument("--sweep", default=None, help="completeness threshold grid")
    p.add_argument("--t-grid", default=None, help="distance threshold grid")
    p.add_argument("--split", default="matched")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=getattr(logging, os.environ.get("DQ_LOG", "WARNING").upper(),
                      logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DqError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
