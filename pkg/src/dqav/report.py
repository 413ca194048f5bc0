"""Report assembly: per-frame tables, aggregates, DQ-dimension tagging
and plot-ready CSV/JSON export.

All writers are deterministic: sorted JSON keys, fixed row ordering and
fixed float formatting, so identical inputs produce byte-identical
files.
"""

from __future__ import annotations

import csv
import enum
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import DatasetManifest, load_points
from .errors import (DecodeError, DegeneratePartition, InsufficientData,
                     MissingImage, NotComparable, ZeroVariance)
from .geometry import OverlapPair, find_overlap_pairs
from .multimodal import (DetectionSet, _filter_detections,
                         distance_redundancy_groups, prune_points_by_distance,
                         redundancy_ratio)
from .multisource import apply_bcs_pruning, crop_similarity, find_redundant_groups, sweep_bcs
from .stats import TTestResult, welch_ttest


class DqDimension(enum.Enum):
    """Data-quality dimensions used to tag report sections."""

    COMPLETENESS = "completeness"
    CONSISTENCY = "consistency"
    CORRECTNESS = "correctness"
    NOISE_LEVEL = "noise_level"
    REDUNDANCY = "redundancy"
    RELEVANCE = "relevance"
    TIMELINESS = "timeliness"


@dataclass(frozen=True)
class DqDimensionTag:
    dimension: DqDimension
    note: str


@dataclass(frozen=True)
class SimilarityRow:
    frame_id: str
    pair: str  # "cam_a|cam_b"
    cosine: float | None
    has_redundant: bool | None
    groups: int
    removed_at_tau: int
    status: str  # ok | no_image | not_comparable | decode_error


def _pair_key(pair: OverlapPair) -> str:
    return f"{pair.cam_a}|{pair.cam_b}"


def similarity_rows(manifest: DatasetManifest, tau: float = 0.5,
                    pairs: Sequence[OverlapPair] | None = None,
                    jobs: int = 1) -> list[SimilarityRow]:
    """One row per (frame, overlap pair), sorted by (frame_id, pair).

    Rows where the crops cannot be compared (missing images, zero-norm
    crops) keep their group statistics and carry a status marker; the
    merge order is deterministic regardless of worker scheduling.
    """
    if pairs is None:
        pairs = find_overlap_pairs(manifest.rig)

    def one(args) -> SimilarityRow:
        frame, pair = args
        groups = find_redundant_groups(frame, pair, manifest.rig)
        removed = sum(len(d.removed) for d in apply_bcs_pruning(groups, tau))
        cosine = None
        has_redundant = None
        status = "ok"
        try:
            sim = crop_similarity(frame, pair, manifest.rig)
            cosine, has_redundant = sim.cosine, sim.has_redundant_instances
        except MissingImage:
            status = "no_image"
        except NotComparable:
            status = "not_comparable"
        except DecodeError:
            status = "decode_error"
        return SimilarityRow(frame_id=frame.frame_id, pair=_pair_key(pair),
                             cosine=cosine, has_redundant=has_redundant,
                             groups=len(groups), removed_at_tau=removed,
                             status=status)

    work = [(frame, pair) for frame in manifest.frames for pair in pairs]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, work))
    else:
        rows = [one(w) for w in work]
    return sorted(rows, key=lambda r: (r.frame_id, r.pair))


def similarity_aggregates(rows: Sequence[SimilarityRow]) -> dict[str, dict]:
    """Per-pair aggregates; samples without redundant instances are
    excluded from the mean cosine."""
    by_pair: dict[str, list[SimilarityRow]] = {}
    for row in rows:
        by_pair.setdefault(row.pair, []).append(row)
    out = {}
    for pair, pair_rows in sorted(by_pair.items()):
        with_red = [r.cosine for r in pair_rows
                    if r.has_redundant and r.cosine is not None]
        out[pair] = {
            "frames": len(pair_rows),
            "with_redundant_instances": len(with_red),
            "mean_cosine_redundant": (float(np.mean(with_red)) if with_red else None),
            "not_comparable": sum(r.status != "ok" for r in pair_rows),
        }
    return out


def aggregate_distance_sweep(base_sets: Sequence[DetectionSet],
                             lidar_sets: Sequence[DetectionSet],
                             t_values: Sequence[float], theta: float,
                             points_by_frame: dict[str, np.ndarray] | None = None,
                             ) -> list[dict]:
    """Dataset-level pruning trace: totals over frames at each threshold."""
    if list(t_values) != sorted(t_values):
        raise ValueError("t_values must be sorted ascending")
    lidar_by_frame = {s.frame_id: s for s in lidar_sets}
    rows = []
    for t in t_values:
        boxes_retained = 0
        boxes_total = 0
        base_total = 0
        base_lost = 0
        matched = 0
        points_retained = 0
        points_total = 0
        for base in base_sets:
            lidar = lidar_by_frame.get(base.frame_id,
                                       DetectionSet(base.frame_id, "lidar_only", ()))
            lidar_kept = _filter_detections(lidar, t)
            boxes_retained += len(lidar_kept.boxes)
            boxes_total += len(lidar.boxes)
            if base.boxes:
                base_kept = _filter_detections(base, t)
                base_total += len(base.boxes)
                base_lost += len(base.boxes) - len(base_kept.boxes)
                result = redundancy_ratio(base, lidar_kept, theta)
                matched += len(result.matched)
        if points_by_frame:
            for cloud in points_by_frame.values():
                points_total += len(cloud)
                points_retained += len(prune_points_by_distance(cloud, t))
        rows.append({
            "t_dist": float(t),
            "boxes_retained": boxes_retained,
            "boxes_pruned": boxes_total - boxes_retained,
            "points_retained": points_retained,
            "points_pruned": points_total - points_retained,
            "lost_ratio": (base_lost / base_total) if base_total else None,
            "rr": (matched / base_total) if base_total else None,
        })
    return rows


def rr_rows(manifest: DatasetManifest, base_sets: Sequence[DetectionSet],
            lidar_sets: Sequence[DetectionSet], theta: float,
            bev: bool = False) -> list[dict]:
    """Per-frame redundancy table covering every frame of the dataset."""
    base_by_frame = {s.frame_id: s for s in base_sets}
    lidar_by_frame = {s.frame_id: s for s in lidar_sets}
    rows = []
    for frame in manifest.frames:
        base = base_by_frame.get(frame.frame_id)
        lidar = lidar_by_frame.get(frame.frame_id)
        if base is None or lidar is None:
            rows.append({"frame_id": frame.frame_id, "rr": None, "matched": None,
                         "base_boxes": None, "lidar_boxes": None})
            continue
        result = redundancy_ratio(base, lidar, theta, bev=bev)
        rows.append({"frame_id": frame.frame_id, "rr": result.rr,
                     "matched": len(result.matched),
                     "base_boxes": len(base.boxes),
                     "lidar_boxes": len(lidar.boxes)})
    return rows


def ttest_section(base_sets: Sequence[DetectionSet],
                  lidar_sets: Sequence[DetectionSet], theta: float,
                  split: str | float = "matched") -> dict:
    """Distance-vs-redundancy t-test, labelled with the grouping mode."""
    lidar_by_frame = {s.frame_id: s for s in lidar_sets}
    results = [redundancy_ratio(base, lidar_by_frame[base.frame_id], theta)
               for base in base_sets if base.frame_id in lidar_by_frame]
    section: dict = {"mode": str(split)}
    try:
        high, low = distance_redundancy_groups(results, list(base_sets), split)
        result = welch_ttest(high, low)
        section.update({
            "t_stat": result.t_stat, "dof": result.dof, "p_value": result.p_value,
            "mean_high": result.mean_a, "mean_low": result.mean_b,
            "var_high": result.var_a, "var_low": result.var_b,
            "n_high": result.n_a, "n_low": result.n_b, "error": None,
        })
    except (DegeneratePartition, InsufficientData, ZeroVariance, ValueError) as exc:
        section.update({"t_stat": None, "dof": None, "p_value": None,
                        "error": f"{type(exc).__name__}: {exc}"})
    return section


def ttest_result_to_obj(result: TTestResult) -> dict:
    return {"t_stat": result.t_stat, "dof": result.dof, "p_value": result.p_value,
            "mean_a": result.mean_a, "mean_b": result.mean_b,
            "var_a": result.var_a, "var_b": result.var_b,
            "n_a": result.n_a, "n_b": result.n_b}


def build_report(manifest: DatasetManifest,
                 base_sets: Sequence[DetectionSet] = (),
                 lidar_sets: Sequence[DetectionSet] = (),
                 taus: Sequence[float] = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0),
                 t_grid: Sequence[float] = (0.0, 5.0, 10.0, 20.0, 40.0),
                 theta: float = 0.5,
                 split: str | float = "matched",
                 similarity_tau: float = 0.5,
                 jobs: int = 1,
                 load_point_files: bool = True) -> dict:
    """Assemble the full redundancy report as a JSON-ready dict."""
    dataset_id = manifest.meta.get("dataset_id") or manifest.meta.get("seed", "dataset")

    sim_rows = similarity_rows(manifest, tau=similarity_tau, jobs=jobs)
    sweep_entries = sweep_bcs(manifest, list(taus))
    bcs_rows = [{"tau": e.tau, "kept": e.kept_annotations,
                 "removed": e.removed_annotations,
                 "per_camera_kept": dict(sorted(e.per_camera_kept.items()))}
                for e in sweep_entries]

    points_by_frame = None
    if load_point_files:
        points_by_frame = {}
        for frame in manifest.frames:
            view = frame.lidar_view
            if view.points_ref is not None and view.points_path is not None \
                    and view.points_path.is_file():
                points_by_frame[frame.frame_id] = load_points(view)

    multimodal: dict = {"theta": theta}
    if base_sets and lidar_sets:
        multimodal["rr_rows"] = rr_rows(manifest, base_sets, lidar_sets, theta)
        multimodal["distance_sweep"] = aggregate_distance_sweep(
            base_sets, lidar_sets, list(t_grid), theta, points_by_frame)
        multimodal["ttest"] = ttest_section(base_sets, lidar_sets, theta, split)
    else:
        multimodal.update({"rr_rows": [], "distance_sweep": [], "ttest": None})

    tags = [
        DqDimensionTag(DqDimension.REDUNDANCY,
                       "cross-camera overlap and camera-lidar agreement measured"),
        DqDimensionTag(DqDimension.COMPLETENESS,
                       "box completeness scores drive the pruning decisions"),
    ]
    return {
        "dataset_id": str(dataset_id),
        "frames": len(manifest.frames),
        "tags": [{"dimension": t.dimension.value, "note": t.note} for t in tags],
        "similarity": {
            "tau": similarity_tau,
            "rows": [vars(r) for r in sim_rows],
            "aggregates": similarity_aggregates(sim_rows),
        },
        "bcs_sweep": bcs_rows,
        "multimodal": multimodal,
    }


# ---------------------------------------------------------------------------
# deterministic writers

def write_json(obj: dict, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_csv(path: str | Path, header: Sequence[str],
              rows: Sequence[Sequence]) -> None:
    """RFC-4180 CSV with a fixed line terminator for byte-stable output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def fmt_ratio(value: float | None) -> str:
    return "" if value is None else f"{value:.4f}"


def write_similarity_csv(rows: Sequence[SimilarityRow], path: str | Path) -> None:
    out = []
    for r in rows:
        out.append([r.frame_id, r.pair,
                    "" if r.cosine is None else f"{r.cosine:.6f}",
                    "" if r.has_redundant is None else int(r.has_redundant),
                    r.groups, r.removed_at_tau])
    write_csv(path, ["frame_id", "pair", "cosine", "has_redundant", "groups",
                     "removed@tau"], out)


def write_distance_sweep_csv(rows: Sequence[dict], path: str | Path) -> None:
    out = [[f"{r['t_dist']:.6g}", r["boxes_retained"], r["points_retained"],
            fmt_ratio(r["lost_ratio"]), fmt_ratio(r["rr"])] for r in rows]
    write_csv(path, ["t_dist", "boxes_retained", "points_retained",
                     "lost_ratio", "rr"], out)
