"""Cross-modal redundancy: per-frame redundancy ratio between a fusion
baseline and LiDAR-only detections, centroid-distance pruning, the lost
ratio of a pruning step, and distance-vs-redundancy sample grouping for
the two-sample t-test.

Detection sets are input artifacts (JSON files) produced by external
detectors; this module measures, it never detects.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import Box3D, DatasetManifest, load_points
from .errors import (DegeneratePartition, EmptyBaseline, FrameMismatch, ParseError)
from .geometry import centroid_distance, iou3d, iou_bev

SOURCES = ("base", "lidar_only", "pruned")


@dataclass(frozen=True)
class Detection3D:
    box: Box3D
    score: float | None = None
    category: str | None = None


@dataclass(frozen=True)
class DetectionSet:
    frame_id: str
    source: str  # one of SOURCES
    boxes: tuple[Detection3D, ...]


@dataclass(frozen=True)
class RedundancyResult:
    """Per-frame redundancy of the baseline against LiDAR-only boxes.

    ``rr`` is the fraction of baseline boxes for which some LiDAR box
    reaches IoU >= theta; None when the baseline is empty.  ``matched``
    lists (base index, best lidar index, iou) per matched base box.
    """

    frame_id: str
    rr: float | None
    theta: float
    matched: tuple[tuple[int, int, float], ...]


@dataclass(frozen=True)
class PruneOutcome:
    t_dist: float
    boxes_retained: int
    boxes_pruned: int
    points_retained: int
    points_pruned: int
    lost_ratio: float
    rr: float | None


def redundancy_ratio(base: DetectionSet, lidar: DetectionSet, theta: float,
                     bev: bool = False) -> RedundancyResult:
    """Fraction of baseline boxes matched by some LiDAR-only box.

    Matching is an existence test at IoU >= theta, not a one-to-one
    assignment.  ``bev`` switches the IoU to footprint-only.
    """
    if base.frame_id != lidar.frame_id:
        raise FrameMismatch(f"baseline frame {base.frame_id!r} vs lidar "
                            f"frame {lidar.frame_id!r}")
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must be in (0, 1], got {theta}")
    iou = iou_bev if bev else iou3d
    matched = []
    for i, det in enumerate(base.boxes):
        best = -1.0
        best_j = -1
        for j, other in enumerate(lidar.boxes):
            value = iou(det.box, other.box)
            if value > best:
                best, best_j = value, j
        if best >= theta:
            matched.append((i, best_j, best))
    rr = len(matched) / len(base.boxes) if base.boxes else None
    return RedundancyResult(frame_id=base.frame_id, rr=rr, theta=theta,
                            matched=tuple(matched))


def prune_by_distance(boxes: Sequence[Box3D], t_dist: float) -> list[Box3D]:
    """Keep boxes whose centroid distance is >= ``t_dist`` (stable order)."""
    if t_dist < 0.0:
        raise ValueError(f"t_dist must be >= 0, got {t_dist}")
    return [b for b in boxes if centroid_distance(b) >= t_dist]


def prune_points_by_distance(points: np.ndarray, t_dist: float) -> np.ndarray:
    """Keep points with Euclidean range >= ``t_dist``; (N, 4) in, (M, 4) out."""
    if t_dist < 0.0:
        raise ValueError(f"t_dist must be >= 0, got {t_dist}")
    points = np.asarray(points)
    dist = np.linalg.norm(points[:, :3].astype(np.float64), axis=1)
    return points[dist >= t_dist]


def _filter_detections(det_set: DetectionSet, t_dist: float,
                       source: str = "pruned") -> DetectionSet:
    kept = tuple(d for d in det_set.boxes
                 if centroid_distance(d.box) >= t_dist)
    return DetectionSet(frame_id=det_set.frame_id, source=source, boxes=kept)


def lost_ratio(base: DetectionSet, pruned: DetectionSet) -> float:
    """Fraction of baseline boxes eliminated by a pruning step.

    ``pruned`` must be a subset of ``base`` (same boxes, some retained);
    membership is by value identity of the retained boxes.
    """
    if not base.boxes:
        raise EmptyBaseline("baseline detection set is empty")
    common = Counter(base.boxes) & Counter(pruned.boxes)
    n_common = sum(common.values())
    return (len(base.boxes) - n_common) / len(base.boxes)


def sweep_distance(base: DetectionSet, lidar: DetectionSet,
                   t_values: Sequence[float], theta: float,
                   points: np.ndarray | None = None,
                   bev: bool = False) -> list[PruneOutcome]:
    """Trace pruning outcomes over an ascending distance-threshold grid.

    At each threshold the LiDAR set is distance-pruned, the baseline is
    re-filtered the same way (the desk-scale stand-in for re-running
    detection on pruned data) and the lost ratio plus the redundancy
    ratio against the pruned LiDAR set are recorded.
    """
    if list(t_values) != sorted(t_values):
        raise ValueError("t_values must be sorted ascending")
    n_points = len(points) if points is not None else 0
    outcomes = []
    for t in t_values:
        lidar_kept = _filter_detections(lidar, t)
        base_kept = _filter_detections(base, t)
        if points is not None:
            kept_pts = len(prune_points_by_distance(points, t))
        else:
            kept_pts = 0
        outcomes.append(PruneOutcome(
            t_dist=float(t),
            boxes_retained=len(lidar_kept.boxes),
            boxes_pruned=len(lidar.boxes) - len(lidar_kept.boxes),
            points_retained=kept_pts,
            points_pruned=n_points - kept_pts,
            lost_ratio=lost_ratio(base, base_kept),
            rr=redundancy_ratio(base, lidar_kept, theta, bev=bev).rr,
        ))
    return outcomes


def distance_redundancy_groups(results: Sequence[RedundancyResult],
                               base_sets: Sequence[DetectionSet],
                               split: str | float = "matched",
                               ) -> tuple[list[float], list[float]]:
    """Partition baseline box distances into high/low redundancy samples.

    ``split='matched'`` buckets each box by whether it was matched (the
    per-box mode); ``split='median'`` or a numeric rr threshold buckets
    whole frames by their redundancy ratio instead.  Returns sorted
    (high, low) distance lists ready for :func:`dqav.stats.welch_ttest`.
    """
    if not results:
        raise ValueError("no redundancy results given")
    by_frame = {s.frame_id: s for s in base_sets}
    missing = [r.frame_id for r in results if r.frame_id not in by_frame]
    if missing:
        raise FrameMismatch(f"no baseline set for frame(s): {missing}")

    high: list[float] = []
    low: list[float] = []
    if split == "matched":
        for result in results:
            base = by_frame[result.frame_id]
            matched_idx = {i for i, _, _ in result.matched}
            for i, det in enumerate(base.boxes):
                dist = centroid_distance(det.box)
                (high if i in matched_idx else low).append(dist)
    else:
        if split == "median":
            rrs = sorted(r.rr for r in results if r.rr is not None)
            if not rrs:
                raise DegeneratePartition("no frame has a defined redundancy ratio")
            threshold = rrs[len(rrs) // 2]
        else:
            threshold = float(split)
        for result in results:
            if result.rr is None:
                continue
            base = by_frame[result.frame_id]
            bucket = high if result.rr >= threshold else low
            bucket.extend(centroid_distance(det.box) for det in base.boxes)

    if not high or not low:
        raise DegeneratePartition("one redundancy group is empty")
    return sorted(high), sorted(low)


def prune_manifest_by_distance(manifest: DatasetManifest, t_dist: float,
                               ) -> tuple[DatasetManifest, dict[str, np.ndarray]]:
    """Dataset-level distance pruning.

    Drops 3D annotations closer than ``t_dist`` and filters every
    loadable point cloud the same way.  Returns the pruned manifest
    (with provenance meta) plus the filtered clouds keyed by frame_id,
    ready to be written over the referenced point files.
    """
    if t_dist < 0.0:
        raise ValueError(f"t_dist must be >= 0, got {t_dist}")
    frames = []
    clouds: dict[str, np.ndarray] = {}
    removed = 0
    for frame in manifest.frames:
        view = frame.lidar_view
        kept = tuple(a for a in view.annotations
                     if centroid_distance(a.box) >= t_dist)
        removed += len(view.annotations) - len(kept)
        if view.points_ref is not None and view.points_path is not None \
                and view.points_path.is_file():
            clouds[frame.frame_id] = prune_points_by_distance(
                load_points(view), t_dist)
        frames.append(replace(frame, lidar_view=replace(view, annotations=kept)))
    meta = dict(manifest.meta)
    meta["dist_t"] = repr(float(t_dist))
    meta["dist_boxes_removed"] = str(removed)
    return replace(manifest, frames=tuple(frames), meta=meta), clouds


# ---------------------------------------------------------------------------
# detection-set files

def _det_to_obj(det_set: DetectionSet) -> dict:
    return {
        "frame_id": det_set.frame_id,
        "source": det_set.source,
        "boxes": [
            {"center": list(d.box.center), "size": list(d.box.size),
             "yaw": d.box.yaw, "score": d.score, "category": d.category}
            for d in det_set.boxes
        ],
    }


def _det_from_obj(obj: dict, path: str, index: int) -> DetectionSet:
    ctx = f"detection set [{index}]"
    if not isinstance(obj, dict):
        raise ParseError(f"{ctx}: expected an object", path=path)
    frame_id = obj.get("frame_id")
    source = obj.get("source")
    if not isinstance(frame_id, str):
        raise ParseError(f"{ctx}: missing or non-string 'frame_id'", path=path)
    if source not in SOURCES:
        raise ParseError(f"{ctx}: 'source' must be one of {SOURCES}, "
                         f"got {source!r}", path=path)
    boxes = []
    for j, box_obj in enumerate(obj.get("boxes", [])):
        bctx = f"{ctx} box[{j}]"
        if not isinstance(box_obj, dict):
            raise ParseError(f"{bctx}: expected an object", path=path)
        try:
            center = tuple(float(v) for v in box_obj["center"])
            size = tuple(float(v) for v in box_obj["size"])
            yaw = float(box_obj["yaw"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{bctx}: bad geometry fields ({exc})",
                             path=path) from exc
        if len(center) != 3 or len(size) != 3:
            raise ParseError(f"{bctx}: center and size must have 3 entries",
                             path=path)
        if min(size) <= 0.0:
            raise ParseError(f"{bctx}: box dimensions must be positive", path=path)
        score = box_obj.get("score")
        if score is not None:
            score = float(score)
            if not 0.0 <= score <= 1.0:
                raise ParseError(f"{bctx}: score must be in [0, 1]", path=path)
        category = box_obj.get("category")
        boxes.append(Detection3D(box=Box3D(center=center, size=size, yaw=yaw),
                                 score=score, category=category))
    return DetectionSet(frame_id=frame_id, source=source, boxes=tuple(boxes))


def load_detection_sets(path: str | Path) -> list[DetectionSet]:
    """Read detection sets from a JSON file (one object or an array)."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(path),
                         line=exc.lineno) from exc
    objs = payload if isinstance(payload, list) else [payload]
    return [_det_from_obj(obj, str(path), i) for i, obj in enumerate(objs)]


def save_detection_sets(sets: Iterable[DetectionSet], path: str | Path) -> None:
    """Write detection sets as a deterministic JSON array."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = [_det_to_obj(s) for s in sets]
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
