"""Cross-camera redundancy: overlap-crop similarity, completeness-based
pruning of duplicated annotations and threshold sweeps.

Two cameras of an overlap pair see a shared angular wedge; annotations
carrying the same instance_id inside both crop bands form a redundant
group.  Each member is scored by how completely the crop shows its box
(clipped area over full area); within a group, a large completeness
spread triggers removal of the weaker members.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .dataset import (Annotation2D, Box2D, CameraSpec, CameraView, DatasetManifest,
                      Frame, SensorRig)
from .errors import DecodeError, DegenerateBox, MissingImage, NotComparable
from .geometry import OverlapPair, clip_box2d, find_overlap_pairs

SIMILARITY_GRID = 64  # crops are resampled to this square grayscale grid


@dataclass(frozen=True)
class CropSimilarity:
    frame_id: str
    pair: tuple[str, str]
    cosine: float
    has_redundant_instances: bool


@dataclass(frozen=True)
class GroupMember:
    camera: str
    annotation: Annotation2D
    bcs: float


@dataclass(frozen=True)
class RedundantGroup:
    instance_id: str
    members: tuple[GroupMember, ...]


@dataclass(frozen=True)
class BcsDecision:
    group: RedundantGroup
    tau: float
    kept: tuple[GroupMember, ...]
    removed: tuple[GroupMember, ...]


def crop_region(pair: OverlapPair, camera: str, cam_spec: CameraSpec) -> Box2D:
    """Overlap-crop rectangle of one pair camera: column band x full height."""
    if camera == pair.cam_a:
        lo, hi = pair.crop_a
    elif camera == pair.cam_b:
        lo, hi = pair.crop_b
    else:
        raise KeyError(f"camera {camera} is not part of pair "
                       f"({pair.cam_a}, {pair.cam_b})")
    return Box2D(lo, 0.0, hi, float(cam_spec.height_px))


def bcs(box: Box2D, region: Box2D) -> float:
    """Completeness of ``box`` inside ``region``: clipped area / full area.

    1 when the box lies fully inside, 0 when disjoint.
    """
    if box.area <= 0.0:
        raise DegenerateBox(f"box has zero area: {box}")
    clipped = clip_box2d(box, region)
    if clipped is None:
        return 0.0
    return clipped.area / box.area


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of two flat vectors; zero-norm input is not comparable."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise NotComparable("a crop vector has zero norm")
    return float(np.dot(u, v) / (nu * nv))


def _crop_vector(view: CameraView, cam: CameraSpec,
                 cols: tuple[float, float]) -> np.ndarray:
    if view.image_ref is None:
        raise MissingImage(f"camera {cam.name} has no image reference")
    path = view.image_path if view.image_path is not None else Path(view.image_ref)
    if not path.is_file():
        raise MissingImage(f"image file not found: {path}")
    try:
        with Image.open(path) as img:
            gray = img.convert("L")
    except UnidentifiedImageError as exc:
        raise DecodeError(f"cannot decode image: {path}") from exc
    lo = int(round(cols[0]))
    hi = int(round(cols[1]))
    if hi <= lo:
        raise NotComparable(f"empty crop band [{cols[0]}, {cols[1]})")
    crop = gray.crop((lo, 0, hi, cam.height_px))
    crop = crop.resize((SIMILARITY_GRID, SIMILARITY_GRID), Image.BILINEAR)
    return np.asarray(crop, dtype=np.float64).ravel()


def _ids_in_crop(view: CameraView, region: Box2D) -> set[str]:
    ids = set()
    for ann in view.annotations:
        clipped = clip_box2d(ann.box, region)
        if clipped is not None and clipped.area > 0.0:
            ids.add(ann.instance_id)
    return ids


def crop_similarity(frame: Frame, pair: OverlapPair, rig: SensorRig) -> CropSimilarity:
    """Cosine similarity of the two overlap crops of one frame.

    Both crops are resampled to a fixed 64x64 grayscale grid and
    flattened; ``has_redundant_instances`` flags whether some instance
    is annotated inside both crop bands.
    """
    cam_a = rig.camera(pair.cam_a)
    cam_b = rig.camera(pair.cam_b)
    view_a = frame.camera_views.get(pair.cam_a)
    view_b = frame.camera_views.get(pair.cam_b)
    if view_a is None or view_b is None:
        raise MissingImage(f"frame {frame.frame_id} lacks a view for pair "
                           f"({pair.cam_a}, {pair.cam_b})")
    vec_a = _crop_vector(view_a, cam_a, pair.crop_a)
    vec_b = _crop_vector(view_b, cam_b, pair.crop_b)
    shared = (_ids_in_crop(view_a, crop_region(pair, pair.cam_a, cam_a))
              & _ids_in_crop(view_b, crop_region(pair, pair.cam_b, cam_b)))
    return CropSimilarity(frame_id=frame.frame_id, pair=(pair.cam_a, pair.cam_b),
                          cosine=cosine_similarity(vec_a, vec_b),
                          has_redundant_instances=bool(shared))


def export_crops(frame: Frame, pair: OverlapPair, rig: SensorRig,
                 out_dir: str | Path) -> list[Path]:
    """Save both overlap crops of a frame as grayscale PNGs for review."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for cam_name, cols in ((pair.cam_a, pair.crop_a), (pair.cam_b, pair.crop_b)):
        cam = rig.camera(cam_name)
        view = frame.camera_views.get(cam_name)
        if view is None or view.image_ref is None:
            raise MissingImage(f"frame {frame.frame_id} camera {cam_name} "
                               f"has no image")
        path = view.image_path if view.image_path is not None \
            else Path(view.image_ref)
        with Image.open(path) as img:
            crop = img.convert("L").crop((int(round(cols[0])), 0,
                                          int(round(cols[1])), cam.height_px))
        target = out_dir / f"{frame.frame_id}_{pair.cam_a}_{pair.cam_b}_{cam_name}.png"
        crop.save(target)
        written.append(target)
    return written


def find_redundant_groups(frame: Frame, pair: OverlapPair,
                          rig: SensorRig) -> list[RedundantGroup]:
    """Group annotations by instance across the two crop bands of a pair.

    A group forms when the same instance_id is annotated, with positive
    overlap against the crop band, in both cameras.  Groups come back
    sorted by instance_id; members carry their completeness score.
    """
    per_camera: dict[str, dict[str, list[Annotation2D]]] = {}
    regions: dict[str, Box2D] = {}
    for cam_name in (pair.cam_a, pair.cam_b):
        view = frame.camera_views.get(cam_name)
        region = crop_region(pair, cam_name, rig.camera(cam_name))
        regions[cam_name] = region
        by_id: dict[str, list[Annotation2D]] = {}
        if view is not None:
            for ann in view.annotations:
                clipped = clip_box2d(ann.box, region)
                if clipped is not None and clipped.area > 0.0:
                    by_id.setdefault(ann.instance_id, []).append(ann)
        per_camera[cam_name] = by_id

    shared = sorted(set(per_camera[pair.cam_a]) & set(per_camera[pair.cam_b]))
    groups = []
    for instance_id in shared:
        members = []
        for cam_name in (pair.cam_a, pair.cam_b):
            for ann in per_camera[cam_name][instance_id]:
                members.append(GroupMember(camera=cam_name, annotation=ann,
                                           bcs=bcs(ann.box, regions[cam_name])))
        groups.append(RedundantGroup(instance_id=instance_id,
                                     members=tuple(members)))
    return groups


def apply_bcs_pruning(groups: list[RedundantGroup], tau: float) -> list[BcsDecision]:
    """Decide, per group, which members survive at spread threshold ``tau``.

    When max - min completeness exceeds tau, only the members tied at
    the maximum are kept (equally complete views stay redundant by
    design); otherwise everything is kept.  Raising tau removes fewer
    boxes.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    decisions = []
    for group in groups:
        scores = [m.bcs for m in group.members]
        spread = max(scores) - min(scores)
        if spread > tau:
            best = max(scores)
            kept = tuple(m for m in group.members if m.bcs == best)
            removed = tuple(m for m in group.members if m.bcs != best)
        else:
            kept = group.members
            removed = ()
        decisions.append(BcsDecision(group=group, tau=tau, kept=kept,
                                     removed=removed))
    return decisions


def _all_groups(manifest: DatasetManifest,
                ) -> list[tuple[Frame, dict[str, dict[int, int]], list[RedundantGroup]]]:
    """Per frame: (frame, camera -> id(annotation) -> index, groups of all
    pairs).  Computed once so threshold sweeps don't redo the geometry."""
    pairs = find_overlap_pairs(manifest.rig)
    out = []
    for frame in manifest.frames:
        index_of = {
            cam: {id(ann): i for i, ann in enumerate(view.annotations)}
            for cam, view in frame.camera_views.items()
        }
        groups: list[RedundantGroup] = []
        for pair in pairs:
            groups.extend(find_redundant_groups(frame, pair, manifest.rig))
        out.append((frame, index_of, groups))
    return out


def _prune_with_groups(manifest: DatasetManifest, tau: float,
                       frame_groups) -> DatasetManifest:
    removed_total = 0
    frames = []
    for frame, index_of, groups in frame_groups:
        drop_by_cam: dict[str, set[int]] = {}
        for decision in apply_bcs_pruning(groups, tau):
            for member in decision.removed:
                idx = index_of[member.camera][id(member.annotation)]
                drop_by_cam.setdefault(member.camera, set()).add(idx)
        if not drop_by_cam:
            frames.append(frame)
            continue
        views = {}
        for cam, view in frame.camera_views.items():
            drop = drop_by_cam.get(cam)
            if not drop:
                views[cam] = view
            else:
                kept = tuple(a for i, a in enumerate(view.annotations)
                             if i not in drop)
                views[cam] = replace(view, annotations=kept)
                removed_total += len(drop)
        frames.append(replace(frame, camera_views=views))
    meta = dict(manifest.meta)
    meta["bcs_tau"] = repr(float(tau))
    meta["bcs_removed"] = str(removed_total)
    return replace(manifest, frames=tuple(frames), meta=meta)


def prune_dataset(manifest: DatasetManifest, tau: float) -> DatasetManifest:
    """Drop the losing members of every redundant group at threshold ``tau``.

    Everything else is untouched; provenance meta records the threshold
    and the removal count.  Annotations outside all crop bands are never
    removed.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    return _prune_with_groups(manifest, tau, _all_groups(manifest))


@dataclass(frozen=True)
class BcsSweepEntry:
    tau: float
    manifest: DatasetManifest
    kept_annotations: int
    removed_annotations: int
    per_camera_kept: dict[str, int]


def _count_annotations(manifest: DatasetManifest) -> tuple[int, dict[str, int]]:
    per_camera = {name: 0 for name in manifest.rig.camera_names}
    for frame in manifest.frames:
        for cam, view in frame.camera_views.items():
            per_camera[cam] += len(view.annotations)
    return sum(per_camera.values()), per_camera


def sweep_bcs(manifest: DatasetManifest,
              taus: list[float]) -> list[BcsSweepEntry]:
    """Prune at each threshold of an ascending grid.

    Retention is monotone non-decreasing in tau; the entry at tau = 1.0
    keeps every annotation.
    """
    if list(taus) != sorted(taus):
        raise ValueError("taus must be sorted ascending")
    frame_groups = _all_groups(manifest)
    total, _ = _count_annotations(manifest)
    entries = []
    for tau in taus:
        pruned = _prune_with_groups(manifest, tau, frame_groups)
        kept, per_camera = _count_annotations(pruned)
        entries.append(BcsSweepEntry(tau=tau, manifest=pruned,
                                     kept_annotations=kept,
                                     removed_annotations=total - kept,
                                     per_camera_kept=per_camera))
    return entries
