"""Deterministic synthetic scene generator.

Places objects in the ego frame, projects them into every camera that
sees them (apparent pixel size inversely proportional to distance) and
emits the matching LiDAR annotations, a perfect baseline detection set,
a partial LiDAR-only detection set and ground-truth bookkeeping of
which instances are shared across which overlap pairs.  The bookkeeping
is the oracle the measurement pipeline is tested against.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import (Annotation2D, Annotation3D, Box2D, Box3D, CameraSpec,
                      CameraView, DatasetManifest, Frame, LidarSpec, LidarView,
                      SensorRig, normalize_deg, save_points, write_manifest)
from .errors import SpecError
from .geometry import OverlapPair, angle_to_column, find_overlap_pairs, fov_interval
from .multimodal import Detection3D, DetectionSet, save_detection_sets

# objects never come closer than this in the xy plane, which keeps their
# boxes pairwise disjoint (max box diagonal is well under this)
MIN_SEPARATION_M = 8.0


def nuscenes_like_rig(width_px: int = 1600, height_px: int = 900) -> SensorRig:
    """Six-camera rig with the classic 70/110 deg FoV layout.

    Four 70 deg cameras at yaw 0 and +-55 deg, two more at +-110 deg,
    and a 110 deg rear camera; intrinsics realize the declared FoV
    exactly.
    """
    layout = [
        ("CAM_FRONT", 0.0, 70.0),
        ("CAM_FRONT_LEFT", 55.0, 70.0),
        ("CAM_FRONT_RIGHT", -55.0, 70.0),
        ("CAM_BACK_LEFT", 110.0, 70.0),
        ("CAM_BACK_RIGHT", -110.0, 70.0),
        ("CAM_BACK", 180.0, 110.0),
    ]
    cameras = []
    for name, yaw, hfov in layout:
        fx = (width_px / 2.0) / math.tan(math.radians(hfov / 2.0))
        cameras.append(CameraSpec(name=name, yaw_deg=yaw, hfov_deg=hfov,
                                  width_px=width_px, height_px=height_px,
                                  fx=fx, cx=width_px / 2.0))
    return SensorRig(cameras=tuple(cameras),
                     lidar=LidarSpec(name="LIDAR_TOP",
                                     translation_m=(0.0, 0.0, 0.0)))


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic dataset; fully determined by ``seed``."""

    seed: int
    frames: int
    objects_per_frame: tuple[int, int]
    distance_range: tuple[float, float]
    shared_prob: float
    rig: SensorRig
    lidar_match_prob: float = 0.7
    render_images: bool = False

    def __post_init__(self):
        lo, hi = self.objects_per_frame
        if self.frames < 1:
            raise SpecError(f"frames must be >= 1, got {self.frames}")
        if not 0 <= lo <= hi:
            raise SpecError(f"bad objects_per_frame range ({lo}, {hi})")
        if not self.distance_range[0] < self.distance_range[1]:
            raise SpecError(f"distance range needs min < max, got "
                            f"{self.distance_range}")
        if self.distance_range[0] <= 0.0:
            raise SpecError("distance range must be positive")
        for name, p in (("shared_prob", self.shared_prob),
                        ("lidar_match_prob", self.lidar_match_prob)):
            if not 0.0 <= p <= 1.0:
                raise SpecError(f"{name} must be in [0, 1], got {p}")


@dataclass
class GroundTruth:
    """Generator-side bookkeeping used as the pipeline oracle."""

    # frame_id -> "cam_a|cam_b" -> instance ids annotated in both crop bands
    shared_by_pair: dict[str, dict[str, list[str]]] = field(default_factory=dict)
    # frame_id -> instance ids also present in the lidar-only detection set
    lidar_matched: dict[str, list[str]] = field(default_factory=dict)
    # frame_id -> matched fraction (None when the frame has no objects)
    rr: dict[str, float | None] = field(default_factory=dict)


@dataclass
class SynthResult:
    manifest: DatasetManifest
    base_sets: list[DetectionSet]
    lidar_sets: list[DetectionSet]
    truth: GroundTruth
    point_clouds: dict[str, np.ndarray]
    images: dict[tuple[str, str], np.ndarray] | None


def _exclusive_gaps(cam: CameraSpec, pairs: list[OverlapPair]) -> list[tuple[float, float]]:
    """Sub-arcs of a camera's FoV not covered by any overlap, as offsets
    (degrees) from the FoV start."""
    fov = fov_interval(cam)
    covered = []
    for pair in pairs:
        if cam.name not in (pair.cam_a, pair.cam_b):
            continue
        rel = (pair.overlap.start_deg - fov.start_deg) % 360.0
        covered.append((rel, rel + pair.overlap.width_deg))
    covered.sort()
    gaps = []
    cursor = 0.0
    for lo, hi in covered:
        if lo > cursor:
            gaps.append((cursor, lo))
        cursor = max(cursor, hi)
    if cursor < fov.width_deg:
        gaps.append((cursor, fov.width_deg))
    return [(lo, hi) for lo, hi in gaps if hi - lo > 0.5]


def _sample_azimuth(rng: np.random.Generator, shared: bool, cam_gaps: dict,
                    pairs: list[OverlapPair], rig: SensorRig) -> float | None:
    if shared and pairs:
        pair = pairs[rng.integers(len(pairs))]
        u = rng.uniform(0.08, 0.92)
        return normalize_deg(pair.overlap.start_deg + u * pair.overlap.width_deg)
    candidates = [(cam, gaps) for cam, gaps in cam_gaps.items() if gaps]
    if not candidates:
        return None
    cam_name, gaps = candidates[rng.integers(len(candidates))]
    widths = np.array([hi - lo for lo, hi in gaps])
    lo, hi = gaps[rng.choice(len(gaps), p=widths / widths.sum())]
    margin = min(0.2, (hi - lo) * 0.1)
    offset = rng.uniform(lo + margin, hi - margin)
    return normalize_deg(fov_interval(rig.camera(cam_name)).start_deg + offset)


def _project(cam: CameraSpec, azimuth_deg: float, distance: float,
             size: tuple[float, float, float]) -> Box2D | None:
    """Fixed apparent-size pinhole projection; None when not visible."""
    rel = normalize_deg(azimuth_deg - cam.yaw_deg)
    if abs(rel) >= cam.hfov_deg / 2.0 - 1e-9:
        return None
    col = angle_to_column(cam, rel)
    w_px = cam.fx * size[0] / distance
    h_px = cam.fx * size[2] / distance
    row = cam.height_px / 2.0
    box = Box2D(
        x_min=max(col - w_px / 2.0, 0.0),
        y_min=max(row - h_px / 2.0, 0.0),
        x_max=min(col + w_px / 2.0, float(cam.width_px)),
        y_max=min(row + h_px / 2.0, float(cam.height_px)),
    )
    return box if box.area > 0.0 else None


def _band_overlap(box: Box2D, cols: tuple[float, float]) -> bool:
    return box.x_min < cols[1] and box.x_max > cols[0]


def _object_points(rng: np.random.Generator, box: Box3D, n: int) -> np.ndarray:
    w, l, h = box.size
    local = rng.uniform(-0.5, 0.5, size=(n, 3)) * np.array([l, w, h])
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    pts = np.empty((n, 4), dtype=np.float32)
    pts[:, 0] = box.center[0] + c * local[:, 0] - s * local[:, 1]
    pts[:, 1] = box.center[1] + s * local[:, 0] + c * local[:, 1]
    pts[:, 2] = box.center[2] + local[:, 2]
    pts[:, 3] = rng.random(n)
    return pts


def _render_image(cam: CameraSpec, annotations: tuple[Annotation2D, ...]) -> np.ndarray:
    img = np.full((cam.height_px, cam.width_px), 8, dtype=np.uint8)
    for ann in annotations:
        shade = 60 + zlib.crc32(ann.instance_id.encode()) % 180
        x0, y0 = int(ann.box.x_min), int(ann.box.y_min)
        x1, y1 = int(math.ceil(ann.box.x_max)), int(math.ceil(ann.box.y_max))
        img[y0:y1, x0:x1] = shade
    return img


def generate_synthetic(spec: SynthSpec) -> SynthResult:
    """Build a synthetic dataset; byte-identical for a fixed seed."""
    rng = np.random.default_rng(spec.seed)
    rig = spec.rig
    pairs = find_overlap_pairs(rig)
    cam_gaps = {cam.name: _exclusive_gaps(cam, pairs) for cam in rig.cameras}
    pair_keys = {p: f"{p.cam_a}|{p.cam_b}" for p in pairs}
    crop_of = {}
    for pair in pairs:
        crop_of[(pair, pair.cam_a)] = pair.crop_a
        crop_of[(pair, pair.cam_b)] = pair.crop_b

    truth = GroundTruth()
    frames = []
    base_sets = []
    lidar_sets = []
    point_clouds = {}
    images: dict[tuple[str, str], np.ndarray] = {}

    lo_n, hi_n = spec.objects_per_frame
    for fi in range(spec.frames):
        frame_id = f"frame_{fi:04d}"
        n_objects = int(rng.integers(lo_n, hi_n + 1))

        placed: list[tuple[str, float, float, Box3D]] = []
        for k in range(n_objects):
            shared = bool(rng.random() < spec.shared_prob)
            for _ in range(50):
                azimuth = _sample_azimuth(rng, shared, cam_gaps, pairs, rig)
                if azimuth is None:
                    break
                distance = float(rng.uniform(*spec.distance_range))
                x = distance * math.cos(math.radians(azimuth))
                y = distance * math.sin(math.radians(azimuth))
                if all(math.hypot(x - b.center[0], y - b.center[1]) >= MIN_SEPARATION_M
                       for _, _, _, b in placed):
                    size = (float(rng.uniform(1.6, 2.2)),
                            float(rng.uniform(3.6, 5.0)),
                            float(rng.uniform(1.4, 2.0)))
                    box = Box3D(center=(x, y, 0.0), size=size,
                                yaw=float(rng.uniform(-math.pi, math.pi)))
                    placed.append((f"{frame_id}_obj{k:02d}", azimuth, distance, box))
                    break

        views_2d: dict[str, list[Annotation2D]] = {c.name: [] for c in rig.cameras}
        boxes_2d: dict[tuple[str, str], Box2D] = {}
        for instance_id, azimuth, distance, box in placed:
            for cam in rig.cameras:
                box2d = _project(cam, azimuth, distance, box.size)
                if box2d is None:
                    continue
                views_2d[cam.name].append(Annotation2D(
                    instance_id=instance_id, category="car", box=box2d))
                boxes_2d[(instance_id, cam.name)] = box2d

        shared_ids: dict[str, list[str]] = {}
        for pair in pairs:
            ids = []
            for instance_id, _, _, _ in placed:
                in_a = boxes_2d.get((instance_id, pair.cam_a))
                in_b = boxes_2d.get((instance_id, pair.cam_b))
                if (in_a is not None and in_b is not None
                        and _band_overlap(in_a, crop_of[(pair, pair.cam_a)])
                        and _band_overlap(in_b, crop_of[(pair, pair.cam_b)])):
                    ids.append(instance_id)
            shared_ids[pair_keys[pair]] = ids
        truth.shared_by_pair[frame_id] = shared_ids

        camera_views = {}
        for cam in rig.cameras:
            annotations = tuple(views_2d[cam.name])
            image_ref = None
            if spec.render_images:
                image_ref = f"images/{frame_id}_{cam.name}.png"
                images[(frame_id, cam.name)] = _render_image(cam, annotations)
            camera_views[cam.name] = CameraView(image_ref=image_ref,
                                                annotations=annotations)

        annotations_3d = tuple(
            Annotation3D(instance_id=iid, category="car", box=box)
            for iid, _, _, box in placed
        )
        points_ref = f"points/{frame_id}.bin"
        clouds = [_object_points(rng, box, 24) for _, _, _, box in placed]
        n_bg = 100
        bg = np.empty((n_bg, 4), dtype=np.float32)
        bg_az = rng.uniform(0.0, 2.0 * math.pi, n_bg)
        bg_r = rng.uniform(spec.distance_range[0], spec.distance_range[1] * 1.2, n_bg)
        bg[:, 0] = bg_r * np.cos(bg_az)
        bg[:, 1] = bg_r * np.sin(bg_az)
        bg[:, 2] = rng.uniform(-0.2, 0.2, n_bg)
        bg[:, 3] = rng.random(n_bg)
        point_clouds[frame_id] = np.vstack(clouds + [bg]).astype(np.float32)

        frames.append(Frame(frame_id=frame_id, timestamp_us=1_000_000 * fi,
                            camera_views=camera_views,
                            lidar_view=LidarView(points_ref=points_ref,
                                                 annotations=annotations_3d)))

        detections = tuple(Detection3D(box=box, score=1.0, category="car")
                           for _, _, _, box in placed)
        base_sets.append(DetectionSet(frame_id=frame_id, source="base",
                                      boxes=detections))
        keep = [bool(rng.random() < spec.lidar_match_prob) for _ in placed]
        lidar_sets.append(DetectionSet(
            frame_id=frame_id, source="lidar_only",
            boxes=tuple(d for d, k in zip(detections, keep) if k)))
        matched = [p[0] for p, k in zip(placed, keep) if k]
        truth.lidar_matched[frame_id] = matched
        truth.rr[frame_id] = len(matched) / len(placed) if placed else None

    manifest = DatasetManifest(
        rig=rig, frames=tuple(frames),
        meta={"generator": "dqav-synth", "seed": str(spec.seed)})
    return SynthResult(manifest=manifest, base_sets=base_sets,
                       lidar_sets=lidar_sets, truth=truth,
                       point_clouds=point_clouds,
                       images=images if spec.render_images else None)


def write_dataset(result: SynthResult, out_dir: str | Path) -> Path:
    """Materialize a generated dataset: point files, images, manifest,
    detection-set files and the ground-truth JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for frame_id, cloud in result.point_clouds.items():
        save_points(cloud, out_dir / "points" / f"{frame_id}.bin")
    if result.images is not None:
        (out_dir / "images").mkdir(exist_ok=True)
        for (frame_id, cam_name), arr in result.images.items():
            Image.fromarray(arr, mode="L").save(
                out_dir / "images" / f"{frame_id}_{cam_name}.png")
    write_manifest(result.manifest, out_dir)
    save_detection_sets(result.base_sets, out_dir / "detections_base.json")
    save_detection_sets(result.lidar_sets, out_dir / "detections_lidar.json")
    truth_obj = {
        "shared_by_pair": result.truth.shared_by_pair,
        "lidar_matched": result.truth.lidar_matched,
        "rr": result.truth.rr,
    }
    (out_dir / "ground_truth.json").write_text(
        json.dumps(truth_obj, sort_keys=True, indent=2) + "\n")
    return out_dir
