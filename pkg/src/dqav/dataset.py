"""Canonical dataset schema, manifest I/O and point-cloud I/O.

A dataset on disk is a directory holding ``manifest.json`` (sensor rig +
provenance), ``frames.jsonl`` (one frame per line) and any point/image
files the frames reference, resolved relative to that directory.
Loaded manifests are immutable values: safe to share across workers.
"""

from __future__ import annotations

import json
import logging
import math
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from .errors import FormatError, ParseError, ValidationError

log = logging.getLogger(__name__)

# x, y, z, intensity as little-endian float32: 16 bytes per point
POINT_DTYPE = np.dtype("<f4")
POINT_RECORD_BYTES = 16

# intrinsics must realize the declared FoV within this angle (radians)
FOV_CONSISTENCY_TOL_RAD = 0.01


def normalize_deg(angle: float) -> float:
    """Map an angle in degrees to the canonical range [-180, 180)."""
    return (angle + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class CameraSpec:
    """One camera of the rig.

    ``yaw_deg`` is measured in the ego frame (0 = forward, positive =
    counter-clockwise / left) and normalized to [-180, 180) on
    construction.  ``fx``/``cx`` are pinhole intrinsics in pixels.
    """

    name: str
    yaw_deg: float
    hfov_deg: float
    width_px: int
    height_px: int
    fx: float
    cx: float

    def __post_init__(self):
        object.__setattr__(self, "yaw_deg", normalize_deg(float(self.yaw_deg)))


@dataclass(frozen=True)
class LidarSpec:
    name: str
    translation_m: tuple[float, float, float]


@dataclass(frozen=True)
class SensorRig:
    cameras: tuple[CameraSpec, ...]
    lidar: LidarSpec

    def camera(self, name: str) -> CameraSpec:
        for cam in self.cameras:
            if cam.name == name:
                return cam
        raise KeyError(name)

    @property
    def camera_names(self) -> tuple[str, ...]:
        return tuple(cam.name for cam in self.cameras)


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned image box in pixels, corners (x_min, y_min)-(x_max, y_max)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class Box3D:
    """Yaw-rotated cuboid in the LiDAR frame.

    ``size`` is (width, length, height) in meters; at yaw 0 the length
    axis points along +x and yaw rotates counter-clockwise about +z.
    """

    center: tuple[float, float, float]
    size: tuple[float, float, float]
    yaw: float


@dataclass(frozen=True)
class Annotation2D:
    instance_id: str
    category: str
    box: Box2D


@dataclass(frozen=True)
class Annotation3D:
    instance_id: str
    category: str
    box: Box3D


@dataclass(frozen=True)
class CameraView:
    """Per-camera slice of one frame.

    ``image_ref`` is optional: similarity ops need it, pruning does not.
    ``image_path`` is the load-time resolved location; it is excluded
    from equality so round-tripped manifests compare structurally.
    """

    image_ref: str | None
    annotations: tuple[Annotation2D, ...]
    image_path: Path | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class LidarView:
    points_ref: str | None
    annotations: tuple[Annotation3D, ...]
    points_path: Path | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Frame:
    frame_id: str
    timestamp_us: int
    camera_views: dict[str, CameraView]
    lidar_view: LidarView

    def __hash__(self):  # dict field blocks the generated hash
        return hash(self.frame_id)


@dataclass(frozen=True)
class DatasetManifest:
    rig: SensorRig
    frames: tuple[Frame, ...]
    meta: dict[str, str] = field(default_factory=dict)
    base_dir: Path | None = field(default=None, compare=False, repr=False)

    def frame_ids(self) -> tuple[str, ...]:
        return tuple(f.frame_id for f in self.frames)


# ---------------------------------------------------------------------------
# parsing helpers

def _expect(obj: dict, key: str, kind: type | tuple[type, ...], ctx: str,
            path: str, line: int | None = None) -> Any:
    if key not in obj:
        raise ParseError(f"{ctx}: missing field '{key}'", path=path, line=line)
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ParseError(f"{ctx}: field '{key}' has wrong type "
                         f"({type(value).__name__})", path=path, line=line)
    return value


def _expect_vec(obj: dict, key: str, n: int, ctx: str, path: str,
                line: int | None = None) -> tuple[float, ...]:
    value = _expect(obj, key, list, ctx, path, line)
    if len(value) != n or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                  for v in value):
        raise ParseError(f"{ctx}: field '{key}' must be a list of {n} numbers",
                         path=path, line=line)
    return tuple(float(v) for v in value)


def _parse_rig(obj: dict, path: str) -> SensorRig:
    rig_obj = _expect(obj, "rig", dict, "manifest", path)
    cams = []
    for i, cam_obj in enumerate(_expect(rig_obj, "cameras", list, "rig", path)):
        ctx = f"rig.cameras[{i}]"
        if not isinstance(cam_obj, dict):
            raise ParseError(f"{ctx}: expected an object", path=path)
        cams.append(CameraSpec(
            name=_expect(cam_obj, "name", str, ctx, path),
            yaw_deg=float(_expect(cam_obj, "yaw_deg", (int, float), ctx, path)),
            hfov_deg=float(_expect(cam_obj, "hfov_deg", (int, float), ctx, path)),
            width_px=int(_expect(cam_obj, "width_px", int, ctx, path)),
            height_px=int(_expect(cam_obj, "height_px", int, ctx, path)),
            fx=float(_expect(cam_obj, "fx", (int, float), ctx, path)),
            cx=float(_expect(cam_obj, "cx", (int, float), ctx, path)),
        ))
    lidar_obj = _expect(rig_obj, "lidar", dict, "rig", path)
    lidar = LidarSpec(
        name=_expect(lidar_obj, "name", str, "rig.lidar", path),
        translation_m=_expect_vec(lidar_obj, "translation_m", 3, "rig.lidar", path),
    )
    return SensorRig(cameras=tuple(cams), lidar=lidar)


def _clamped_box(raw: Box2D, cam: CameraSpec, ctx: str,
                 problems: list[str]) -> Box2D | None:
    if raw.x_min > raw.x_max or raw.y_min > raw.y_max:
        problems.append(f"{ctx}: inverted box {raw}")
        return None
    clamped = Box2D(
        x_min=min(max(raw.x_min, 0.0), float(cam.width_px)),
        y_min=min(max(raw.y_min, 0.0), float(cam.height_px)),
        x_max=min(max(raw.x_max, 0.0), float(cam.width_px)),
        y_max=min(max(raw.y_max, 0.0), float(cam.height_px)),
    )
    if clamped != raw:
        log.warning("%s: box %s clamped to image bounds", ctx, raw)
    if clamped.area <= 0.0:
        problems.append(f"{ctx}: box has no area inside the image ({raw})")
        return None
    return clamped


def _parse_frame(obj: dict, rig: SensorRig, base_dir: Path, path: str,
                 line: int, problems: list[str]) -> Frame:
    frame_id = _expect(obj, "frame_id", str, "frame", path, line)
    timestamp = _expect(obj, "timestamp_us", int, "frame", path, line)

    views: dict[str, CameraView] = {}
    for cam_name, view_obj in _expect(obj, "cameras", dict, "frame", path, line).items():
        ctx = f"frame {frame_id} camera {cam_name}"
        if not isinstance(view_obj, dict):
            raise ParseError(f"{ctx}: expected an object", path=path, line=line)
        try:
            cam = rig.camera(cam_name)
        except KeyError:
            problems.append(f"{ctx}: camera not declared in the rig")
            continue
        image_ref = view_obj.get("image")
        if image_ref is not None and not isinstance(image_ref, str):
            raise ParseError(f"{ctx}: field 'image' must be a string or null",
                             path=path, line=line)
        image_path = None
        if image_ref is not None:
            image_path = base_dir / image_ref
            if not image_path.is_file():
                problems.append(f"{ctx}: image file missing: {image_ref}")
        annotations = []
        for j, ann_obj in enumerate(_expect(view_obj, "annotations", list, ctx, path, line)):
            actx = f"{ctx} annotation[{j}]"
            if not isinstance(ann_obj, dict):
                raise ParseError(f"{actx}: expected an object", path=path, line=line)
            bbox = _expect_vec(ann_obj, "bbox", 4, actx, path, line)
            box = _clamped_box(Box2D(*bbox), cam, actx, problems)
            if box is None:
                continue
            annotations.append(Annotation2D(
                instance_id=_expect(ann_obj, "instance_id", str, actx, path, line),
                category=_expect(ann_obj, "category", str, actx, path, line),
                box=box,
            ))
        views[cam_name] = CameraView(image_ref=image_ref,
                                     annotations=tuple(annotations),
                                     image_path=image_path)

    lidar_obj = _expect(obj, "lidar", dict, "frame", path, line)
    ctx = f"frame {frame_id} lidar"
    points_ref = lidar_obj.get("points")
    if points_ref is not None and not isinstance(points_ref, str):
        raise ParseError(f"{ctx}: field 'points' must be a string or null",
                         path=path, line=line)
    points_path = None
    if points_ref is not None:
        points_path = base_dir / points_ref
        if not points_path.is_file():
            problems.append(f"{ctx}: points file missing: {points_ref}")
        elif points_path.stat().st_size % POINT_RECORD_BYTES != 0:
            problems.append(f"{ctx}: points file size not a multiple of "
                            f"{POINT_RECORD_BYTES} bytes: {points_ref}")
    annotations3d = []
    for j, ann_obj in enumerate(_expect(lidar_obj, "annotations", list, ctx, path, line)):
        actx = f"{ctx} annotation[{j}]"
        if not isinstance(ann_obj, dict):
            raise ParseError(f"{actx}: expected an object", path=path, line=line)
        size = _expect_vec(ann_obj, "size", 3, actx, path, line)
        if min(size) <= 0.0:
            problems.append(f"{actx}: box dimensions must be strictly positive ({size})")
            continue
        annotations3d.append(Annotation3D(
            instance_id=_expect(ann_obj, "instance_id", str, actx, path, line),
            category=_expect(ann_obj, "category", str, actx, path, line),
            box=Box3D(center=_expect_vec(ann_obj, "center", 3, actx, path, line),
                      size=size,
                      yaw=float(_expect(ann_obj, "yaw", (int, float), actx, path, line))),
        ))

    return Frame(frame_id=frame_id, timestamp_us=timestamp, camera_views=views,
                 lidar_view=LidarView(points_ref=points_ref,
                                      annotations=tuple(annotations3d),
                                      points_path=points_path))


def validate_rig(rig: SensorRig) -> list[str]:
    """Check rig invariants; returns a (possibly empty) problem list."""
    problems = []
    names = [cam.name for cam in rig.cameras]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        problems.append(f"rig: duplicate camera names: {dupes}")
    for cam in rig.cameras:
        if not 0.0 < cam.hfov_deg < 180.0:
            problems.append(f"camera {cam.name}: hfov_deg must be in (0, 180), "
                            f"got {cam.hfov_deg}")
            continue
        if cam.width_px <= 0 or cam.height_px <= 0:
            problems.append(f"camera {cam.name}: image size must be positive")
            continue
        if cam.fx <= 0.0:
            problems.append(f"camera {cam.name}: fx must be positive, got {cam.fx}")
            continue
        if not 0.0 < cam.cx < cam.width_px:
            problems.append(f"camera {cam.name}: cx must lie strictly inside the "
                            f"image, got {cam.cx}")
        realized = 2.0 * math.atan(cam.width_px / (2.0 * cam.fx))
        declared = math.radians(cam.hfov_deg)
        if abs(realized - declared) > FOV_CONSISTENCY_TOL_RAD:
            problems.append(f"camera {cam.name}: intrinsics realize a "
                            f"{math.degrees(realized):.3f} deg FoV but declare "
                            f"{cam.hfov_deg} deg")
    return problems


def load_rig(path: str | Path) -> SensorRig:
    """Load and validate just the sensor rig from a manifest.json
    (or a dataset directory containing one); frames are not required."""
    path = Path(path)
    manifest_path = path if path.is_file() else path / "manifest.json"
    if not manifest_path.is_file():
        raise OSError(f"no manifest.json at {manifest_path}")
    try:
        obj = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(manifest_path),
                         line=exc.lineno) from exc
    if not isinstance(obj, dict):
        raise ParseError("manifest must be a JSON object", path=str(manifest_path))
    rig = _parse_rig(obj, str(manifest_path))
    problems = validate_rig(rig)
    if problems:
        raise ValidationError(problems)
    return rig


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a dataset from its directory (or manifest.json path).

    All invariant violations are collected and raised together as one
    :class:`ValidationError`; malformed JSON raises :class:`ParseError`
    with file/line context.  Referenced image and point files must exist
    at load time.
    """
    path = Path(path)
    base_dir = path.parent if path.is_file() else path
    manifest_path = base_dir / "manifest.json"
    frames_path = base_dir / "frames.jsonl"
    if not manifest_path.is_file():
        raise OSError(f"no manifest.json under {base_dir}")
    if not frames_path.is_file():
        raise OSError(f"no frames.jsonl under {base_dir}")

    try:
        manifest_obj = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(manifest_path),
                         line=exc.lineno) from exc
    if not isinstance(manifest_obj, dict):
        raise ParseError("manifest must be a JSON object", path=str(manifest_path))

    rig = _parse_rig(manifest_obj, str(manifest_path))
    meta_obj = manifest_obj.get("meta", {})
    if not isinstance(meta_obj, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in meta_obj.items()):
        raise ParseError("manifest: 'meta' must map strings to strings",
                         path=str(manifest_path))

    problems = validate_rig(rig)

    frames = []
    with frames_path.open() as fh:
        for line_no, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                frame_obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}",
                                 path=str(frames_path), line=line_no) from exc
            if not isinstance(frame_obj, dict):
                raise ParseError("frame must be a JSON object",
                                 path=str(frames_path), line=line_no)
            frames.append(_parse_frame(frame_obj, rig, base_dir,
                                       str(frames_path), line_no, problems))

    ids = [f.frame_id for f in frames]
    for dup in sorted({i for i in ids if ids.count(i) > 1}):
        problems.append(f"duplicate frame_id: {dup}")

    if problems:
        raise ValidationError(problems)
    return DatasetManifest(rig=rig, frames=tuple(frames), meta=dict(meta_obj),
                           base_dir=base_dir)


# ---------------------------------------------------------------------------
# serialization

def _rig_to_obj(rig: SensorRig) -> dict:
    return {
        "cameras": [
            {"name": c.name, "yaw_deg": c.yaw_deg, "hfov_deg": c.hfov_deg,
             "width_px": c.width_px, "height_px": c.height_px,
             "fx": c.fx, "cx": c.cx}
            for c in rig.cameras
        ],
        "lidar": {"name": rig.lidar.name,
                  "translation_m": list(rig.lidar.translation_m)},
    }


def _frame_to_obj(frame: Frame) -> dict:
    cameras = {}
    for name in sorted(frame.camera_views):
        view = frame.camera_views[name]
        cameras[name] = {
            "image": view.image_ref,
            "annotations": [
                {"instance_id": a.instance_id, "category": a.category,
                 "bbox": [a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max]}
                for a in view.annotations
            ],
        }
    lidar = frame.lidar_view
    return {
        "frame_id": frame.frame_id,
        "timestamp_us": frame.timestamp_us,
        "cameras": cameras,
        "lidar": {
            "points": lidar.points_ref,
            "annotations": [
                {"instance_id": a.instance_id, "category": a.category,
                 "center": list(a.box.center), "size": list(a.box.size),
                 "yaw": a.box.yaw}
                for a in lidar.annotations
            ],
        },
    }


def _referenced_files(manifest: DatasetManifest) -> Iterator[tuple[str, Path | None]]:
    for frame in manifest.frames:
        for view in frame.camera_views.values():
            if view.image_ref is not None:
                yield view.image_ref, view.image_path
        if frame.lidar_view.points_ref is not None:
            yield frame.lidar_view.points_ref, frame.lidar_view.points_path


def write_manifest(manifest: DatasetManifest, out_dir: str | Path) -> None:
    """Write a dataset to ``out_dir`` in the canonical on-disk layout.

    Output is deterministic (sorted keys, fixed ordering) so identical
    manifests produce byte-identical files.  Referenced image/point
    files with a known source location are copied alongside.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest_obj = {"rig": _rig_to_obj(manifest.rig), "meta": dict(manifest.meta)}
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest_obj, sort_keys=True, indent=2) + "\n")

    with (out_dir / "frames.jsonl").open("w") as fh:
        for frame in manifest.frames:
            fh.write(json.dumps(_frame_to_obj(frame), sort_keys=True) + "\n")

    for ref, src in _referenced_files(manifest):
        if src is None or not src.is_file():
            continue
        dst = out_dir / ref
        if dst.resolve() == src.resolve():
            continue
        dst.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(src, dst)


def load_points(view: LidarView, base_dir: str | Path | None = None) -> np.ndarray:
    """Decode a point file into an (N, 4) float32 array of (x, y, z, intensity).

    Decoding is bit-exact: 16-byte little-endian float32 records.
    """
    if view.points_ref is None:
        raise OSError("lidar view has no points reference")
    if base_dir is not None:
        path = Path(base_dir) / view.points_ref
    elif view.points_path is not None:
        path = view.points_path
    else:
        path = Path(view.points_ref)
    data = path.read_bytes()
    if len(data) % POINT_RECORD_BYTES != 0:
        raise FormatError(f"{path}: byte length {len(data)} is not a multiple "
                          f"of {POINT_RECORD_BYTES}")
    return np.frombuffer(data, dtype=POINT_DTYPE).reshape(-1, 4).copy()


def save_points(points: np.ndarray, path: str | Path) -> None:
    """Encode (N, 4) points as consecutive little-endian float32 records."""
    points = np.asarray(points, dtype=POINT_DTYPE)
    if points.ndim != 2 or points.shape[1] != 4:
        raise FormatError(f"expected an (N, 4) array, got shape {points.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(points.tobytes())
