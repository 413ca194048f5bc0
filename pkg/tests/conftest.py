import json
import math

import numpy as np
import pytest

from dqav.dataset import (CameraSpec, LidarSpec, SensorRig, load_manifest,
                          save_points)
from dqav.synth import nuscenes_like_rig


@pytest.fixture
def rig():
    return nuscenes_like_rig()


def make_camera(name="CAM", yaw=0.0, hfov=70.0, width=1600, height=900):
    fx = (width / 2.0) / math.tan(math.radians(hfov / 2.0))
    return CameraSpec(name=name, yaw_deg=yaw, hfov_deg=hfov, width_px=width,
                      height_px=height, fx=fx, cx=width / 2.0)


def make_rig(*cameras):
    return SensorRig(cameras=tuple(cameras),
                     lidar=LidarSpec(name="LIDAR", translation_m=(0.0, 0.0, 0.0)))


def rig_json(rig):
    return {
        "rig": {
            "cameras": [
                {"name": c.name, "yaw_deg": c.yaw_deg, "hfov_deg": c.hfov_deg,
                 "width_px": c.width_px, "height_px": c.height_px,
                 "fx": c.fx, "cx": c.cx}
                for c in rig.cameras
            ],
            "lidar": {"name": rig.lidar.name,
                      "translation_m": list(rig.lidar.translation_m)},
        },
        "meta": {},
    }


def write_raw_dataset(tmp_path, rig, frames, meta=None, point_files=None):
    """Write manifest.json/frames.jsonl from plain dicts (independent of the
    package's own writer) and return the directory."""
    obj = rig_json(rig)
    if meta:
        obj["meta"] = meta
    (tmp_path / "manifest.json").write_text(json.dumps(obj))
    with (tmp_path / "frames.jsonl").open("w") as fh:
        for frame in frames:
            fh.write(json.dumps(frame) + "\n")
    for rel, points in (point_files or {}).items():
        save_points(np.asarray(points, dtype=np.float32), tmp_path / rel)
    return tmp_path


def frame_dict(frame_id, cameras=None, lidar=None, timestamp=0):
    return {
        "frame_id": frame_id,
        "timestamp_us": timestamp,
        "cameras": cameras or {},
        "lidar": lidar or {"points": None, "annotations": []},
    }


def ann2d(instance_id, bbox, category="car"):
    return {"instance_id": instance_id, "category": category, "bbox": list(bbox)}


def ann3d(instance_id, center, size=(1.0, 1.0, 1.0), yaw=0.0, category="car"):
    return {"instance_id": instance_id, "category": category,
            "center": list(center), "size": list(size), "yaw": yaw}


@pytest.fixture
def two_camera_dataset(tmp_path):
    """Two identical forward cameras (full-FoV overlap), one shared instance,
    one instance seen by only one camera."""
    cams = [make_camera("CAM_A"), make_camera("CAM_B")]
    rig = make_rig(*cams)
    frames = [frame_dict(
        "f0",
        cameras={
            "CAM_A": {"image": None, "annotations": [
                ann2d("shared", [100, 100, 300, 250]),
                ann2d("only_a", [900, 400, 1000, 500]),
            ]},
            "CAM_B": {"image": None, "annotations": [
                ann2d("shared", [120, 110, 320, 260]),
            ]},
        },
        lidar={"points": "points/f0.bin",
               "annotations": [ann3d("shared", [10, 0, 0])]},
    )]
    points = {"points/f0.bin": [[1.0, 2.0, 3.0, 0.5], [4.0, 5.0, 6.0, 0.25]]}
    write_raw_dataset(tmp_path, rig, frames, point_files=points)
    return load_manifest(tmp_path)
