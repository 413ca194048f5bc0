"""Angular-interval arithmetic, pinhole crop mapping and box geometry.

All operations are pure functions on immutable inputs and can be
parallelized freely across frames and box pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Box2D, Box3D, CameraSpec, SensorRig, normalize_deg
from .errors import OutOfFov

# slack (degrees) allowed past the FoV edge before angle_to_column rejects
FOV_EDGE_EPS_DEG = 1e-6


@dataclass(frozen=True)
class AngularInterval:
    """Arc on the circle, counter-clockwise from ``start_deg`` to ``end_deg``.

    Canonical form: start in [-180, 180), end = start + width with width
    strictly inside (0, 360).  Equality is therefore equality mod 360.
    """

    start_deg: float
    end_deg: float

    def __post_init__(self):
        width = (self.end_deg - self.start_deg) % 360.0
        if width <= 0.0:
            raise ValueError(f"interval width must be in (0, 360), got "
                             f"[{self.start_deg}, {self.end_deg}]")
        start = normalize_deg(self.start_deg)
        object.__setattr__(self, "start_deg", start)
        object.__setattr__(self, "end_deg", start + width)

    @property
    def width_deg(self) -> float:
        return self.end_deg - self.start_deg

    def contains(self, angle_deg: float) -> bool:
        return (angle_deg - self.start_deg) % 360.0 <= self.width_deg

    def intersect(self, other: AngularInterval) -> AngularInterval | None:
        """Intersection arc, or None when the arcs are disjoint.

        Arcs whose widths sum past 360 can intersect in two components;
        the wider component is returned.  Camera FoVs are below 180 deg
        each, so that case never arises for rig work.
        """
        best = None
        for shift in (-360.0, 0.0, 360.0):
            lo = max(self.start_deg, other.start_deg + shift)
            hi = min(self.end_deg, other.end_deg + shift)
            if hi - lo > 0.0 and (best is None or hi - lo > best[1] - best[0]):
                best = (lo, hi)
        if best is None:
            return None
        return AngularInterval(best[0], best[1])


@dataclass(frozen=True)
class OverlapPair:
    """Two cameras with intersecting FoVs plus their overlap-crop bands.

    ``crop_a``/``crop_b`` are pixel-column ranges [col_lo, col_hi) in the
    respective camera image.
    """

    cam_a: str
    cam_b: str
    overlap: AngularInterval
    crop_a: tuple[float, float]
    crop_b: tuple[float, float]


def fov_interval(cam: CameraSpec) -> AngularInterval:
    """Horizontal FoV of a camera as an ego-frame angular interval."""
    half = cam.hfov_deg / 2.0
    return AngularInterval(cam.yaw_deg - half, cam.yaw_deg + half)


def angle_to_column(cam: CameraSpec, angle_deg: float) -> float:
    """Map an angle off the optical axis to a pixel column.

    Pinhole model: column = cx - fx * tan(angle), so positive (leftward)
    angles map to decreasing columns.  The result is clamped to
    [0, width_px]; angles beyond the FoV edge raise :class:`OutOfFov`.
    """
    if abs(angle_deg) >= cam.hfov_deg / 2.0 + FOV_EDGE_EPS_DEG:
        raise OutOfFov(f"{angle_deg} deg is outside the {cam.hfov_deg} deg FoV "
                       f"of camera {cam.name}")
    col = cam.cx - cam.fx * math.tan(math.radians(angle_deg))
    return min(max(col, 0.0), float(cam.width_px))


def column_to_angle(cam: CameraSpec, col: float) -> float:
    """Inverse of :func:`angle_to_column` (degrees off the optical axis)."""
    return math.degrees(math.atan((cam.cx - col) / cam.fx))


def _crop_range(cam: CameraSpec, overlap: AngularInterval) -> tuple[float, float]:
    # rel angles of the overlap edges; the ccw (leftmost) edge gives col_lo
    rel_start = normalize_deg(overlap.start_deg - cam.yaw_deg)
    rel_end = rel_start + overlap.width_deg
    col_lo = angle_to_column(cam, rel_end)
    col_hi = angle_to_column(cam, rel_start)
    return (col_lo, col_hi)


def find_overlap_pairs(rig: SensorRig) -> list[OverlapPair]:
    """All unordered camera pairs with a non-empty FoV intersection.

    Pairs come back sorted by (cam_a, cam_b) name with cam_a < cam_b.
    """
    pairs = []
    cams = sorted(rig.cameras, key=lambda c: c.name)
    for i, cam_a in enumerate(cams):
        for cam_b in cams[i + 1:]:
            overlap = fov_interval(cam_a).intersect(fov_interval(cam_b))
            if overlap is None:
                continue
            pairs.append(OverlapPair(
                cam_a=cam_a.name, cam_b=cam_b.name, overlap=overlap,
                crop_a=_crop_range(cam_a, overlap),
                crop_b=_crop_range(cam_b, overlap),
            ))
    return pairs


# ---------------------------------------------------------------------------
# 2D boxes

def clip_box2d(box: Box2D, region: Box2D) -> Box2D | None:
    """Intersection rectangle of two boxes, or None when disjoint."""
    x_min = max(box.x_min, region.x_min)
    y_min = max(box.y_min, region.y_min)
    x_max = min(box.x_max, region.x_max)
    y_max = min(box.y_max, region.y_max)
    if x_max <= x_min or y_max <= y_min:
        return None
    return Box2D(x_min, y_min, x_max, y_max)


def iou2d(a: Box2D, b: Box2D) -> float:
    """Intersection over union of two axis-aligned boxes, in [0, 1]."""
    inter = clip_box2d(a, b)
    if inter is None:
        return 0.0
    union = a.area + b.area - inter.area
    return inter.area / union if union > 0.0 else 0.0


# ---------------------------------------------------------------------------
# 3D boxes

def box3d_corners(box: Box3D) -> np.ndarray:
    """The 8 corner vertices, shape (8, 3); their mean equals the center.

    Bottom face first, counter-clockwise in the box frame, then the top
    face in the same order.
    """
    w, l, h = box.size
    dx = np.array([l, -l, -l, l, l, -l, -l, l]) / 2.0
    dy = np.array([w, w, -w, -w, w, w, -w, -w]) / 2.0
    dz = np.array([-h, -h, -h, -h, h, h, h, h]) / 2.0
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    x = box.center[0] + c * dx - s * dy
    y = box.center[1] + s * dx + c * dy
    z = box.center[2] + dz
    return np.stack([x, y, z], axis=1)


def centroid_distance(box: Box3D) -> float:
    """Euclidean distance from the sensor origin to the corner centroid."""
    centroid = box3d_corners(box).mean(axis=0)
    return float(np.linalg.norm(centroid))


def box3d_volume(box: Box3D) -> float:
    w, l, h = box.size
    return w * l * h


def bev_corners(box: Box3D) -> np.ndarray:
    """Footprint rectangle corners in the xy plane, shape (4, 2), CCW."""
    return box3d_corners(box)[:4, :2]


def polygon_area(pts: np.ndarray) -> float:
    """Shoelace area of a polygon given as an (N, 2) vertex array."""
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def clip_convex_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` by a CCW convex ``clip`` polygon.

    Points exactly on a clip edge count as inside (cross >= 0), so
    contact-only configurations come out as degenerate polygons with
    zero area rather than disappearing discontinuously.
    """
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ex, ey = clip[i]
        fx, fy = clip[(i + 1) % n]
        edge_dx, edge_dy = fx - ex, fy - ey

        polygon = output
        output = []
        for j, (px, py) in enumerate(polygon):
            qx, qy = polygon[(j + 1) % len(polygon)]
            p_in = edge_dx * (py - ey) - edge_dy * (px - ex) >= 0.0
            q_in = edge_dx * (qy - ey) - edge_dy * (qx - ex) >= 0.0
            if p_in:
                output.append((px, py))
            if p_in != q_in:
                # segment crosses the edge line: add the intersection point
                denom = edge_dx * (py - qy) - edge_dy * (px - qx)
                if denom != 0.0:
                    t = (edge_dx * (py - ey) - edge_dy * (px - ex)) / denom
                    output.append((px + t * (qx - px), py + t * (qy - py)))
    return np.array(output) if output else np.empty((0, 2))


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    return polygon_area(clip_convex_polygon(bev_corners(a), bev_corners(b)))


def _z_extent(box: Box3D) -> tuple[float, float]:
    return (box.center[2] - box.size[2] / 2.0, box.center[2] + box.size[2] / 2.0)


def iou3d(a: Box3D, b: Box3D) -> float:
    """Yaw-aware 3D IoU: BEV polygon intersection times vertical overlap.

    Symmetric, exactly 1 for identical boxes, 0 for disjoint ones.  Box
    volumes are derived from the same shoelace areas and z extents as
    the intersection, so the identity case does not drift to 1 - eps.
    """
    bev_a = bev_corners(a)
    bev_b = bev_corners(b)
    a_lo, a_hi = _z_extent(a)
    b_lo, b_hi = _z_extent(b)
    overlap_z = max(0.0, min(a_hi, b_hi) - max(a_lo, b_lo))
    inter = polygon_area(clip_convex_polygon(bev_a, bev_b)) * overlap_z
    if inter <= 0.0:
        return 0.0
    vol_a = polygon_area(bev_a) * (a_hi - a_lo)
    vol_b = polygon_area(bev_b) * (b_hi - b_lo)
    union = vol_a + vol_b - inter
    return inter / union


def iou_bev(a: Box3D, b: Box3D) -> float:
    """Bird's-eye-view IoU of the two footprints, ignoring height."""
    bev_a = bev_corners(a)
    bev_b = bev_corners(b)
    inter = polygon_area(clip_convex_polygon(bev_a, bev_b))
    if inter <= 0.0:
        return 0.0
    union = polygon_area(bev_a) + polygon_area(bev_b) - inter
    return inter / union


def _points_in_box(pts: np.ndarray, box: Box3D) -> np.ndarray:
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    dx = pts[:, 0] - box.center[0]
    dy = pts[:, 1] - box.center[1]
    dz = pts[:, 2] - box.center[2]
    # rotate into the box frame (inverse yaw)
    local_x = c * dx + s * dy
    local_y = -s * dx + c * dy
    w, l, h = box.size
    return ((np.abs(local_x) <= l / 2.0) & (np.abs(local_y) <= w / 2.0)
            & (np.abs(dz) <= h / 2.0))


def mc_iou3d(a: Box3D, b: Box3D, samples: int, seed: int,
             chunk: int = 1_000_000) -> float:
    """Monte-Carlo IoU estimate; the independent oracle for :func:`iou3d`.

    Samples points uniformly over the axis-aligned bounding region of
    both boxes and returns #(in both) / #(in either).  Deterministic for
    a fixed seed.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    corners = np.vstack([box3d_corners(a), box3d_corners(b)])
    lo = corners.min(axis=0)
    hi = corners.max(axis=0)
    span = hi - lo

    rng = np.random.default_rng(seed)
    n_both = 0
    n_union = 0
    remaining = samples
    while remaining > 0:
        n = min(remaining, chunk)
        pts = lo + rng.random((n, 3)) * span
        in_a = _points_in_box(pts, a)
        in_b = _points_in_box(pts, b)
        n_both += int(np.count_nonzero(in_a & in_b))
        n_union += int(np.count_nonzero(in_a | in_b))
        remaining -= n
    return n_both / n_union if n_union else 0.0
