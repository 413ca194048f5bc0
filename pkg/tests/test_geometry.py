import math

import numpy as np
import pytest

from dqav.dataset import Box2D, Box3D
from dqav.errors import OutOfFov
from dqav.geometry import (AngularInterval, angle_to_column, box3d_corners,
                           centroid_distance, clip_box2d, column_to_angle,
                           find_overlap_pairs, fov_interval, iou2d, iou3d,
                           iou_bev, mc_iou3d)

from conftest import make_camera, make_rig


def random_box(rng, span=6.0):
    return Box3D(
        center=tuple(rng.uniform(-span, span, 3)),
        size=tuple(rng.uniform(0.5, 3.0, 3)),
        yaw=float(rng.uniform(-math.pi, math.pi)),
    )


class TestAngularInterval:
    def test_width_and_normalization(self):
        iv = AngularInterval(-235.0, -125.0)
        assert iv.start_deg == 125.0
        assert iv.end_deg == 235.0
        assert iv.width_deg == pytest.approx(110.0)

    def test_zero_width_rejected(self):
        with pytest.raises(ValueError):
            AngularInterval(10.0, 10.0)

    def test_intersection_across_seam(self):
        back = AngularInterval(125.0, 235.0)
        back_left = AngularInterval(75.0, 145.0)
        got = back.intersect(back_left)
        assert got == AngularInterval(125.0, 145.0)

    def test_disjoint(self):
        assert AngularInterval(0.0, 30.0).intersect(
            AngularInterval(90.0, 120.0)) is None


class TestFovInterval:
    def test_forward(self):
        cam = make_camera(yaw=0.0, hfov=70.0)
        assert fov_interval(cam) == AngularInterval(-35.0, 35.0)

    def test_backward_wraps(self):
        cam = make_camera(yaw=180.0, hfov=110.0)
        iv = fov_interval(cam)
        assert iv.start_deg == pytest.approx(125.0)
        assert iv.end_deg == pytest.approx(235.0)

    def test_negative_yaw(self):
        cam = make_camera(yaw=-55.0, hfov=70.0)
        assert fov_interval(cam) == AngularInterval(-90.0, -20.0)


class TestFindOverlapPairs:
    def test_published_six_pair_layout(self, rig):
        pairs = find_overlap_pairs(rig)
        assert len(pairs) == 6
        widths = {(p.cam_a, p.cam_b): p.overlap.width_deg for p in pairs}
        assert widths[("CAM_FRONT", "CAM_FRONT_RIGHT")] == pytest.approx(15.0, abs=1e-9)
        assert widths[("CAM_FRONT", "CAM_FRONT_LEFT")] == pytest.approx(15.0, abs=1e-9)
        assert widths[("CAM_BACK_RIGHT", "CAM_FRONT_RIGHT")] == pytest.approx(15.0, abs=1e-9)
        assert widths[("CAM_BACK_LEFT", "CAM_FRONT_LEFT")] == pytest.approx(15.0, abs=1e-9)
        assert widths[("CAM_BACK", "CAM_BACK_RIGHT")] == pytest.approx(20.0, abs=1e-9)
        assert widths[("CAM_BACK", "CAM_BACK_LEFT")] == pytest.approx(20.0, abs=1e-9)

    def test_identical_cameras_overlap_fully(self):
        rig = make_rig(make_camera("A"), make_camera("B"))
        pairs = find_overlap_pairs(rig)
        assert len(pairs) == 1
        assert pairs[0].overlap.width_deg == pytest.approx(70.0)
        assert pairs[0].crop_a == (0.0, 1600.0)

    def test_back_to_back_disjoint(self):
        rig = make_rig(make_camera("A", yaw=0.0, hfov=90.0),
                       make_camera("B", yaw=180.0, hfov=90.0))
        assert find_overlap_pairs(rig) == []

    def test_sorted_by_name(self, rig):
        pairs = find_overlap_pairs(rig)
        keys = [(p.cam_a, p.cam_b) for p in pairs]
        assert keys == sorted(keys)
        assert all(a < b for a, b in keys)

    @pytest.mark.parametrize("shift", [-170.0, -45.0, 13.7, 90.0, 179.0])
    def test_yaw_translation_equivariance(self, rig, shift):
        shifted = make_rig(*[
            make_camera(c.name, yaw=c.yaw_deg + shift, hfov=c.hfov_deg)
            for c in rig.cameras
        ])
        base = {(p.cam_a, p.cam_b): p.overlap.width_deg
                for p in find_overlap_pairs(rig)}
        moved = {(p.cam_a, p.cam_b): p.overlap.width_deg
                 for p in find_overlap_pairs(shifted)}
        assert set(base) == set(moved)
        for key in base:
            assert moved[key] == pytest.approx(base[key], abs=1e-9)


class TestAngleToColumn:
    def test_optical_axis_maps_to_cx(self):
        cam = make_camera()
        assert angle_to_column(cam, 0.0) == cam.cx

    def test_fov_edge(self):
        cam = make_camera(hfov=70.0, width=1600)
        assert angle_to_column(cam, -35.0) == pytest.approx(1600.0, abs=1e-6)

    def test_minus_twenty_degrees(self):
        # 800 + (800/tan(35 deg)) * tan(20 deg), high-precision reference
        cam = make_camera(hfov=70.0, width=1600)
        assert angle_to_column(cam, -20.0) == pytest.approx(1215.84269166459,
                                                            abs=1e-9)

    def test_out_of_fov(self):
        cam = make_camera(hfov=70.0)
        with pytest.raises(OutOfFov):
            angle_to_column(cam, 36.0)

    def test_monotone_and_inverse_identity(self):
        cam = make_camera(hfov=70.0)
        angles = np.linspace(-34.9, 34.9, 301)
        cols = [angle_to_column(cam, a) for a in angles]
        assert all(b < a for a, b in zip(cols, cols[1:]))  # decreasing in angle
        for a in angles:
            col = angle_to_column(cam, a)
            assert angle_to_column(cam, column_to_angle(cam, col)) == \
                pytest.approx(col, abs=1e-9)


class TestBox2dOps:
    def test_clip_inside_unchanged(self):
        box = Box2D(10, 10, 20, 20)
        region = Box2D(0, 0, 100, 100)
        assert clip_box2d(box, region) == box

    def test_clip_partial(self):
        got = clip_box2d(Box2D(0, 0, 100, 100), Box2D(50, 0, 200, 200))
        assert got == Box2D(50, 0, 100, 100)

    def test_clip_disjoint(self):
        assert clip_box2d(Box2D(0, 0, 10, 10), Box2D(20, 20, 30, 30)) is None

    def test_iou_identical(self):
        box = Box2D(3, 4, 10, 12)
        assert iou2d(box, box) == 1.0

    def test_iou_disjoint(self):
        assert iou2d(Box2D(0, 0, 1, 1), Box2D(5, 5, 6, 6)) == 0.0

    def test_iou_offset_unit_squares(self):
        a = Box2D(0, 0, 1, 1)
        b = Box2D(0.5, 0, 1.5, 1)
        assert iou2d(a, b) == pytest.approx(1.0 / 3.0)

    @pytest.mark.parametrize("seed", range(20))
    def test_iou_properties(self, seed):
        rng = np.random.default_rng(seed)
        def rand_box():
            x0, y0 = rng.uniform(-5, 5, 2)
            w, h = rng.uniform(0.1, 6, 2)
            return Box2D(x0, y0, x0 + w, y0 + h)
        a, b = rand_box(), rand_box()
        v = iou2d(a, b)
        assert 0.0 <= v <= 1.0
        assert iou2d(b, a) == v


class TestBox3dCorners:
    def test_unit_cube(self):
        corners = box3d_corners(Box3D((0, 0, 0), (1, 1, 1), 0.0))
        expected = {(sx * 0.5, sy * 0.5, sz * 0.5)
                    for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)}
        assert {tuple(c) for c in corners.round(12)} == expected

    def test_quarter_turn_symmetry(self):
        base = box3d_corners(Box3D((0, 0, 0), (1, 1, 1), 0.0))
        turned = box3d_corners(Box3D((0, 0, 0), (1, 1, 1), math.pi / 2))
        assert {tuple(c) for c in base.round(9)} == \
            {tuple(c) for c in turned.round(9)}

    @pytest.mark.parametrize("seed", range(50))
    def test_mean_equals_center(self, seed):
        rng = np.random.default_rng(seed)
        box = random_box(rng, span=80.0)
        mean = box3d_corners(box).mean(axis=0)
        assert np.allclose(mean, box.center, atol=1e-12, rtol=1e-12)


class TestCentroidDistance:
    def test_at_origin(self):
        assert centroid_distance(Box3D((0, 0, 0), (1, 1, 1), 0.4)) == 0.0

    def test_three_four_five(self):
        assert centroid_distance(Box3D((3, 4, 0), (1, 1, 1), 0.0)) == \
            pytest.approx(5.0)

    def test_unit_diagonal(self):
        assert centroid_distance(Box3D((1, 1, 1), (2, 2, 2), 1.0)) == \
            pytest.approx(math.sqrt(3.0))


class TestIou3d:
    def test_identical_boxes_exactly_one(self):
        box = Box3D((1.0, -2.0, 0.3), (1.7, 4.2, 1.5), 0.7)
        assert iou3d(box, box) == 1.0

    def test_offset_unit_cubes(self):
        a = Box3D((0, 0, 0), (1, 1, 1), 0.0)
        b = Box3D((0.5, 0, 0), (1, 1, 1), 0.0)
        assert iou3d(a, b) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_disjoint(self):
        a = Box3D((0, 0, 0), (1, 1, 1), 0.3)
        b = Box3D((10, 0, 0), (1, 1, 1), 0.9)
        assert iou3d(a, b) == 0.0

    def test_touching_faces_have_zero_iou(self):
        a = Box3D((0, 0, 0), (1, 1, 1), 0.0)
        b = Box3D((1.0, 0, 0), (1, 1, 1), 0.0)
        assert iou3d(a, b) == 0.0

    def test_quarter_turn_of_square_box_is_identity(self):
        a = Box3D((0, 0, 0), (2, 2, 1), 0.0)
        b = Box3D((0, 0, 0), (2, 2, 1), math.pi / 2)
        assert iou3d(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_rotated_cross(self):
        # two 1 x 3 slabs crossed at 90 deg: intersection is the 1 x 1 core
        a = Box3D((0, 0, 0), (1, 3, 1), 0.0)
        b = Box3D((0, 0, 0), (1, 3, 1), math.pi / 2)
        assert iou3d(a, b) == pytest.approx(1.0 / 5.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(30))
    def test_symmetry_range_scale(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_box(rng, 2.0), random_box(rng, 2.0)
        v = iou3d(a, b)
        assert 0.0 <= v <= 1.0
        assert iou3d(b, a) == pytest.approx(v, abs=1e-12)
        k = float(rng.uniform(0.5, 20.0))
        a_scaled = Box3D(tuple(k * c for c in a.center),
                         tuple(k * s for s in a.size), a.yaw)
        b_scaled = Box3D(tuple(k * c for c in b.center),
                         tuple(k * s for s in b.size), b.yaw)
        assert iou3d(a_scaled, b_scaled) == pytest.approx(v, abs=1e-9)

    def test_bev_variant_ignores_height(self):
        a = Box3D((0, 0, 0), (1, 1, 1), 0.0)
        b = Box3D((0, 0, 100.0), (1, 1, 1), 0.0)  # same footprint, far above
        assert iou3d(a, b) == 0.0
        assert iou_bev(a, b) == 1.0


class TestMcIou3d:
    def test_identical_boxes(self):
        box = Box3D((2, 1, 0), (1.5, 3.0, 1.2), 0.9)
        assert mc_iou3d(box, box, samples=10_000, seed=7) == 1.0

    def test_disjoint_boxes(self):
        a = Box3D((0, 0, 0), (1, 1, 1), 0.0)
        b = Box3D((25, 0, 0), (1, 1, 1), 0.0)
        assert mc_iou3d(a, b, samples=10_000, seed=7) == 0.0

    def test_offset_cubes_close_to_third(self):
        a = Box3D((0, 0, 0), (1, 1, 1), 0.0)
        b = Box3D((0.5, 0, 0), (1, 1, 1), 0.0)
        est = mc_iou3d(a, b, samples=1_000_000, seed=42)
        assert est == pytest.approx(1.0 / 3.0, abs=0.005)

    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(3)
        a, b = random_box(rng), random_box(rng)
        assert mc_iou3d(a, b, samples=50_000, seed=11) == \
            mc_iou3d(a, b, samples=50_000, seed=11)

    @pytest.mark.parametrize("seed", range(40))
    def test_oracle_agreement_sample(self, seed):
        # overlapping random pairs; full 1000-pair run lives in acceptance
        rng = np.random.default_rng(1000 + seed)
        a = random_box(rng, span=1.0)
        offset = rng.uniform(-1.5, 1.5, 3)
        b = Box3D(tuple(np.array(a.center) + offset),
                  tuple(rng.uniform(0.5, 3.0, 3)),
                  float(rng.uniform(-math.pi, math.pi)))
        exact = iou3d(a, b)
        estimate = mc_iou3d(a, b, samples=200_000, seed=seed)
        assert estimate == pytest.approx(exact, abs=0.02)
