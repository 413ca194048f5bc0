import csv
import json

import pytest

from dqav.cli import main, parse_sweep
from dqav.dataset import load_manifest, load_points

from conftest import rig_json


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "ds"
    code = main(["synth", "--out", str(out), "--seed", "7", "--frames", "6",
                 "--objects", "2:4", "--shared-prob", "0.7", "--images"])
    assert code == 0
    return out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestParseSweep:
    def test_unit_interval_fifths(self):
        assert parse_sweep("0.0:1.0:0.2") == [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]

    def test_single_value(self):
        assert parse_sweep("5:5:1") == [5.0]

    def test_bad_spec(self):
        for bad in ("1:0:0.1", "0:1:0", "0:1", "a:b:c"):
            with pytest.raises(ValueError):
                parse_sweep(bad)


class TestPairs:
    def test_published_rig(self, tmp_path, rig, capsys):
        (tmp_path / "manifest.json").write_text(json.dumps(rig_json(rig)))
        assert main(["pairs", "--rig", str(tmp_path)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 7  # header + six pairs
        widths = sorted(float(line.split(",")[4]) for line in lines[1:])
        assert widths == pytest.approx([15.0] * 4 + [20.0] * 2, abs=1e-9)

    def test_single_camera_rig(self, tmp_path, capsys):
        from conftest import make_camera, make_rig
        rig = make_rig(make_camera("ONLY"))
        (tmp_path / "manifest.json").write_text(json.dumps(rig_json(rig)))
        assert main(["pairs", "--rig", str(tmp_path)]) == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 1

    def test_malformed_rig_exits_2(self, tmp_path, capsys):
        (tmp_path / "manifest.json").write_text("{oops")
        assert main(["pairs", "--rig", str(tmp_path)]) == 2
        assert "error" in capsys.readouterr().err

    def test_missing_rig_exits_2(self, tmp_path):
        assert main(["pairs", "--rig", str(tmp_path / "nope")]) == 2


class TestSimilarity:
    def test_csv_written(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "sim.csv"
        assert main(["similarity", "--dataset", str(synth_dir),
                     "--out", str(out), "--jobs", "2"]) == 0
        rows = read_csv(out)
        assert rows[0] == ["frame_id", "pair", "cosine", "has_redundant",
                           "groups", "removed@tau"]
        assert len(rows) == 1 + 6 * 6  # six frames x six pairs

    def test_pair_filter(self, synth_dir, tmp_path):
        out = tmp_path / "sim.csv"
        assert main(["similarity", "--dataset", str(synth_dir), "--out", str(out),
                     "--pair", "CAM_FRONT:CAM_FRONT_LEFT"]) == 0
        rows = read_csv(out)[1:]
        assert {r[1] for r in rows} == {"CAM_FRONT|CAM_FRONT_LEFT"}

    def test_unknown_pair_exits_1(self, synth_dir, tmp_path):
        assert main(["similarity", "--dataset", str(synth_dir),
                     "--out", str(tmp_path / "x.csv"),
                     "--pair", "CAM_FRONT:CAM_BACK"]) == 1


class TestPruneBcs:
    def test_sweep_writes_six_variants(self, synth_dir, tmp_path):
        out = tmp_path / "variants"
        assert main(["prune-bcs", "--dataset", str(synth_dir),
                     "--sweep", "0.0:1.0:0.2", "--out", str(out)]) == 0
        variant_dirs = sorted(p.name for p in out.iterdir() if p.is_dir())
        assert variant_dirs == ["tau_0", "tau_0.2", "tau_0.4", "tau_0.6",
                                "tau_0.8", "tau_1"]
        assert (out / "retention.csv").is_file()
        rows = read_csv(out / "retention.csv")
        kept = [int(r[1]) for r in rows[1:]]
        assert kept == sorted(kept)

    def test_tau_one_variant_equals_input(self, synth_dir, tmp_path):
        out = tmp_path / "variants"
        main(["prune-bcs", "--dataset", str(synth_dir),
              "--sweep", "0.0:1.0:0.2", "--out", str(out)])
        original = load_manifest(synth_dir)
        variant = load_manifest(out / "tau_1")
        assert variant.frames == original.frames
        assert variant.rig == original.rig

    def test_single_tau_writes_one_variant(self, synth_dir, tmp_path):
        out = tmp_path / "pruned"
        assert main(["prune-bcs", "--dataset", str(synth_dir),
                     "--tau", "0.0", "--out", str(out)]) == 0
        pruned = load_manifest(out)
        original = load_manifest(synth_dir)
        n = lambda m: sum(len(v.annotations) for f in m.frames
                          for v in f.camera_views.values())
        assert n(pruned) <= n(original)
        assert pruned.meta["bcs_tau"] == "0.0"

    def test_needs_tau_or_sweep(self, synth_dir, tmp_path):
        assert main(["prune-bcs", "--dataset", str(synth_dir),
                     "--out", str(tmp_path / "x")]) == 1


class TestMmRedundancy:
    def test_rows_per_frame(self, synth_dir, tmp_path):
        out = tmp_path / "rr.csv"
        assert main(["mm-redundancy", "--dataset", str(synth_dir),
                     "--theta", "0.5", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == ["frame_id", "rr", "matched", "base_boxes",
                           "lidar_boxes"]
        assert len(rows) == 1 + 6

    def test_hand_example_formats_to_4dp(self, tmp_path):
        base = [{"frame_id": "f0", "source": "base", "boxes": [
            {"center": [0, 0, 0], "size": [1, 1, 1], "yaw": 0},
            {"center": [10, 0, 0], "size": [1, 1, 1], "yaw": 0},
            {"center": [20, 0, 0], "size": [1, 1, 1], "yaw": 0},
        ]}]
        lidar = [{"frame_id": "f0", "source": "lidar_only", "boxes": [
            {"center": [0, 0, 0], "size": [1, 1, 1], "yaw": 0},
            {"center": [10.25, 0, 0], "size": [1, 1, 1], "yaw": 0},
        ]}]
        (tmp_path / "base.json").write_text(json.dumps(base))
        (tmp_path / "lidar.json").write_text(json.dumps(lidar))
        out = tmp_path / "rr.csv"
        assert main(["mm-redundancy", "--base", str(tmp_path / "base.json"),
                     "--lidar", str(tmp_path / "lidar.json"),
                     "--theta", "0.5", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[1] == ["f0", "0.6667", "2", "3", "2"]


class TestPruneDistance:
    def test_t_zero_keeps_everything(self, synth_dir, tmp_path):
        out = tmp_path / "pruned"
        assert main(["prune-distance", "--dataset", str(synth_dir),
                     "--t-dist", "0", "--out", str(out)]) == 0
        original = load_manifest(synth_dir)
        pruned = load_manifest(out)
        assert pruned.frames == original.frames
        for orig_frame, new_frame in zip(original.frames, pruned.frames):
            assert (load_points(new_frame.lidar_view) ==
                    load_points(orig_frame.lidar_view)).all()

    def test_large_t_removes_all_boxes(self, synth_dir, tmp_path):
        out = tmp_path / "pruned"
        assert main(["prune-distance", "--dataset", str(synth_dir),
                     "--t-dist", "1e9", "--out", str(out)]) == 0
        pruned = load_manifest(out)
        assert all(len(f.lidar_view.annotations) == 0 for f in pruned.frames)
        assert all(len(load_points(f.lidar_view)) == 0 for f in pruned.frames)

    def test_sweep_csv(self, synth_dir, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["prune-distance", "--dataset", str(synth_dir),
                     "--sweep", "0:100:25", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == ["t_dist", "boxes_retained", "points_retained",
                           "lost_ratio", "rr"]
        lost = [float(r[3]) for r in rows[1:]]
        assert lost[0] == 0.0
        assert lost == sorted(lost)


class TestTtest:
    def test_runs_on_synth_detections(self, synth_dir, tmp_path):
        out = tmp_path / "ttest.json"
        code = main(["ttest", "--dataset", str(synth_dir), "--out", str(out)])
        payload = json.loads(out.read_text())
        assert payload["mode"] == "matched"
        if code == 0:
            assert 0.0 < payload["p_value"] <= 1.0
        else:
            assert payload["error"] is not None

    def test_needs_detections(self, tmp_path, rig):
        (tmp_path / "manifest.json").write_text(json.dumps(rig_json(rig)))
        (tmp_path / "frames.jsonl").write_text("")
        assert main(["ttest", "--dataset", str(tmp_path),
                     "--out", str(tmp_path / "t.json")]) == 1


class TestReport:
    def test_report_structure(self, synth_dir, tmp_path):
        out = tmp_path / "report.json"
        assert main(["report", "--dataset", str(synth_dir),
                     "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert payload["frames"] == 6
        assert {t["dimension"] for t in payload["tags"]} <= {
            "completeness", "consistency", "correctness", "noise_level",
            "redundancy", "relevance", "timeliness"}
        assert "redundancy" in {t["dimension"] for t in payload["tags"]}
        taus = [row["tau"] for row in payload["bcs_sweep"]]
        assert taus == [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
        # every frame appears exactly once per frame-level table
        frame_ids = sorted(f"frame_{i:04d}" for i in range(6))
        rr_frames = sorted(r["frame_id"] for r in payload["multimodal"]["rr_rows"])
        assert rr_frames == frame_ids
        sim_frames = {r["frame_id"] for r in payload["similarity"]["rows"]}
        assert sim_frames == set(frame_ids)

    def test_byte_identical_reruns(self, synth_dir, tmp_path):
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        assert main(["report", "--dataset", str(synth_dir), "--out",
                     str(out_a), "--jobs", "4"]) == 0
        assert main(["report", "--dataset", str(synth_dir), "--out",
                     str(out_b), "--jobs", "1"]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()


class TestSynthCommand:
    def test_deterministic_across_runs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["synth", "--out", str(out), "--seed", "3",
                         "--frames", "3"]) == 0
        for rel in ("manifest.json", "frames.jsonl", "detections_base.json",
                    "detections_lidar.json", "ground_truth.json"):
            assert (a / rel).read_bytes() == (b / rel).read_bytes()

    def test_bad_spec_exits_1(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path / "x"),
                     "--shared-prob", "2.0"]) == 1
