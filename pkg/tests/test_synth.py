"""Scene generator truth, determinism, and the end-to-end detection chain."""

import json
from datetime import datetime
from pathlib import Path

import numpy as np
import pytest

from soilcopilot.errors import DataError
from soilcopilot.pipeline import DetectionConfig, detect_till_scene, load_scene
from soilcopilot.raster import load_band_raster
from soilcopilot.synth import (
    compute_truth,
    event_pair_index,
    generate_scene,
    load_scene_config,
    parse_scene_config,
)
from soilcopilot.tillage import NO_TILL, TILL

FIXTURES = Path(__file__).parent.parent / "fixtures"


def small_config(**overrides):
    raw = {
        "width_cells": 16,
        "height_cells": 12,
        "window": [10, 10],
        "seed": 7,
        "noise_coherence": 0.9,
        "tilled_coherence": 0.05,
        "acquisition_dates": ["2019-09-01", "2019-09-13", "2019-09-25",
                              "2019-10-07"],
        "fields": [
            {"name": "a", "bbox": [2, 2, 6, 7], "till_date": "2019-09-20",
             "crop_code": 1},
            {"name": "b", "bbox": [8, 9, 11, 14], "till_date": None,
             "crop_code": 2},
        ],
        "code_names": {"1": "Cotton", "2": "Grapes"},
    }
    raw.update(overrides)
    return raw


class TestConfigParsing:
    def test_round_trip_via_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(small_config()))
        cfg = load_scene_config(path)
        assert cfg.width_cells == 16 and len(cfg.regions) == 2
        assert cfg.regions[0].till_date == datetime(2019, 9, 20)

    def test_defaults_filled(self):
        cfg = parse_scene_config(small_config())
        assert cfg.baselines_m == [30.0, 30.0, 30.0]
        assert cfg.slc_pixel_size_m == 5.0

    def test_unordered_dates_rejected(self):
        raw = small_config(acquisition_dates=["2019-09-13", "2019-09-01"])
        with pytest.raises(DataError, match="strictly increasing"):
            parse_scene_config(raw)

    def test_baseline_count_mismatch(self):
        raw = small_config(baselines_m=[10.0])
        with pytest.raises(DataError, match="pairs"):
            parse_scene_config(raw)

    def test_bbox_outside_grid(self):
        raw = small_config(fields=[{"bbox": [0, 0, 20, 20]}])
        with pytest.raises(DataError, match="outside"):
            parse_scene_config(raw)

    def test_touching_regions_rejected(self):
        raw = small_config(fields=[
            {"name": "x", "bbox": [0, 0, 2, 2]},
            {"name": "y", "bbox": [0, 3, 2, 5]},
        ])
        with pytest.raises(DataError, match="touch"):
            parse_scene_config(raw)


class TestEventPairIndex:
    def test_interval_is_half_open_on_the_left(self):
        cfg = parse_scene_config(small_config())
        assert event_pair_index(cfg, datetime(2019, 9, 13)) == 0
        assert event_pair_index(cfg, datetime(2019, 9, 14)) == 1
        assert event_pair_index(cfg, datetime(2019, 9, 1)) is None
        assert event_pair_index(cfg, datetime(2019, 11, 1)) is None


class TestComputeTruth:
    def test_till_and_clean_fields(self):
        cfg = parse_scene_config(small_config())
        truth = compute_truth(cfg)
        assert truth.till[2:7, 2:8].all()
        assert truth.till.sum() == 5 * 6
        assert (truth.event_index[2:7, 2:8] == 1).all()
        by_name = {r["name"]: r for r in truth.regions}
        assert by_name["a"]["expected_label"] == "till"
        assert by_name["b"]["expected_label"] == "no_till"

    def test_not_bare_field_is_no_till(self):
        raw = small_config()
        raw["fields"][0]["bare"] = False
        truth = compute_truth(parse_scene_config(raw))
        assert not truth.till.any()
        assert "not bare at the event" in truth.regions[0]["reasons"]

    def test_thin_region_is_no_till(self):
        raw = small_config()
        raw["fields"][0]["bbox"] = [2, 2, 3, 7]  # 2 cells tall
        truth = compute_truth(parse_scene_config(raw))
        assert not truth.till.any()
        assert "thin region (road)" in truth.regions[0]["reasons"]

    def test_always_changed_is_no_till(self):
        raw = small_config()
        raw["fields"][0]["always_changed"] = True
        truth = compute_truth(parse_scene_config(raw))
        assert not truth.till.any()

    def test_gated_out_event_is_no_till(self):
        raw = small_config(baselines_m=[30.0, 150.0, 30.0])
        truth = compute_truth(parse_scene_config(raw))
        assert not truth.till.any()
        assert truth.gated_pair_indices == [0, 2]
        assert "gated out by baseline" in truth.regions[0]["reasons"][0]

    def test_event_index_counts_gated_pairs_only(self):
        raw = small_config(baselines_m=[150.0, 30.0, 30.0])
        truth = compute_truth(parse_scene_config(raw))
        # ungated event pair 1 sits at position 0 of the gated timeline
        assert (truth.event_index[2:7, 2:8] == 0).all()


class TestGenerateScene:
    def test_deterministic_outputs(self, tmp_path):
        cfg = parse_scene_config(small_config())
        a = tmp_path / "a"
        b = tmp_path / "b"
        generate_scene(cfg, a)
        generate_scene(cfg, b)
        files = sorted(p.name for p in a.iterdir())
        assert files == sorted(p.name for p in b.iterdir())
        for name in files:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_optical_bands_encode_bare_status(self, tmp_path):
        cfg = parse_scene_config(small_config())
        generate_scene(cfg, tmp_path / "s")
        swir1 = load_band_raster(tmp_path / "s" / "opt_000_swir1")
        nir = load_band_raster(tmp_path / "s" / "opt_000_nir")
        assert swir1.values[2, 2] == pytest.approx(0.4, abs=1e-7)
        assert nir.values[2, 2] == pytest.approx(0.15, abs=1e-7)
        assert swir1.values[0, 0] == pytest.approx(0.2, abs=1e-7)
        assert nir.values[0, 0] == pytest.approx(0.5, abs=1e-7)

    def test_crop_layer_and_cropland(self, tmp_path):
        cfg = parse_scene_config(small_config())
        generate_scene(cfg, tmp_path / "s")
        crop = load_band_raster(tmp_path / "s" / "crop")
        cropland = load_band_raster(tmp_path / "s" / "cropland")
        assert crop.values[2, 2] == 1.0 and crop.values[8, 9] == 2.0
        assert crop.values[0, 0] == 0.0
        assert cropland.values[2, 2] == 1.0 and cropland.values[0, 0] == 0.0

    def test_manifest_lists_all_files(self, tmp_path):
        cfg = parse_scene_config(small_config())
        manifest_path = generate_scene(cfg, tmp_path / "s")
        manifest = json.loads(manifest_path.read_text())
        assert len(manifest["acquisitions"]) == 4
        assert len(manifest["optical"]) == 4
        for entry in manifest["acquisitions"]:
            assert (tmp_path / "s" / (entry["slc"] + ".bin")).exists()


class TestDetectTillScene:
    def test_small_scene_matches_truth_exactly(self, tmp_path):
        cfg = parse_scene_config(small_config())
        generate_scene(cfg, tmp_path / "s")
        report = detect_till_scene(tmp_path / "s")
        truth = load_band_raster(tmp_path / "s" / "truth_till")
        np.testing.assert_array_equal(report.tillage.labels == TILL,
                                      truth.values == 1.0)
        assert report.pairs_total == 3 and report.pairs_used == 3

    def test_event_index_matches_truth(self, tmp_path):
        cfg = parse_scene_config(small_config())
        generate_scene(cfg, tmp_path / "s")
        report = detect_till_scene(tmp_path / "s")
        truth_event = load_band_raster(tmp_path / "s" / "truth_event")
        till = report.tillage.labels == TILL
        got = report.tillage.event_index[till]
        want = truth_event.values[till].astype(int)
        assert (np.abs(got - want) <= 1).all()

    def test_gated_pair_hides_event(self, tmp_path):
        raw = small_config(baselines_m=[30.0, 150.0, 30.0])
        generate_scene(parse_scene_config(raw), tmp_path / "s")
        report = detect_till_scene(tmp_path / "s")
        assert report.pairs_used == 2
        assert not (report.tillage.labels == TILL).any()

    def test_not_bare_field_changes_but_is_not_till(self, tmp_path):
        raw = small_config()
        raw["fields"][0]["bare"] = False
        generate_scene(parse_scene_config(raw), tmp_path / "s")
        report = detect_till_scene(tmp_path / "s")
        assert not (report.tillage.labels == TILL).any()

    def test_tillage_scale_over_cropland(self, tmp_path):
        cfg = parse_scene_config(small_config())
        generate_scene(cfg, tmp_path / "s")
        report = detect_till_scene(tmp_path / "s")
        till_cells = 5 * 6
        cropland_cells = 5 * 6 + 4 * 6
        assert report.tillage_scale == pytest.approx(till_cells / cropland_cells)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataError, match="missing scene manifest"):
            detect_till_scene(tmp_path)

    def test_all_pairs_gated_out(self, tmp_path):
        raw = small_config(baselines_m=[200.0, 200.0, 200.0])
        generate_scene(parse_scene_config(raw), tmp_path / "s")
        with pytest.raises(DataError, match="baseline gate"):
            detect_till_scene(tmp_path / "s")


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    cfg = load_scene_config(FIXTURES / "fig3_scene.json")
    out = tmp_path_factory.mktemp("fig3") / "scene"
    generate_scene(cfg, out)
    return out


class TestFig3Scenario:
    def test_till_set_equals_truth(self, scene):
        report = detect_till_scene(scene)
        truth = load_band_raster(scene / "truth_till")
        np.testing.assert_array_equal(report.tillage.labels == TILL,
                                      truth.values == 1.0)

    def test_fields_2_to_4_till_field_1_clean(self, scene):
        report = detect_till_scene(scene)
        labels = report.tillage.labels
        truth = json.loads((scene / "truth.json").read_text())
        regions = {r["name"]: r for r in truth["regions"]}
        for name, expected in (("field1", NO_TILL), ("field2", TILL),
                               ("field3", TILL), ("field4", TILL)):
            r0, c0, r1, c1 = regions[name]["bbox"]
            assert (labels[r0:r1 + 1, c0:c1 + 1] == expected).all(), name

    def test_event_dates_near_reported(self, scene):
        report = detect_till_scene(scene)
        truth = json.loads((scene / "truth.json").read_text())
        regions = {r["name"]: r for r in truth["regions"]}
        for name, expected_pair in (("field2", 2), ("field3", 2), ("field4", 5)):
            r0, c0, r1, c1 = regions[name]["bbox"]
            got = report.tillage.event_index[r0:r1 + 1, c0:c1 + 1]
            assert (np.abs(got - expected_pair) <= 1).all(), name

    def test_road_and_clutter_no_till(self, scene):
        report = detect_till_scene(scene)
        labels = report.tillage.labels
        assert (labels[26:28, 2:46] == NO_TILL).all()
        assert (labels[30:34, 36:44] == NO_TILL).all()

    def test_crosstab_rows(self, scene):
        report = detect_till_scene(scene)
        rows = {r.crop_name: r for r in report.crosstab.rows}
        assert rows["Cotton"].till_pct == pytest.approx(50.0)
        assert rows["Alfalfa"].till_pct == pytest.approx(100.0)
        assert rows["Fallow"].till_pct == pytest.approx(0.0)
        assert "code 0" in rows  # background is reported, not dropped
        for r in rows.values():
            assert r.till_pct + r.no_till_pct == pytest.approx(100.0, abs=0.01)
