"""End-to-end tillage detection over a scene directory.

A scene is a directory with a ``scene.json`` manifest naming SLC acquisitions
(with per-consecutive-pair baselines), per-date optical bands on the coherence
cell grid, a crop-code layer, and a cropland mask. ``detect_till_scene`` runs
the whole chain: pair formation, baseline gating, coherence estimation, BSI
bare masks, change classification, and road removal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .coherence import (
    DEFAULT_MAX_BASELINE_M,
    DEFAULT_WINDOW_H,
    DEFAULT_WINDOW_W,
    AcquisitionPair,
    CoherenceMap,
    estimate_coherence,
    gate_pairs,
)
from .errors import DataError
from .raster import BandRaster, Mask, load_band_raster, load_slc
from .tillage import (
    DEFAULT_BARE_LOOKBACK_DAYS,
    DEFAULT_BSI_THRESHOLD,
    DEFAULT_CHANGE_THRESHOLD,
    DEFAULT_MIN_REGION_DIM,
    BareObservation,
    CrossTab,
    TillageMap,
    bare_soil_mask,
    classify_tillage,
    compute_bsi,
    crop_crosstab,
    county_tillage_scale,
    detect_change_events,
    remove_thin_regions,
)


@dataclass
class DetectionConfig:
    change_threshold: float = DEFAULT_CHANGE_THRESHOLD
    bsi_threshold: float = DEFAULT_BSI_THRESHOLD
    max_baseline_m: float = DEFAULT_MAX_BASELINE_M
    min_region_dim: int = DEFAULT_MIN_REGION_DIM
    lookback_days: int = DEFAULT_BARE_LOOKBACK_DAYS
    window_w: int = DEFAULT_WINDOW_W
    window_h: int = DEFAULT_WINDOW_H


@dataclass
class Scene:
    """Loaded scene inputs."""

    directory: Path
    manifest: dict
    window_w: int
    window_h: int

    def acquisition_entries(self) -> list[dict]:
        return list(self.manifest.get("acquisitions", []))

    def optical_entries(self) -> list[dict]:
        return list(self.manifest.get("optical", []))

    def code_names(self) -> dict[int, str]:
        return {int(k): str(v) for k, v in self.manifest.get("code_names", {}).items()}


def load_scene(directory) -> Scene:
    directory = Path(directory)
    manifest_path = directory / "scene.json"
    if not manifest_path.exists():
        raise DataError(f"missing scene manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"unparsable scene manifest {manifest_path}: {exc}") from exc
    acquisitions = manifest.get("acquisitions", [])
    if len(acquisitions) < 2:
        raise DataError("scene needs at least two SLC acquisitions")
    baselines = manifest.get("baselines_m", [])
    if len(baselines) != len(acquisitions) - 1:
        raise DataError(
            f"scene declares {len(acquisitions)} acquisitions but "
            f"{len(baselines)} pair baselines"
        )
    window = manifest.get("window", [DEFAULT_WINDOW_W, DEFAULT_WINDOW_H])
    return Scene(directory=directory, manifest=manifest,
                 window_w=int(window[0]), window_h=int(window[1]))


@dataclass
class TillageReport:
    tillage: TillageMap
    crosstab: CrossTab | None
    pairs_total: int
    pairs_used: int
    tillage_scale: float | None = None

    def summary(self) -> dict:
        labels = self.tillage.labels
        out = {
            "pairs_total": self.pairs_total,
            "pairs_used": self.pairs_used,
            "till_pixels": int((labels == 1).sum()),
            "no_till_pixels": int((labels == 0).sum()),
            "nodata_pixels": int((labels == -1).sum()),
        }
        if self.tillage_scale is not None:
            out["tillage_scale"] = self.tillage_scale
        return out


def form_pairs(scene: Scene) -> list[AcquisitionPair]:
    """Consecutive acquisitions paired in time order, tagged with baselines."""
    entries = scene.acquisition_entries()
    slcs = [load_slc(scene.directory / e["slc"]) for e in entries]
    times = [s.acquisition_time for s in slcs]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise DataError("scene acquisitions must be in strictly increasing time order")
    baselines = scene.manifest["baselines_m"]
    pairs = []
    for i in range(len(slcs) - 1):
        pair_id = f"{times[i].date().isoformat()}:{times[i + 1].date().isoformat()}"
        pairs.append(AcquisitionPair(slcs[i], slcs[i + 1],
                                     float(baselines[i]), pair_id))
    return pairs


def bare_observations(scene: Scene, bsi_threshold: float,
                      expected_shape: tuple[int, int]) -> list[BareObservation]:
    obs = []
    for entry in scene.optical_entries():
        time = datetime.fromisoformat(entry["time"])
        bands = [load_band_raster(scene.directory / entry[b])
                 for b in ("swir1", "blue", "red", "nir")]
        bsi = compute_bsi(*bands)
        if bsi.values.shape != expected_shape:
            raise DataError(
                f"optical grid {bsi.values.shape} does not match "
                f"coherence cell grid {expected_shape}"
            )
        obs.append(BareObservation(time, bare_soil_mask(bsi, bsi_threshold)))
    return obs


def detect_till_scene(scene_dir, config: DetectionConfig | None = None,
                      year: int | None = None) -> TillageReport:
    """Run the full detection chain over a scene directory."""
    config = config or DetectionConfig()
    scene = load_scene(scene_dir)
    window_w = scene.window_w or config.window_w
    window_h = scene.window_h or config.window_h

    pairs = form_pairs(scene)
    gated = gate_pairs(pairs, config.max_baseline_m)
    if not gated:
        raise DataError("no acquisition pair survives the baseline gate")
    coh_maps: list[CoherenceMap] = [
        estimate_coherence(p, window_w, window_h) for p in gated
    ]
    cell_shape = coh_maps[0].magnitude.values.shape

    bares = bare_observations(scene, config.bsi_threshold, cell_shape)
    events = detect_change_events(coh_maps, config.change_threshold, bares,
                                  config.lookback_days)
    tmap = remove_thin_regions(classify_tillage(events, year=year),
                               config.min_region_dim)

    crosstab = None
    scale = None
    if scene.manifest.get("crop_layer"):
        crop = load_band_raster(scene.directory / scene.manifest["crop_layer"])
        crosstab = crop_crosstab(tmap, crop, scene.code_names())
    if scene.manifest.get("cropland_mask"):
        cropland_raster = load_band_raster(
            scene.directory / scene.manifest["cropland_mask"])
        cropland = Mask(cropland_raster.width, cropland_raster.height,
                        cropland_raster.values > 0.5)
        county = Mask(cropland.width, cropland.height,
                      np.ones_like(cropland.bits))
        scale = county_tillage_scale(tmap, county, cropland)

    return TillageReport(
        tillage=tmap,
        crosstab=crosstab,
        pairs_total=len(pairs),
        pairs_used=len(gated),
        tillage_scale=scale,
    )
