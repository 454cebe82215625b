"""Synthetic SAR/optical scene generator with exact ground truth.

A scene config declares rectangular regions on a coarse cell grid (one cell
per coherence averaging window) and a timeline of acquisition dates. The
generator emits:

- one SLC per acquisition at native pixel resolution, built so that the
  population coherence of each consecutive pair equals a chosen value per
  cell (high ``noise_coherence`` for stable ground, low ``tilled_coherence``
  on the pair spanning a region's till date),
- four optical bands per date on the cell grid, using fixed band constants
  for bare vs vegetated cells,
- a crop-code layer, a cropland mask, and ground-truth rasters for the final
  expected labels and event indices under the default detection settings.

The coherence construction is sequential: with unit-variance complex Gaussian
scenes, s_{i+1} = rho_i * s_i + sqrt(1 - rho_i^2) * n makes E[s_i conj(s_{i+1})]
exactly rho_i per pixel, so each pair's coherence is controlled independently.

Truth is computed from rectangle geometry alone (regions must not touch), so
it is independent of the detector implementation: a region is till exactly
when its till date falls inside the gated pair timeline, its cells are bare,
it is not an always-changed region, and its bounding box is at least
``min_region_dim`` in both dimensions (thinner regions are roads that the
detector must relabel).

Config JSON::

    {"width_cells": int, "height_cells": int, "window": [w, h], "seed": int,
     "noise_coherence": float, "tilled_coherence": float,
     "acquisition_dates": ["YYYY-MM-DD", ...],
     "baselines_m": [float, ...],             # len(dates) - 1, default 30.0
     "fields": [{"name": str, "bbox": [r0, c0, r1, c1],   # inclusive cells
                 "till_date": "YYYY-MM-DD" | null,
                 "bare": bool,                # default true
                 "always_changed": bool,      # default false
                 "crop_code": int}, ...],
     "code_names": {"<code>": "name", ...}}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .coherence import DEFAULT_MAX_BASELINE_M
from .errors import DataError
from .raster import BandRaster, SlcImage, save_band_raster, save_slc
from .tillage import DEFAULT_MIN_REGION_DIM

# Band constants (SWIR1, blue, red, NIR). Bare gives BSI = 2/9 (above the
# 0.06 threshold); vegetated gives BSI = -0.375 (below it).
BARE_BANDS = (0.4, 0.15, 0.2, 0.15)
VEGETATED_BANDS = (0.2, 0.05, 0.05, 0.5)
BAND_NAMES = ("swir1", "blue", "red", "nir")

DEFAULT_BASELINE_M = 30.0
DEFAULT_SLC_PIXEL_SIZE_M = 5.0


@dataclass
class SceneRegion:
    name: str
    bbox: tuple[int, int, int, int]  # (min_row, min_col, max_row, max_col)
    till_date: datetime | None = None
    bare: bool = True
    always_changed: bool = False
    crop_code: int = 0

    def cells(self, shape) -> np.ndarray:
        sel = np.zeros(shape, dtype=bool)
        r0, c0, r1, c1 = self.bbox
        sel[r0:r1 + 1, c0:c1 + 1] = True
        return sel


@dataclass
class SceneConfig:
    width_cells: int
    height_cells: int
    window_w: int
    window_h: int
    seed: int
    noise_coherence: float
    tilled_coherence: float
    acquisition_dates: list[datetime]
    baselines_m: list[float]
    regions: list[SceneRegion]
    code_names: dict[int, str]
    slc_pixel_size_m: float = DEFAULT_SLC_PIXEL_SIZE_M

    @property
    def cell_shape(self) -> tuple[int, int]:
        return (self.height_cells, self.width_cells)

    @property
    def native_shape(self) -> tuple[int, int]:
        return (self.height_cells * self.window_h, self.width_cells * self.window_w)

    @property
    def cell_size_m(self) -> float:
        return self.slc_pixel_size_m * self.window_w


def load_scene_config(path) -> SceneConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"unreadable scene config {path}: {exc}") from exc
    return parse_scene_config(raw)


def parse_scene_config(raw: dict) -> SceneConfig:
    try:
        dates = [datetime.fromisoformat(d) for d in raw["acquisition_dates"]]
    except KeyError:
        raise DataError("scene config missing acquisition_dates")
    except ValueError as exc:
        raise DataError(f"bad acquisition date: {exc}") from exc
    if len(dates) < 2:
        raise DataError("scene config needs at least two acquisition dates")
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise DataError("acquisition_dates must be strictly increasing")

    n_pairs = len(dates) - 1
    baselines = [float(b) for b in raw.get("baselines_m", [DEFAULT_BASELINE_M] * n_pairs)]
    if len(baselines) != n_pairs:
        raise DataError(
            f"baselines_m has {len(baselines)} entries for {n_pairs} pairs"
        )

    width = int(raw.get("width_cells", 48))
    height = int(raw.get("height_cells", 36))
    window = raw.get("window", [10, 20])

    regions = []
    for i, f in enumerate(raw.get("fields", [])):
        bbox = tuple(int(v) for v in f["bbox"])
        if len(bbox) != 4:
            raise DataError(f"field {i}: bbox must be [min_row, min_col, max_row, max_col]")
        r0, c0, r1, c1 = bbox
        if not (0 <= r0 <= r1 < height and 0 <= c0 <= c1 < width):
            raise DataError(f"field {i}: bbox {bbox} outside {height}x{width} grid")
        till = f.get("till_date")
        regions.append(SceneRegion(
            name=str(f.get("name", f"field{i + 1}")),
            bbox=bbox,
            till_date=datetime.fromisoformat(till) if till else None,
            bare=bool(f.get("bare", True)),
            always_changed=bool(f.get("always_changed", False)),
            crop_code=int(f.get("crop_code", 0)),
        ))
    _check_regions_disjoint(regions)

    return SceneConfig(
        width_cells=width,
        height_cells=height,
        window_w=int(window[0]),
        window_h=int(window[1]),
        seed=int(raw.get("seed", 0)),
        noise_coherence=float(raw.get("noise_coherence", 0.9)),
        tilled_coherence=float(raw.get("tilled_coherence", 0.05)),
        acquisition_dates=dates,
        baselines_m=baselines,
        regions=regions,
        code_names={int(k): str(v) for k, v in raw.get("code_names", {}).items()},
        slc_pixel_size_m=float(raw.get("slc_pixel_size_m", DEFAULT_SLC_PIXEL_SIZE_M)),
    )


def _check_regions_disjoint(regions: list[SceneRegion]):
    # Truth is computed per rectangle, so regions must not touch each other
    # (touching rectangles would merge into one connected component).
    for i, a in enumerate(regions):
        for b in regions[i + 1:]:
            ar0, ac0, ar1, ac1 = a.bbox
            br0, bc0, br1, bc1 = b.bbox
            if ar0 - 1 <= br1 and br0 - 1 <= ar1 and ac0 - 1 <= bc1 and bc0 - 1 <= ac1:
                raise DataError(
                    f"regions {a.name!r} and {b.name!r} touch or overlap; "
                    "truth requires separated rectangles"
                )


def event_pair_index(cfg: SceneConfig, till_date: datetime) -> int | None:
    """Index of the consecutive pair whose interval contains the till date.

    The till happened in (date_i, date_{i+1}] for pair i; a date outside the
    timeline has no pair.
    """
    dates = cfg.acquisition_dates
    for i in range(len(dates) - 1):
        if dates[i] < till_date <= dates[i + 1]:
            return i
    return None


@dataclass
class SceneTruth:
    """Expected detector output under default settings."""

    till: np.ndarray          # bool, cell grid
    event_index: np.ndarray   # int32 index into the gated pair list, -1 none
    regions: list[dict]       # per-region summary
    gated_pair_indices: list[int]  # ungated pair index of each kept pair


def compute_truth(cfg: SceneConfig,
                  max_baseline_m: float = DEFAULT_MAX_BASELINE_M,
                  min_region_dim: int = DEFAULT_MIN_REGION_DIM) -> SceneTruth:
    shape = cfg.cell_shape
    kept = [i for i, b in enumerate(cfg.baselines_m) if b <= max_baseline_m]
    gated_pos = {ungated: pos for pos, ungated in enumerate(kept)}

    till = np.zeros(shape, dtype=bool)
    event = np.full(shape, -1, dtype=np.int32)
    summaries = []
    for region in cfg.regions:
        r0, c0, r1, c1 = region.bbox
        width, height = c1 - c0 + 1, r1 - r0 + 1
        pair = (event_pair_index(cfg, region.till_date)
                if region.till_date is not None else None)
        reasons = []
        if pair is None:
            reasons.append("no till event inside the timeline")
        elif pair not in gated_pos:
            reasons.append("event pair gated out by baseline")
        if not region.bare:
            reasons.append("not bare at the event")
        if region.always_changed:
            reasons.append("changed on every pair")
        if width < min_region_dim or height < min_region_dim:
            reasons.append("thin region (road)")
        is_till = not reasons
        if is_till:
            till[region.cells(shape)] = True
            event[region.cells(shape)] = gated_pos[pair]
        summaries.append({
            "name": region.name,
            "bbox": list(region.bbox),
            "crop_code": region.crop_code,
            "expected_label": "till" if is_till else "no_till",
            "expected_event_index": gated_pos[pair] if is_till else None,
            "till_date": (region.till_date.date().isoformat()
                          if region.till_date else None),
            "reasons": reasons,
        })
    return SceneTruth(till=till, event_index=event, regions=summaries,
                      gated_pair_indices=kept)


def _coherence_targets(cfg: SceneConfig) -> np.ndarray:
    """Per-pair, per-cell population coherence."""
    n_pairs = len(cfg.acquisition_dates) - 1
    rho = np.full((n_pairs,) + cfg.cell_shape, cfg.noise_coherence)
    for region in cfg.regions:
        sel = region.cells(cfg.cell_shape)
        if region.always_changed:
            rho[:, sel] = cfg.tilled_coherence
        elif region.till_date is not None:
            pair = event_pair_index(cfg, region.till_date)
            if pair is not None:
                rho[pair][sel] = cfg.tilled_coherence
    return rho


def generate_scene(cfg: SceneConfig, out_dir) -> Path:
    """Write the full scene to ``out_dir``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    native = cfg.native_shape

    def unit_gaussian():
        return (rng.standard_normal(native) + 1j * rng.standard_normal(native)) \
            / np.sqrt(2.0)

    rho_cells = _coherence_targets(cfg)
    # broadcast each cell's target to its window of native pixels
    rho_px = np.repeat(np.repeat(rho_cells, cfg.window_h, axis=1),
                       cfg.window_w, axis=2)

    acquisitions = []
    scene = unit_gaussian()
    for i, date in enumerate(cfg.acquisition_dates):
        if i > 0:
            r = rho_px[i - 1]
            scene = r * scene + np.sqrt(1.0 - r * r) * unit_gaussian()
        name = f"slc_{i:03d}"
        save_slc(SlcImage(native[1], native[0], scene, date,
                          pixel_size_m=cfg.slc_pixel_size_m), out / name)
        acquisitions.append({"time": date.isoformat(), "slc": name})

    bare_cells = np.zeros(cfg.cell_shape, dtype=bool)
    for region in cfg.regions:
        if region.bare:
            bare_cells[region.cells(cfg.cell_shape)] = True

    optical = []
    for i, date in enumerate(cfg.acquisition_dates):
        entry = {"time": date.isoformat()}
        for bi, band in enumerate(BAND_NAMES):
            vals = np.where(bare_cells, BARE_BANDS[bi], VEGETATED_BANDS[bi])
            name = f"opt_{i:03d}_{band}"
            save_band_raster(
                BandRaster(cfg.width_cells, cfg.height_cells, cfg.cell_size_m, vals),
                out / name,
            )
            entry[band] = name
        optical.append(entry)

    crop = np.zeros(cfg.cell_shape)
    cropland = np.zeros(cfg.cell_shape, dtype=bool)
    for region in cfg.regions:
        sel = region.cells(cfg.cell_shape)
        crop[sel] = region.crop_code
        cropland[sel] = True
    save_band_raster(
        BandRaster(cfg.width_cells, cfg.height_cells, cfg.cell_size_m, crop),
        out / "crop",
    )
    save_band_raster(
        BandRaster(cfg.width_cells, cfg.height_cells, cfg.cell_size_m,
                   cropland.astype(float)),
        out / "cropland",
    )

    truth = compute_truth(cfg)
    save_band_raster(
        BandRaster(cfg.width_cells, cfg.height_cells, cfg.cell_size_m,
                   truth.till.astype(float)),
        out / "truth_till",
    )
    save_band_raster(
        BandRaster(cfg.width_cells, cfg.height_cells, cfg.cell_size_m,
                   truth.event_index.astype(float)),
        out / "truth_event",
    )
    (out / "truth.json").write_text(
        json.dumps({"regions": truth.regions,
                    "gated_pair_indices": truth.gated_pair_indices},
                   indent=2, sort_keys=True),
        encoding="utf-8",
    )

    manifest = {
        "kind": "synthetic_scene",
        "width_cells": cfg.width_cells,
        "height_cells": cfg.height_cells,
        "window": [cfg.window_w, cfg.window_h],
        "slc_pixel_size_m": cfg.slc_pixel_size_m,
        "acquisitions": acquisitions,
        "baselines_m": cfg.baselines_m,
        "optical": optical,
        "crop_layer": "crop",
        "cropland_mask": "cropland",
        "code_names": {str(k): v for k, v in cfg.code_names.items()},
        "truth": {"till": "truth_till", "event_index": "truth_event",
                  "summary": "truth.json"},
    }
    manifest_path = out / "scene.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True),
                             encoding="utf-8")
    return manifest_path
