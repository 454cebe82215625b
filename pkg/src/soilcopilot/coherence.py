"""Interferometric coherence estimation for repeat-pass SAR pairs.

For two zero-mean complex scenes s1 (primary) and s2 (repeat) the complex
correlation coefficient is

    gamma = E[s1 * conj(s2)] / sqrt(E[|s1|^2] * E[|s2|^2])

estimated per output cell by replacing each expectation with the mean over a
rectangular pixel window. |gamma| is the coherence magnitude in [0, 1] (1 =
unchanged scene) and arg(gamma) the interferometric phase.

Conjugation convention: the repeat scene is conjugated, so a repeat equal to
c * primary for a complex constant c yields phase -arg(c). Swapping primary
and repeat conjugates the correlation: magnitude unchanged, phase negated.

All three means run over the samples valid in BOTH scenes, which keeps the
magnitude Cauchy-Schwarz-bounded by 1 regardless of missing samples. Windows
with no valid sample, or zero signal power in either scene, yield nodata
cells rather than 0 (a 0 would read as "change" downstream).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from . import kernels
from .raster import BandRaster, SlcImage, load_band_raster, save_band_raster

# One output cell per 50 m x 50 m region at the native 5 m x 20 m pixel
# spacing of the sensor this was designed around; configurable per call.
DEFAULT_WINDOW_W = 10
DEFAULT_WINDOW_H = 20

DEFAULT_MAX_BASELINE_M = 100.0


@dataclass
class AcquisitionPair:
    """A primary/repeat SLC pair with its spatial baseline."""

    primary: SlcImage
    repeat: SlcImage
    baseline_m: float
    pair_id: str

    def __post_init__(self):
        if (self.primary.width, self.primary.height) != (self.repeat.width, self.repeat.height):
            raise ValueError(
                f"pair {self.pair_id}: primary {self.primary.width}x{self.primary.height} "
                f"vs repeat {self.repeat.width}x{self.repeat.height}"
            )
        if self.baseline_m < 0:
            raise ValueError(f"pair {self.pair_id}: baseline_m must be >= 0")
        if not self.primary.acquisition_time < self.repeat.acquisition_time:
            raise ValueError(f"pair {self.pair_id}: primary must precede repeat")


@dataclass
class CoherenceMap:
    """Coherence magnitude and phase on the window-aggregated cell grid."""

    magnitude: BandRaster
    phase: BandRaster
    window_w: int
    window_h: int
    pair_id: str
    primary_time: datetime | None = None
    repeat_time: datetime | None = None

    def valid_mask(self) -> np.ndarray:
        return self.magnitude.valid_mask()


def estimate_coherence(pair: AcquisitionPair,
                       window_w: int = DEFAULT_WINDOW_W,
                       window_h: int = DEFAULT_WINDOW_H) -> CoherenceMap:
    """Estimate coherence magnitude and phase for one acquisition pair.

    Expectations are replaced by block means over window_w x window_h pixel
    windows; the output grid has one cell per window (partial edge windows
    average the pixels present). Invalid (NaN) samples in either scene are
    excluded from all three means; all-invalid or zero-power windows become
    nodata.
    """
    if window_w < 1 or window_h < 1:
        raise ValueError("window dimensions must be >= 1")
    num, p1, p2, counts = kernels.coherence_block_sums(
        pair.primary.samples, pair.repeat.samples, window_h, window_w
    )
    den = np.sqrt(p1 * p2)
    ok = (counts > 0) & (den > 0)

    mag = np.full(num.shape, np.nan)
    np.divide(np.abs(num), den, out=mag, where=ok)
    np.minimum(mag, 1.0, out=mag)  # shave float dust above the C-S bound

    phase = np.full(num.shape, np.nan)
    phase[ok] = np.arctan2(num.imag[ok], num.real[ok])
    phase[phase == -np.pi] = np.pi

    cell_size = pair.primary.pixel_size_m * window_w
    bh, bw = num.shape
    meta = {"pair_id": pair.pair_id, "window": [window_w, window_h]}
    return CoherenceMap(
        magnitude=BandRaster(bw, bh, cell_size, mag, metadata=dict(meta)),
        phase=BandRaster(bw, bh, cell_size, phase, metadata=dict(meta)),
        window_w=window_w,
        window_h=window_h,
        pair_id=pair.pair_id,
        primary_time=pair.primary.acquisition_time,
        repeat_time=pair.repeat.acquisition_time,
    )


def gate_pairs(pairs: list[AcquisitionPair],
               max_baseline_m: float = DEFAULT_MAX_BASELINE_M) -> list[AcquisitionPair]:
    """Keep only pairs whose baseline is at most ``max_baseline_m``.

    Large baselines decorrelate imagery through viewing geometry alone, so
    they are excluded before change detection. Order is preserved.
    """
    if not max_baseline_m > 0:
        raise ValueError("max_baseline_m must be > 0")
    return [p for p in pairs if p.baseline_m <= max_baseline_m]


def save_coherence_map(cm: CoherenceMap, stem) -> tuple[Path, Path]:
    """Persist as ``<stem>.coh.{json,bin}`` and ``<stem>.phs.{json,bin}``."""
    stem = Path(stem)
    meta = {
        "pair_id": cm.pair_id,
        "window": [cm.window_w, cm.window_h],
    }
    if cm.primary_time is not None:
        meta["primary_time"] = cm.primary_time.isoformat()
    if cm.repeat_time is not None:
        meta["repeat_time"] = cm.repeat_time.isoformat()
    cm.magnitude.metadata = dict(meta, kind="coherence")
    cm.phase.metadata = dict(meta, kind="phase")
    coh = save_band_raster(cm.magnitude, stem.with_suffix(stem.suffix + ".coh"))
    phs = save_band_raster(cm.phase, stem.with_suffix(stem.suffix + ".phs"))
    return coh, phs


def load_coherence_map(stem) -> CoherenceMap:
    stem = Path(stem)
    mag = load_band_raster(stem.with_suffix(stem.suffix + ".coh"))
    phs = load_band_raster(stem.with_suffix(stem.suffix + ".phs"))
    meta = mag.metadata
    window = meta.get("window", [DEFAULT_WINDOW_W, DEFAULT_WINDOW_H])
    to_dt = lambda s: datetime.fromisoformat(s) if s else None
    return CoherenceMap(
        magnitude=mag,
        phase=phs,
        window_w=int(window[0]),
        window_h=int(window[1]),
        pair_id=str(meta.get("pair_id", "")),
        primary_time=to_dt(meta.get("primary_time")),
        repeat_time=to_dt(meta.get("repeat_time")),
    )
