"""Till/no-till classification from coherence time series gated by bare soil.

The chain is: Bare Soil Index from four optical bands, a bare mask per optical
date, per-pair change flags from coherence magnitude, then per-pixel labels.
A pixel is tilled when some pair shows change while the soil was bare, with
two false-positive rules on top: pixels that change on every pair are treated
as permanently-varying clutter and labeled no_till, and 4-connected till
components thinner than a minimum bounding-box dimension are treated as roads
and relabeled no_till.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from . import kernels
from .coherence import CoherenceMap
from .errors import DataError
from .raster import BandRaster, Mask

# BsiRaster is a BandRaster of Bare Soil Index values; valid cells lie in
# [-1, 1] whenever the input bands are nonnegative and the denominator > 0.
BsiRaster = BandRaster

BSI_EPS = 1e-6
DEFAULT_BSI_THRESHOLD = 0.06
DEFAULT_CHANGE_THRESHOLD = 0.3
DEFAULT_MIN_REGION_DIM = 3
DEFAULT_BARE_LOOKBACK_DAYS = 20

NODATA = -1
NO_TILL = 0
TILL = 1


def compute_bsi(swir1: BandRaster, blue: BandRaster, red: BandRaster,
                nir: BandRaster) -> BsiRaster:
    """Bare Soil Index: (SWIR1 + blue - (red + NIR)) / (SWIR1 + blue + red + NIR).

    Any nodata input pixel, or a denominator at or below ``BSI_EPS``, yields a
    nodata output pixel.
    """
    bands = (swir1, blue, red, nir)
    dims = {(b.width, b.height) for b in bands}
    if len(dims) != 1:
        raise ValueError(f"band dimensions differ: {sorted(dims)}")
    s, b, r, n = (x.masked_values() for x in bands)
    num = s + b - (r + n)
    den = s + b + r + n
    out = np.full(num.shape, np.nan)
    np.divide(num, den, out=out, where=den > BSI_EPS)
    return BandRaster(swir1.width, swir1.height, swir1.pixel_size_m, out,
                      metadata={"index": "bsi"})


def bare_soil_mask(bsi: BsiRaster, threshold: float = DEFAULT_BSI_THRESHOLD) -> Mask:
    """True exactly where valid BSI is strictly above ``threshold``."""
    if not np.isfinite(threshold):
        raise ValueError("threshold must be finite")
    bits = np.where(bsi.valid_mask(), bsi.masked_values() > threshold, False)
    return Mask(bsi.width, bsi.height, bits)


@dataclass
class BareObservation:
    """A cloud-free bare mask for one optical acquisition date."""

    time: datetime
    mask: Mask


@dataclass
class ChangeSeries:
    """Per-pixel change and bare flags over a shared pair timeline.

    ``changed``, ``bare``, ``observed`` are (n_pairs, height, width) boolean
    stacks; ``observed`` is False where the coherence cell was nodata (those
    cells are never ``changed``).
    """

    pair_ids: list[str]
    repeat_times: list[datetime]
    changed: np.ndarray
    bare: np.ndarray
    observed: np.ndarray
    pixel_size_m: float

    def __post_init__(self):
        n = len(self.pair_ids)
        for name in ("changed", "bare", "observed"):
            stack = getattr(self, name)
            if stack.shape[0] != n:
                raise ValueError(f"{name} stack has {stack.shape[0]} layers, "
                                 f"timeline has {n} pairs")

    @property
    def n_pairs(self) -> int:
        return len(self.pair_ids)


def detect_change_events(coh_series: list[CoherenceMap],
                         change_threshold: float = DEFAULT_CHANGE_THRESHOLD,
                         bare_series: list[BareObservation] | None = None,
                         lookback_days: int = DEFAULT_BARE_LOOKBACK_DAYS) -> ChangeSeries:
    """Flag per-pixel change per pair and attach bare status from optical data.

    A cell changed when its coherence magnitude is below ``change_threshold``
    (nodata coherence is never a change). Bare status for a pair comes from
    the most recent bare observation at or before the pair's repeat time and
    at most ``lookback_days`` older; with no such observation the pair is not
    bare anywhere, which errs toward fewer till positives.
    """
    if not coh_series:
        raise ValueError("empty coherence series")
    if not np.isfinite(change_threshold):
        raise ValueError("change_threshold must be finite")
    shape = coh_series[0].magnitude.values.shape
    for cm in coh_series:
        if cm.magnitude.values.shape != shape:
            raise ValueError(
                f"pair {cm.pair_id!r} grid {cm.magnitude.values.shape} "
                f"does not match {shape}"
            )
        if cm.repeat_time is None:
            raise ValueError(f"pair {cm.pair_id!r} is missing its repeat time")
    times = [cm.repeat_time for cm in coh_series]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("coherence series must be in strictly increasing time order")

    bare_series = sorted(bare_series or [], key=lambda o: o.time)
    for obs in bare_series:
        if obs.mask.bits.shape != shape:
            raise ValueError(
                f"bare mask at {obs.time.isoformat()} grid {obs.mask.bits.shape} "
                f"does not match {shape}"
            )

    n = len(coh_series)
    changed = np.zeros((n,) + shape, dtype=bool)
    bare = np.zeros((n,) + shape, dtype=bool)
    observed = np.zeros((n,) + shape, dtype=bool)
    horizon = timedelta(days=lookback_days)
    for i, cm in enumerate(coh_series):
        valid = cm.valid_mask()
        observed[i] = valid
        changed[i] = valid & (cm.magnitude.values < change_threshold)
        chosen = None
        for obs in bare_series:
            if obs.time <= cm.repeat_time and cm.repeat_time - obs.time <= horizon:
                chosen = obs
        if chosen is not None:
            bare[i] = chosen.mask.bits
    return ChangeSeries(
        pair_ids=[cm.pair_id for cm in coh_series],
        repeat_times=list(times),
        changed=changed,
        bare=bare,
        observed=observed,
        pixel_size_m=coh_series[0].magnitude.pixel_size_m,
    )


@dataclass
class TillageMap:
    """Per-pixel labels: -1 nodata, 0 no_till, 1 till.

    ``event_index`` holds the timeline index of the first changed-while-bare
    pair for till pixels (-1 elsewhere); ``repeat_times`` maps an index to the
    detected event date.
    """

    labels: np.ndarray
    pixel_size_m: float
    year: int | None = None
    event_index: np.ndarray | None = None
    pair_ids: list[str] = field(default_factory=list)
    repeat_times: list[datetime] = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int8)
        bad = ~np.isin(self.labels, (NODATA, NO_TILL, TILL))
        if bad.any():
            raise ValueError("labels must be -1 (nodata), 0 (no_till), or 1 (till)")

    def event_time(self, row: int, col: int) -> datetime | None:
        if self.event_index is None:
            return None
        idx = int(self.event_index[row, col])
        return self.repeat_times[idx] if idx >= 0 else None

    def to_band_raster(self) -> BandRaster:
        """Labels as a raster: 0 = no_till, 1 = till, nodata elsewhere."""
        vals = self.labels.astype(np.float64)
        vals[self.labels == NODATA] = np.nan
        meta = {"labels": {"no_till": 0, "till": 1}}
        if self.year is not None:
            meta["year"] = self.year
        return BandRaster(self.labels.shape[1], self.labels.shape[0],
                          self.pixel_size_m, vals, metadata=meta)


def classify_tillage(events: ChangeSeries, year: int | None = None) -> TillageMap:
    """Label each pixel till/no_till/nodata from its change series.

    A pixel is till when some pair is changed while bare, unless every pair in
    the series is changed (permanent variation is presumed a false positive).
    A pixel with no valid coherence observation on any pair is nodata. The
    detected event is the first changed-while-bare pair.
    """
    if events.n_pairs == 0:
        raise ValueError("empty timeline")
    hit = events.changed & events.bare
    any_hit = hit.any(axis=0)
    all_changed = events.changed.all(axis=0)
    ever_observed = events.observed.any(axis=0)

    labels = np.where(any_hit & ~all_changed, TILL, NO_TILL).astype(np.int8)
    labels[~ever_observed] = NODATA

    event_index = np.where(hit.any(axis=0), hit.argmax(axis=0), -1).astype(np.int32)
    event_index[labels != TILL] = -1
    return TillageMap(
        labels=labels,
        pixel_size_m=events.pixel_size_m,
        year=year,
        event_index=event_index,
        pair_ids=list(events.pair_ids),
        repeat_times=list(events.repeat_times),
    )


def remove_thin_regions(tmap: TillageMap,
                        min_dim: int = DEFAULT_MIN_REGION_DIM) -> TillageMap:
    """Relabel road-like till components as no_till.

    A 4-connected till component whose bounding box is narrower or shorter
    than ``min_dim`` pixels is assumed to be a road. Everything else is
    unchanged; the operation is idempotent.
    """
    if min_dim < 1:
        raise ValueError("min_dim must be >= 1")
    labels = tmap.labels.copy()
    comp_labels, bboxes = kernels.label_regions(labels == TILL)
    event_index = None if tmap.event_index is None else tmap.event_index.copy()
    for i, (r0, c0, r1, c1) in enumerate(bboxes):
        if (c1 - c0 + 1) < min_dim or (r1 - r0 + 1) < min_dim:
            member = comp_labels == i
            labels[member] = NO_TILL
            if event_index is not None:
                event_index[member] = -1
    return TillageMap(
        labels=labels,
        pixel_size_m=tmap.pixel_size_m,
        year=tmap.year,
        event_index=event_index,
        pair_ids=list(tmap.pair_ids),
        repeat_times=list(tmap.repeat_times),
    )


@dataclass
class CrossTabRow:
    crop_name: str
    till_pct: float
    no_till_pct: float
    pixel_count: int


@dataclass
class CrossTab:
    """Per-crop till/no-till percentage summary over classified pixels."""

    rows: list[CrossTabRow]

    def to_csv(self) -> str:
        lines = ["crop_name,till_pct,no_till_pct"]
        for row in self.rows:
            lines.append(f"{row.crop_name},{row.till_pct:.2f},{row.no_till_pct:.2f}")
        return "\n".join(lines) + "\n"


def crop_crosstab(tmap: TillageMap, crop_layer: BandRaster,
                  code_names: dict[int, str] | None = None) -> CrossTab:
    """Summarize till percentage per crop code.

    Only classified pixels (till or no_till) with a valid crop code count.
    Codes missing from ``code_names`` keep a "code <n>" placeholder rather
    than being dropped. Rows are sorted by descending pixel count, then name.
    """
    if crop_layer.values.shape != tmap.labels.shape:
        raise ValueError(
            f"crop layer grid {crop_layer.values.shape} does not match "
            f"tillage grid {tmap.labels.shape}"
        )
    code_names = code_names or {}
    classified = (tmap.labels != NODATA) & crop_layer.valid_mask()
    codes = crop_layer.values[classified].astype(np.int64)
    tilled = (tmap.labels == TILL)[classified]

    rows = []
    for code in np.unique(codes):
        member = codes == code
        total = int(member.sum())
        till = int((member & tilled).sum())
        name = code_names.get(int(code), f"code {int(code)}")
        rows.append(CrossTabRow(
            crop_name=name,
            till_pct=100.0 * till / total,
            no_till_pct=100.0 * (total - till) / total,
            pixel_count=total,
        ))
    rows.sort(key=lambda r: (-r.pixel_count, r.crop_name))
    return CrossTab(rows)


def county_tillage_scale(tmap: TillageMap, county_mask: Mask,
                         cropland_mask: Mask) -> float:
    """Fraction of the county's cropland pixels labeled till, in [0, 1]."""
    if county_mask.bits.shape != tmap.labels.shape:
        raise ValueError("county mask does not match tillage grid")
    if cropland_mask.bits.shape != tmap.labels.shape:
        raise ValueError("cropland mask does not match tillage grid")
    scope = county_mask.bits & cropland_mask.bits
    denom = int(scope.sum())
    if denom == 0:
        raise DataError("county and cropland masks do not intersect")
    till = int((scope & (tmap.labels == TILL)).sum())
    return till / denom
