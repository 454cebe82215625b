"""Raster containers, file I/O, cloud masking, and windowed aggregation.

Every pixel-level stage in the package runs on the three containers defined
here: single-band real rasters (``BandRaster``), complex SAR scenes
(``SlcImage``), and boolean grids (``Mask``). Grids are assumed co-registered;
there is no CRS or reprojection support.

File format
-----------
A raster on disk is a ``<name>.json`` / ``<name>.bin`` pair. The header is::

    {"width": int, "height": int, "dtype": "f32le" | "c64le",
     "pixel_size_m": float, "nodata": "nan" | number,
     "metadata": {...}}          # optional, free-form

The payload is row-major 32-bit little-endian floats; ``c64le`` payloads
interleave (re, im) pairs. In memory values are held at float64/complex128 so
downstream arithmetic is not limited by storage precision.

Nodata
------
``nodata`` is either the string ``"nan"`` (NaN samples mark invalid pixels,
the default) or a numeric sentinel. Arithmetic consumers must treat nodata
pixels as absent, never as zero; use ``BandRaster.valid_mask()`` /
``BandRaster.masked_values()``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from . import kernels
from .errors import RasterFormatError

# Sentinel-2 scene classification codes excluded by default: cloud shadow,
# medium- and high-probability cloud, thin cirrus.
SCL_CLOUD_SHADOW = 3
SCL_CLOUD_MEDIUM_PROB = 8
SCL_CLOUD_HIGH_PROB = 9
SCL_THIN_CIRRUS = 10
DEFAULT_EXCLUDED_SCL = frozenset(
    {SCL_CLOUD_SHADOW, SCL_CLOUD_MEDIUM_PROB, SCL_CLOUD_HIGH_PROB, SCL_THIN_CIRRUS}
)


@dataclass
class BandRaster:
    """Single-band raster of real samples on a square pixel grid.

    ``values`` is a (height, width) float64 array. ``nodata`` is a numeric
    sentinel flagging invalid pixels, or None meaning NaN marks them.
    """

    width: int
    height: int
    pixel_size_m: float
    values: np.ndarray
    nodata: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim == 1:
            self.values = self.values.reshape(self.height, self.width)
        if self.values.shape != (self.height, self.width):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if not self.pixel_size_m > 0:
            raise ValueError("pixel_size_m must be > 0")

    @classmethod
    def from_array(cls, values, pixel_size_m: float = 10.0, nodata: float | None = None,
                   metadata: dict | None = None) -> "BandRaster":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(arr.shape[1], arr.shape[0], pixel_size_m, arr,
                   nodata=nodata, metadata=metadata or {})

    @classmethod
    def full(cls, width: int, height: int, value: float,
             pixel_size_m: float = 10.0) -> "BandRaster":
        return cls(width, height, pixel_size_m,
                   np.full((height, width), value, dtype=np.float64))

    def valid_mask(self) -> np.ndarray:
        """Boolean grid, True where a pixel carries data."""
        valid = np.isfinite(self.values)
        if self.nodata is not None:
            valid &= self.values != self.nodata
        return valid

    def masked_values(self) -> np.ndarray:
        """float64 copy with every nodata pixel replaced by NaN."""
        if self.nodata is None:
            return self.values.copy()
        return np.where(self.valid_mask(), self.values, np.nan)


@dataclass
class SlcImage:
    """Single-look complex SAR scene.

    ``samples`` is a (height, width) complex128 array; NaN components mark
    invalid samples. Infinite components are rejected on load.
    """

    width: int
    height: int
    samples: np.ndarray
    acquisition_time: datetime
    pixel_size_m: float = 5.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.complex128)
        if self.samples.ndim == 1:
            self.samples = self.samples.reshape(self.height, self.width)
        if self.samples.shape != (self.height, self.width):
            raise ValueError(
                f"samples shape {self.samples.shape} does not match "
                f"{self.height}x{self.width}"
            )

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.samples)


@dataclass
class Mask:
    """Boolean pixel grid."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=bool)
        if self.bits.ndim == 1:
            self.bits = self.bits.reshape(self.height, self.width)
        if self.bits.shape != (self.height, self.width):
            raise ValueError(
                f"bits shape {self.bits.shape} does not match "
                f"{self.height}x{self.width}"
            )

    @classmethod
    def from_array(cls, bits) -> "Mask":
        arr = np.asarray(bits, dtype=bool)
        return cls(arr.shape[1], arr.shape[0], arr)


# ---------------------------------------------------------------------------
# File I/O


def _header_payload_paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        p = p.with_suffix("")
    return p.with_suffix(p.suffix + ".json"), p.with_suffix(p.suffix + ".bin")


def _read_header(header_path: Path) -> dict:
    if not header_path.exists():
        raise RasterFormatError(f"missing raster header: {header_path}")
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise RasterFormatError(f"unparsable raster header {header_path}: {exc}") from exc
    for key in ("width", "height", "dtype"):
        if key not in header:
            raise RasterFormatError(f"{header_path}: header missing {key!r}")
    return header


def _nodata_from_header(header: dict, header_path: Path) -> float | None:
    nodata = header.get("nodata", "nan")
    if nodata == "nan":
        return None
    if isinstance(nodata, (int, float)):
        return float(nodata)
    raise RasterFormatError(f"{header_path}: nodata must be \"nan\" or a number")


def _read_payload(payload_path: Path, count: int, header_path: Path) -> np.ndarray:
    if not payload_path.exists():
        raise RasterFormatError(f"missing raster payload: {payload_path}")
    raw = np.fromfile(payload_path, dtype="<f4")
    if raw.size != count:
        raise RasterFormatError(
            f"{payload_path}: payload holds {raw.size} samples, "
            f"header {header_path} declares {count}"
        )
    return raw


def load_band_raster(path) -> BandRaster:
    """Load a ``f32le`` band raster from a header+payload pair.

    ``path`` may name the header, the payload, or the bare stem.
    """
    header_path, payload_path = _header_payload_paths(path)
    header = _read_header(header_path)
    if header["dtype"] != "f32le":
        raise RasterFormatError(
            f"{header_path}: expected dtype f32le, got {header['dtype']!r}"
        )
    w, h = int(header["width"]), int(header["height"])
    nodata = _nodata_from_header(header, header_path)
    raw = _read_payload(payload_path, w * h, header_path)
    if np.isinf(raw).any():
        raise RasterFormatError(f"{payload_path}: infinite values are not allowed")
    if nodata is not None and np.isnan(raw).any():
        raise RasterFormatError(
            f"{payload_path}: NaN present but header declares numeric nodata"
        )
    return BandRaster(
        width=w,
        height=h,
        pixel_size_m=float(header.get("pixel_size_m", 10.0)),
        values=raw.astype(np.float64).reshape(h, w),
        nodata=nodata,
        metadata=dict(header.get("metadata", {})),
    )


def save_band_raster(raster: BandRaster, path) -> Path:
    """Write ``raster`` as a ``<stem>.json`` + ``<stem>.bin`` pair.

    Returns the header path. Payload is truncated to float32.
    """
    header_path, payload_path = _header_payload_paths(path)
    header = {
        "width": raster.width,
        "height": raster.height,
        "dtype": "f32le",
        "pixel_size_m": raster.pixel_size_m,
        "nodata": "nan" if raster.nodata is None else raster.nodata,
    }
    if raster.metadata:
        header["metadata"] = raster.metadata
    header_path.parent.mkdir(parents=True, exist_ok=True)
    header_path.write_text(json.dumps(header, sort_keys=True), encoding="utf-8")
    raster.values.astype("<f4").tofile(payload_path)
    return header_path


def load_slc(path) -> SlcImage:
    """Load a ``c64le`` SLC from a header+payload pair."""
    header_path, payload_path = _header_payload_paths(path)
    header = _read_header(header_path)
    if header["dtype"] != "c64le":
        raise RasterFormatError(
            f"{header_path}: expected dtype c64le, got {header['dtype']!r}"
        )
    w, h = int(header["width"]), int(header["height"])
    nodata = _nodata_from_header(header, header_path)
    raw = _read_payload(payload_path, 2 * w * h, header_path)
    if np.isinf(raw).any():
        raise RasterFormatError(f"{payload_path}: infinite components are not allowed")
    if nodata is not None and np.isnan(raw).any():
        raise RasterFormatError(
            f"{payload_path}: NaN present but header declares numeric nodata"
        )
    samples = raw.astype(np.float64).view(np.complex128).reshape(h, w)
    metadata = dict(header.get("metadata", {}))
    time_str = metadata.pop("acquisition_time", None)
    if time_str is None:
        raise RasterFormatError(f"{header_path}: SLC header missing acquisition_time")
    return SlcImage(
        width=w,
        height=h,
        samples=samples,
        acquisition_time=datetime.fromisoformat(time_str),
        pixel_size_m=float(header.get("pixel_size_m", 5.0)),
        metadata=metadata,
    )


def save_slc(slc: SlcImage, path) -> Path:
    header_path, payload_path = _header_payload_paths(path)
    metadata = dict(slc.metadata)
    metadata["acquisition_time"] = slc.acquisition_time.isoformat()
    header = {
        "width": slc.width,
        "height": slc.height,
        "dtype": "c64le",
        "pixel_size_m": slc.pixel_size_m,
        "nodata": "nan",
        "metadata": metadata,
    }
    header_path.parent.mkdir(parents=True, exist_ok=True)
    header_path.write_text(json.dumps(header, sort_keys=True), encoding="utf-8")
    interleaved = slc.samples.astype(np.complex64).view("<f4")
    interleaved.tofile(payload_path)
    return header_path


# ---------------------------------------------------------------------------
# Operations


def apply_scl_mask(raster: BandRaster, scl: BandRaster,
                   excluded_classes=DEFAULT_EXCLUDED_SCL) -> BandRaster:
    """Blank pixels whose scene-classification code is in ``excluded_classes``.

    Pixels with excluded codes become nodata; every other pixel is returned
    unchanged. SCL nodata pixels are not excluded.
    """
    if (scl.width, scl.height) != (raster.width, raster.height):
        raise ValueError(
            f"scl grid {scl.width}x{scl.height} does not match "
            f"raster {raster.width}x{raster.height}"
        )
    out = raster.values.copy()
    if excluded_classes:
        hit = np.isin(scl.values, list(excluded_classes)) & scl.valid_mask()
        out[hit] = np.nan if raster.nodata is None else raster.nodata
    return BandRaster(raster.width, raster.height, raster.pixel_size_m, out,
                      nodata=raster.nodata, metadata=dict(raster.metadata))


def window_mean(raster: BandRaster, window_w: int, window_h: int) -> BandRaster:
    """Block-average a raster over ``window_w`` x ``window_h`` windows.

    Output cell (i, j) is the mean of the valid pixels in the corresponding
    block; partial edge blocks average over the pixels present, and a block
    with no valid pixel becomes nodata. Output has ceil(w/window_w) x
    ceil(h/window_h) cells.
    """
    if window_w < 1 or window_h < 1:
        raise ValueError("window dimensions must be >= 1")
    if window_w > raster.width or window_h > raster.height:
        raise ValueError(
            f"window {window_w}x{window_h} exceeds raster "
            f"{raster.width}x{raster.height}"
        )
    sums, counts = kernels.block_sum_count(raster.masked_values(), window_h, window_w)
    out = np.full(sums.shape, np.nan)
    np.divide(sums, counts, out=out, where=counts > 0)
    return BandRaster(
        width=math.ceil(raster.width / window_w),
        height=math.ceil(raster.height / window_h),
        pixel_size_m=raster.pixel_size_m * window_w,
        values=out,
        nodata=None,
        metadata={"window": [window_w, window_h]},
    )
