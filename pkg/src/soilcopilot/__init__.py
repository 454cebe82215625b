"""SAR-coherence tillage detection and a county soil-health copilot."""

__version__ = "0.1.0"

from .raster import BandRaster, Mask, SlcImage  # noqa: F401
