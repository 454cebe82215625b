"""County-keyed store for SOC, drought, wildfire, crop, tillage, and farm data.

Backed by an embedded sqlite database (in-memory by default, or a file).
Counties are keyed by a canonical form: lowercased, whitespace-collapsed,
with a trailing " county" stripped, so "Marin", "marin" and "Marin County"
resolve to the same record. Ingestion is idempotent: re-reading the same CSV
replaces rather than duplicates rows.

Unknown county and empty data are distinct: queries raise ``CountyNotFound``
only when the county appears in no table at all; a known county with no rows
of the requested kind returns an empty list (or raises ``NoTillageData`` for
the scalar tillage value).
"""

from __future__ import annotations

import csv
import sqlite3
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CountyNotFound, DataError, NoTillageData, SchemaError
from .raster import BandRaster, Mask

DROUGHT_CATEGORIES = ("D0", "D1", "D2", "D3", "D4")

CSV_SCHEMAS = {
    "soc": ["county", "soc_2016_pct", "soc_2023_pct"],
    "drought": ["county", "year_start", "year_end", "category"],
    "wildfire": ["county", "year", "incident_name", "acres"],
    "crops": ["county", "year", "crop_name", "area_fraction"],
    "tillage": ["county", "year", "tillage_scale"],
    "farms": ["farm_name", "county", "practice", "year_implemented",
              "funding_status"],
}

_TABLES = """
CREATE TABLE IF NOT EXISTS counties (
    key TEXT PRIMARY KEY,
    display_name TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS soc (
    county_key TEXT PRIMARY KEY,
    soc_2016_pct REAL NOT NULL,
    soc_2023_pct REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS drought (
    county_key TEXT NOT NULL,
    year_start INTEGER NOT NULL,
    year_end INTEGER NOT NULL,
    category TEXT NOT NULL,
    PRIMARY KEY (county_key, year_start, year_end, category)
);
CREATE TABLE IF NOT EXISTS wildfire (
    county_key TEXT NOT NULL,
    year INTEGER NOT NULL,
    incident_name TEXT NOT NULL,
    acres REAL,
    PRIMARY KEY (county_key, year, incident_name)
);
CREATE TABLE IF NOT EXISTS crops (
    county_key TEXT NOT NULL,
    year INTEGER NOT NULL,
    crop_name TEXT NOT NULL,
    area_fraction REAL,
    PRIMARY KEY (county_key, year, crop_name)
);
CREATE TABLE IF NOT EXISTS tillage (
    county_key TEXT NOT NULL,
    year INTEGER NOT NULL,
    tillage_scale REAL NOT NULL,
    PRIMARY KEY (county_key, year)
);
CREATE TABLE IF NOT EXISTS farms (
    farm_name TEXT NOT NULL,
    county_key TEXT NOT NULL,
    practice TEXT NOT NULL,
    year_implemented INTEGER NOT NULL,
    funding_status TEXT NOT NULL,
    PRIMARY KEY (farm_name, county_key, practice, year_implemented)
);
"""


def canonical_county(name: str) -> str:
    key = " ".join(str(name).split()).lower()
    if key.endswith(" county"):
        key = key[: -len(" county")]
    return key


def display_county(name: str) -> str:
    """The name as written, minus a trailing \"County\" suffix."""
    clean = " ".join(str(name).split())
    if clean.lower().endswith(" county"):
        clean = clean[: -len(" county")]
    return clean


@dataclass
class DroughtEvent:
    year_start: int
    year_end: int
    category: str

    def to_dict(self) -> dict:
        return {"year_start": self.year_start, "year_end": self.year_end,
                "category": self.category}


@dataclass
class WildfireIncident:
    year: int
    incident_name: str
    acres: float | None = None

    def to_dict(self) -> dict:
        return {"year": self.year, "incident_name": self.incident_name,
                "acres": self.acres}


@dataclass
class CropEntry:
    name: str
    area_fraction: float | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "area_fraction": self.area_fraction}


@dataclass
class FarmRecord:
    farm_name: str
    county: str
    practice: str
    year_implemented: int
    funding_status: str

    def to_dict(self) -> dict:
        return {"farm_name": self.farm_name, "county": self.county,
                "practice": self.practice,
                "year_implemented": self.year_implemented,
                "funding_status": self.funding_status}


@dataclass
class CountyRecord:
    county_name: str
    soc_2016_pct: float | None = None
    soc_2023_pct: float | None = None
    drought_events: list[DroughtEvent] = field(default_factory=list)
    wildfires: list[WildfireIncident] = field(default_factory=list)
    crops: list[tuple[int, list[CropEntry]]] = field(default_factory=list)
    tillage_scale_2019: float | None = None
    farms: list[FarmRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "county": self.county_name,
            "soc_2016_pct": self.soc_2016_pct,
            "soc_2023_pct": self.soc_2023_pct,
            "drought_events": [e.to_dict() for e in self.drought_events],
            "wildfires": [w.to_dict() for w in self.wildfires],
            "crops": [{"year": y, "crops": [c.to_dict() for c in entries]}
                      for y, entries in self.crops],
            "tillage_scale_2019": self.tillage_scale_2019,
            "farms": [f.to_dict() for f in self.farms],
        }


class _Row:
    """One CSV row with parse helpers that raise row-numbered SchemaErrors."""

    def __init__(self, path, line_no: int, record: dict):
        self.path = path
        self.line_no = line_no
        self.record = record

    def fail(self, message: str):
        raise SchemaError(f"{self.path}:{self.line_no}: {message}")

    def text(self, column: str) -> str:
        value = (self.record.get(column) or "").strip()
        if not value:
            self.fail(f"missing value for {column!r}")
        return value

    def real(self, column: str) -> float:
        raw = self.text(column)
        try:
            return float(raw)
        except ValueError:
            self.fail(f"{column!r} must be a number, got {raw!r}")

    def integer(self, column: str) -> int:
        raw = self.text(column)
        try:
            return int(raw)
        except ValueError:
            self.fail(f"{column!r} must be an integer, got {raw!r}")

    def optional_real(self, column: str) -> float | None:
        raw = (self.record.get(column) or "").strip()
        if not raw:
            return None
        try:
            return float(raw)
        except ValueError:
            self.fail(f"{column!r} must be a number or empty, got {raw!r}")


class AgroStore:
    """Embedded county store. Safe for concurrent reads after ingestion."""

    def __init__(self, path: str | Path = ":memory:"):
        self._conn = sqlite3.connect(str(path), check_same_thread=False)
        self._lock = threading.Lock()
        with self._lock:
            self._conn.executescript(_TABLES)
            self._conn.commit()

    def close(self):
        self._conn.close()

    # -- ingestion ----------------------------------------------------------

    def ingest_csv(self, kind: str, path) -> int:
        """Merge one CSV file into the store; returns the row count ingested."""
        if kind not in CSV_SCHEMAS:
            raise DataError(
                f"unknown ingest kind {kind!r}; expected one of "
                f"{', '.join(sorted(CSV_SCHEMAS))}"
            )
        path = Path(path)
        if not path.exists():
            raise DataError(f"missing csv file: {path}")
        expected = CSV_SCHEMAS[kind]
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            if [h.strip() for h in header] != expected:
                raise SchemaError(
                    f"{path}:1: {kind} header must be {','.join(expected)}, "
                    f"got {','.join(header)}"
                )
            rows = [_Row(path, i, rec) for i, rec in enumerate(reader, start=2)]
        statements = [self._prepare_row(kind, row) for row in rows]
        with self._lock:
            for sql_args in statements:
                for sql, args in sql_args:
                    self._conn.execute(sql, args)
            self._conn.commit()
        return len(rows)

    def _prepare_row(self, kind: str, row: _Row) -> list[tuple[str, tuple]]:
        county_col = "county"
        county = row.text(county_col)
        key = canonical_county(county)
        out = [(
            "INSERT OR IGNORE INTO counties (key, display_name) VALUES (?, ?)",
            (key, display_county(county)),
        )]
        if kind == "soc":
            s16, s23 = row.real("soc_2016_pct"), row.real("soc_2023_pct")
            if s16 < 0 or s23 < 0:
                row.fail("SOC percentages must be >= 0")
            out.append((
                "INSERT OR REPLACE INTO soc VALUES (?, ?, ?)",
                (key, s16, s23),
            ))
        elif kind == "drought":
            y0, y1 = row.integer("year_start"), row.integer("year_end")
            if y1 < y0:
                row.fail("year_end must be >= year_start")
            category = row.text("category")
            if category not in DROUGHT_CATEGORIES:
                row.fail(f"invalid drought category {category!r}; "
                         f"expected one of {', '.join(DROUGHT_CATEGORIES)}")
            out.append((
                "INSERT OR REPLACE INTO drought VALUES (?, ?, ?, ?)",
                (key, y0, y1, category),
            ))
        elif kind == "wildfire":
            out.append((
                "INSERT OR REPLACE INTO wildfire VALUES (?, ?, ?, ?)",
                (key, row.integer("year"), row.text("incident_name"),
                 row.optional_real("acres")),
            ))
        elif kind == "crops":
            out.append((
                "INSERT OR REPLACE INTO crops VALUES (?, ?, ?, ?)",
                (key, row.integer("year"), row.text("crop_name"),
                 row.optional_real("area_fraction")),
            ))
        elif kind == "tillage":
            scale = row.real("tillage_scale")
            if not 0.0 <= scale <= 1.0:
                row.fail(f"tillage_scale must be in [0, 1], got {scale}")
            out.append((
                "INSERT OR REPLACE INTO tillage VALUES (?, ?, ?)",
                (key, row.integer("year"), scale),
            ))
        elif kind == "farms":
            out.append((
                "INSERT OR REPLACE INTO farms VALUES (?, ?, ?, ?, ?)",
                (row.text("farm_name"), key, row.text("practice"),
                 row.integer("year_implemented"), row.text("funding_status")),
            ))
        return out

    # -- lookups ------------------------------------------------------------

    def _query(self, sql: str, args: tuple = ()) -> list[tuple]:
        with self._lock:
            return self._conn.execute(sql, args).fetchall()

    def counties(self) -> list[str]:
        return [r[0] for r in
                self._query("SELECT display_name FROM counties ORDER BY key")]

    def _resolve(self, county: str) -> str:
        key = canonical_county(county)
        rows = self._query("SELECT key FROM counties WHERE key = ?", (key,))
        if not rows:
            raise CountyNotFound(county)
        return key

    def display_name(self, county: str) -> str:
        key = self._resolve(county)
        return self._query(
            "SELECT display_name FROM counties WHERE key = ?", (key,))[0][0]

    def soc_prediction(self, county: str) -> tuple[float, float]:
        key = self._resolve(county)
        rows = self._query(
            "SELECT soc_2016_pct, soc_2023_pct FROM soc WHERE county_key = ?",
            (key,))
        if not rows:
            raise DataError(f"no soc data for {county!r}")
        return rows[0][0], rows[0][1]

    def drought_conditions(self, county: str) -> list[DroughtEvent]:
        key = self._resolve(county)
        rows = self._query(
            "SELECT year_start, year_end, category FROM drought "
            "WHERE county_key = ? ORDER BY year_start, category, year_end",
            (key,))
        return [DroughtEvent(*r) for r in rows]

    def wildfire_incidents(self, county: str) -> list[WildfireIncident]:
        key = self._resolve(county)
        rows = self._query(
            "SELECT year, incident_name, acres FROM wildfire "
            "WHERE county_key = ? ORDER BY year, incident_name", (key,))
        return [WildfireIncident(*r) for r in rows]

    def crop_types(self, county: str) -> list[tuple[int, list[CropEntry]]]:
        """Crop entries grouped by year ascending.

        Within a year, entries are ordered by descending area fraction
        (missing fractions last), then name.
        """
        key = self._resolve(county)
        rows = self._query(
            "SELECT year, crop_name, area_fraction FROM crops "
            "WHERE county_key = ? "
            "ORDER BY year, (area_fraction IS NULL), area_fraction DESC, crop_name",
            (key,))
        grouped: list[tuple[int, list[CropEntry]]] = []
        for year, name, fraction in rows:
            if not grouped or grouped[-1][0] != year:
                grouped.append((year, []))
            grouped[-1][1].append(CropEntry(name, fraction))
        return grouped

    def tillage_scale(self, county: str, year: int | None = None) -> tuple[int, float]:
        """The (year, scale) tillage row; latest year when none is given."""
        key = self._resolve(county)
        if year is None:
            rows = self._query(
                "SELECT year, tillage_scale FROM tillage WHERE county_key = ? "
                "ORDER BY year DESC LIMIT 1", (key,))
        else:
            rows = self._query(
                "SELECT year, tillage_scale FROM tillage "
                "WHERE county_key = ? AND year = ?", (key, year))
        if not rows:
            raise NoTillageData(county, year)
        return rows[0][0], rows[0][1]

    def farms(self, county: str) -> list[FarmRecord]:
        key = self._resolve(county)
        display = self.display_name(county)
        rows = self._query(
            "SELECT farm_name, practice, year_implemented, funding_status "
            "FROM farms WHERE county_key = ? ORDER BY farm_name, year_implemented",
            (key,))
        return [FarmRecord(r[0], display, r[1], r[2], r[3]) for r in rows]

    def county_record(self, county: str) -> CountyRecord:
        display = self.display_name(county)
        try:
            soc16, soc23 = self.soc_prediction(county)
        except DataError:
            soc16 = soc23 = None
        try:
            _, scale = self.tillage_scale(county, 2019)
        except NoTillageData:
            scale = None
        return CountyRecord(
            county_name=display,
            soc_2016_pct=soc16,
            soc_2023_pct=soc23,
            drought_events=self.drought_conditions(county),
            wildfires=self.wildfire_incidents(county),
            crops=self.crop_types(county),
            tillage_scale_2019=scale,
            farms=self.farms(county),
        )


def aggregate_soc_rasters(per_image_predictions: list[BandRaster],
                          county_mask: Mask) -> float:
    """County SOC scalar from per-image prediction rasters.

    Per pixel, valid per-image predictions are averaged first; the county
    value is then the mean over valid county pixels. The two-stage order
    matters under nodata: a pixel missing from some images still contributes
    its average over the images that do cover it.
    """
    if not per_image_predictions:
        raise DataError("need at least one prediction raster")
    shape = county_mask.bits.shape
    for raster in per_image_predictions:
        if raster.values.shape != shape:
            raise ValueError(
                f"raster grid {raster.values.shape} does not match "
                f"county mask {shape}"
            )
    stack = np.stack([r.masked_values() for r in per_image_predictions])
    counts = np.isfinite(stack).sum(axis=0)
    sums = np.nansum(stack, axis=0)
    per_pixel = np.full(shape, np.nan)
    np.divide(sums, counts, out=per_pixel, where=counts > 0)
    valid = county_mask.bits & np.isfinite(per_pixel)
    if not valid.any():
        raise DataError("county mask contains no valid prediction pixels")
    return float(per_pixel[valid].mean())
