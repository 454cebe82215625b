"""Shared exception types.

The CLI maps these onto exit codes: DataError and its subclasses exit 3,
BackendError exits 4. Anything else is a bug.
"""


class SoilCopilotError(Exception):
    """Base class for all errors raised by this package."""


class DataError(SoilCopilotError):
    """Bad or missing input data: files, CSV rows, rasters, county keys."""


class RasterFormatError(DataError):
    """Raster header/payload pair is missing, inconsistent, or malformed."""


class SchemaError(DataError):
    """A CSV row or JSON document violates its schema. Message carries the row."""


class CountyNotFound(DataError):
    """Query for a county that was never ingested (distinct from empty data)."""

    def __init__(self, county: str):
        super().__init__(f"county not found: {county!r}")
        self.county = county


class NoTillageData(DataError):
    """County exists but has no tillage value for the requested year."""

    def __init__(self, county: str, year: int | None = None):
        suffix = f" in {year}" if year is not None else ""
        super().__init__(f"no tillage data for {county!r}{suffix}")
        self.county = county
        self.year = year


class ToolError(DataError):
    """A tool invocation that cannot proceed: unknown tool or bad arguments."""


class UnknownTool(ToolError):
    """Request for a tool name that is not registered."""

    def __init__(self, name: str, known: list[str]):
        super().__init__(
            f"unknown tool {name!r}; available: {', '.join(known)}")
        self.name = name
        self.known = known


class ToolArgumentError(ToolError):
    """Tool arguments fail the declared parameter schema."""


class BackendError(SoilCopilotError):
    """Chat backend transport or protocol failure (after retries)."""


class MockScriptExhausted(BackendError):
    """Scripted mock backend ran out of steps before the agent finished."""
