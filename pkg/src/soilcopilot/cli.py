"""Command-line entry point.

One command suite wires the whole system: CSV ingestion, coherence and
bare-soil rasters, tillage detection, synthetic scenes, the HTTP service,
and one-shot agent chats.

Configuration resolves in precedence order: command-line flags, then
``SOILCOPILOT_*`` environment variables, then a ``--config`` JSON file,
then built-in defaults.  Chat backend settings use their own environment
names (``CHAT_ENDPOINT_URL``, ``CHAT_API_KEY``, ``CHAT_MODEL``,
``CHAT_TIMEOUT_S``), which outrank the same keys in the config file.

Exit codes: 0 success, 2 usage error, 3 data error, 4 backend error.
Errors print a single ``error: ...`` line to stderr; results go to stdout
or to the requested output files.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import click
import numpy as np

from . import kernels
from .agent import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TIMEOUT_S,
    HttpBackend,
    MockBackend,
    PERSONAS,
    build_tool_registry,
    get_persona,
    run_agent,
)
from .coherence import (
    DEFAULT_MAX_BASELINE_M,
    DEFAULT_WINDOW_H,
    DEFAULT_WINDOW_W,
    AcquisitionPair,
    estimate_coherence,
    save_coherence_map,
)
from .errors import BackendError, DataError, SchemaError, SoilCopilotError
from .knowledge import index_corpus, load_corpus
from .pipeline import DetectionConfig, detect_till_scene
from .raster import BandRaster, load_band_raster, load_slc, save_band_raster
from .store import CSV_SCHEMAS, AgroStore
from .synth import generate_scene, load_scene_config
from .tillage import (
    DEFAULT_BSI_THRESHOLD,
    DEFAULT_CHANGE_THRESHOLD,
    DEFAULT_MIN_REGION_DIM,
    NODATA,
    TILL,
    TillageMap,
    compute_bsi,
    crop_crosstab,
)

__all__ = ["CliConfig", "cli", "main", "resolve_config"]


@dataclass(frozen=True)
class CliConfig:
    """Resolved settings shared across commands."""

    data_dir: str = "data"
    corpus_dir: str = "corpus"
    db: str | None = None
    bsi_threshold: float = DEFAULT_BSI_THRESHOLD
    coherence_change: float = DEFAULT_CHANGE_THRESHOLD
    max_baseline_m: float = DEFAULT_MAX_BASELINE_M
    min_region_dim: int = DEFAULT_MIN_REGION_DIM
    window_w: int = DEFAULT_WINDOW_W
    window_h: int = DEFAULT_WINDOW_H
    host: str = "127.0.0.1"
    port: int = 8000
    chat_endpoint_url: str | None = None
    chat_api_key: str | None = None
    chat_model: str | None = None
    chat_timeout_s: float = DEFAULT_TIMEOUT_S

    def __post_init__(self):
        if not -1.0 <= self.bsi_threshold <= 1.0:
            raise DataError(
                f"bsi_threshold must be within [-1, 1], got "
                f"{self.bsi_threshold}")
        if not 0.0 < self.coherence_change <= 1.0:
            raise DataError(
                f"coherence_change must be within (0, 1], got "
                f"{self.coherence_change}")
        if self.max_baseline_m <= 0:
            raise DataError("max_baseline_m must be positive")
        if self.min_region_dim < 1:
            raise DataError("min_region_dim must be >= 1")
        if self.window_w < 1 or self.window_h < 1:
            raise DataError("window dimensions must be >= 1")
        if not 1 <= self.port <= 65535:
            raise DataError(f"port must be within [1, 65535], got {self.port}")
        if self.chat_timeout_s <= 0:
            raise DataError("chat_timeout_s must be positive")


_DEFAULTS = CliConfig()
_FIELD_TYPES = {f.name: f.type for f in fields(CliConfig)}
_CSV_KINDS = tuple(CSV_SCHEMAS)


def _cast_setting(name: str, value):
    """Coerce a string from the environment or config file to its field type."""
    if value is None or not isinstance(value, str):
        return value
    kind = _FIELD_TYPES[name]
    try:
        if kind in ("int", int):
            return int(value)
        if kind in ("float", float):
            return float(value)
    except ValueError:
        raise DataError(f"setting {name} must be numeric, got {value!r}")
    return value


def resolve_config(config_path: str | os.PathLike | None = None,
                   env: dict | None = None, **flags) -> CliConfig:
    """Merge defaults, config file, environment, and flags (weakest first)."""
    env = os.environ if env is None else env
    merged: dict = {}

    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise DataError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})")
        if not isinstance(raw, dict):
            raise SchemaError(f"{path}: config must be a JSON object")
        unknown = sorted(set(raw) - set(_FIELD_TYPES))
        if unknown:
            raise SchemaError(
                f"{path}: unknown config keys: {', '.join(unknown)}")
        merged.update(raw)

    for name in _FIELD_TYPES:
        env_value = env.get(f"SOILCOPILOT_{name.upper()}")
        if env_value is not None:
            merged[name] = env_value
    # Chat settings keep their own documented environment names, which rank
    # above the config file like every other environment setting.
    for env_key, name in (("CHAT_ENDPOINT_URL", "chat_endpoint_url"),
                          ("CHAT_API_KEY", "chat_api_key"),
                          ("CHAT_MODEL", "chat_model"),
                          ("CHAT_TIMEOUT_S", "chat_timeout_s")):
        if env.get(env_key) is not None:
            merged[name] = env[env_key]

    for name, value in flags.items():
        if value is not None:
            merged[name] = value

    merged = {k: _cast_setting(k, v) for k, v in merged.items()}
    return CliConfig(**merged)


def _fail(code: int, exc: BaseException):
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def command_errors(fn):
    """Map domain errors onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except BackendError as exc:
            _fail(4, exc)
        except SoilCopilotError as exc:
            _fail(3, exc)
        except (OSError, ValueError) as exc:
            _fail(3, exc)

    return wrapper


def _config_from_ctx(ctx: click.Context, **flags) -> CliConfig:
    return resolve_config(ctx.obj.get("config_path"), **flags)


def open_store(config: CliConfig) -> AgroStore:
    """Open the sqlite store, or build one in memory from the CSV directory."""
    if config.db:
        if not Path(config.db).exists():
            raise DataError(f"database not found: {config.db}")
        return AgroStore(config.db)
    data_dir = Path(config.data_dir)
    if not data_dir.is_dir():
        raise DataError(f"data directory not found: {data_dir}")
    store = AgroStore()
    found = 0
    for kind in _CSV_KINDS:
        path = data_dir / f"{kind}.csv"
        if path.exists():
            store.ingest_csv(kind, path)
            found += 1
    if not found:
        raise DataError(f"no known CSV files under {data_dir} "
                        f"(expected any of: "
                        f"{', '.join(k + '.csv' for k in _CSV_KINDS)})")
    return store


def _chat_env(config: CliConfig) -> dict:
    env = {}
    if config.chat_endpoint_url:
        env["CHAT_ENDPOINT_URL"] = config.chat_endpoint_url
        if config.chat_api_key:
            env["CHAT_API_KEY"] = config.chat_api_key
        if config.chat_model:
            env["CHAT_MODEL"] = config.chat_model
        env["CHAT_TIMEOUT_S"] = str(config.chat_timeout_s)
    return env


def _parse_window(ctx, param, value):
    if value is None:
        return None
    try:
        w, h = value.lower().split("x")
        w, h = int(w), int(h)
    except ValueError:
        raise click.BadParameter(f"expected WxH, e.g. 10x20; got {value!r}")
    if w < 1 or h < 1:
        raise click.BadParameter("window dimensions must be >= 1")
    return w, h


def _print_json(payload: dict):
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config file; flags and SOILCOPILOT_* variables "
                   "override it.")
@click.version_option(package_name="soilcopilot")
@click.pass_context
def cli(ctx, config_path):
    """Soil-health copilot: tillage detection, county data, and agent chat."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@cli.command()
@click.argument("kind", type=click.Choice(_CSV_KINDS))
@click.argument("csv_path", type=click.Path())
@click.option("--db", default=None,
              help="SQLite file to ingest into (default: in-memory check "
                   "that only validates the file).")
@click.pass_context
@command_errors
def ingest(ctx, kind, csv_path, db):
    """Validate KIND rows from CSV_PATH and load them into the store."""
    config = _config_from_ctx(ctx, db=db)
    store = AgroStore(config.db) if config.db else AgroStore()
    try:
        count = store.ingest_csv(kind, csv_path)
        target = config.db or "in-memory store (validation only)"
        click.echo(f"ingested {count} {kind} rows into {target}")
    finally:
        store.close()


@cli.command()
@click.argument("primary", type=click.Path())
@click.argument("repeat", type=click.Path())
@click.option("--window", callback=_parse_window, default=None,
              help=f"Estimation window as WxH pixels (default "
                   f"{_DEFAULTS.window_w}x{_DEFAULTS.window_h}).")
@click.option("--baseline", type=float, default=0.0, show_default=True,
              help="Perpendicular baseline between the scenes, meters.")
@click.option("--out", "-o", default="coherence", show_default=True,
              help="Output stem for the magnitude/phase rasters.")
@click.pass_context
@command_errors
def coherence(ctx, primary, repeat, window, baseline, out):
    """Estimate coherence between PRIMARY and REPEAT SLC scenes."""
    config = _config_from_ctx(ctx)
    window_w, window_h = window or (config.window_w, config.window_h)
    primary_slc = load_slc(primary)
    repeat_slc = load_slc(repeat)
    pair = AcquisitionPair(
        primary=primary_slc,
        repeat=repeat_slc,
        baseline_m=baseline,
        pair_id=f"{Path(primary).name}-{Path(repeat).name}",
    )
    cm = estimate_coherence(pair, window_w, window_h)
    save_coherence_map(cm, out)
    values = cm.magnitude.masked_values()
    _print_json({
        "pair_id": cm.pair_id,
        "cells": [cm.magnitude.width, cm.magnitude.height],
        "window": [window_w, window_h],
        "mean_coherence": round(float(np.nanmean(values)), 6),
        "out": str(out),
    })


@cli.command()
@click.argument("swir1", type=click.Path())
@click.argument("blue", type=click.Path())
@click.argument("red", type=click.Path())
@click.argument("nir", type=click.Path())
@click.option("--out", "-o", default="bsi", show_default=True,
              help="Output raster stem.")
@command_errors
def bsi(swir1, blue, red, nir, out):
    """Compute the Bare Soil Index from four band rasters."""
    raster = compute_bsi(load_band_raster(swir1), load_band_raster(blue),
                         load_band_raster(red), load_band_raster(nir))
    save_band_raster(raster, out)
    values = raster.masked_values()
    finite = values[np.isfinite(values)]
    _print_json({
        "out": str(out),
        "cells": [raster.width, raster.height],
        "valid_cells": int(finite.size),
        "min": round(float(finite.min()), 6) if finite.size else None,
        "max": round(float(finite.max()), 6) if finite.size else None,
    })


@cli.command("detect-till")
@click.argument("scene_dir", type=click.Path())
@click.option("--bsi-threshold", type=float, default=None,
              help=f"Bare-soil gate on BSI (default "
                   f"{_DEFAULTS.bsi_threshold}).")
@click.option("--change-threshold", type=float, default=None,
              help=f"Coherence-drop threshold (default "
                   f"{_DEFAULTS.coherence_change}).")
@click.option("--max-baseline", type=float, default=None,
              help=f"Discard pairs with longer baselines, meters (default "
                   f"{_DEFAULTS.max_baseline_m}).")
@click.option("--min-region-dim", type=int, default=None,
              help=f"Drop till regions thinner than this many cells "
                   f"(default {_DEFAULTS.min_region_dim}).")
@click.option("--year", type=int, default=None,
              help="Label the output map with this year.")
@click.option("--labels-out", default=None,
              help="Also write the label raster to this stem.")
@click.pass_context
@command_errors
def detect_till(ctx, scene_dir, bsi_threshold, change_threshold,
                max_baseline, min_region_dim, year, labels_out):
    """Run tillage detection over a scene directory."""
    config = _config_from_ctx(
        ctx, bsi_threshold=bsi_threshold, coherence_change=change_threshold,
        max_baseline_m=max_baseline, min_region_dim=min_region_dim)
    detection = DetectionConfig(
        change_threshold=config.coherence_change,
        bsi_threshold=config.bsi_threshold,
        max_baseline_m=config.max_baseline_m,
        min_region_dim=config.min_region_dim,
        window_w=config.window_w,
        window_h=config.window_h,
    )
    report = detect_till_scene(scene_dir, detection, year=year)
    if labels_out:
        save_band_raster(report.tillage.to_band_raster(), labels_out)
    _, till_boxes = kernels.label_regions(report.tillage.labels == TILL)
    summary = report.summary()
    summary["till_regions"] = len(till_boxes)
    if report.crosstab is not None:
        summary["crosstab"] = [
            {"crop_name": row.crop_name,
             "till_pct": round(row.till_pct, 2),
             "no_till_pct": round(row.no_till_pct, 2),
             "pixel_count": row.pixel_count}
            for row in report.crosstab.rows
        ]
    if labels_out:
        summary["labels_out"] = str(labels_out)
    _print_json(summary)


@cli.command()
@click.argument("tillage_raster", type=click.Path())
@click.argument("crop_layer", type=click.Path())
@click.option("--names", type=click.Path(), default=None,
              help="JSON file mapping crop codes to display names.")
@command_errors
def crosstab(tillage_raster, crop_layer, names):
    """Tabulate till percentage per crop over classified pixels."""
    labels_raster = load_band_raster(tillage_raster)
    values = labels_raster.masked_values()
    labels = np.full(values.shape, NODATA, dtype=np.int8)
    finite = np.isfinite(values)
    labels[finite] = np.rint(values[finite]).astype(np.int8)
    tmap = TillageMap(labels=labels, pixel_size_m=labels_raster.pixel_size_m)

    code_names = {}
    if names:
        path = Path(names)
        if not path.exists():
            raise DataError(f"names file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})")
        code_names = {int(k): str(v) for k, v in raw.items()}

    table = crop_crosstab(tmap, load_band_raster(crop_layer), code_names)
    click.echo(table.to_csv(), nl=False)


@cli.command("synth-scene")
@click.argument("config_path", type=click.Path())
@click.option("--out", "-o", default="scene", show_default=True,
              help="Scene output directory.")
@command_errors
def synth_scene(config_path, out):
    """Generate a synthetic SAR/optical scene from CONFIG_PATH."""
    cfg = load_scene_config(config_path)
    manifest = generate_scene(cfg, out)
    _print_json({
        "manifest": str(manifest),
        "acquisitions": len(cfg.acquisition_dates),
        "cells": [cfg.width_cells, cfg.height_cells],
        "regions": len(cfg.regions),
    })


@cli.command()
@click.option("--host", default=None,
              help=f"Bind address (default {_DEFAULTS.host}).")
@click.option("--port", type=int, default=None,
              help=f"Port (default {_DEFAULTS.port}).")
@click.option("--data-dir", default=None,
              help=f"Directory of county CSVs (default "
                   f"{_DEFAULTS.data_dir!r}).")
@click.option("--corpus-dir", default=None,
              help=f"Directory of article JSON files (default "
                   f"{_DEFAULTS.corpus_dir!r}).")
@click.option("--db", default=None,
              help="Use an existing SQLite store instead of CSV ingestion.")
@click.option("--mock", "mock_script", type=click.Path(), default=None,
              help="Serve chat from this scripted backend instead of a "
                   "remote endpoint.")
@click.pass_context
@command_errors
def serve(ctx, host, port, data_dir, corpus_dir, db, mock_script):
    """Run the HTTP service (data endpoints, tools, and chat)."""
    from .service import create_app, serve as run_service

    config = _config_from_ctx(ctx, host=host, port=port, data_dir=data_dir,
                              corpus_dir=corpus_dir, db=db)
    store = open_store(config)
    try:
        index = index_corpus(load_corpus(config.corpus_dir))
        app = create_app(store, index, mock_script=mock_script,
                         env=_chat_env(config) or os.environ)
        click.echo(f"serving on http://{config.host}:{config.port} "
                   f"(backend: {app.state.backend_mode})", err=True)
        run_service(app, host=config.host, port=config.port)
    finally:
        store.close()


@cli.command()
@click.argument("prompt")
@click.option("--persona", default="default",
              help="Stakeholder role: " + ", ".join(PERSONAS) + ".",
              show_default=True)
@click.option("--mock", "mock_script", type=click.Path(), default=None,
              help="Replay this scripted backend instead of calling a "
                   "remote endpoint.")
@click.option("--data-dir", default=None,
              help=f"Directory of county CSVs (default "
                   f"{_DEFAULTS.data_dir!r}).")
@click.option("--corpus-dir", default=None,
              help=f"Directory of article JSON files (default "
                   f"{_DEFAULTS.corpus_dir!r}).")
@click.option("--db", default=None,
              help="Use an existing SQLite store instead of CSV ingestion.")
@click.option("--max-iterations", type=int, default=DEFAULT_MAX_ITERATIONS,
              show_default=True, help="Tool-call budget for the exchange.")
@click.option("--transcript", "transcript_path", type=click.Path(),
              default=None, help="Write the full transcript JSON here.")
@click.pass_context
@command_errors
def ask(ctx, prompt, persona, mock_script, data_dir, corpus_dir, db,
        max_iterations, transcript_path):
    """Ask the agent one question and print its answer."""
    config = _config_from_ctx(ctx, data_dir=data_dir, corpus_dir=corpus_dir,
                              db=db)
    role = get_persona(persona)

    if mock_script is not None:
        backend = MockBackend.from_file(mock_script)
    elif config.chat_endpoint_url:
        backend = HttpBackend(
            config.chat_endpoint_url,
            api_key=config.chat_api_key,
            model=config.chat_model,
            timeout_s=config.chat_timeout_s,
        )
    else:
        raise BackendError(
            "no chat backend configured: pass --mock or set "
            "CHAT_ENDPOINT_URL")

    store = open_store(config)
    try:
        index = index_corpus(load_corpus(config.corpus_dir))
        registry = build_tool_registry(store, index)
        result = run_agent(prompt, role, backend, registry,
                           max_iterations=max_iterations, session_id="cli")
    finally:
        store.close()

    if transcript_path:
        Path(transcript_path).write_text(result.to_json())
    click.echo(result.answer)


def main():
    cli(prog_name="soilcopilot")


if __name__ == "__main__":
    main()
