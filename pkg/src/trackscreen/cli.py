"""Command-line front door: ingest, generate, detect, evaluate, serve, export-report."""

from __future__ import annotations

import json
import sys
from datetime import date
from pathlib import Path

import click

from . import records, synth
from .detectors import DetectorConfig, method_ids, run_detector
from .evaluation import consensus, evaluate_methods
from .report import render_report
from .service import ServiceConfig, serve as run_server
from .store import EventSlice, Store, ingest_dataset


def _fail(code: str, message: str) -> None:
    click.echo(json.dumps({"error": {"code": code, "message": message}}), err=True)
    sys.exit(1)


def _slice_options(fn):
    fn = click.option("--event", "event_code", required=True, help="Event code, e.g. 100m-men")(fn)
    fn = click.option("--gender", default="men", show_default=True)(fn)
    fn = click.option("--date-from", default="1990-01-01", show_default=True)(fn)
    fn = click.option("--date-to", default="2100-01-01", show_default=True)(fn)
    fn = click.option("--wind-legal-only/--all-wind", default=True, show_default=True)(fn)
    return fn


def _build_slice(event_code: str, gender: str, date_from: str, date_to: str, wind_legal_only: bool) -> EventSlice:
    return EventSlice(
        event_code=event_code,
        gender=gender,
        date_from=date.fromisoformat(date_from),
        date_to=date.fromisoformat(date_to),
        wind_legal_only=wind_legal_only,
    )


def _run_slice_methods(store: Store, slice_: EventSlice, methods: list[str], config: DetectorConfig):
    histories = store.query_slice(slice_)
    if not histories:
        _fail("empty_slice", f"no performances for {slice_.event_code!r} in the window")
    results = {}
    for method_id in methods:
        results[method_id] = run_detector(method_id, histories, config)
        store.put_result(slice_, config.config_hash(), results[method_id])
    return histories, results


@click.group()
def main() -> None:
    """Screening toolkit for longitudinal athletics performance data."""


@main.command()
@click.argument("results_files", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--sanctions", "sanctions_file", type=click.Path(exists=True), help="Sanction CSV to load")
@click.option("--db", "db_path", default="trackscreen.db", show_default=True)
def ingest(results_files: tuple[str, ...], sanctions_file: str | None, db_path: str) -> None:
    """Load result CSVs (and optionally a sanction CSV) into the store."""
    try:
        store = Store(db_path)
        total_stats = records.IngestStats()
        inserted = 0
        for path in results_files:
            parsed = records.load_results(path)
            inserted += ingest_dataset(
                store, parsed.records, parsed.competitions.values(), parsed.athletes.values()
            )
            total_stats.merge(parsed.stats)
        sanction_count = 0
        if sanctions_file:
            sanction_records, sanction_stats = records.load_sanctions(sanctions_file)
            sanction_count = store.upsert_sanctions(sanction_records)
            total_stats.merge(sanction_stats)
        click.echo(json.dumps({
            "rows_total": total_stats.rows_total,
            "rows_accepted": total_stats.rows_accepted,
            "rows_skipped": total_stats.rows_skipped,
            "skip_reasons": dict(total_stats.skipped),
            "warnings": dict(total_stats.warnings),
            "performances_inserted": inserted,
            "sanctions_inserted": sanction_count,
        }))
    except records.IngestError as exc:
        _fail("ingest_error", str(exc))


@main.command()
@click.option("--athletes", "n_athletes", type=int, default=1000, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--event", "event_code", default="100m-men", show_default=True)
@click.option("--total-performances", type=int, default=None)
@click.option("--fraction-doped", type=float, default=0.0, show_default=True)
@click.option("--n-doped", type=int, default=None)
@click.option("--n-sanctioned", type=int, default=None)
@click.option("--effect-seconds", type=float, default=0.4, show_default=True)
@click.option("--onset-fraction", type=float, default=0.5, show_default=True)
@click.option("--spec-json", type=click.Path(exists=True), help="Full GeneratorSpec as JSON (overrides other options)")
def generate(n_athletes, out_dir, seed, event_code, total_performances,
             fraction_doped, n_doped, n_sanctioned, effect_seconds, onset_fraction, spec_json) -> None:
    """Write a synthetic dataset (results/sanctions/competitions CSVs + manifest)."""
    try:
        if spec_json:
            raw = json.loads(Path(spec_json).read_text())
            count = raw.pop("performances_per_athlete", None)
            spec = synth.GeneratorSpec(**raw)
            if count:
                spec = synth.GeneratorSpec(**{**raw, "performances_per_athlete": synth.CountSpec(**count)})
        else:
            spec = synth.GeneratorSpec(
                n_athletes=n_athletes, seed=seed, event_code=event_code,
                total_performances=total_performances, fraction_doped=fraction_doped,
                n_doped=n_doped, n_sanctioned=n_sanctioned,
                effect_seconds=effect_seconds, onset_fraction=onset_fraction,
            )
        dataset = synth.generate(spec)
        paths = synth.write_dataset(dataset, out_dir)
        click.echo(json.dumps({
            "athletes": spec.n_athletes,
            "performances": len(dataset.records),
            "sanctions": len(dataset.sanctions),
            "files": {k: str(v) for k, v in paths.items()},
        }))
    except (ValueError, OSError) as exc:
        _fail("generate_error", str(exc))


@main.command()
@_slice_options
@click.option("--db", "db_path", default="trackscreen.db", show_default=True)
@click.option("--methods", default="", help="Comma-separated method ids (default: all)")
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Write per-method results JSON")
def detect(event_code, gender, date_from, date_to, wind_legal_only, db_path, methods, seed, out_path) -> None:
    """Run detection methods over one event slice."""
    wanted = [m.strip() for m in methods.split(",") if m.strip()] or method_ids()
    unknown = [m for m in wanted if m not in method_ids()]
    if unknown:
        _fail("unknown_method", f"unknown methods: {', '.join(unknown)}")
    store = Store(db_path)
    slice_ = _build_slice(event_code, gender, date_from, date_to, wind_legal_only)
    config = DetectorConfig(seed=seed)
    _, results = _run_slice_methods(store, slice_, wanted, config)
    summary = {
        mid: {
            "athletes_flagged": len(r.athletes_flagged),
            "performances_flagged": sum(1 for e in r.entries if e.flagged),
            "wall_time_ms": round(r.wall_time_ms, 2),
            "warnings": list(r.warnings),
        }
        for mid, r in results.items()
    }
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            json.dump({mid: r.to_payload() for mid, r in results.items()}, handle, sort_keys=True)
    click.echo(json.dumps({"slice": slice_.describe(), "methods": summary}))


@main.command()
@_slice_options
@click.option("--db", "db_path", default="trackscreen.db", show_default=True)
@click.option("--methods", default="", help="Comma-separated method ids (default: all)")
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Write the report JSON here")
def evaluate(event_code, gender, date_from, date_to, wind_legal_only, db_path, methods, seed, out_path) -> None:
    """Run methods and score them against stored sanctions."""
    wanted = [m.strip() for m in methods.split(",") if m.strip()] or method_ids()
    store = Store(db_path)
    slice_ = _build_slice(event_code, gender, date_from, date_to, wind_legal_only)
    config = DetectorConfig(seed=seed)
    _, results = _run_slice_methods(store, slice_, wanted, config)
    report = evaluate_methods(list(results.values()), store.get_sanctions(), slice_.describe())
    payload = report.to_payload()
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
    click.echo(json.dumps(payload))


@main.command(name="export-report")
@_slice_options
@click.option("--db", "db_path", default="trackscreen.db", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--methods", default="", help="Comma-separated method ids (default: all)")
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--min-methods", type=int, default=2, show_default=True)
def export_report(event_code, gender, date_from, date_to, wind_legal_only,
                  db_path, out_dir, methods, seed, min_methods) -> None:
    """Evaluate a slice and write report.json/report.csv plus figures."""
    wanted = [m.strip() for m in methods.split(",") if m.strip()] or method_ids()
    store = Store(db_path)
    slice_ = _build_slice(event_code, gender, date_from, date_to, wind_legal_only)
    config = DetectorConfig(seed=seed)
    _, results = _run_slice_methods(store, slice_, wanted, config)
    report = evaluate_methods(list(results.values()), store.get_sanctions(), slice_.describe())
    entries = (
        consensus(list(results.values()), store.sanctioned_athlete_ids(), min_methods=min_methods)
        if len(results) >= 2 else []
    )
    paths = render_report(report, entries, out_dir)
    click.echo(json.dumps({"written": {k: str(v) for k, v in paths.items()}}))


@main.command()
@click.option("--port", type=int, default=None, help="Overrides config/env")
@click.option("--db", "db_path", default=None, help="Overrides config/env")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--frontend", "frontend_dir", type=click.Path(), default=None, help="Static frontend to serve at /")
def serve(port, db_path, config_path, frontend_dir) -> None:
    """Start the HTTP API (and optional static frontend)."""
    config = ServiceConfig.load(config_path)
    if port is not None:
        config.port = port
    if db_path is not None:
        config.db_path = db_path
    if frontend_dir is not None:
        config.frontend_dir = frontend_dir
    store = Store(config.db_path)
    try:
        run_server(store, config)
    except KeyboardInterrupt:
        pass
    finally:
        store.close()


if __name__ == "__main__":
    main()
