"""Command-line entry point wiring the pipeline stages together.

Subcommands mirror the processing stages (decode, validate, voyages,
metrics) plus ingest, synth, and an all-in-one run. Each stage reads and
writes JSONL/CSV files, so stages compose through the filesystem and `run`
is exactly the staged commands executed back to back.

Exit codes: 0 success, 1 data-quality threshold exceeded, 2 usage or I/O
error.
"""

import argparse
import datetime as dt
import hashlib
import json
import pathlib
import sys
import threading

from . import __version__, jsonl, metrics, synth, validate, voyage
from .codec import MessageDecoder, PositionReport
from .geo import AreaFilter, InvalidPolygon, PortGeometry, load_port_geometry
from .ingest import MessageStore, SourceConfig, run_live, run_replay
from .jsonl import format_ts, message_from_dict, message_to_dict, parse_ts

UTC = dt.timezone.utc

EXIT_OK = 0
EXIT_QUALITY = 1
EXIT_USAGE = 2


def _sha256(path: pathlib.Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path: pathlib.Path, command: str, config: dict, inputs, outputs) -> None:
    doc = {
        "tool": "portcall",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(pathlib.Path(p)) for p in inputs if pathlib.Path(p).exists()},
        "outputs": {str(p): _sha256(pathlib.Path(p)) for p in outputs if pathlib.Path(p).exists()},
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


# ---------------------------------------------------------------------------
# decode


def cmd_decode(args) -> int:
    inp = pathlib.Path(args.input)
    if not inp.exists():
        return _fail(f"input {inp} does not exist")
    out = pathlib.Path(args.output)
    err_path = pathlib.Path(args.errors) if args.errors else out.with_suffix(".errors.jsonl")
    decoder = MessageDecoder()
    raw_start = parse_ts(args.raw_start)
    with open(inp, "r", encoding="utf-8") as f, open(out, "w", encoding="utf-8", newline="\n") as fo, open(
        err_path, "w", encoding="utf-8", newline="\n"
    ) as fe:
        for i, line in enumerate(f):
            line = line.rstrip("\r\n")
            if not line:
                continue
            rx = raw_start + dt.timedelta(seconds=i * args.raw_cadence_s)
            for outcome in decoder.feed(line, rx):
                if outcome.kind in ("position", "static"):
                    fo.write(jsonl.dumps(message_to_dict(outcome.message)))
                    fo.write("\n")
                elif outcome.kind == "error":
                    fe.write(jsonl.dumps({"error": outcome.error, "detail": outcome.detail, "raw": outcome.raw}))
                    fe.write("\n")
        for outcome in decoder.finish():
            fe.write(jsonl.dumps({"error": outcome.error, "detail": outcome.detail, "raw": outcome.raw}))
            fe.write("\n")
    counts = decoder.counts
    print(
        f"decoded {counts['positions']} positions, {counts['statics']} statics, "
        f"{counts['errors']} errors, {counts['skipped']} skipped from {counts['lines']} lines"
    )
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "decode",
        {"raw_start": args.raw_start, "raw_cadence_s": args.raw_cadence_s},
        [inp],
        [out, err_path],
    )
    if args.max_error_rate is not None and counts["lines"]:
        if counts["errors"] / counts["lines"] > args.max_error_rate:
            print(f"error rate {counts['errors'] / counts['lines']:.3f} above threshold", file=sys.stderr)
            return EXIT_QUALITY
    return EXIT_OK


def _load_positions(path: pathlib.Path) -> list[PositionReport]:
    out = []
    for doc in jsonl.read_jsonl(path):
        if doc.get("type") == "position":
            out.append(message_from_dict(doc))
    return out


def _load_statics(path: pathlib.Path) -> dict[int, int]:
    ship_types: dict[int, int] = {}
    for doc in jsonl.read_jsonl(path):
        if doc.get("type") == "static":
            ship_types[doc["mmsi"]] = doc.get("ship_type", 0)
    return ship_types


# ---------------------------------------------------------------------------
# validate


def _outage_to_dict(o: validate.Outage) -> dict:
    return {
        "scope": o.scope,
        "start": format_ts(o.start),
        "end": format_ts(o.end),
        "subject": o.subject,
        "cell_deg": o.cell_deg,
    }


def _outage_from_dict(doc: dict) -> validate.Outage:
    return validate.Outage(
        scope=doc["scope"],
        start=parse_ts(doc["start"]),
        end=parse_ts(doc["end"]),
        subject=doc.get("subject"),
        cell_deg=doc.get("cell_deg"),
    )


def validated_to_dict(vm: validate.ValidatedMessage) -> dict:
    doc = message_to_dict(vm.report)
    doc["type"] = "validated"
    doc["corrected_navstat"] = vm.corrected_navstat
    doc["method"] = vm.method
    doc["agreed_with_reported"] = vm.agreed_with_reported
    doc["gap_flag"] = vm.gap_flag
    return doc


_VALIDATED_ONLY = ("type", "corrected_navstat", "method", "agreed_with_reported", "gap_flag")


def validated_from_dict(doc: dict) -> validate.ValidatedMessage:
    base = {k: v for k, v in doc.items() if k not in _VALIDATED_ONLY}
    base["type"] = "position"
    return validate.ValidatedMessage(
        report=message_from_dict(base),
        corrected_navstat=doc["corrected_navstat"],
        method=doc["method"],
        agreed_with_reported=doc["agreed_with_reported"],
        gap_flag=doc.get("gap_flag", False),
    )


def cmd_validate(args) -> int:
    inp = pathlib.Path(args.input)
    if not inp.exists():
        return _fail(f"input {inp} does not exist")
    try:
        cfg = validate.ValidationConfig.from_file(args.config) if args.config else validate.ValidationConfig()
    except (OSError, ValueError) as exc:
        return _fail(f"bad config: {exc}")
    if args.method:
        cfg.method = args.method
    port = None
    if args.port:
        try:
            port = load_port_geometry(args.port)
        except (OSError, ValueError) as exc:
            return _fail(f"bad port geometry: {exc}")
    if port is None and cfg.method == "geofence":
        return _fail("method 'geofence' requires --port polygons")
    positions = _load_positions(inp)
    validated = validate.validate_stream(positions, port, cfg)
    outages = validate.detect_outages(positions)
    out = pathlib.Path(args.output)
    jsonl.write_jsonl(out, (validated_to_dict(vm) for vm in validated))
    outage_path = pathlib.Path(args.outages_output) if args.outages_output else out.with_suffix(".outages.jsonl")
    jsonl.write_jsonl(outage_path, (_outage_to_dict(o) for o in outages))
    agreement = (
        sum(1 for vm in validated if vm.agreed_with_reported) / len(validated) if validated else 1.0
    )
    print(f"validated {len(validated)} messages, agreement with reported {agreement:.3f}, "
          f"{len(outages)} outages")
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "validate",
        {"method": cfg.method, "config": args.config or "", "port": args.port or ""},
        [inp] + ([args.port] if args.port else []) + ([args.config] if args.config else []),
        [out, outage_path],
    )
    if args.min_agreement is not None and agreement < args.min_agreement:
        print(f"agreement {agreement:.3f} below threshold", file=sys.stderr)
        return EXIT_QUALITY
    return EXIT_OK


# ---------------------------------------------------------------------------
# voyages


def _area_filter(args) -> AreaFilter | None:
    if args.area:
        return AreaFilter.from_geojson(args.area)
    if args.center:
        lat_s, _, lon_s = args.center.partition(",")
        return AreaFilter.circle(float(lat_s), float(lon_s), args.radius_m)
    return None


def cmd_voyages(args) -> int:
    inp = pathlib.Path(args.input)
    if not inp.exists():
        return _fail(f"input {inp} does not exist")
    try:
        area = _area_filter(args)
    except (OSError, ValueError, InvalidPolygon) as exc:
        return _fail(f"bad area: {exc}")
    messages = [validated_from_dict(doc) for doc in jsonl.read_jsonl(inp) if doc.get("type") == "validated"]
    if area is not None:
        messages = [m for m in messages if area.contains(m.report.lat, m.report.lon)]
    outages = []
    if args.outages:
        outages = [_outage_from_dict(doc) for doc in jsonl.read_jsonl(args.outages)]
    voyages = [voyage.segment_phases(v) for v in voyage.extract_voyages(messages)]
    voyages = [voyage.flag_gaps(v, outages) for v in voyages]
    out = pathlib.Path(args.output)
    jsonl.write_jsonl(out, (voyage.voyage_to_dict(v) for v in voyages))
    print(f"extracted {len(voyages)} voyages from {len(messages)} messages")
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "voyages",
        {"area": args.area or "", "center": args.center or "", "radius_m": args.radius_m},
        [inp] + ([args.outages] if args.outages else []),
        [out],
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# metrics


def _write_csv(path: pathlib.Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(str(c) for c in row) + "\n")


def _hours(delta: dt.timedelta) -> str:
    return f"{delta.total_seconds() / 3600.0:.3f}"


def cmd_metrics(args) -> int:
    vpath = pathlib.Path(args.voyages)
    if not vpath.exists():
        return _fail(f"voyages file {vpath} does not exist")
    outdir = pathlib.Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    port = None
    if args.port:
        try:
            port = load_port_geometry(args.port)
        except (OSError, ValueError) as exc:
            return _fail(f"bad port geometry: {exc}")
    voyages = [voyage.voyage_from_dict(doc) for doc in jsonl.read_jsonl(vpath)]
    categories: dict[int, str] = {}
    if args.static:
        ship_types = _load_statics(pathlib.Path(args.static))
        categories = {mmsi: metrics.vessel_category(st) for mmsi, st in ship_types.items()}

    records = metrics.schedule_table(voyages, port)
    turn_csv = outdir / "turnarounds.csv"
    _write_csv(
        turn_csv,
        ["mmsi", "terminal", "arrival", "departure", "turnaround_h"],
        (
            (r.mmsi, r.terminal_name or "", format_ts(r.arrival), format_ts(r.departure), _hours(r.turnaround))
            for r in records
        ),
    )

    arrivals = metrics.daily_arrivals(voyages, categories)
    arrivals_csv = outdir / "daily_arrivals.csv"
    _write_csv(
        arrivals_csv,
        ["date"] + list(metrics.CATEGORIES),
        ((d.isoformat(), *(arrivals[d][c] for c in metrics.CATEGORIES)) for d in sorted(arrivals)),
    )

    weekly = metrics.weekly_aggregate(records, "mean") if records else {}
    weekly_csv = outdir / "weekly_turnaround.csv"
    _write_csv(weekly_csv, ["week", "mean_turnaround_h"], ((week, _hours(v)) for week, v in weekly.items()))

    outputs = [turn_csv, arrivals_csv, weekly_csv]
    summary: dict = {
        "n_voyages": len(voyages),
        "n_turnarounds": len(records),
        "gap_flagged": sum(1 for v in voyages if v.gap_flagged),
        "waits_h": {
            "mean": (
                sum((metrics.anchorage_wait(v).total_seconds() for v in voyages), 0.0)
                / 3600.0 / len(voyages)
                if voyages
                else None
            )
        },
    }

    if args.vessel:
        own = [v for v in voyages if v.mmsi == args.vessel]
        schedule = metrics.schedule_table(own, port)
        sched_csv = outdir / f"schedule_{args.vessel}.csv"
        _write_csv(
            sched_csv,
            ["arrival", "departure", "turnaround_h"],
            ((format_ts(r.arrival), format_ts(r.departure), _hours(r.turnaround)) for r in schedule),
        )
        outputs.append(sched_csv)
        summary["vessel"] = {"mmsi": args.vessel, "n_calls": len(schedule)}

    if args.ground_truth:
        try:
            truth_table = metrics.load_ground_truth(args.ground_truth)
        except (OSError, ValueError) as exc:
            return _fail(f"bad ground truth: {exc}")
        exclude = set()
        if args.exclude_dates:
            exclude = {dt.date.fromisoformat(s) for s in args.exclude_dates.split(",")}
        try:
            maes, macro = metrics.arrivals_mae(arrivals, truth_table, exclude)
        except metrics.EmptyOverlap as exc:
            return _fail(f"ground truth does not overlap: {exc}")
        summary["mae"] = {"per_category": maes, "macro": macro}
        print(f"daily-arrivals MAE per category: {maes}, macro {macro:.3f}")

    summary_path = outdir / "summary.json"
    with open(summary_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    outputs.append(summary_path)
    print(f"metrics over {len(voyages)} voyages written to {outdir}")
    _write_manifest(
        outdir / "metrics.manifest.json",
        "metrics",
        {"vessel": args.vessel, "ground_truth": args.ground_truth or "", "static": args.static or ""},
        [vpath] + [p for p in (args.static, args.ground_truth, args.port) if p],
        outputs,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth / ingest / run


def cmd_synth(args) -> int:
    if args.scenario:
        try:
            scenario = synth.Scenario.load(args.scenario)
        except (OSError, ValueError, KeyError) as exc:
            return _fail(f"bad scenario: {exc}")
    elif args.preset == "ferry":
        scenario = synth.ferry_scenario(days=args.days, error_p=args.error_p, seed=args.seed)
    else:
        scenario = synth.mixed_port_scenario(
            n_vessels=args.vessels, days=args.days, error_p=args.error_p, seed=args.seed
        )
    lines, truth = synth.generate(scenario)
    nmea_path = pathlib.Path(args.out_nmea)
    with open(nmea_path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line)
            f.write("\n")
    truth.write_jsonl(args.out_truth)
    layout = synth.build_port(scenario.center)
    outputs = [nmea_path, pathlib.Path(args.out_truth)]
    if args.out_port:
        with open(args.out_port, "w", encoding="utf-8", newline="\n") as f:
            json.dump(layout.geojson(), f, indent=2, sort_keys=True)
            f.write("\n")
        outputs.append(pathlib.Path(args.out_port))
    print(f"generated {len(lines)} sentences for {len(scenario.vessels)} vessels")
    _write_manifest(
        nmea_path.with_suffix(nmea_path.suffix + ".manifest.json"),
        "synth",
        {"preset": args.preset, "seed": args.seed, "days": args.days, "error_p": args.error_p},
        [args.scenario] if args.scenario else [],
        outputs,
    )
    return EXIT_OK


def cmd_ingest(args) -> int:
    try:
        cfg = SourceConfig.parse_source(args.source, replay_speed=args.replay_speed)
    except ValueError as exc:
        return _fail(str(exc))
    store = MessageStore(args.store)
    try:
        if cfg.mode == "replay":
            summary = run_replay(cfg, store.append)
        else:
            stop = threading.Event()
            try:
                summary = run_live(cfg, store.append, stop)
            except KeyboardInterrupt:
                stop.set()
                raise
    except FileNotFoundError as exc:
        return _fail(str(exc))
    finally:
        store.close()
    print(
        f"ingested {summary.messages} messages ({summary.errors} errors, "
        f"{summary.skipped} skipped) into {args.store}"
    )
    return EXIT_OK


def cmd_run(args) -> int:
    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ns = argparse.Namespace(
        input=args.input,
        output=str(outdir / "decoded.jsonl"),
        errors=str(outdir / "errors.jsonl"),
        raw_start=args.raw_start,
        raw_cadence_s=args.raw_cadence_s,
        max_error_rate=args.max_error_rate,
    )
    status = cmd_decode(ns)
    if status not in (EXIT_OK, EXIT_QUALITY):
        return status
    ns = argparse.Namespace(
        input=str(outdir / "decoded.jsonl"),
        output=str(outdir / "validated.jsonl"),
        outages_output=str(outdir / "outages.jsonl"),
        port=args.port,
        config=args.config,
        method=args.method,
        min_agreement=None,
    )
    rc = cmd_validate(ns)
    if rc != EXIT_OK:
        return rc
    ns = argparse.Namespace(
        input=str(outdir / "validated.jsonl"),
        output=str(outdir / "voyages.jsonl"),
        outages=str(outdir / "outages.jsonl"),
        area=args.area,
        center=args.center,
        radius_m=args.radius_m,
    )
    rc = cmd_voyages(ns)
    if rc != EXIT_OK:
        return rc
    ns = argparse.Namespace(
        voyages=str(outdir / "voyages.jsonl"),
        output_dir=str(outdir / "metrics"),
        static=str(outdir / "decoded.jsonl"),
        ground_truth=args.ground_truth,
        exclude_dates=args.exclude_dates,
        vessel=args.vessel,
        port=args.port,
    )
    rc = cmd_metrics(ns)
    if rc != EXIT_OK:
        return rc
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="portcall", description=__doc__)
    parser.add_argument("--version", action="version", version=f"portcall {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="NMEA lines to typed JSONL messages")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--errors", help="error-channel JSONL (default: <output>.errors.jsonl)")
    p.add_argument("--raw-start", default="2000-01-01T00:00:00Z", help="rx time of untagged line 0")
    p.add_argument("--raw-cadence-s", type=float, default=1.0, help="rx spacing for untagged lines")
    p.add_argument("--max-error-rate", type=float, default=None)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("validate", help="correct navigational statuses")
    p.add_argument("--input", required=True, help="decoded JSONL")
    p.add_argument("--output", required=True)
    p.add_argument("--outages-output", default=None)
    p.add_argument("--port", help="GeoJSON with anchorage/terminal polygons")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--method", choices=validate.METHODS)
    p.add_argument("--min-agreement", type=float, default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("voyages", help="group validated messages into voyages")
    p.add_argument("--input", required=True, help="validated JSONL")
    p.add_argument("--output", required=True)
    p.add_argument("--outages", help="outages JSONL from the validate stage")
    p.add_argument("--area", help="GeoJSON polygon bounding the port area")
    p.add_argument("--center", help="lat,lon of a circular port area")
    p.add_argument("--radius-m", type=float, default=10000.0)
    p.set_defaults(func=cmd_voyages)

    p = sub.add_parser("metrics", help="turnaround/wait/arrival reports")
    p.add_argument("--voyages", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--static", help="decoded JSONL supplying ship types")
    p.add_argument("--ground-truth", help="CSV of port call records")
    p.add_argument("--exclude-dates", help="comma-separated ISO dates to skip in MAE")
    p.add_argument("--vessel", type=int, help="emit a per-vessel schedule table")
    p.add_argument("--port", help="GeoJSON for terminal attribution")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="generate a synthetic scenario")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--preset", choices=("mixed", "ferry"), default="mixed")
    p.add_argument("--vessels", type=int, default=10)
    p.add_argument("--days", type=int, default=3)
    p.add_argument("--error-p", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out-nmea", required=True)
    p.add_argument("--out-truth", required=True)
    p.add_argument("--out-port", help="write the port polygons as GeoJSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="read a live TCP feed or replay a file into a store")
    p.add_argument("--source", required=True, help="tcp://host:port or file:path")
    p.add_argument("--store", required=True, help="output directory (date-partitioned JSONL)")
    p.add_argument("--replay-speed", type=float, default=0.0)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="decode + validate + voyages + metrics in one go")
    p.add_argument("--input", required=True, help="NMEA file")
    p.add_argument("--outdir", required=True)
    p.add_argument("--port", help="GeoJSON with anchorage/terminal polygons")
    p.add_argument("--config")
    p.add_argument("--method", choices=validate.METHODS)
    p.add_argument("--area")
    p.add_argument("--center")
    p.add_argument("--radius-m", type=float, default=10000.0)
    p.add_argument("--ground-truth")
    p.add_argument("--exclude-dates")
    p.add_argument("--vessel", type=int)
    p.add_argument("--raw-start", default="2000-01-01T00:00:00Z")
    p.add_argument("--raw-cadence-s", type=float, default=1.0)
    p.add_argument("--max-error-rate", type=float, default=None)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
