"""Command-line interface.

Subcommands mirror the HTTP endpoints but work on local files. Route
state lives in a bundle JSON: the dataset files it was built from plus
the ordered operation history (solve, edits, canvass splices). Every
mutating subcommand appends an operation and re-executes the history,
so a bundle is replayable the same way a service session is.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import date
from pathlib import Path
from typing import Any, Sequence

from .campaign import (
    CampaignPolicy,
    SurveyCalendar,
    generate_calendar,
    insert_event_survey,
    reschedule,
)
from .config import SolverConfig
from .errors import EngineError, ValidationError
from .income import classify_block_groups, rank_candidate_areas
from .ingest import unproject
from .reporting import export_route, report
from .routes import route_to_dict
from .service import EngineStore, _flagged_assets, execute_history

DEFAULT_BIND = "127.0.0.1"
DEFAULT_PORT = 8820


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}")


def _emit(data: Any) -> None:
    print(json.dumps(data, indent=2, sort_keys=True))


def _load_config(args: argparse.Namespace) -> SolverConfig:
    config = (
        SolverConfig.from_json_file(args.config)
        if getattr(args, "config", None)
        else SolverConfig()
    )
    if getattr(args, "seed", None) is not None:
        config = config.with_overrides(seed=args.seed)
    return config


def _parse_polygon(args: argparse.Namespace) -> list[list[float]]:
    if getattr(args, "polygon", None):
        ring = []
        for token in args.polygon.replace(";", " ").split():
            lon, _, lat = token.partition(",")
            try:
                ring.append([float(lon), float(lat)])
            except ValueError:
                raise ValidationError(f"bad polygon vertex {token!r}")
        return ring
    if getattr(args, "polygon_file", None):
        data = json.loads(_read_bytes(args.polygon_file))
        geometry = data.get("geometry", data)
        if geometry.get("type") != "Polygon":
            raise ValidationError("polygon file must hold a GeoJSON Polygon")
        return [[float(x), float(y)] for x, y in geometry["coordinates"][0]]
    raise ValidationError("provide --polygon or --polygon-file")


class _Bundle:
    """A route bundle: dataset files plus the operation history."""

    def __init__(self, data: dict[str, Any], path: str):
        self.data = data
        self.path = path
        self.store = EngineStore()
        for spec in data.get("datasets", []):
            self.store.add_dataset(
                spec["kind"], _read_bytes(spec["path"]), spec.get("fmt")
            )

    @classmethod
    def load(cls, path: str) -> "_Bundle":
        try:
            data = json.loads(_read_bytes(path))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"route bundle {path} is not valid JSON: {exc}")
        return cls(data, path)

    @classmethod
    def fresh(cls, path: str, datasets: list[dict[str, Any]]) -> "_Bundle":
        return cls({"datasets": datasets, "history": []}, path)

    def run(self, new_ops: Sequence[dict[str, Any]] = ()) -> dict[str, Any]:
        """Execute history plus ``new_ops``; commit and save on success."""
        history = list(self.data.get("history", [])) + list(new_ops)
        result = execute_history(self.store, history)
        self.data["history"] = history
        self.data["route"] = route_to_dict(result.route)
        cov = report(
            result.route,
            result.graph,
            _flagged_assets(result),
            result.config.with_overrides(traffic_multiplier=1.0),
        )
        self.data["report"] = cov.to_dict()
        if result.solution is not None:
            self.data["visit_order"] = list(result.solution.visit_order)
            self.data["dropped"] = dict(result.solution.dropped)
        Path(self.path).write_text(
            json.dumps(self.data, indent=1), encoding="utf-8"
        )
        self._result = result
        return self.data

    @property
    def result(self):
        if not hasattr(self, "_result"):
            self.run()
        return self._result


def _dataset_specs(args: argparse.Namespace) -> list[dict[str, Any]]:
    specs = [{"kind": "network", "path": args.network}]
    if getattr(args, "assets", None):
        specs.append(
            {"kind": "assets", "path": args.assets,
             "fmt": getattr(args, "assets_format", None)}
        )
    if getattr(args, "blockgroups", None):
        specs.append({"kind": "blockgroups", "path": args.blockgroups})
    return specs


# -- subcommands ------------------------------------------------------------


def _cmd_ingest(args: argparse.Namespace) -> int:
    store = EngineStore()
    out = {}
    for spec in _dataset_specs(args):
        ds = store.add_dataset(spec["kind"], _read_bytes(spec["path"]),
                               spec.get("fmt"))
        out[spec["kind"]] = {"dataset_id": ds.dataset_id, **ds.summary}
    _emit(out)
    return 0


def _cmd_jenks(args: argparse.Namespace) -> int:
    from .ingest import load_block_groups

    groups = load_block_groups(_read_bytes(args.blockgroups))
    labeled, result = classify_block_groups(groups, args.k)
    _emit(
        {
            "k": result.k,
            "breaks": list(result.breaks),
            "ssd": result.ssd,
            "gvf": result.gvf,
            "group_labels": {g.bg_id: g.cluster_label for g in labeled},
        }
    )
    return 0


def _cmd_areas(args: argparse.Namespace) -> int:
    from .ingest import load_block_groups, load_road_network

    network = load_road_network(_read_bytes(args.network))
    groups = load_block_groups(_read_bytes(args.blockgroups))
    labeled, _ = classify_block_groups(groups, args.k)
    config = _load_config(args)
    areas = rank_candidate_areas(
        labeled, network, args.window_m, args.stride_m,
        config.include_degree2_intersections,
    )
    out = []
    for area in areas[: args.limit]:
        x0, y0, x1, y1 = area.rect
        sw = unproject((x0, y0), network.projection_origin)
        ne = unproject((x1, y1), network.projection_origin)
        out.append(
            {
                "rect_lonlat": [sw.lon, sw.lat, ne.lon, ne.lat],
                "spread_score": area.spread_score,
                "intersection_count": area.intersection_count,
                "classes_present": sorted(area.classes_present),
                "road_class_count": area.road_class_count,
            }
        )
    _emit({"areas": out})
    return 0


def _cmd_solve_transect(args: argparse.Namespace) -> int:
    config = _load_config(args)
    bundle = _Bundle.fresh(args.out, _dataset_specs(args))
    net_id = next(
        ds for ds in bundle.store.datasets.values() if ds.kind == "network"
    ).dataset_id
    assets_id = next(
        ds for ds in bundle.store.datasets.values() if ds.kind == "assets"
    ).dataset_id
    if args.depot_node:
        depot: dict[str, Any] = {"node": args.depot_node}
    elif args.depot:
        lon, _, lat = args.depot.partition(",")
        depot = {"lon": float(lon), "lat": float(lat)}
    else:
        raise ValidationError("provide --depot-node or --depot lon,lat")
    body: dict[str, Any] = {
        "network": net_id,
        "assets": assets_id,
        "depot": depot,
        "budget_s": args.budget_s,
        "closed_tour": not args.open,
        "config": config.to_dict(),
    }
    if args.seed_classes:
        body["seed_classes"] = [c.strip() for c in args.seed_classes.split(",")]
    bundle.run([{"op": "transect", "body": body}])
    _emit(
        {
            "out": args.out,
            "total_time_s": bundle.data["route"]["total_time_s"],
            "total_length_m": bundle.data["route"]["total_length_m"],
            "visit_order": bundle.data.get("visit_order", []),
            "dropped": bundle.data.get("dropped", {}),
        }
    )
    return 0


def _cmd_solve_canvass(args: argparse.Namespace) -> int:
    from .canvass import CanvassProblem, solve_canvass
    from .graph import TurnModel, build_graph
    from .ingest import GeoPoint, load_road_network, project

    network = load_road_network(_read_bytes(args.network))
    config = _load_config(args)
    graph = build_graph(network, config)
    ring = tuple(
        project(GeoPoint(lon, lat), network.projection_origin)
        for lon, lat in _parse_polygon(args)
    )
    route = solve_canvass(
        CanvassProblem(polygon=ring, entry_node=args.entry, exit_node=args.exit),
        graph,
        TurnModel(config.u_turn_penalty_s),
        config,
    )
    _emit(route_to_dict(route))
    return 0


def _cmd_splice(args: argparse.Namespace) -> int:
    bundle = _Bundle.load(args.route)
    body = {
        "polygon": _parse_polygon(args),
        "entry_sync": args.entry,
        "exit_sync": args.exit,
    }
    bundle.run([{"op": "canvass", "body": body}])
    _emit(
        {
            "out": bundle.path,
            "total_time_s": bundle.data["route"]["total_time_s"],
            "total_length_m": bundle.data["route"]["total_length_m"],
        }
    )
    return 0


def _cmd_edit(args: argparse.Namespace) -> int:
    bundle = _Bundle.load(args.route)
    commands = json.loads(_read_bytes(args.commands))
    if not isinstance(commands, list):
        raise ValidationError("edit commands file must hold a JSON list")
    bundle.run([{"op": "edits", "commands": commands}])
    _emit(
        {
            "out": bundle.path,
            "total_time_s": bundle.data["route"]["total_time_s"],
            "report": bundle.data["report"],
        }
    )
    return 0


def _cmd_prune(args: argparse.Namespace) -> int:
    bundle = _Bundle.load(args.route)
    threshold: Any = (
        "INFINITE" if args.min_assets is None else args.min_assets
    )
    command = {"kind": "PRUNE_SPURS", "min_assets_per_spur": threshold}
    bundle.run([{"op": "edits", "commands": [command]}])
    _emit(
        {
            "out": bundle.path,
            "total_time_s": bundle.data["route"]["total_time_s"],
            "three_point_turns": len(bundle.data["route"].get("maneuvers", [])),
        }
    )
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    from datetime import datetime

    bundle = _Bundle.load(args.route)
    bundle.run()
    result = bundle.result
    start_clock = (
        datetime.fromisoformat(args.start_clock) if args.start_clock else None
    )
    cov = report(
        result.route,
        result.graph,
        _flagged_assets(result),
        result.config.with_overrides(traffic_multiplier=args.multiplier),
        start_clock=start_clock,
    )
    _emit(cov.to_dict())
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    bundle = _Bundle.load(args.route)
    bundle.run()
    result = bundle.result
    data = export_route(result.route, result.graph, args.format)
    if args.out:
        Path(args.out).write_bytes(data)
        _emit({"out": args.out, "bytes": len(data)})
    else:
        sys.stdout.buffer.write(data)
    return 0


def _format_calendar(calendar: SurveyCalendar) -> str:
    lines = [f"{'date':<12} {'kind':<12} note"]
    for entry in calendar.entries:
        lines.append(
            f"{entry.survey_date.isoformat():<12} {entry.kind:<12} {entry.note}"
        )
    return "\n".join(lines)


def _cmd_schedule(args: argparse.Namespace) -> int:
    if args.calendar:
        calendar = SurveyCalendar.from_dict(json.loads(_read_bytes(args.calendar)))
    else:
        if not args.start:
            raise ValidationError("provide --start for a new calendar")
        policy = CampaignPolicy(
            start_date=date.fromisoformat(args.start),
            phase1_interval_days=args.phase1_interval,
            phase1_months=args.phase1_months,
            phase2_interval_days=args.phase2_interval,
            preferred_weekday=args.weekday,
            event_lag_days=args.event_lag,
        )
        calendar = generate_calendar(policy, args.horizon_days)
    if args.event_date:
        calendar = insert_event_survey(
            calendar, date.fromisoformat(args.event_date), args.note or ""
        )
    if args.reschedule_date:
        if not (args.reason and args.earliest):
            raise ValidationError("reschedule needs --reason and --earliest")
        calendar = reschedule(
            calendar,
            date.fromisoformat(args.reschedule_date),
            args.reason,
            date.fromisoformat(args.earliest),
        )
    if args.out:
        Path(args.out).write_text(
            json.dumps(calendar.to_dict(), indent=1), encoding="utf-8"
        )
    if args.json:
        _emit(calendar.to_dict())
    else:
        print(_format_calendar(calendar))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    bind = args.bind or os.environ.get("RECON_BIND", DEFAULT_BIND)
    port = args.port or int(os.environ.get("RECON_PORT", DEFAULT_PORT))
    app = create_app(data_dir=args.data_dir)
    uvicorn.run(app, host=bind, port=port, log_level="info")
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recon-route",
        description="Design and maintain street-view reconnaissance routes.",
    )
    parser.add_argument("--config", help="solver config JSON file")
    parser.add_argument("--seed", type=int, help="override config seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and summarize input files")
    p.add_argument("--network", required=True)
    p.add_argument("--assets")
    p.add_argument("--assets-format", choices=["csv", "geojson"])
    p.add_argument("--blockgroups")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("jenks", help="natural-breaks classification of income")
    p.add_argument("--blockgroups", required=True)
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=_cmd_jenks)

    p = sub.add_parser("areas", help="rank candidate canvass areas")
    p.add_argument("--network", required=True)
    p.add_argument("--blockgroups", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--window-m", type=float, required=True)
    p.add_argument("--stride-m", type=float, required=True)
    p.add_argument("--limit", type=int, default=20)
    p.set_defaults(func=_cmd_areas)

    p = sub.add_parser("solve-transect", help="solve a capitals transect")
    p.add_argument("--network", required=True)
    p.add_argument("--assets", required=True)
    p.add_argument("--assets-format", choices=["csv", "geojson"])
    p.add_argument("--blockgroups")
    p.add_argument("--depot-node")
    p.add_argument("--depot", help="lon,lat snapped to the nearest node")
    p.add_argument("--budget-s", type=float, required=True)
    p.add_argument("--seed-classes", help="comma-separated capital classes")
    p.add_argument("--open", action="store_true",
                   help="open path instead of a closed tour")
    p.add_argument("--out", required=True, help="route bundle to write")
    p.set_defaults(func=_cmd_solve_transect)

    p = sub.add_parser("solve-canvass", help="canvass an area standalone")
    p.add_argument("--network", required=True)
    p.add_argument("--polygon", help="lon,lat;lon,lat;... ring")
    p.add_argument("--polygon-file", help="GeoJSON Polygon file")
    p.add_argument("--entry", required=True)
    p.add_argument("--exit", required=True)
    p.set_defaults(func=_cmd_solve_canvass)

    p = sub.add_parser("splice", help="canvass an area and splice it in")
    p.add_argument("--route", required=True, help="route bundle")
    p.add_argument("--polygon")
    p.add_argument("--polygon-file")
    p.add_argument("--entry", required=True, help="entry sync node")
    p.add_argument("--exit", required=True, help="exit sync node")
    p.set_defaults(func=_cmd_splice)

    p = sub.add_parser("edit", help="apply an edit-command batch")
    p.add_argument("--route", required=True)
    p.add_argument("--commands", required=True, help="JSON list of commands")
    p.set_defaults(func=_cmd_edit)

    p = sub.add_parser("prune", help="excise three-point-turn spurs")
    p.add_argument("--route", required=True)
    p.add_argument("--min-assets", type=float,
                   help="keep spurs uniquely covering at least this many"
                        " assets (default: remove all)")
    p.set_defaults(func=_cmd_prune)

    p = sub.add_parser("report", help="coverage and timing report")
    p.add_argument("--route", required=True)
    p.add_argument("--start-clock", help="ISO datetime of departure")
    p.add_argument("--multiplier", type=float, default=1.0,
                   help="traffic multiplier relative to the solved route")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("export", help="write GPX or GeoJSON")
    p.add_argument("--route", required=True)
    p.add_argument("--format", choices=["gpx", "geojson"], default="geojson")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("schedule", help="survey calendar operations")
    p.add_argument("--start", help="campaign start date YYYY-MM-DD")
    p.add_argument("--horizon-days", type=int, default=365)
    p.add_argument("--phase1-interval", type=int, default=14)
    p.add_argument("--phase1-months", type=int, default=4)
    p.add_argument("--phase2-interval", type=int, default=42)
    p.add_argument("--weekday", type=int, default=4,
                   help="preferred weekday, Monday=0 (default Friday)")
    p.add_argument("--event-lag", type=int, default=1)
    p.add_argument("--calendar", help="existing calendar JSON to operate on")
    p.add_argument("--event-date", help="insert an event survey after this date")
    p.add_argument("--note", help="note for the event survey")
    p.add_argument("--reschedule-date", help="move the survey on this date")
    p.add_argument("--earliest", help="earliest feasible date for reschedule")
    p.add_argument("--reason", help="reschedule reason, e.g. RAIN")
    p.add_argument("--out", help="write the calendar JSON here")
    p.add_argument("--json", action="store_true", help="print JSON not a table")
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--bind", help=f"default {DEFAULT_BIND} or RECON_BIND")
    p.add_argument("--port", type=int,
                   help=f"default {DEFAULT_PORT} or RECON_PORT")
    p.add_argument("--data-dir", help="session persistence directory")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(json.dumps({"code": exc.code, "detail": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
