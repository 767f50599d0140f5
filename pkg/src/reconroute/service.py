"""HTTP/JSON facade over the route engine.

The service owns route sessions. A session is nothing but its initial
solve request plus the ordered list of operations applied since; every
mutation re-executes that history from scratch, so the stored route is
by construction what a replay produces. Mutations on one session are
serialized by a non-blocking writer lock (concurrent writers get 409),
solves that outlast the slow threshold detach into a poll job (202),
and each committed mutation snapshots the session as JSON under the
data directory so a restarted service picks up where it left off.

Engine errors map to HTTP as {"code": <error class>, "detail": ...}:
404 for unknown ids, 400 for everything else. Exports carry a strong
ETag (content digest) so identical bytes revalidate.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from concurrent.futures import Future, ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Any, Mapping, Sequence

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .campaign import (
    CampaignPolicy,
    SurveyCalendar,
    generate_calendar,
    insert_event_survey,
    reschedule,
)
from .config import SolverConfig
from .editing import (
    EditContext,
    EditState,
    apply_edits,
    parse_edit_command,
    restricted_graph,
    splice,
)
from .canvass import CanvassProblem, solve_canvass
from .errors import (
    EngineError,
    NotFoundError,
    ValidationError,
)
from .graph import RoutableGraph, TurnModel, build_graph
from .income import classify_block_groups, jenks_breaks, rank_candidate_areas
from .ingest import (
    Asset,
    BlockGroup,
    GeoPoint,
    RoadNetwork,
    load_assets,
    load_block_groups,
    load_road_network,
    project,
    unproject,
)
from .reporting import export_route, report
from .routes import Route, nearest_node, route_to_dict
from .spatial import AssetAssociation, associate_assets
from .transect import (
    TransectProblem,
    TransectSolution,
    build_transect_problem,
    select_seed_classes,
    solve_transect,
)

DATASET_KINDS = ("network", "assets", "blockgroups")

EXPORT_MEDIA_TYPES = {
    "gpx": "application/gpx+xml",
    "geojson": "application/geo+json",
}


class _Conflict(Exception):
    """A mutation raced another writer on the same session."""


def _dataset_id(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()[:12]


@dataclass
class _Dataset:
    dataset_id: str
    kind: str
    raw: bytes
    parsed: Any
    summary: dict[str, Any]


@dataclass
class _ExecResult:
    """Everything the history replay produces, for responses and reports."""

    network: RoadNetwork
    config: SolverConfig
    turn: TurnModel
    base_graph: RoutableGraph
    graph: RoutableGraph
    assets: tuple[Asset, ...]
    associations: dict[str, AssetAssociation]
    problem: TransectProblem
    solution: TransectSolution | None
    state: EditState
    route: Route
    seed_classes: tuple[str, ...]
    spur_reports: tuple[Any, ...] = ()


@dataclass
class _Session:
    session_id: str
    history: list[dict[str, Any]] = field(default_factory=list)
    result: _ExecResult | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class _Job:
    job_id: str
    future: Future


class EngineStore:
    """Datasets, sessions, calendars, and their persistence."""

    def __init__(self, data_dir: str | Path | None = None):
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self.datasets: dict[str, _Dataset] = {}
        self.sessions: dict[str, _Session] = {}
        self.calendars: dict[str, SurveyCalendar] = {}
        self.jobs: dict[str, _Job] = {}
        self._registry_lock = threading.Lock()
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            (self.data_dir / "datasets").mkdir(exist_ok=True)
            (self.data_dir / "sessions").mkdir(exist_ok=True)
            (self.data_dir / "calendars").mkdir(exist_ok=True)
            self._restore()

    # -- datasets ---------------------------------------------------------

    def add_dataset(self, kind: str, raw: bytes, fmt: str | None = None) -> _Dataset:
        if kind not in DATASET_KINDS:
            raise NotFoundError(f"unknown dataset kind {kind!r}")
        parsed, summary = _parse_dataset(kind, raw, fmt)
        dataset = _Dataset(
            dataset_id=_dataset_id(raw), kind=kind, raw=raw, parsed=parsed,
            summary=summary,
        )
        with self._registry_lock:
            self.datasets[dataset.dataset_id] = dataset
        if self.data_dir is not None:
            path = self.data_dir / "datasets" / f"{kind}-{dataset.dataset_id}"
            path.write_bytes(raw)
        return dataset

    def dataset(self, dataset_id: str, kind: str) -> _Dataset:
        ds = self.datasets.get(dataset_id)
        if ds is None or ds.kind != kind:
            raise NotFoundError(f"unknown {kind} dataset {dataset_id!r}")
        return ds

    # -- sessions ---------------------------------------------------------

    def session(self, session_id: str) -> _Session:
        # A session becomes visible when its first solve commits; until
        # then only the creating request's job knows about it.
        sess = self.sessions.get(session_id)
        if sess is None or sess.result is None:
            raise NotFoundError(f"unknown session {session_id!r}")
        return sess

    def persist_session(self, sess: _Session) -> None:
        if self.data_dir is None:
            return
        snapshot = {"session_id": sess.session_id, "history": sess.history}
        path = self.data_dir / "sessions" / f"{sess.session_id}.json"
        path.write_text(json.dumps(snapshot, indent=1), encoding="utf-8")

    def persist_calendar(self, calendar_id: str) -> None:
        if self.data_dir is None:
            return
        path = self.data_dir / "calendars" / f"{calendar_id}.json"
        path.write_text(
            json.dumps(self.calendars[calendar_id].to_dict(), indent=1),
            encoding="utf-8",
        )

    def _restore(self) -> None:
        assert self.data_dir is not None
        for path in sorted((self.data_dir / "datasets").glob("*-*")):
            kind, _, _ = path.name.rpartition("-")
            if kind not in DATASET_KINDS:
                continue
            try:
                self.add_dataset(kind, path.read_bytes())
            except EngineError:
                continue  # stale or corrupt upload; skip
        for path in sorted((self.data_dir / "sessions").glob("*.json")):
            try:
                snapshot = json.loads(path.read_text(encoding="utf-8"))
                sess = _Session(
                    session_id=snapshot["session_id"],
                    history=snapshot["history"],
                    result=execute_history(self, snapshot["history"]),
                )
                self.sessions[sess.session_id] = sess
            except (EngineError, KeyError, json.JSONDecodeError):
                continue
        for path in sorted((self.data_dir / "calendars").glob("*.json")):
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
                self.calendars[path.stem] = SurveyCalendar.from_dict(data)
            except (EngineError, KeyError, ValueError, json.JSONDecodeError):
                continue


def _parse_dataset(kind: str, raw: bytes, fmt: str | None) -> tuple[Any, dict[str, Any]]:
    if kind == "network":
        network = load_road_network(raw)
        return network, {
            "nodes": len(network.nodes),
            "edges": len(network.edges),
            "components": network.component_count,
        }
    if kind == "assets":
        if fmt is None:
            head = raw.lstrip()[:1]
            fmt = "geojson" if head == b"{" else "csv"
        assets = load_assets(raw, fmt=fmt)
        by_class: dict[str, int] = {}
        for a in assets:
            by_class[a.component_type] = by_class.get(a.component_type, 0) + 1
        return assets, {"assets": len(assets), "by_class": by_class}
    block_groups = load_block_groups(raw)
    with_income = sum(1 for g in block_groups if g.median_income is not None)
    return block_groups, {
        "block_groups": len(block_groups),
        "with_income": with_income,
    }


# -- history execution ----------------------------------------------------


def _require(body: Mapping[str, Any], *keys: str) -> None:
    missing = [k for k in keys if k not in body]
    if missing:
        raise ValidationError(f"missing required fields: {', '.join(missing)}")


def _resolve_depot(network: RoadNetwork, depot: Any) -> str:
    if not isinstance(depot, Mapping):
        raise ValidationError("depot must be an object with node or lon/lat")
    if "node" in depot:
        node = str(depot["node"])
        if node not in network.node_by_id:
            raise NotFoundError(f"unknown depot node {node!r}")
        return node
    if "lon" in depot and "lat" in depot:
        x, y = project(
            GeoPoint(float(depot["lon"]), float(depot["lat"])),
            network.projection_origin,
        )
        return nearest_node(network, x, y)
    raise ValidationError("depot must carry node or lon/lat")


def _ring_to_xy(network: RoadNetwork, ring: Any) -> tuple[tuple[float, float], ...]:
    if not isinstance(ring, Sequence) or len(ring) < 3:
        raise ValidationError("polygon must be a ring of at least 3 [lon, lat] pairs")
    out = []
    for pt in ring:
        if not isinstance(pt, Sequence) or len(pt) != 2:
            raise ValidationError("polygon vertices must be [lon, lat] pairs")
        out.append(
            project(GeoPoint(float(pt[0]), float(pt[1])), network.projection_origin)
        )
    return tuple(out)


def _exec_transect(store: EngineStore, body: Mapping[str, Any]) -> _ExecResult:
    _require(body, "network", "assets", "depot", "budget_s")
    network: RoadNetwork = store.dataset(str(body["network"]), "network").parsed
    assets: tuple[Asset, ...] = store.dataset(str(body["assets"]), "assets").parsed
    config = SolverConfig.from_dict(body.get("config") or {})
    turn = TurnModel(config.u_turn_penalty_s)
    base_graph = build_graph(network, config)
    associations = associate_assets(assets, network, config.buffer_m)
    depot_node = _resolve_depot(network, body["depot"])

    seed_classes = body.get("seed_classes")
    if not seed_classes:
        seed_classes = select_seed_classes(
            assets, network, config.grid_cell_m, config.target_cells_fraction
        )
    seed_classes = tuple(str(c) for c in seed_classes)

    problem = build_transect_problem(
        assets,
        associations,
        seed_classes,
        depot_node,
        float(body["budget_s"]),
        closed_tour=bool(body.get("closed_tour", True)),
    )
    solution = solve_transect(problem, base_graph, turn, config, assets)
    return _ExecResult(
        network=network,
        config=config,
        turn=turn,
        base_graph=base_graph,
        graph=base_graph,
        assets=assets,
        associations=associations,
        problem=problem,
        solution=solution,
        state=EditState(),
        route=solution.route,
        seed_classes=seed_classes,
    )


def _exec_edits(result: _ExecResult, commands_raw: Sequence[Any]) -> _ExecResult:
    commands = [parse_edit_command(c) for c in commands_raw]
    context = EditContext(
        problem=result.problem,
        graph=result.base_graph,
        turn=result.turn,
        config=result.config,
        assets=result.assets,
        associations=result.associations,
        state=result.state,
    )
    outcome = apply_edits(result.route, commands, context)
    return replace(
        result,
        graph=restricted_graph(result.base_graph, outcome.state),
        problem=result.problem,
        solution=outcome.solution,
        state=outcome.state,
        route=outcome.route,
        spur_reports=outcome.spur_reports,
    )


def _exec_canvass(result: _ExecResult, body: Mapping[str, Any]) -> _ExecResult:
    _require(body, "polygon", "entry_sync", "exit_sync")
    ring = _ring_to_xy(result.network, body["polygon"])
    entry = str(body["entry_sync"])
    exit_ = str(body["exit_sync"])
    canvass_route = solve_canvass(
        CanvassProblem(polygon=ring, entry_node=entry, exit_node=exit_),
        result.graph,
        result.turn,
        result.config,
    )
    spliced = splice(
        result.route, canvass_route, entry, exit_, result.graph, result.turn
    )
    return replace(result, route=spliced)


def execute_history(store: EngineStore, history: Sequence[Mapping[str, Any]]) -> _ExecResult:
    """Re-run a session's operations from scratch.

    The first operation must be the transect solve; later operations are
    edit batches and canvass splices in their original order. Mutations
    commit exactly what this function returns, which is what makes
    replay reproduce the stored route byte for byte.
    """
    if not history or history[0].get("op") != "transect":
        raise ValidationError("session history must start with a transect solve")
    result = _exec_transect(store, history[0].get("body") or {})
    for op in history[1:]:
        kind = op.get("op")
        if kind == "edits":
            result = _exec_edits(result, op.get("commands") or [])
        elif kind == "canvass":
            result = _exec_canvass(result, op.get("body") or {})
        else:
            raise ValidationError(f"unknown session operation {kind!r}")
    return result


def _flagged_assets(result: _ExecResult) -> tuple[Asset, ...]:
    excluded = result.state.excluded_assets
    if not excluded:
        return result.assets
    return tuple(
        replace(a, excluded=True) if a.asset_id in excluded else a
        for a in result.assets
    )


def _session_payload(sess: _Session) -> dict[str, Any]:
    result = sess.result
    assert result is not None  # callers commit before building payloads
    # Reports describe the route as solved; the multiplier is a what-if
    # knob relative to it, so the wire report always uses 1.0.
    cov = report(
        result.route,
        result.graph,
        _flagged_assets(result),
        result.config.with_overrides(traffic_multiplier=1.0),
    )
    payload: dict[str, Any] = {
        "session_id": sess.session_id,
        "route": route_to_dict(result.route),
        "report": cov.to_dict(),
        "seed_classes": list(result.seed_classes),
        "state": result.state.to_dict(),
        "history_length": len(sess.history),
    }
    if result.solution is not None:
        payload["visit_order"] = list(result.solution.visit_order)
        payload["dropped"] = dict(result.solution.dropped)
    if result.spur_reports:
        payload["spur_reports"] = [
            {
                "position": r.position,
                "arc_count": r.arc_count,
                "time_saved_s": r.time_saved_s,
                "assets_lost": sorted(r.assets_lost),
                "waypoints_removed": r.waypoints_removed,
            }
            for r in result.spur_reports
        ]
    return payload


# -- app ------------------------------------------------------------------


def create_app(
    data_dir: str | Path | None = None,
    slow_threshold_s: float = 2.0,
) -> FastAPI:
    """Build the service app.

    ``slow_threshold_s`` is how long a mutation may run inline before the
    response degrades to 202 + poll URL; tests shrink it to exercise the
    job path without a genuinely slow solve.
    """
    app = FastAPI(title="reconroute", docs_url=None, redoc_url=None)
    store = EngineStore(data_dir)
    executor = ThreadPoolExecutor(max_workers=4)
    app.state.store = store
    app.state.executor = executor
    app.state.slow_threshold_s = slow_threshold_s

    @app.exception_handler(EngineError)
    async def _engine_error(request: Request, exc: EngineError) -> JSONResponse:
        status = 404 if isinstance(exc, NotFoundError) else 400
        return JSONResponse(
            status_code=status, content={"code": exc.code, "detail": str(exc)}
        )

    @app.exception_handler(_Conflict)
    async def _conflict(request: Request, exc: _Conflict) -> JSONResponse:
        return JSONResponse(
            status_code=409, content={"code": "Conflict", "detail": str(exc)}
        )

    def _mutate(sess: _Session, op: dict[str, Any]) -> dict[str, Any]:
        """Append one operation, re-execute, commit. Caller holds the lock."""
        try:
            history = sess.history + [op]
            result = execute_history(store, history)
            sess.history = history
            sess.result = result
            store.sessions[sess.session_id] = sess
            store.persist_session(sess)
            return _session_payload(sess)
        finally:
            sess.lock.release()

    def _submit_mutation(
        sess: _Session, op: dict[str, Any], extra: dict[str, Any] | None = None
    ) -> Response:
        if not sess.lock.acquire(blocking=False):
            raise _Conflict(f"session {sess.session_id} has a mutation in flight")
        future = executor.submit(_mutate, sess, op)
        try:
            payload = future.result(timeout=app.state.slow_threshold_s)
        except FutureTimeout:
            job = _Job(job_id=uuid.uuid4().hex[:12], future=future)
            store.jobs[job.job_id] = job
            content = {"status": "pending", "job_id": job.job_id,
                       "poll": f"/jobs/{job.job_id}"}
            content.update(extra or {})
            return JSONResponse(status_code=202, content=content)
        return JSONResponse(payload)

    # -- datasets --

    @app.post("/datasets/{kind}")
    async def post_dataset(kind: str, request: Request, fmt: str | None = None):
        raw = await request.body()
        dataset = store.add_dataset(kind, raw, fmt)
        return JSONResponse(
            {"dataset_id": dataset.dataset_id, "kind": kind,
             "report": dataset.summary}
        )

    # -- analysis --

    @app.post("/analysis/jenks")
    async def post_jenks(request: Request):
        body = await request.json()
        _require(body, "dataset", "k")
        groups: tuple[BlockGroup, ...] = store.dataset(
            str(body["dataset"]), "blockgroups"
        ).parsed
        labeled, result = classify_block_groups(groups, int(body["k"]))
        return JSONResponse(
            {
                "k": result.k,
                "breaks": list(result.breaks),
                "labels": list(result.labels),
                "ssd": result.ssd,
                "gvf": result.gvf,
                "group_labels": {g.bg_id: g.cluster_label for g in labeled},
            }
        )

    @app.get("/analysis/canvass-areas")
    async def get_canvass_areas(
        network: str,
        blockgroups: str,
        window_m: float,
        stride_m: float,
        k: int = 5,
        include_degree2: bool = False,
        limit: int = 20,
    ):
        net: RoadNetwork = store.dataset(network, "network").parsed
        groups: tuple[BlockGroup, ...] = store.dataset(blockgroups, "blockgroups").parsed
        labeled, _ = classify_block_groups(groups, k)
        areas = rank_candidate_areas(
            labeled, net, window_m, stride_m, include_degree2
        )
        out = []
        for area in areas[: max(0, limit)]:
            x0, y0, x1, y1 = area.rect
            sw = unproject((x0, y0), net.projection_origin)
            ne = unproject((x1, y1), net.projection_origin)
            out.append(
                {
                    "rect_xy": [x0, y0, x1, y1],
                    "rect_lonlat": [sw.lon, sw.lat, ne.lon, ne.lat],
                    "spread_score": area.spread_score,
                    "intersection_count": area.intersection_count,
                    "classes_present": sorted(area.classes_present),
                    "road_class_count": area.road_class_count,
                }
            )
        return JSONResponse({"areas": out})

    # -- sessions --

    @app.post("/sessions/transect")
    async def post_transect(request: Request):
        body = await request.json()
        sess = _Session(session_id=uuid.uuid4().hex[:12])
        return _submit_mutation(
            sess, {"op": "transect", "body": body},
            extra={"session_id": sess.session_id},
        )

    @app.post("/sessions/{session_id}/canvass")
    async def post_canvass(session_id: str, request: Request):
        body = await request.json()
        sess = store.session(session_id)
        return _submit_mutation(sess, {"op": "canvass", "body": body})

    @app.post("/sessions/{session_id}/edits")
    async def post_edits(session_id: str, request: Request):
        body = await request.json()
        commands = body if isinstance(body, list) else body.get("commands")
        if commands is None:
            raise ValidationError("edits body must be a list or {commands: [...]}")
        sess = store.session(session_id)
        return _submit_mutation(sess, {"op": "edits", "commands": commands})

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        sess = store.session(session_id)
        payload = _session_payload(sess)
        payload["history"] = sess.history
        return JSONResponse(payload)

    @app.post("/sessions/{session_id}/replay")
    async def post_replay(session_id: str):
        sess = store.session(session_id)
        fresh = execute_history(store, sess.history)
        current = json.dumps(route_to_dict(sess.result.route), sort_keys=True)
        replayed = json.dumps(route_to_dict(fresh.route), sort_keys=True)
        return JSONResponse(
            {"route": route_to_dict(fresh.route),
             "matches_current": current == replayed}
        )

    @app.get("/sessions/{session_id}/export")
    async def get_export(session_id: str, request: Request, format: str = "geojson"):
        sess = store.session(session_id)
        data = export_route(sess.result.route, sess.result.graph, format)
        etag = '"' + hashlib.sha256(data).hexdigest() + '"'
        if request.headers.get("if-none-match") == etag:
            return Response(status_code=304, headers={"ETag": etag})
        return Response(
            content=data,
            media_type=EXPORT_MEDIA_TYPES[format],
            headers={
                "ETag": etag,
                "Content-Disposition":
                    f'attachment; filename="route-{session_id}.{format}"',
            },
        )

    # -- calendars --

    @app.post("/calendar")
    async def post_calendar(request: Request):
        body = await request.json()
        _require(body, "policy", "horizon_days")
        try:
            policy = CampaignPolicy.from_dict(body["policy"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad campaign policy: {exc}")
        calendar = generate_calendar(policy, int(body["horizon_days"]))
        calendar_id = uuid.uuid4().hex[:12]
        store.calendars[calendar_id] = calendar
        store.persist_calendar(calendar_id)
        payload = calendar.to_dict()
        payload["calendar_id"] = calendar_id
        return JSONResponse(payload)

    def _calendar(calendar_id: str) -> SurveyCalendar:
        cal = store.calendars.get(calendar_id)
        if cal is None:
            raise NotFoundError(f"unknown calendar {calendar_id!r}")
        return cal

    @app.get("/calendar/{calendar_id}")
    async def get_calendar(calendar_id: str):
        payload = _calendar(calendar_id).to_dict()
        payload["calendar_id"] = calendar_id
        return JSONResponse(payload)

    @app.post("/calendar/{calendar_id}/event")
    async def post_calendar_event(calendar_id: str, request: Request):
        body = await request.json()
        _require(body, "event_date")
        try:
            event_date = date.fromisoformat(str(body["event_date"]))
        except ValueError as exc:
            raise ValidationError(str(exc))
        calendar = insert_event_survey(
            _calendar(calendar_id), event_date, str(body.get("note", ""))
        )
        store.calendars[calendar_id] = calendar
        store.persist_calendar(calendar_id)
        payload = calendar.to_dict()
        payload["calendar_id"] = calendar_id
        return JSONResponse(payload)

    @app.post("/calendar/{calendar_id}/reschedule")
    async def post_calendar_reschedule(calendar_id: str, request: Request):
        body = await request.json()
        _require(body, "entry_date", "reason", "earliest_feasible")
        try:
            entry_date = date.fromisoformat(str(body["entry_date"]))
            earliest = date.fromisoformat(str(body["earliest_feasible"]))
        except ValueError as exc:
            raise ValidationError(str(exc))
        calendar = reschedule(
            _calendar(calendar_id), entry_date, str(body["reason"]), earliest
        )
        store.calendars[calendar_id] = calendar
        store.persist_calendar(calendar_id)
        payload = calendar.to_dict()
        payload["calendar_id"] = calendar_id
        return JSONResponse(payload)

    # -- jobs --

    @app.get("/jobs/{job_id}")
    async def get_job(job_id: str):
        job = store.jobs.get(job_id)
        if job is None:
            raise NotFoundError(f"unknown job {job_id!r}")
        if not job.future.done():
            return JSONResponse(status_code=202, content={"status": "pending"})
        return JSONResponse(job.future.result())  # re-raises engine errors

    return app
