"""Route editing: spur pruning, canvass splicing, and constraint edits.

Three-point turns are the expensive field maneuver this module exists to
remove. A spur is the maximal out-and-back arc run around a reversal;
pruning excises spurs whose unique buffer coverage falls below a
threshold (the default threshold is infinite: every spur goes) and
re-joins the seam, which for an out-and-back is the same node, so no
connector path is needed.

Constraint edits never patch a route in place. They fold into an edit
state (locks, exclusions, avoid areas, budget) and the underlying
problem is re-solved from scratch, which keeps edited routes exactly as
reproducible as first solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

from .config import INFINITE, SolverConfig
from .errors import (
    ConstraintError,
    NotFoundError,
    SyncError,
    ValidationError,
)
from .graph import RoutableGraph, TurnModel
from .ingest import Asset, GeoPoint, project_many
from .routes import (
    Route,
    Waypoint,
    WaypointKind,
    build_route,
    detect_three_point_turns,
)
from .spatial import XY, AssetAssociation, edges_coverage, polyline_intersects_polygon
from .transect import TransectProblem, TransectSolution, solve_transect

EDIT_KINDS = (
    "LOCK_WAYPOINT",
    "EXCLUDE_ASSET",
    "ADD_WAYPOINT",
    "AVOID_AREA",
    "PRUNE_SPURS",
    "SET_BUDGET",
)

_WAYPOINT_PRIORITY = {
    WaypointKind.DEPOT: 0,
    WaypointKind.LOCKED: 1,
    WaypointKind.CAPITAL: 2,
    WaypointKind.SYNC: 3,
    WaypointKind.INTERSECTION: 4,
}


@dataclass(frozen=True)
class SpurReport:
    position: int  # arc index where the spur began
    arc_count: int
    time_saved_s: float
    assets_lost: tuple[str, ...]
    waypoints_removed: tuple[str, ...]


def prune_spurs(
    route: Route,
    graph: RoutableGraph,
    turn: TurnModel,
    assets: Sequence[Asset],
    buffer_m: float,
    min_assets_per_spur: float = INFINITE,
) -> tuple[Route, list[SpurReport]]:
    """Excise out-and-back spurs that uniquely cover fewer than
    ``min_assets_per_spur`` assets.

    With the default infinite threshold every spur is removed and the
    result contains no three-point turns at all. A spur's unique
    coverage is what the rest of the route does not already pass within
    the buffer, so redundant detours always go first regardless of the
    threshold.
    """
    arcs = list(route.arcs)
    waypoints = list(route.waypoints)
    reports: list[SpurReport] = []
    k = 0
    while k < len(arcs) - 1:
        if graph.reverse_arc.get(arcs[k]) != arcs[k + 1]:
            k += 1
            continue
        m = 1
        while (
            k - m >= 0
            and k + 1 + m < len(arcs)
            and graph.reverse_arc.get(arcs[k - m]) == arcs[k + 1 + m]
        ):
            m += 1
        a, b = k - m + 1, k + m

        spur_arcs = arcs[a : b + 1]
        rest = arcs[:a] + arcs[b + 1 :]
        all_edges = {graph.arcs[x].base_edge_id for x in arcs}
        rest_edges = {graph.arcs[x].base_edge_id for x in rest}
        covered_all = edges_coverage(all_edges, graph.network, assets, buffer_m)
        covered_rest = edges_coverage(rest_edges, graph.network, assets, buffer_m)
        lost = tuple(sorted(covered_all - covered_rest))

        if len(lost) >= min_assets_per_spur:
            k = b + 1
            continue

        time_saved = (
            sum(graph.arcs[x].travel_time_s for x in spur_arcs)
            + turn.u_turn_penalty_s
        )
        removed_refs = []
        kept: list[Waypoint] = []
        delta = b + 1 - a
        for wp in waypoints:
            if wp.position <= a:
                kept.append(wp)
            elif wp.position == b + 1:
                # The seam node: same node as position a, fold onto it.
                kept.append(replace(wp, position=a))
            elif wp.position <= b:
                removed_refs.append(wp.ref or wp.node)
            else:
                kept.append(replace(wp, position=wp.position - delta))
        waypoints = kept
        arcs = rest
        reports.append(
            SpurReport(
                position=a,
                arc_count=len(spur_arcs),
                time_saved_s=time_saved,
                assets_lost=lost,
                waypoints_removed=tuple(removed_refs),
            )
        )
        k = max(a - 1, 0)

    new_route = build_route(
        graph,
        turn,
        arcs,
        _dedupe_waypoints(waypoints),
        start_node=route.start_node,
    )
    return new_route, reports


def _dedupe_waypoints(waypoints: Sequence[Waypoint]) -> list[Waypoint]:
    by_pos: dict[int, Waypoint] = {}
    for wp in waypoints:
        cur = by_pos.get(wp.position)
        if cur is None or _WAYPOINT_PRIORITY[wp.kind] < _WAYPOINT_PRIORITY[cur.kind]:
            by_pos[wp.position] = wp
    return [by_pos[p] for p in sorted(by_pos)]


def splice(
    capitals_route: Route,
    canvass_route: Route,
    entry_sync: str,
    exit_sync: str,
    graph: RoutableGraph,
    turn: TurnModel,
) -> Route:
    """Replace the capitals-route segment between two sync nodes with a
    canvass route that starts and ends exactly there.

    The entry sync is matched at its first occurrence in the capitals
    node sequence and the exit sync at its first occurrence after it;
    SyncError reports which expectation failed.
    """
    nodes = capitals_route.nodes
    try:
        i = nodes.index(entry_sync)
    except ValueError:
        raise SyncError(f"entry sync {entry_sync!r} is not on the capitals route")
    j = None
    for p in range(i, len(nodes)):
        if nodes[p] == exit_sync:
            j = p
            break
    if j is None:
        raise SyncError(
            f"exit sync {exit_sync!r} does not occur after entry {entry_sync!r} "
            "on the capitals route"
        )
    if canvass_route.start_node != entry_sync or canvass_route.end_node != exit_sync:
        raise SyncError(
            "canvass route endpoints "
            f"({canvass_route.start_node!r} -> {canvass_route.end_node!r}) "
            f"do not match the sync nodes ({entry_sync!r} -> {exit_sync!r})"
        )

    new_arcs = capitals_route.arcs[:i] + canvass_route.arcs + capitals_route.arcs[j:]
    insert_len = len(canvass_route.arcs)
    merged: list[Waypoint] = []
    for wp in capitals_route.waypoints:
        if wp.position < i:
            merged.append(wp)
        elif wp.position == i:
            merged.append(wp)
        elif wp.position >= j:
            merged.append(replace(wp, position=wp.position - j + i + insert_len))
        # Waypoints strictly inside the replaced span are gone with it.
    for wp in canvass_route.waypoints:
        merged.append(replace(wp, position=wp.position + i))

    return build_route(
        graph,
        turn,
        new_arcs,
        _dedupe_waypoints(merged),
        start_node=capitals_route.start_node,
    )


# --- constraint edits ------------------------------------------------------


@dataclass(frozen=True)
class EditCommand:
    kind: str
    asset_id: str | None = None
    node: str | None = None
    polygon: tuple[tuple[float, float], ...] | None = None  # lon/lat ring
    seconds: float | None = None
    min_assets_per_spur: float | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.asset_id is not None:
            out["asset_id"] = self.asset_id
        if self.node is not None:
            out["node"] = self.node
        if self.polygon is not None:
            out["polygon"] = [list(p) for p in self.polygon]
        if self.seconds is not None:
            out["seconds"] = self.seconds
        if self.min_assets_per_spur is not None:
            out["min_assets_per_spur"] = (
                "INFINITE" if math.isinf(self.min_assets_per_spur)
                else self.min_assets_per_spur
            )
        return out


def parse_edit_command(data: Mapping[str, Any]) -> EditCommand:
    """Validate one JSON edit command: {"kind": ..., payload per kind}."""
    kind = data.get("kind")
    if kind not in EDIT_KINDS:
        raise ValidationError(
            f"unknown edit kind {kind!r}; expected one of {list(EDIT_KINDS)}"
        )
    if kind in ("LOCK_WAYPOINT", "EXCLUDE_ASSET"):
        asset_id = data.get("asset_id")
        if not asset_id:
            raise ValidationError(f"{kind} needs an asset_id")
        return EditCommand(kind=kind, asset_id=str(asset_id))
    if kind == "ADD_WAYPOINT":
        node = data.get("node")
        if not node:
            raise ValidationError("ADD_WAYPOINT needs a node")
        return EditCommand(kind=kind, node=str(node))
    if kind == "AVOID_AREA":
        poly = data.get("polygon")
        if not isinstance(poly, (list, tuple)) or len(poly) < 3:
            raise ValidationError("AVOID_AREA needs a polygon of >= 3 lon/lat pairs")
        ring = tuple((float(p[0]), float(p[1])) for p in poly)
        return EditCommand(kind=kind, polygon=ring)
    if kind == "SET_BUDGET":
        seconds = data.get("seconds", data.get("budget_s"))
        if seconds is None or float(seconds) <= 0:
            raise ValidationError("SET_BUDGET needs positive seconds")
        return EditCommand(kind=kind, seconds=float(seconds))
    # PRUNE_SPURS
    raw = data.get("min_assets_per_spur")
    if raw is None or (isinstance(raw, str) and raw.upper() == "INFINITE"):
        threshold = INFINITE
    else:
        threshold = float(raw)
        if threshold < 0:
            raise ValidationError("min_assets_per_spur must be >= 0")
    return EditCommand(kind=kind, min_assets_per_spur=threshold)


@dataclass(frozen=True)
class EditState:
    locked: frozenset[str] = field(default_factory=frozenset)
    excluded_assets: frozenset[str] = field(default_factory=frozenset)
    added_waypoints: tuple[str, ...] = ()  # node ids, insertion order
    avoid_areas: tuple[tuple[tuple[float, float], ...], ...] = ()  # lon/lat rings
    budget_s: float | None = None
    prune_min_assets: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "locked": sorted(self.locked),
            "excluded_assets": sorted(self.excluded_assets),
            "added_waypoints": list(self.added_waypoints),
            "avoid_areas": [[list(p) for p in ring] for ring in self.avoid_areas],
            "budget_s": self.budget_s,
            "prune_min_assets": (
                "INFINITE"
                if self.prune_min_assets is not None and math.isinf(self.prune_min_assets)
                else self.prune_min_assets
            ),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EditState":
        prune = data.get("prune_min_assets")
        if isinstance(prune, str):
            prune = INFINITE
        return cls(
            locked=frozenset(data.get("locked", ())),
            excluded_assets=frozenset(data.get("excluded_assets", ())),
            added_waypoints=tuple(data.get("added_waypoints", ())),
            avoid_areas=tuple(
                tuple((float(p[0]), float(p[1])) for p in ring)
                for ring in data.get("avoid_areas", ())
            ),
            budget_s=data.get("budget_s"),
            prune_min_assets=prune,
        )


@dataclass
class EditContext:
    problem: TransectProblem
    graph: RoutableGraph
    turn: TurnModel
    config: SolverConfig
    assets: tuple[Asset, ...]
    associations: Mapping[str, AssetAssociation]
    state: EditState = field(default_factory=EditState)


@dataclass(frozen=True)
class EditOutcome:
    route: Route
    solution: TransectSolution
    state: EditState
    spur_reports: tuple[SpurReport, ...] = ()


def fold_commands(
    state: EditState, commands: Sequence[EditCommand], context: EditContext
) -> EditState:
    """Fold a command batch into the edit state, validating references."""
    known_assets = {a.asset_id for a in context.assets}
    known_nodes = context.graph.network.node_by_id
    locked = set(state.locked)
    excluded = set(state.excluded_assets)
    added = list(state.added_waypoints)
    avoid = list(state.avoid_areas)
    budget = state.budget_s
    prune = state.prune_min_assets

    for cmd in commands:
        if cmd.kind == "LOCK_WAYPOINT":
            wid = cmd.asset_id
            assert wid is not None
            if wid not in context.problem.candidates and wid not in known_assets:
                raise NotFoundError(f"LOCK_WAYPOINT: unknown asset {wid!r}")
            if wid in excluded:
                raise ConstraintError(f"cannot lock excluded asset {wid!r}")
            locked.add(wid)
        elif cmd.kind == "EXCLUDE_ASSET":
            aid = cmd.asset_id
            assert aid is not None
            if aid not in known_assets:
                raise NotFoundError(f"EXCLUDE_ASSET: unknown asset {aid!r}")
            if aid in locked:
                raise ConstraintError(f"cannot exclude locked waypoint {aid!r}")
            excluded.add(aid)
        elif cmd.kind == "ADD_WAYPOINT":
            node = cmd.node
            assert node is not None
            if node not in known_nodes:
                raise NotFoundError(f"ADD_WAYPOINT: unknown node {node!r}")
            if node not in added:
                added.append(node)
        elif cmd.kind == "AVOID_AREA":
            assert cmd.polygon is not None
            avoid.append(cmd.polygon)
        elif cmd.kind == "SET_BUDGET":
            assert cmd.seconds is not None
            budget = cmd.seconds
        elif cmd.kind == "PRUNE_SPURS":
            prune = cmd.min_assets_per_spur

    return EditState(
        locked=frozenset(locked),
        excluded_assets=frozenset(excluded),
        added_waypoints=tuple(added),
        avoid_areas=tuple(avoid),
        budget_s=budget,
        prune_min_assets=prune,
    )


def restricted_graph(graph: RoutableGraph, state: EditState) -> RoutableGraph:
    """Remove every edge whose polyline touches an avoid area."""
    if not state.avoid_areas:
        return graph
    network = graph.network
    rings_xy: list[list[XY]] = []
    for ring in state.avoid_areas:
        pts = [GeoPoint(lon, lat) for lon, lat in ring]
        xy = project_many(pts, network.projection_origin)
        rings_xy.append([(float(p[0]), float(p[1])) for p in xy])
    removed: set[str] = set()
    for edge in network.edges:
        polyline = [tuple(p) for p in network.edge_xy[edge.edge_id]]
        for ring in rings_xy:
            if polyline_intersects_polygon(polyline, ring):
                removed.add(edge.edge_id)
                break
    return graph.without_edges(removed) if removed else graph


def effective_problem(context: EditContext) -> TransectProblem:
    state = context.state
    candidates = {
        wid: node
        for wid, node in context.problem.candidates.items()
        if wid not in state.excluded_assets
    }
    locked = set(state.locked) & set(candidates)
    for wid in state.locked:
        if wid in state.excluded_assets:
            continue
        if wid not in candidates:
            # Locking an asset that was not a candidate pins it in.
            assoc = context.associations.get(wid)
            if assoc is not None:
                candidates[wid] = assoc.snap_node
                locked.add(wid)
    for node in state.added_waypoints:
        wid = f"node:{node}"
        candidates[wid] = node
        locked.add(wid)
    return TransectProblem(
        depot_node=context.problem.depot_node,
        candidates=candidates,
        budget_s=state.budget_s or context.problem.budget_s,
        closed_tour=context.problem.closed_tour,
        locked=frozenset(locked),
    )


def apply_edits(
    route: Route,
    commands: Sequence[EditCommand],
    context: EditContext,
) -> EditOutcome:
    """Fold commands into the context state and re-solve the problem.

    An empty command list reproduces ``route`` exactly (same state, same
    deterministic solver). ConstraintError surfaces when the constraints
    cannot hold together: a locked waypoint cut off by an avoid area, or
    locked stops alone exceeding the budget.
    """
    state = fold_commands(context.state, commands, context)
    graph = restricted_graph(context.graph, state)
    assets = tuple(
        replace(a, excluded=True) if a.asset_id in state.excluded_assets else a
        for a in context.assets
    )
    problem = effective_problem(
        EditContext(
            problem=context.problem,
            graph=graph,
            turn=context.turn,
            config=context.config,
            assets=assets,
            associations=context.associations,
            state=state,
        )
    )
    solution = solve_transect(problem, graph, context.turn, context.config, assets)
    out_route = solution.route
    spur_reports: tuple[SpurReport, ...] = ()
    if state.prune_min_assets is not None:
        out_route, reports = prune_spurs(
            out_route,
            graph,
            context.turn,
            [a for a in assets if not a.excluded],
            context.config.buffer_m,
            state.prune_min_assets,
        )
        spur_reports = tuple(reports)
    return EditOutcome(
        route=out_route, solution=solution, state=state, spur_reports=spur_reports
    )


__all__ = [
    "EditCommand",
    "EditContext",
    "EditOutcome",
    "EditState",
    "SpurReport",
    "apply_edits",
    "detect_three_point_turns",
    "fold_commands",
    "parse_edit_command",
    "prune_spurs",
    "restricted_graph",
    "splice",
]
