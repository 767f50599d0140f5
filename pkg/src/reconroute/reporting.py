"""Coverage reporting and route exports.

Timestamps here are deterministic model outputs, not live predictions:
leg times are the route's stored times rescaled by the report's traffic
multiplier (relative to conditions at solve time), so a multiplier of 1
reproduces the route duration exactly and a multiplier of 2 doubles
every arrival offset.

Exports are byte-stable. Coordinates are written with fixed 7-decimal
precision, waypoints become typed GPX waypoints / GeoJSON point
features, and re-exporting an unchanged route yields identical bytes,
which is what makes golden-file testing and HTTP cache validators work.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape

from .config import SolverConfig
from .errors import DomainError
from .graph import RoutableGraph
from .ingest import CAPITAL_CLASSES, Asset
from .routes import Route, WaypointKind
from .spatial import route_coverage


@dataclass(frozen=True)
class ClassCount:
    visited: int
    opportunistic: int

    @property
    def total(self) -> int:
        return self.visited + self.opportunistic


@dataclass(frozen=True)
class ArrivalStamp:
    position: int
    node: str
    kind: str
    ref: str | None
    arrival: datetime


@dataclass(frozen=True)
class CoverageReport:
    total_time_s: float
    total_length_m: float
    per_class: Mapping[str, ClassCount]
    three_point_turn_count: int
    excluded_asset_count: int
    visited_asset_ids: frozenset[str]
    opportunistic_asset_ids: frozenset[str]
    timestamps: tuple[ArrivalStamp, ...]

    def to_dict(self) -> dict:
        return {
            "total_time_s": self.total_time_s,
            "total_length_m": self.total_length_m,
            "per_class": {
                cls: {"visited": c.visited, "opportunistic": c.opportunistic}
                for cls, c in self.per_class.items()
            },
            "three_point_turn_count": self.three_point_turn_count,
            "excluded_asset_count": self.excluded_asset_count,
            "visited_asset_ids": sorted(self.visited_asset_ids),
            "opportunistic_asset_ids": sorted(self.opportunistic_asset_ids),
            "timestamps": [
                {
                    "position": t.position,
                    "node": t.node,
                    "kind": t.kind,
                    "ref": t.ref,
                    "arrival": t.arrival.isoformat(),
                }
                for t in self.timestamps
            ],
        }


def report(
    route: Route,
    graph: RoutableGraph,
    assets: Sequence[Asset],
    config: SolverConfig,
    start_clock: datetime | None = None,
) -> CoverageReport:
    """Coverage counts and leg arrival times for a route.

    Distinct asset ids are counted per capital class, split into
    waypoint-visited versus opportunistically buffer-covered. Counts
    depend only on the set of traversed edges, so equivalent rotations
    of a closed tour report identically. Excluded assets are skipped and
    surfaced only as a count.
    """
    start = start_clock or datetime(2000, 1, 1, 8, 0, 0)
    mult = config.traffic_multiplier

    active = [a for a in assets if not a.excluded]
    covered = route_coverage(route, graph, active, config.buffer_m)
    visited_ids = {
        ref for ref in route.waypoint_asset_ids() if ref in {a.asset_id for a in active}
    }
    opportunistic = covered - visited_ids

    by_id = {a.asset_id: a for a in active}
    per_class: dict[str, ClassCount] = {}
    for cls in CAPITAL_CLASSES:
        vis = sum(1 for aid in visited_ids if by_id.get(aid) and by_id[aid].capital == cls)
        opp = sum(1 for aid in opportunistic if by_id.get(aid) and by_id[aid].capital == cls)
        per_class[cls] = ClassCount(visited=vis, opportunistic=opp)

    timestamps = _arrival_stamps(route, graph, start, mult)
    return CoverageReport(
        total_time_s=route.total_time_s * mult,
        total_length_m=route.total_length_m,
        per_class=per_class,
        three_point_turn_count=len(route.maneuvers),
        excluded_asset_count=sum(1 for a in assets if a.excluded),
        visited_asset_ids=frozenset(visited_ids),
        opportunistic_asset_ids=frozenset(opportunistic),
        timestamps=tuple(timestamps),
    )


def _arrival_stamps(
    route: Route, graph: RoutableGraph, start: datetime, mult: float
) -> list[ArrivalStamp]:
    """Cumulative arrival time at each waypoint position, and at the end
    of the route. U-turn penalties accrue on the leg where the reversal
    completes."""
    # Arc index m.position + 1 is the traversal that pays the penalty.
    penalty_arcs = {m.position + 1 for m in route.maneuvers}

    stamps: list[ArrivalStamp] = []
    positions = sorted(
        {wp.position for wp in route.waypoints}
        | ({len(route.nodes) - 1} if route.arcs else {0})
    )
    wp_at = {wp.position: wp for wp in route.waypoints}
    cum = [0.0]
    for arc_id in route.arcs:
        cum.append(cum[-1] + graph.arcs[arc_id].travel_time_s)
    total_penalty = route.total_time_s - cum[-1]
    per_penalty = total_penalty / len(penalty_arcs) if penalty_arcs else 0.0

    def time_to(pos: int) -> float:
        # Arriving at node position pos means arcs 0..pos-1 are done.
        return cum[pos] + per_penalty * sum(1 for p in penalty_arcs if p < pos)

    for pos in positions:
        wp = wp_at.get(pos)
        stamps.append(
            ArrivalStamp(
                position=pos,
                node=route.nodes[pos] if pos < len(route.nodes) else route.end_node,
                kind=wp.kind.value if wp else "END",
                ref=wp.ref if wp else None,
                arrival=start + timedelta(seconds=time_to(pos) * mult),
            )
        )
    return stamps


# --- exports ---------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.7f}"


def _densified_lonlat(route: Route, graph: RoutableGraph) -> list[tuple[float, float]]:
    """Full track geometry: every polyline vertex of every traversed arc,
    oriented along travel, without duplicating shared joints."""
    network = graph.network
    pts: list[tuple[float, float]] = []
    if not route.arcs:
        node = network.node_by_id[route.start_node]
        return [(node.point.lon, node.point.lat)]
    for arc_id in route.arcs:
        arc = graph.arcs[arc_id]
        edge = network.edge_by_id[arc.base_edge_id]
        poly = [(p.lon, p.lat) for p in edge.polyline]
        if arc.tail != edge.from_node:
            poly.reverse()
        if pts:
            poly = poly[1:]
        pts.extend(poly)
    return pts


def export_gpx(route: Route, graph: RoutableGraph) -> bytes:
    """GPX 1.1 with one track segment and a named waypoint per stop."""
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<gpx version="1.1" creator="reconroute" '
        'xmlns="http://www.topografix.com/GPX/1/1">',
    ]
    network = graph.network
    for wp in route.waypoints:
        node = network.node_by_id[wp.node]
        name = f"{wp.kind.value}:{wp.ref or wp.node}"
        lines.append(
            f'  <wpt lat="{_fmt(node.point.lat)}" lon="{_fmt(node.point.lon)}">'
            f"<name>{escape(name)}</name></wpt>"
        )
    lines.append("  <trk><name>survey-route</name><trkseg>")
    for lon, lat in _densified_lonlat(route, graph):
        lines.append(f'    <trkpt lat="{_fmt(lat)}" lon="{_fmt(lon)}"></trkpt>')
    lines.append("  </trkseg></trk>")
    lines.append("</gpx>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def export_geojson(route: Route, graph: RoutableGraph) -> bytes:
    """GeoJSON FeatureCollection: the node-sequence LineString plus one
    Point feature per waypoint. Coordinates carry 7-decimal precision, so
    parsing the LineString recovers the node sequence exactly at that
    precision."""
    network = graph.network

    def coord(node_id: str) -> list[float]:
        p = network.node_by_id[node_id].point
        return [float(_fmt(p.lon)), float(_fmt(p.lat))]

    features: list[dict] = [
        {
            "type": "Feature",
            "properties": {
                "kind": "route",
                "total_time_s": round(route.total_time_s, 3),
                "total_length_m": round(route.total_length_m, 3),
                "three_point_turns": len(route.maneuvers),
            },
            "geometry": {
                "type": "LineString",
                "coordinates": [coord(n) for n in route.nodes],
            },
        }
    ]
    for wp in route.waypoints:
        features.append(
            {
                "type": "Feature",
                "properties": {
                    "kind": wp.kind.value,
                    "ref": wp.ref,
                    "node": wp.node,
                    "position": wp.position,
                },
                "geometry": {"type": "Point", "coordinates": coord(wp.node)},
            }
        )
    doc = {"type": "FeatureCollection", "features": features}
    return (json.dumps(doc, separators=(",", ":")) + "\n").encode("utf-8")


def export_route(route: Route, graph: RoutableGraph, fmt: str) -> bytes:
    if fmt == "gpx":
        return export_gpx(route, graph)
    if fmt == "geojson":
        return export_geojson(route, graph)
    raise DomainError(f"unknown export format {fmt!r}; expected gpx or geojson")
