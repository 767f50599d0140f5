"""Route model: an arc walk plus typed waypoints and maneuver flags.

A route stores the arc ids it traverses and its node sequence
explicitly, so it serializes without a graph in hand; totals and
maneuvers are recomputed from the arc sequence whenever a route is
built, which keeps one source of truth for timing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Mapping, Sequence

from .errors import NoPathError, SerializationError
from .graph import RoutableGraph, TurnModel, shortest_path

THREE_POINT_TURN = "THREE_POINT_TURN"


class WaypointKind(str, Enum):
    DEPOT = "DEPOT"
    CAPITAL = "CAPITAL"
    INTERSECTION = "INTERSECTION"
    SYNC = "SYNC"
    LOCKED = "LOCKED"


@dataclass(frozen=True)
class Waypoint:
    position: int  # index into the route's node sequence
    node: str
    kind: WaypointKind
    ref: str | None = None  # asset id for CAPITAL/LOCKED waypoints


@dataclass(frozen=True)
class Maneuver:
    position: int  # index of the first arc of the reversal pair
    kind: str = THREE_POINT_TURN


@dataclass(frozen=True)
class Route:
    start_node: str
    arcs: tuple[int, ...]
    nodes: tuple[str, ...]
    waypoints: tuple[Waypoint, ...]
    total_time_s: float
    total_length_m: float
    maneuvers: tuple[Maneuver, ...]

    @property
    def end_node(self) -> str:
        return self.nodes[-1]

    def waypoint_asset_ids(self) -> tuple[str, ...]:
        seen: list[str] = []
        for wp in self.waypoints:
            if wp.kind in (WaypointKind.CAPITAL, WaypointKind.LOCKED) and wp.ref:
                if wp.ref not in seen:
                    seen.append(wp.ref)
        return tuple(seen)


def detect_three_point_turns(
    arcs: Sequence[int], graph: RoutableGraph
) -> tuple[Maneuver, ...]:
    """Positions k where arc k+1 is the reverse of arc k: the vehicle
    re-traverses the same base edge backwards, a three-point turn."""
    out = []
    for k in range(len(arcs) - 1):
        if graph.reverse_arc.get(arcs[k]) == arcs[k + 1]:
            out.append(Maneuver(position=k))
    return tuple(out)


def route_totals(
    arcs: Sequence[int], graph: RoutableGraph, turn: TurnModel
) -> tuple[float, float]:
    """(time, length) for an arc walk including U-turn penalties."""
    time_s = sum(graph.arcs[a].travel_time_s for a in arcs)
    length = sum(graph.arcs[a].length_m for a in arcs)
    reversals = len(detect_three_point_turns(arcs, graph))
    if reversals:
        time_s += reversals * turn.u_turn_penalty_s
    return time_s, length


def build_route(
    graph: RoutableGraph,
    turn: TurnModel,
    arcs: Sequence[int],
    waypoints: Sequence[Waypoint],
    start_node: str | None = None,
) -> Route:
    """Assemble a Route from an arc walk, validating arc chaining."""
    arcs = tuple(arcs)
    if arcs:
        nodes = [graph.arcs[arcs[0]].tail]
        for a in arcs:
            arc = graph.arcs[a]
            if arc.tail != nodes[-1]:
                raise NoPathError(
                    f"arc {a} starts at {arc.tail!r} but the walk is at {nodes[-1]!r}"
                )
            nodes.append(arc.head)
        start = nodes[0]
    else:
        if start_node is None:
            raise NoPathError("an empty route needs an explicit start node")
        start = start_node
        nodes = [start]
    time_s, length = route_totals(arcs, graph, turn)
    return Route(
        start_node=start,
        arcs=arcs,
        nodes=tuple(nodes),
        waypoints=tuple(sorted(waypoints, key=lambda w: (w.position, w.kind.value))),
        total_time_s=time_s,
        total_length_m=length,
        maneuvers=detect_three_point_turns(arcs, graph),
    )


def expand_node_order(
    graph: RoutableGraph,
    turn: TurnModel,
    order: Sequence[str],
    closed: bool,
) -> tuple[int, ...]:
    """Expand a waypoint node order into a full arc walk.

    Each leg seeds the shortest-path search with the previous leg's last
    arc, so a forced reversal at a dead-end waypoint is priced exactly
    (or avoided via a different exit when one is cheaper).
    """
    stops = list(order)
    if closed and stops[-1] != stops[0]:
        stops.append(stops[0])
    arcs: list[int] = []
    prev_arc: int | None = None
    for a, b in zip(stops, stops[1:]):
        if a == b:
            continue
        leg = shortest_path(graph, turn, a, b, initial_arc=prev_arc)
        arcs.extend(leg.arcs)
        if leg.arcs:
            prev_arc = leg.arcs[-1]
    return tuple(arcs)


# --- serialization ---------------------------------------------------------


def route_to_dict(route: Route) -> dict[str, Any]:
    return {
        "start_node": route.start_node,
        "arcs": list(route.arcs),
        "nodes": list(route.nodes),
        "waypoints": [
            {
                "position": wp.position,
                "node": wp.node,
                "kind": wp.kind.value,
                "ref": wp.ref,
            }
            for wp in route.waypoints
        ],
        "total_time_s": route.total_time_s,
        "total_length_m": route.total_length_m,
        "maneuvers": [
            {"position": m.position, "kind": m.kind} for m in route.maneuvers
        ],
    }


def route_from_dict(data: Mapping[str, Any]) -> Route:
    try:
        return Route(
            start_node=data["start_node"],
            arcs=tuple(int(a) for a in data["arcs"]),
            nodes=tuple(data["nodes"]),
            waypoints=tuple(
                Waypoint(
                    position=int(w["position"]),
                    node=w["node"],
                    kind=WaypointKind(w["kind"]),
                    ref=w.get("ref"),
                )
                for w in data["waypoints"]
            ),
            total_time_s=float(data["total_time_s"]),
            total_length_m=float(data["total_length_m"]),
            maneuvers=tuple(
                Maneuver(position=int(m["position"]), kind=m["kind"])
                for m in data.get("maneuvers", [])
            ),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise SerializationError(f"malformed route payload: {exc}")


def shift_waypoints(
    waypoints: Sequence[Waypoint], cut_start: int, cut_end: int, insert_len: int
) -> list[Waypoint]:
    """Remap waypoint positions after replacing node positions
    [cut_start, cut_end] with a segment of ``insert_len`` nodes.
    Waypoints inside the replaced span are dropped."""
    out: list[Waypoint] = []
    delta = insert_len - (cut_end - cut_start + 1)
    for wp in waypoints:
        if wp.position < cut_start:
            out.append(wp)
        elif wp.position > cut_end:
            out.append(replace(wp, position=wp.position + delta))
    return out


def nearest_node(graph_or_network, x: float, y: float) -> str:
    """Nearest network node to a planar point; ties by node id."""
    network = getattr(graph_or_network, "network", graph_or_network)
    best: tuple[float, str] | None = None
    for node_id, (nx, ny) in network.node_xy.items():
        d = math.hypot(nx - x, ny - y)
        if best is None or d < best[0] or (d == best[0] and node_id < best[1]):
            best = (d, node_id)
    if best is None:
        raise NoPathError("network has no nodes")
    return best[1]
