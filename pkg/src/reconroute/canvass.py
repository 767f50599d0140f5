"""All-intersections canvass solver.

A canvass sweep visits every street intersection strictly inside a
chosen polygon, entering and leaving at fixed synchronization nodes so
the sweep can be spliced into a larger tour. Open paths with fixed
endpoints reuse the same matrix machinery as closed tours; the order
optimizer simply holds both ends in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .config import SolverConfig
from .errors import EmptyAreaError, UnreachableError
from .graph import INFEASIBLE, RoutableGraph, TurnModel, pairwise_matrix
from .ingest import RoadNetwork
from .ordering import improve_order, nearest_neighbor_order
from .routes import Route, Waypoint, WaypointKind, build_route, expand_node_order
from .spatial import XY, point_in_polygon


@dataclass(frozen=True)
class CanvassProblem:
    polygon: tuple[XY, ...]  # planar ring
    entry_node: str
    exit_node: str


def intersections_in_area(
    network: RoadNetwork,
    polygon: Sequence[XY],
    include_degree2: bool = False,
) -> list[str]:
    """Intersection nodes strictly inside the polygon.

    An intersection is a node with at least three distinct incident
    edges; ``include_degree2`` lowers that to two so corner nodes of
    residential loops count as stops. Boundary nodes are outside.
    """
    min_degree = 2 if include_degree2 else 3
    found = []
    for node_id, xy in network.node_xy.items():
        if network.node_degree[node_id] < min_degree:
            continue
        if point_in_polygon(xy, polygon):
            found.append(node_id)
    return sorted(found)


def solve_canvass(
    problem: CanvassProblem,
    graph: RoutableGraph,
    turn: TurnModel,
    config: SolverConfig,
) -> Route:
    """Visit every intersection inside the polygon, entry to exit.

    Raises EmptyAreaError when the polygon holds no intersections and
    UnreachableError naming every stop that cannot be reached from the
    entry or cannot reach the exit under the turn model.
    """
    all_stops = intersections_in_area(
        graph.network, problem.polygon, config.include_degree2_intersections
    )
    if not all_stops:
        raise EmptyAreaError("polygon contains no intersections to canvass")
    # Entry and exit are visited by construction; they stay endpoints
    # even when they are intersections inside the polygon themselves.
    stops = [s for s in all_stops if s not in (problem.entry_node, problem.exit_node)]

    nodes = [problem.entry_node] + stops + [problem.exit_node]
    matrix = pairwise_matrix(graph, turn, nodes)

    unreachable: list[str] = []
    n_last = len(nodes) - 1
    for idx, stop in enumerate(stops, start=1):
        if matrix[0][idx] >= INFEASIBLE or matrix[idx][n_last] >= INFEASIBLE:
            unreachable.append(stop)
    if matrix[0][n_last] >= INFEASIBLE:
        unreachable.append(problem.exit_node)
    if unreachable:
        raise UnreachableError(
            f"stops unreachable between entry and exit: {sorted(set(unreachable))}",
            nodes=tuple(sorted(set(unreachable))),
        )

    order = nearest_neighbor_order(
        matrix, start=0, stops=list(range(1, len(nodes) - 1)), end=n_last
    )
    order = improve_order(
        matrix,
        order,
        closed=False,
        epsilon=config.improvement_epsilon_s,
        move_limit=config.max_improvement_moves,
    )

    node_order = [nodes[i] for i in order]
    arcs = expand_node_order(graph, turn, node_order, closed=False)
    node_seq = [node_order[0]]
    if arcs:
        node_seq = [graph.arcs[arcs[0]].tail] + [graph.arcs[a].head for a in arcs]

    waypoints = [
        Waypoint(position=0, node=problem.entry_node, kind=WaypointKind.SYNC),
        Waypoint(
            position=len(node_seq) - 1, node=problem.exit_node, kind=WaypointKind.SYNC
        ),
    ]
    cursor = 0
    for i in order[1:-1]:
        node = nodes[i]
        found = None
        for p in range(cursor + 1, len(node_seq)):
            if node_seq[p] == node:
                found = p
                break
        if found is None:
            found = cursor
        cursor = found
        waypoints.append(
            Waypoint(position=found, node=node, kind=WaypointKind.INTERSECTION)
        )
    return build_route(
        graph, turn, arcs, waypoints, start_node=problem.entry_node
    )
