"""Turn-aware routable graph over a road network.

Every edge becomes one directed arc per legal travel direction, and the
shortest-path search runs over (arc just traversed, head node) states
rather than bare nodes. That makes U-turn costs exact: the penalty for
immediately re-traversing the arc you arrived on is applied per move,
not approximated per node. A leg can also be seeded with the previous
leg's final arc so multi-leg routes account for reversals at waypoint
seams, which is where they actually happen (dead-end stops).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

from .config import PROHIBITED, SolverConfig
from .errors import NoPathError
from .ingest import RoadNetwork

# Matrix entries for unreachable pairs.
INFEASIBLE = math.inf


@dataclass(frozen=True)
class TurnModel:
    """Cost model for reversals. ``u_turn_penalty_s`` is seconds, or
    ``PROHIBITED`` (infinity) to forbid U-turns outright."""

    u_turn_penalty_s: float = 120.0

    @property
    def prohibited(self) -> bool:
        return math.isinf(self.u_turn_penalty_s)


@dataclass(frozen=True)
class Arc:
    arc_id: int
    base_edge_id: str
    tail: str
    head: str
    travel_time_s: float
    length_m: float


@dataclass(frozen=True)
class RoutableGraph:
    network: RoadNetwork
    arcs: tuple[Arc, ...]
    reverse_arc: dict[int, int]
    # Arc ids whose base edge was removed by an avoid-area edit; the arcs
    # stay in place (ids must remain stable) but the search skips them.
    removed_arcs: frozenset[int] = field(default_factory=frozenset)

    @cached_property
    def adjacency(self) -> dict[str, tuple[int, ...]]:
        adj: dict[str, list[int]] = {n.node_id: [] for n in self.network.nodes}
        for arc in self.arcs:
            if arc.arc_id not in self.removed_arcs:
                adj[arc.tail].append(arc.arc_id)
        return {k: tuple(sorted(v)) for k, v in adj.items()}

    def without_edges(self, edge_ids: set[str]) -> "RoutableGraph":
        removed = {a.arc_id for a in self.arcs if a.base_edge_id in edge_ids}
        return RoutableGraph(
            network=self.network,
            arcs=self.arcs,
            reverse_arc=self.reverse_arc,
            removed_arcs=self.removed_arcs | removed,
        )


@dataclass(frozen=True)
class PathResult:
    arcs: tuple[int, ...]
    total_time_s: float
    total_length_m: float


def build_graph(network: RoadNetwork, config: SolverConfig) -> RoutableGraph:
    """Expand edges into directed arcs with travel times.

    Arc ordering is deterministic: edges sorted by edge_id, the forward
    (from -> to) arc before the backward one, arc ids assigned in that
    order. travel_time_s = length / speed(road_class) * traffic_multiplier.
    """
    arcs: list[Arc] = []
    reverse: dict[int, int] = {}
    for edge in sorted(network.edges, key=lambda e: e.edge_id):
        speed = config.speed_for(edge.road_class.value)
        time_s = edge.length_m / speed * config.traffic_multiplier
        fwd = Arc(
            arc_id=len(arcs),
            base_edge_id=edge.edge_id,
            tail=edge.from_node,
            head=edge.to_node,
            travel_time_s=time_s,
            length_m=edge.length_m,
        )
        arcs.append(fwd)
        if not edge.oneway:
            bwd = Arc(
                arc_id=len(arcs),
                base_edge_id=edge.edge_id,
                tail=edge.to_node,
                head=edge.from_node,
                travel_time_s=time_s,
                length_m=edge.length_m,
            )
            arcs.append(bwd)
            reverse[fwd.arc_id] = bwd.arc_id
            reverse[bwd.arc_id] = fwd.arc_id
    return RoutableGraph(network=network, arcs=tuple(arcs), reverse_arc=reverse)


# Dijkstra states are arc ids: "I have just traversed this arc and sit
# at its head". -1 is the virtual start state (no previous arc).
_START_STATE = -1


def _search(
    graph: RoutableGraph,
    turn: TurnModel,
    from_node: str,
    initial_arc: int | None,
    target: str | None,
) -> tuple[dict[int, float], dict[int, int], int | None]:
    """Arc-state Dijkstra from one node. Returns (dist, parent, goal_state);
    goal_state is the first settled state at ``target`` (None without a
    target or when the target is unreachable)."""
    if from_node not in graph.adjacency:
        raise NoPathError(f"unknown node {from_node!r}")
    if initial_arc is not None:
        arc = graph.arcs[initial_arc]
        if arc.head != from_node:
            raise NoPathError(
                f"initial arc {initial_arc} ends at {arc.head!r}, not {from_node!r}"
            )
    start = _START_STATE if initial_arc is None else initial_arc
    penalty = turn.u_turn_penalty_s
    reverse = graph.reverse_arc
    arcs = graph.arcs
    adjacency = graph.adjacency
    removed = graph.removed_arcs

    dist: dict[int, float] = {start: 0.0}
    parent: dict[int, int] = {}
    done: set[int] = set()
    # Heap entries: (cost, arriving arc id, state). The arc id makes
    # tie-breaking deterministic: equal-cost states settle in arc order.
    heap: list[tuple[float, int, int]] = [(0.0, start, start)]
    while heap:
        cost, _, state = heapq.heappop(heap)
        if state in done:
            continue
        done.add(state)
        node = from_node if state == _START_STATE else arcs[state].head
        if target is not None and node == target:
            return dist, parent, state
        for nxt in adjacency[node]:
            if nxt in removed:
                continue
            step = arcs[nxt].travel_time_s
            if state != _START_STATE and reverse.get(state) == nxt:
                if turn.prohibited:
                    continue
                step += penalty
            new_cost = cost + step
            if new_cost < dist.get(nxt, math.inf):
                dist[nxt] = new_cost
                parent[nxt] = state
                heapq.heappush(heap, (new_cost, nxt, nxt))
    return dist, parent, None


def _reconstruct(
    parent: dict[int, int], goal_state: int, start_state: int
) -> tuple[int, ...]:
    path: list[int] = []
    state = goal_state
    while state != start_state:
        path.append(state)
        state = parent[state]
    path.reverse()
    return tuple(path)


def shortest_path(
    graph: RoutableGraph,
    turn: TurnModel,
    from_node: str,
    to_node: str,
    initial_arc: int | None = None,
) -> PathResult:
    """Turn-aware shortest path between two nodes.

    ``initial_arc`` seeds the search state with the arc a vehicle just
    arrived on, so a leg that must immediately reverse out of a dead end
    pays the U-turn penalty (or is infeasible when U-turns are
    prohibited). from == to yields an empty path.

    Raises NoPathError when no walk reaches ``to_node``.
    """
    if from_node == to_node:
        return PathResult(arcs=(), total_time_s=0.0, total_length_m=0.0)
    dist, parent, goal = _search(graph, turn, from_node, initial_arc, to_node)
    if goal is None:
        raise NoPathError(f"no path from {from_node!r} to {to_node!r}")
    start = _START_STATE if initial_arc is None else initial_arc
    arcs = _reconstruct(parent, goal, start)
    length = sum(graph.arcs[a].length_m for a in arcs)
    return PathResult(arcs=arcs, total_time_s=dist[goal], total_length_m=length)


def one_to_many(
    graph: RoutableGraph,
    turn: TurnModel,
    from_node: str,
    initial_arc: int | None = None,
) -> tuple[dict[str, float], dict[str, tuple[int, ...]]]:
    """Costs and arc paths from one node to every reachable node."""
    dist, parent, _ = _search(graph, turn, from_node, initial_arc, target=None)
    start = _START_STATE if initial_arc is None else initial_arc
    best_state: dict[str, int] = {}
    best_cost: dict[str, float] = {from_node: 0.0}
    for state, cost in dist.items():
        if state == start:
            continue
        head = graph.arcs[state].head
        # Equal-cost states resolve to the smaller arc id for determinism;
        # the origin keeps its zero-cost empty path.
        if cost < best_cost.get(head, math.inf) or (
            cost == best_cost.get(head, math.inf) and state < best_state.get(head, math.inf)
        ):
            best_cost[head] = cost
            best_state[head] = state
    paths = {
        node: _reconstruct(parent, state, start) for node, state in best_state.items()
    }
    paths.setdefault(from_node, ())
    return best_cost, paths


def pairwise_matrix(
    graph: RoutableGraph,
    turn: TurnModel,
    waypoints: Sequence[str],
) -> list[list[float]]:
    """Travel-time matrix between waypoint nodes. Entry [i][j] is the
    turn-aware shortest-path time i -> j with a fresh arc state at i;
    unreachable pairs hold ``INFEASIBLE``. Diagonal is zero.

    Single-leg entries ignore the arrival arc at j, so chaining matrix
    legs can under-count one U-turn per seam; route expansion re-solves
    legs with seeded arc states to recover the exact cost.
    """
    matrix: list[list[float]] = []
    for src in waypoints:
        costs, _ = one_to_many(graph, turn, src)
        matrix.append(
            [0.0 if src == dst else costs.get(dst, INFEASIBLE) for dst in waypoints]
        )
    return matrix
