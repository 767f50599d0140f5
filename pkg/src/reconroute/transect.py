"""Drive-time transect solver.

Turns a set of capital-asset waypoints into a closed driving tour from a
depot under a time budget. Seed component types are chosen greedily for
spatial coverage over a grid; the tour itself is nearest-neighbor
construction plus 2-opt/Or-opt improvement over the turn-aware
travel-time matrix; and when the expanded route exceeds the budget,
waypoints are trimmed by the time they save per uniquely covered asset
they cost, so stops whose assets the remaining route still passes are
dropped first and effectively free.

The budget check always runs against the fully expanded arc-level route
(seam U-turn penalties included), never the matrix approximation. Trim
scoring, by contrast, deliberately works on cached single-leg paths and
precomputed per-asset buffer edge sets: it is a ranking heuristic and
runs once per candidate per removal, so it has to be cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .config import SolverConfig
from .errors import ConstraintError, DomainError, InfeasibleError
from .graph import INFEASIBLE, RoutableGraph, TurnModel, one_to_many
from .ingest import Asset, project
from .ordering import improve_order, nearest_neighbor_order, tour_cost
from .routes import Route, Waypoint, WaypointKind, build_route, expand_node_order
from .spatial import AssetAssociation, asset_buffer_edges, route_coverage

DROP_UNREACHABLE = "UNREACHABLE"
DROP_BUDGET = "BUDGET"


@dataclass(frozen=True)
class TransectProblem:
    depot_node: str
    # waypoint id -> snapped node. Ids are asset ids, or "node:<id>" for
    # planner-pinned extra stops with no asset behind them.
    candidates: Mapping[str, str]
    budget_s: float
    closed_tour: bool = True
    locked: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.budget_s <= 0:
            raise DomainError("budget_s must be > 0")
        missing = self.locked - set(self.candidates)
        if missing:
            raise DomainError(f"locked ids not in candidates: {sorted(missing)}")


@dataclass(frozen=True)
class TransectSolution:
    route: Route
    visit_order: tuple[str, ...]  # waypoint ids in visit order
    dropped: Mapping[str, str]  # waypoint id -> reason
    opportunistic_covered: frozenset[str]


def select_seed_classes(
    assets: Iterable[Asset],
    network,
    grid_cell_m: float,
    target_cells_fraction: float = 0.8,
) -> list[str]:
    """Greedy max-coverage choice of component types.

    The network bbox is cut into square cells; each component type owns
    the set of cells its assets fall in. Types are picked by most new
    cells covered (alphabetical on ties) until the union reaches the
    target fraction of all asset-occupied cells. If the target is
    unreachable every type is returned, still in greedy order.
    """
    if grid_cell_m <= 0:
        raise DomainError("grid_cell_m must be > 0")
    xmin, ymin, _, _ = network.bbox_xy
    cells_by_type: dict[str, set[tuple[int, int]]] = {}
    for asset in assets:
        if asset.excluded:
            continue
        x, y = project(asset.point, network.projection_origin)
        cell = (math.floor((x - xmin) / grid_cell_m), math.floor((y - ymin) / grid_cell_m))
        cells_by_type.setdefault(asset.component_type, set()).add(cell)

    universe: set[tuple[int, int]] = set()
    for cells in cells_by_type.values():
        universe |= cells
    target = target_cells_fraction * len(universe)

    chosen: list[str] = []
    covered: set[tuple[int, int]] = set()
    remaining = dict(cells_by_type)
    while len(covered) < target and remaining:
        best_type = None
        best_gain = -1
        for ctype in sorted(remaining):
            gain = len(remaining[ctype] - covered)
            if gain > best_gain:
                best_gain = gain
                best_type = ctype
        assert best_type is not None
        chosen.append(best_type)
        covered |= remaining.pop(best_type)
    return chosen


def build_transect_problem(
    assets: Iterable[Asset],
    associations: Mapping[str, AssetAssociation],
    seed_classes: Sequence[str],
    depot_node: str,
    budget_s: float,
    closed_tour: bool = True,
) -> TransectProblem:
    """Candidate waypoints are the non-excluded seed-class assets whose
    centroids sit within the association buffer of the network."""
    wanted = set(seed_classes)
    candidates: dict[str, str] = {}
    for asset in assets:
        if asset.excluded or asset.component_type not in wanted:
            continue
        assoc = associations.get(asset.asset_id)
        if assoc is None or not assoc.within_buffer:
            continue
        candidates[asset.asset_id] = assoc.snap_node
    return TransectProblem(
        depot_node=depot_node,
        candidates=candidates,
        budget_s=budget_s,
        closed_tour=closed_tour,
    )


class _StopGeometry:
    """Per-solve cache: matrix, single-leg arc paths between stop nodes,
    and each asset's within-buffer edge set."""

    def __init__(
        self,
        graph: RoutableGraph,
        turn: TurnModel,
        stop_nodes: Sequence[str],
        assets: Sequence[Asset],
        buffer_m: float,
    ):
        self.graph = graph
        self.nodes = list(stop_nodes)
        self.costs: dict[str, dict[str, float]] = {}
        self.paths: dict[str, dict[str, tuple[int, ...]]] = {}
        for node in dict.fromkeys(stop_nodes):
            costs, paths = one_to_many(graph, turn, node)
            self.costs[node] = costs
            self.paths[node] = paths
        self.cover_sets = asset_buffer_edges(assets, graph.network, buffer_m)

    def matrix(self) -> list[list[float]]:
        return [
            [
                0.0 if a == b else self.costs[a].get(b, INFEASIBLE)
                for b in self.nodes
            ]
            for a in self.nodes
        ]

    def leg_edges(self, a: str, b: str) -> frozenset[str]:
        if a == b:
            return frozenset()
        path = self.paths[a].get(b, ())
        return frozenset(self.graph.arcs[arc].base_edge_id for arc in path)

    def order_edges(self, node_order: Sequence[str], closed: bool) -> set[str]:
        edges: set[str] = set()
        seq = list(node_order)
        if closed and len(seq) > 1:
            seq.append(seq[0])
        for a, b in zip(seq, seq[1:]):
            edges |= self.leg_edges(a, b)
        return edges

    def covered_by(self, edges: set[str]) -> set[str]:
        return {
            aid for aid, within in self.cover_sets.items() if within & edges
        }


def _expand(
    graph: RoutableGraph,
    turn: TurnModel,
    problem: TransectProblem,
    order_ids: Sequence[str],
) -> Route:
    nodes = [problem.depot_node] + [problem.candidates[w] for w in order_ids]
    arcs = expand_node_order(graph, turn, nodes, closed=problem.closed_tour)
    node_seq = [problem.depot_node]
    if arcs:
        node_seq = [graph.arcs[arcs[0]].tail] + [graph.arcs[a].head for a in arcs]
    waypoints = [Waypoint(position=0, node=problem.depot_node, kind=WaypointKind.DEPOT)]
    cursor = 0
    for wid in order_ids:
        node = problem.candidates[wid]
        # Waypoints land at the first occurrence of their node after the
        # previous waypoint, matching how the legs were expanded.
        found = None
        for p in range(cursor + 1, len(node_seq)):
            if node_seq[p] == node:
                found = p
                break
        if found is None:
            found = cursor
        cursor = found
        kind = WaypointKind.LOCKED if wid in problem.locked else WaypointKind.CAPITAL
        waypoints.append(Waypoint(position=found, node=node, kind=kind, ref=wid))
    return build_route(graph, turn, arcs, waypoints, start_node=problem.depot_node)


def solve_transect(
    problem: TransectProblem,
    graph: RoutableGraph,
    turn: TurnModel,
    config: SolverConfig,
    assets: Sequence[Asset] = (),
) -> TransectSolution:
    """Solve the transect: construct, improve, expand, and trim to budget.

    Dropped waypoints carry a reason: UNREACHABLE (no turn-feasible path
    from the depot or back) or BUDGET (trimmed). Locked waypoints are
    never trimmed; if they alone break the budget a ConstraintError is
    raised. InfeasibleError means even the empty depot loop misses the
    budget.
    """
    ids = sorted(problem.candidates)
    stop_nodes = [problem.depot_node] + [problem.candidates[w] for w in ids]
    asset_list = [a for a in assets if not a.excluded]
    geo = _StopGeometry(graph, turn, stop_nodes, asset_list, config.buffer_m)
    matrix = geo.matrix()

    dropped: dict[str, str] = {}
    usable: list[str] = []
    for idx, wid in enumerate(ids, start=1):
        out_ok = matrix[0][idx] < INFEASIBLE
        back_ok = (not problem.closed_tour) or matrix[idx][0] < INFEASIBLE
        if out_ok and back_ok:
            usable.append(wid)
        else:
            if wid in problem.locked:
                raise ConstraintError(
                    f"locked waypoint {wid!r} is unreachable under the turn model"
                )
            dropped[wid] = DROP_UNREACHABLE

    index_of = {wid: idx + 1 for idx, wid in enumerate(ids)}
    order = nearest_neighbor_order(
        matrix, start=0, stops=[index_of[w] for w in usable]
    )
    order = improve_order(
        matrix,
        order,
        closed=problem.closed_tour,
        epsilon=config.improvement_epsilon_s,
        move_limit=config.max_improvement_moves,
        free_end=not problem.closed_tour,
    )
    id_at = {v: k for k, v in index_of.items()}
    current: list[str] = [id_at[i] for i in order[1:]]
    route = _expand(graph, turn, problem, current)

    while route.total_time_s > problem.budget_s:
        droppable = [w for w in current if w not in problem.locked]
        if not droppable:
            if current:
                raise ConstraintError("locked waypoints alone exceed the time budget")
            raise InfeasibleError(
                f"even the depot-only loop exceeds the budget "
                f"({route.total_time_s:.1f}s > {problem.budget_s:.1f}s)"
            )
        victim = _pick_trim_victim(problem, geo, matrix, index_of, current, droppable)
        current.remove(victim)
        dropped[victim] = DROP_BUDGET
        seq = [0] + [index_of[w] for w in current]
        seq = improve_order(
            matrix,
            seq,
            closed=problem.closed_tour,
            epsilon=config.improvement_epsilon_s,
            move_limit=config.max_improvement_moves,
            free_end=not problem.closed_tour,
        )
        current = [id_at[i] for i in seq[1:]]
        route = _expand(graph, turn, problem, current)

    covered = route_coverage(route, graph, asset_list, config.buffer_m)
    visited = set(route.waypoint_asset_ids())
    return TransectSolution(
        route=route,
        visit_order=tuple(current),
        dropped=dropped,
        opportunistic_covered=frozenset(covered - visited),
    )


def _pick_trim_victim(
    problem: TransectProblem,
    geo: _StopGeometry,
    matrix: Sequence[Sequence[float]],
    index_of: Mapping[str, int],
    current: Sequence[str],
    droppable: Sequence[str],
) -> str:
    """Waypoint whose removal saves the most time per uniquely covered
    asset lost. A waypoint still buffer-covered by the rest of the route
    loses nothing, so those sort first (largest saving wins) -- but only
    when the removal saves real time; a removal that frees neither time
    nor coverage makes no progress toward the budget and ranks by its
    plain (zero) ratio instead."""
    seq = [0] + [index_of[w] for w in current]
    base_cost = tour_cost(matrix, seq, problem.closed_tour)
    node_order = [problem.depot_node] + [problem.candidates[w] for w in current]
    covered_now = geo.covered_by(geo.order_edges(node_order, problem.closed_tour))

    best_id: str | None = None
    best_key: tuple | None = None
    for wid in droppable:
        reduced_seq = [i for i in seq if i != index_of[wid]]
        saved = base_cost - tour_cost(matrix, reduced_seq, problem.closed_tour)
        reduced_nodes = [
            problem.depot_node
        ] + [problem.candidates[w] for w in current if w != wid]
        still = geo.covered_by(geo.order_edges(reduced_nodes, problem.closed_tour))
        lost = len(covered_now - still)
        # Rank: free removals first (largest saving), then best ratio.
        if lost == 0 and saved > 1e-9:
            key = (0, -saved, wid)
        else:
            key = (1, -(saved / max(lost, 1)), wid)
        if best_key is None or key < best_key:
            best_key = key
            best_id = wid
    assert best_id is not None
    return best_id
