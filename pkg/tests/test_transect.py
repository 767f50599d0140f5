from __future__ import annotations

import json
import math
import random

import pytest

from reconroute import (
    ConstraintError,
    DomainError,
    SolverConfig,
    TransectProblem,
    TurnModel,
    associate_assets,
    build_graph,
    build_transect_problem,
    load_road_network,
    pairwise_matrix,
    route_to_dict,
    select_seed_classes,
    solve_transect,
)
from reconroute.transect import DROP_BUDGET, DROP_UNREACHABLE
from netbuild import lonlat, network_geojson, vertical_line
from oracles import best_cost_per_subset, best_tour
from test_spatial import make_asset

SPEED10 = SolverConfig(speeds_mps={"residential": 10.0, "service": 10.0})


def node_near(net, x, y):
    lon, lat = lonlat(x, y)
    return min(
        net.nodes,
        key=lambda n: math.hypot(n.point.lon - lon, n.point.lat - lat),
    ).node_id


class TestSeedClasses:
    def test_single_type_covers_everything(self, grid_network):
        assets = [make_asset("a1", 100, 100, component="school")]
        assert select_seed_classes([*assets], grid_network, 800.0) == ["school"]

    def test_greedy_order_most_new_cells_first(self, grid_network):
        # schools blanket 3 cells, clinics 2 fresh ones, banks duplicate
        assets = [
            make_asset("s1", 100, 100, component="school"),
            make_asset("s2", 900, 100, component="school"),
            make_asset("s3", 1700, 100, component="school"),
            make_asset("c1", 100, 900, component="clinic"),
            make_asset("c2", 900, 900, component="clinic"),
            make_asset("b1", 100, 100, component="bank"),
        ]
        chosen = select_seed_classes(assets, grid_network, 800.0, 1.0)
        assert chosen == ["school", "clinic"]

    def test_alphabetical_tie(self, grid_network):
        assets = [
            make_asset("x1", 100, 100, component="pharmacy"),
            make_asset("y1", 900, 900, component="bank"),
        ]
        assert select_seed_classes(assets, grid_network, 800.0, 1.0) == [
            "bank",
            "pharmacy",
        ]

    def test_excluded_assets_invisible(self, grid_network):
        from dataclasses import replace
        a = replace(make_asset("a1", 100, 100, component="school"), excluded=True)
        b = make_asset("b1", 900, 900, component="bank")
        assert select_seed_classes([a, b], grid_network, 800.0, 1.0) == ["bank"]

    def test_bad_cell_size_rejected(self, grid_network):
        with pytest.raises(DomainError):
            select_seed_classes([], grid_network, 0.0)

    def test_fixture_selection(self, grid_network, grid_assets, default_config):
        chosen = select_seed_classes(
            grid_assets,
            grid_network,
            default_config.grid_cell_m,
            default_config.target_cells_fraction,
        )
        assert chosen == ["testing_site", "theater", "church", "substation", "bridge"]


class TestProblemConstruction:
    def test_candidates_filtered_by_class_and_buffer(self, grid_network):
        assets = [
            make_asset("in_class", 100, 50, component="school"),
            make_asset("far", 3000, -500, component="school"),
            make_asset("other", 300, 50, component="bank"),
        ]
        assoc = associate_assets(assets, grid_network)
        assert not assoc["far"].within_buffer
        problem = build_transect_problem(
            assets, assoc, ["school"], "n0", budget_s=3600.0
        )
        assert set(problem.candidates) == {"in_class"}

    def test_budget_must_be_positive(self):
        with pytest.raises(DomainError):
            TransectProblem(depot_node="n0", candidates={}, budget_s=0.0)

    def test_locked_must_be_candidates(self):
        with pytest.raises(DomainError):
            TransectProblem(
                depot_node="n0",
                candidates={"a": "n1"},
                budget_s=100.0,
                locked=frozenset({"ghost"}),
            )


class TestSolveBasics:
    def test_no_candidates_gives_depot_only_route(self, grid_graph, turn_model, default_config):
        problem = TransectProblem(
            depot_node="n0", candidates={}, budget_s=3600.0
        )
        sol = solve_transect(problem, grid_graph, turn_model, default_config)
        assert sol.visit_order == ()
        assert sol.route.nodes == ("n0",)
        assert sol.route.total_time_s == 0.0
        assert sol.dropped == {}

    def test_four_waypoints_match_exhaustive(self, grid_graph, turn_model, default_config):
        net = grid_graph.network
        depot = node_near(net, 2000, 2000)
        picks = [
            node_near(net, 400, 400),
            node_near(net, 3600, 400),
            node_near(net, 3600, 3600),
            node_near(net, 400, 3600),
        ]
        candidates = {f"w{i}": n for i, n in enumerate(picks)}
        problem = TransectProblem(
            depot_node=depot, candidates=candidates, budget_s=36000.0
        )
        sol = solve_transect(problem, grid_graph, turn_model, default_config)
        assert set(sol.visit_order) == set(candidates)

        nodes = [depot] + [candidates[w] for w in sorted(candidates)]
        matrix = pairwise_matrix(grid_graph, turn_model, nodes)
        best, _ = best_tour(matrix, list(range(1, 5)), closed=True)
        assert sol.route.total_time_s <= best * 1.15 + 1e-6
        assert sol.route.total_time_s >= best - 1e-6

    def test_unreachable_candidate_dropped_with_reason(self, turn_model, default_config):
        # island edge disconnected from the depot's component
        segments = vertical_line([0, 100, 200]) + [
            {"id": "island", "coords": [(5000, 0), (5000, 100)], "road_class": "residential"}
        ]
        net = load_road_network(network_geojson(segments))
        graph = build_graph(net, SPEED10)
        depot = node_near(net, 0, 0)
        far = node_near(net, 5000, 0)
        near = node_near(net, 0, 200)
        problem = TransectProblem(
            depot_node=depot,
            candidates={"far": far, "near": near},
            budget_s=3600.0,
        )
        sol = solve_transect(problem, graph, turn_model, default_config)
        assert sol.dropped == {"far": DROP_UNREACHABLE}
        assert sol.visit_order == ("near",)

    def test_locked_unreachable_raises(self, turn_model, default_config):
        segments = vertical_line([0, 100]) + [
            {"id": "island", "coords": [(5000, 0), (5000, 100)], "road_class": "residential"}
        ]
        net = load_road_network(network_geojson(segments))
        graph = build_graph(net, SPEED10)
        problem = TransectProblem(
            depot_node=node_near(net, 0, 0),
            candidates={"far": node_near(net, 5000, 0)},
            budget_s=3600.0,
            locked=frozenset({"far"}),
        )
        with pytest.raises(ConstraintError):
            solve_transect(problem, graph, turn_model, default_config)

    def test_open_tour_does_not_return(self, grid_graph, turn_model, default_config):
        net = grid_graph.network
        depot = node_near(net, 0, 0)
        far = node_near(net, 4000, 4000)
        problem = TransectProblem(
            depot_node=depot,
            candidates={"far": far},
            budget_s=36000.0,
            closed_tour=False,
        )
        sol = solve_transect(problem, grid_graph, turn_model, default_config)
        assert sol.route.start_node == depot
        assert sol.route.end_node == far
        closed = solve_transect(
            TransectProblem(depot_node=depot, candidates={"far": far}, budget_s=36000.0),
            grid_graph,
            turn_model,
            default_config,
        )
        assert closed.route.end_node == depot
        assert closed.route.total_time_s == pytest.approx(
            2 * sol.route.total_time_s, rel=1e-6
        )


class TestBudgetTrim:
    def trim_problem(self, grid_graph, budget_s, locked=()):
        net = grid_graph.network
        depot = node_near(net, 2000, 2000)
        spots = {
            "near_e": node_near(net, 2800, 2000),
            "near_n": node_near(net, 2000, 2800),
            "far_se": node_near(net, 3800, 200),
            "far_nw": node_near(net, 200, 3800),
        }
        return TransectProblem(
            depot_node=depot,
            candidates=spots,
            budget_s=budget_s,
            locked=frozenset(locked),
        )

    def test_budget_forces_drops_and_holds(self, grid_graph, turn_model, default_config):
        generous = self.trim_problem(grid_graph, 36000.0)
        full = solve_transect(generous, grid_graph, turn_model, default_config)
        assert full.dropped == {}

        tight_budget = full.route.total_time_s * 0.6
        tight = self.trim_problem(grid_graph, tight_budget)
        sol = solve_transect(tight, grid_graph, turn_model, default_config)
        assert sol.route.total_time_s <= tight_budget
        assert sol.dropped
        assert all(reason == DROP_BUDGET for reason in sol.dropped.values())
        assert set(sol.visit_order) | set(sol.dropped) == set(tight.candidates)

    def test_trimmed_subset_is_feasible_choice(self, grid_graph, turn_model, default_config):
        generous = self.trim_problem(grid_graph, 36000.0)
        full = solve_transect(generous, grid_graph, turn_model, default_config)
        budget = full.route.total_time_s * 0.7
        sol = solve_transect(
            self.trim_problem(grid_graph, budget), grid_graph, turn_model, default_config
        )
        # the kept subset must be one the exhaustive subset table also
        # finds feasible at this budget
        ids = sorted(generous.candidates)
        nodes = [generous.depot_node] + [generous.candidates[w] for w in ids]
        matrix = pairwise_matrix(grid_graph, turn_model, nodes)
        table = best_cost_per_subset(matrix, list(range(1, len(nodes))), closed=True)
        kept = frozenset(ids.index(w) + 1 for w in sol.visit_order)
        assert table[kept] <= budget

    def test_locked_survive_trim(self, grid_graph, turn_model, default_config):
        generous = self.trim_problem(grid_graph, 36000.0)
        full = solve_transect(generous, grid_graph, turn_model, default_config)
        solo = solve_transect(
            TransectProblem(
                depot_node=generous.depot_node,
                candidates={"far_se": generous.candidates["far_se"]},
                budget_s=36000.0,
            ),
            grid_graph,
            turn_model,
            default_config,
        )
        # tight enough to force drops, loose enough for the locked loop
        budget = (solo.route.total_time_s + full.route.total_time_s) / 2
        sol = solve_transect(
            self.trim_problem(grid_graph, budget, locked=["far_se"]),
            grid_graph,
            turn_model,
            default_config,
        )
        assert "far_se" in sol.visit_order
        assert "far_se" not in sol.dropped
        assert sol.dropped
        assert sol.route.total_time_s <= budget

    def test_locked_alone_over_budget_raises(self, grid_graph, turn_model, default_config):
        problem = self.trim_problem(
            grid_graph, 120.0, locked=["far_se", "far_nw"]
        )
        with pytest.raises(ConstraintError):
            solve_transect(problem, grid_graph, turn_model, default_config)

    def test_ratio_drops_the_costly_detour(self, turn_model, default_config):
        # "mid" sits on the through-route to "tip" (dropping it saves and
        # loses nothing); "side" needs a long spur detour and its asset is
        # only covered from the spur. The ratio rule must drop side, not
        # burn a pointless removal on mid.
        segments = vertical_line([0, 100, 200, 300]) + [
            {"id": "spur", "coords": [(0, 200), (300, 200)], "road_class": "service"}
        ]
        net = load_road_network(network_geojson(segments))
        graph = build_graph(net, SPEED10)
        assets = [
            make_asset("mid", 8, 100, component="school"),
            make_asset("tip", 8, 300, component="school"),
            make_asset("side", 300, 192, component="school"),
        ]
        assoc = associate_assets(assets, net)
        problem = build_transect_problem(
            assets, assoc, ["school"], node_near(net, 0, 0), budget_s=36000.0
        )
        full = solve_transect(problem, graph, turn_model, default_config, assets)
        assert set(full.visit_order) == {"mid", "tip", "side"}

        tighter = TransectProblem(
            depot_node=problem.depot_node,
            candidates=problem.candidates,
            budget_s=full.route.total_time_s - 1.0,
        )
        sol = solve_transect(tighter, graph, turn_model, default_config, assets)
        assert sol.dropped == {"side": DROP_BUDGET}
        assert set(sol.visit_order) == {"mid", "tip"}
        assert "side" not in sol.opportunistic_covered

    def test_zero_loss_detour_dropped_first(self, turn_model, default_config):
        # "zl" snaps to a dead-end spur tip (visiting costs a detour plus
        # a U-turn) but its asset sits 60 m from the main street, inside
        # the buffer of the rest of the route: removal is free coverage
        segments = vertical_line([0, 100, 200, 300, 400], x=100, prefix="m") + [
            {"id": "spur", "coords": [(100, 200), (200, 200)], "road_class": "service"}
        ]
        net = load_road_network(network_geojson(segments))
        graph = build_graph(net, SPEED10)
        assets = [
            make_asset("zl", 160, 230, component="school"),
            make_asset("anchor", 108, 400, component="school"),
        ]
        assoc = associate_assets(assets, net)
        assert assoc["zl"].snap_node == node_near(net, 200, 200)
        problem = build_transect_problem(
            assets, assoc, ["school"], node_near(net, 100, 0), budget_s=36000.0
        )
        full = solve_transect(problem, graph, turn_model, default_config, assets)
        assert set(full.visit_order) == {"zl", "anchor"}

        tighter = TransectProblem(
            depot_node=problem.depot_node,
            candidates=problem.candidates,
            budget_s=full.route.total_time_s - 1.0,
        )
        sol = solve_transect(tighter, graph, turn_model, default_config, assets)
        assert sol.dropped == {"zl": DROP_BUDGET}
        assert sol.visit_order == ("anchor",)
        # still driven past on the main street
        assert "zl" in sol.opportunistic_covered


class TestDeterminism:
    def test_identical_solutions_byte_for_byte(self, grid_graph, turn_model, default_config, grid_assets):
        net = grid_graph.network
        rng = random.Random(12)
        nodes = [n.node_id for n in net.nodes]
        candidates = {f"w{i}": rng.choice(nodes) for i in range(8)}
        problem = TransectProblem(
            depot_node="n0", candidates=candidates, budget_s=5000.0
        )
        a = solve_transect(problem, grid_graph, turn_model, default_config, grid_assets)
        b = solve_transect(problem, grid_graph, turn_model, default_config, grid_assets)
        assert a.visit_order == b.visit_order
        assert a.dropped == b.dropped
        assert a.opportunistic_covered == b.opportunistic_covered
        assert json.dumps(route_to_dict(a.route), sort_keys=True) == json.dumps(
            route_to_dict(b.route), sort_keys=True
        )


class TestCoveragePartition:
    def test_visited_plus_opportunistic_equals_route_coverage(
        self, grid_graph, turn_model, default_config, grid_assets, grid_network
    ):
        from reconroute import route_coverage
        assoc = associate_assets(grid_assets, grid_network)
        problem = build_transect_problem(
            grid_assets,
            assoc,
            ["testing_site", "theater"],
            "n0",
            budget_s=36000.0,
        )
        sol = solve_transect(
            problem, grid_graph, turn_model, default_config, grid_assets
        )
        covered = route_coverage(sol.route, grid_graph, grid_assets)
        visited = set(sol.route.waypoint_asset_ids())
        assert sol.opportunistic_covered == covered - visited
        assert not (sol.opportunistic_covered & visited)
        # visiting means reaching the snap node, not necessarily driving
        # the asset's own street, so most but not all visited assets are
        # buffer-covered
        assert len(visited & covered) > len(visited) * 0.7
