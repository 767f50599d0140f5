from __future__ import annotations

import json
import math

import pytest

from reconroute import (
    NoPathError,
    SolverConfig,
    TurnModel,
    Waypoint,
    WaypointKind,
    build_graph,
    detect_three_point_turns,
    load_road_network,
    nearest_node,
    route_from_dict,
    route_to_dict,
)
from reconroute.routes import (
    build_route,
    expand_node_order,
    route_totals,
    shift_waypoints,
)
from netbuild import lonlat, network_geojson, vertical_line
from oracles import assert_arc_chain

SPEED10 = SolverConfig(speeds_mps={"residential": 10.0, "service": 10.0})
TURN = TurnModel(120.0)


def spur_net():
    segments = vertical_line([0, 100, 200]) + [
        {"id": "spur", "coords": [(0, 100), (80, 100)], "road_class": "service"}
    ]
    net = load_road_network(network_geojson(segments))
    return net, build_graph(net, SPEED10)


def node_at(net, x, y):
    lon, lat = lonlat(x, y)
    best = min(
        net.nodes,
        key=lambda n: math.hypot(n.point.lon - lon, n.point.lat - lat),
    )
    return best.node_id


def arc_between(graph, a, b):
    for arc in graph.arcs:
        if arc.tail == a and arc.head == b:
            return arc.arc_id
    raise AssertionError(f"no arc {a}->{b}")


class TestReversalDetection:
    def test_out_and_back_is_one_reversal(self):
        net, graph = spur_net()
        j = node_at(net, 0, 100)
        tip = node_at(net, 80, 100)
        walk = [arc_between(graph, j, tip), arc_between(graph, tip, j)]
        maneuvers = detect_three_point_turns(walk, graph)
        assert len(maneuvers) == 1
        assert maneuvers[0].position == 0

    def test_straight_through_has_none(self):
        net, graph = spur_net()
        a = node_at(net, 0, 0)
        j = node_at(net, 0, 100)
        t = node_at(net, 0, 200)
        walk = [arc_between(graph, a, j), arc_between(graph, j, t)]
        assert detect_three_point_turns(walk, graph) == ()

    def test_totals_price_each_reversal(self):
        net, graph = spur_net()
        j = node_at(net, 0, 100)
        tip = node_at(net, 80, 100)
        walk = [
            arc_between(graph, j, tip),
            arc_between(graph, tip, j),
            arc_between(graph, j, tip),
            arc_between(graph, tip, j),
        ]
        time_s, length_m = route_totals(walk, graph, TURN)
        assert time_s == pytest.approx(4 * 8.0 + 3 * 120.0, abs=0.01)
        assert length_m == pytest.approx(320.0, abs=0.1)


class TestBuildRoute:
    def test_node_sequence_follows_arcs(self):
        net, graph = spur_net()
        a = node_at(net, 0, 0)
        j = node_at(net, 0, 100)
        t = node_at(net, 0, 200)
        walk = [arc_between(graph, a, j), arc_between(graph, j, t)]
        route = build_route(graph, TURN, walk, [])
        assert route.nodes == (a, j, t)
        assert route.start_node == a
        assert route.end_node == t
        assert route.total_time_s == pytest.approx(20.0, rel=1e-9)
        assert_arc_chain(route, graph)

    def test_broken_chain_rejected(self):
        net, graph = spur_net()
        a = node_at(net, 0, 0)
        j = node_at(net, 0, 100)
        t = node_at(net, 0, 200)
        with pytest.raises(NoPathError):
            build_route(
                graph, TURN, [arc_between(graph, a, j), arc_between(graph, t, j)], []
            )

    def test_empty_route_needs_start(self):
        net, graph = spur_net()
        with pytest.raises(NoPathError):
            build_route(graph, TURN, [], [])
        route = build_route(graph, TURN, [], [], start_node="n0")
        assert route.nodes == ("n0",)
        assert route.total_time_s == 0.0
        assert route.maneuvers == ()

    def test_waypoints_sorted_by_position(self):
        net, graph = spur_net()
        a = node_at(net, 0, 0)
        j = node_at(net, 0, 100)
        t = node_at(net, 0, 200)
        walk = [arc_between(graph, a, j), arc_between(graph, j, t)]
        wps = [
            Waypoint(position=2, node=t, kind=WaypointKind.CAPITAL, ref="x2"),
            Waypoint(position=0, node=a, kind=WaypointKind.DEPOT),
            Waypoint(position=1, node=j, kind=WaypointKind.CAPITAL, ref="x1"),
        ]
        route = build_route(graph, TURN, walk, wps)
        assert [w.position for w in route.waypoints] == [0, 1, 2]
        assert route.waypoint_asset_ids() == ("x1", "x2")

    def test_waypoint_asset_ids_dedupes_preserving_order(self):
        net, graph = spur_net()
        route = build_route(
            graph,
            TURN,
            [],
            [
                Waypoint(0, "n0", WaypointKind.CAPITAL, ref="b"),
                Waypoint(0, "n0", WaypointKind.LOCKED, ref="a"),
                Waypoint(0, "n0", WaypointKind.CAPITAL, ref="b"),
                Waypoint(0, "n0", WaypointKind.SYNC),
            ],
            start_node="n0",
        )
        assert route.waypoint_asset_ids() == ("b", "a")


class TestExpandNodeOrder:
    def test_closed_tour_returns_to_start(self):
        net, graph = spur_net()
        a = node_at(net, 0, 0)
        t = node_at(net, 0, 200)
        arcs = expand_node_order(graph, TURN, [a, t], closed=True)
        route = build_route(graph, TURN, arcs, [])
        assert route.nodes[0] == a
        assert route.nodes[-1] == a
        assert t in route.nodes

    def test_repeated_stop_is_skipped(self):
        net, graph = spur_net()
        a = node_at(net, 0, 0)
        t = node_at(net, 0, 200)
        assert expand_node_order(graph, TURN, [a, a, t], closed=False) == (
            expand_node_order(graph, TURN, [a, t], closed=False)
        )

    def test_dead_end_seam_prices_forced_reversal(self):
        net, graph = spur_net()
        a = node_at(net, 0, 0)
        tip = node_at(net, 80, 100)
        t = node_at(net, 0, 200)
        arcs = expand_node_order(graph, TURN, [a, tip, t], closed=False)
        route = build_route(graph, TURN, arcs, [])
        # 100 m approach + 80 m in + turn + 80 m out + 100 m on
        assert route.total_time_s == pytest.approx(36.0 + 120.0, abs=0.01)
        assert len(route.maneuvers) == 1


class TestSerialization:
    def test_round_trip_identity(self):
        net, graph = spur_net()
        a = node_at(net, 0, 0)
        tip = node_at(net, 80, 100)
        arcs = expand_node_order(graph, TURN, [a, tip], closed=True)
        wps = [Waypoint(0, a, WaypointKind.DEPOT)]
        route = build_route(graph, TURN, arcs, wps)
        blob = json.dumps(route_to_dict(route), sort_keys=True)
        again = route_from_dict(json.loads(blob))
        assert again == route
        assert json.dumps(route_to_dict(again), sort_keys=True) == blob


class TestWaypointShifting:
    def test_positions_remap_around_replaced_span(self):
        wps = [
            Waypoint(0, "a", WaypointKind.DEPOT),
            Waypoint(3, "b", WaypointKind.CAPITAL, ref="x"),
            Waypoint(6, "c", WaypointKind.CAPITAL, ref="y"),
        ]
        out = shift_waypoints(wps, cut_start=2, cut_end=4, insert_len=5)
        assert [w.position for w in out] == [0, 8]
        assert [w.node for w in out] == ["a", "c"]


class TestNearestNode:
    def test_picks_closest(self, grid_network):
        x, y = grid_network.node_xy["n0"]
        assert nearest_node(grid_network, x + 30.0, y + 40.0) == "n0"

    def test_tie_breaks_by_id(self):
        net, graph = spur_net()
        j = node_at(net, 0, 100)
        t = node_at(net, 0, 200)
        jx, jy = net.node_xy[j]
        tx, ty = net.node_xy[t]
        mid = ((jx + tx) / 2, (jy + ty) / 2)
        assert nearest_node(net, *mid) == min(j, t)
