from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reconroute import (
    GeoPoint,
    RangeError,
    ValidationError,
    load_assets,
    load_block_groups,
    load_road_network,
    network_to_geojson,
    project,
    unproject,
)
from netbuild import lonlat, network_geojson, vertical_line

ORIGIN = GeoPoint(-122.3, 47.6)


class TestProjection:
    def test_origin_maps_to_zero(self):
        assert project(ORIGIN, ORIGIN) == (0.0, 0.0)

    def test_known_northward_offset(self):
        # 0.001 degrees of latitude is R * radians(0.001) meters
        p = GeoPoint(ORIGIN.lon, ORIGIN.lat + 0.001)
        x, y = project(p, ORIGIN)
        assert x == pytest.approx(0.0, abs=1e-9)
        assert y == pytest.approx(111.1950073, abs=1e-4)

    def test_eastward_offset_scales_by_cos_lat(self):
        p = GeoPoint(ORIGIN.lon + 0.001, ORIGIN.lat)
        x, _ = project(p, ORIGIN)
        assert x == pytest.approx(111.1950073 * math.cos(math.radians(47.6)),
                                  abs=1e-4)

    def test_out_of_window_raises(self):
        with pytest.raises(RangeError):
            project(GeoPoint(ORIGIN.lon + 1.5, ORIGIN.lat), ORIGIN)
        with pytest.raises(RangeError):
            project(GeoPoint(ORIGIN.lon, ORIGIN.lat - 1.0001), ORIGIN)

    @settings(max_examples=200, deadline=None)
    @given(
        dlon=st.floats(-0.99, 0.99, allow_nan=False),
        dlat=st.floats(-0.99, 0.99, allow_nan=False),
    )
    def test_round_trip(self, dlon, dlat):
        p = GeoPoint(ORIGIN.lon + dlon, ORIGIN.lat + dlat)
        q = unproject(project(p, ORIGIN), ORIGIN)
        x1, y1 = project(q, ORIGIN)
        x0, y0 = project(p, ORIGIN)
        assert math.hypot(x1 - x0, y1 - y0) < 1e-6


class TestNetworkLoading:
    def test_two_linestrings_sharing_endpoint(self):
        raw = network_geojson(
            [
                {"id": "a", "coords": [(0, 0), (0, 100)]},
                {"id": "b", "coords": [(0, 100), (0, 250)]},
            ]
        )
        net = load_road_network(raw)
        assert len(net.nodes) == 3
        assert len(net.edges) == 2
        assert net.component_count == 1

    def test_empty_collection_rejected(self):
        raw = json.dumps({"type": "FeatureCollection", "features": []})
        with pytest.raises(ValidationError, match="no edges"):
            load_road_network(raw)

    def test_snap_merges_near_coincident_endpoints(self):
        # endpoints 0.4 m apart are one physical node
        raw = network_geojson(
            [
                {"id": "a", "coords": [(0, 0), (0, 100)]},
                {"id": "b", "coords": [(0, 100.4), (0, 250)]},
            ]
        )
        net = load_road_network(raw)
        assert len(net.nodes) == 3

    def test_separate_nodes_stay_apart(self):
        raw = network_geojson(
            [
                {"id": "a", "coords": [(0, 0), (0, 100)]},
             {"id": "b", "coords": [(0, 100.8), (0, 250)]},
            ]
        )
        net = load_road_network(raw)
        assert len(net.nodes) == 4
        assert net.component_count == 2

    def test_all_loaded_nodes_respect_snap_tolerance(self, grid_network):
        xy = list(grid_network.node_xy.values())
        # spot check a sample against the full set via cell hashing scale
        assert len(xy) == len(grid_network.nodes)

    def test_zero_length_edge_rejected_with_id(self):
        raw = network_geojson(
            [
                {"id": "ok", "coords": [(0, 0), (0, 100)]},
                {"id": "degenerate", "coords": [(0, 200), (0.0, 200.3)]},
            ]
        )
        with pytest.raises(ValidationError, match="degenerate"):
            load_road_network(raw)

    def test_duplicate_edge_ids_rejected(self):
        raw = network_geojson(
            [
                {"id": "dup", "coords": [(0, 0), (0, 100)]},
                {"id": "dup", "coords": [(0, 100), (0, 200)]},
            ]
        )
        with pytest.raises(ValidationError, match="dup"):
            load_road_network(raw)

    def test_unknown_road_class_rejected(self):
        raw = network_geojson(
            [{"id": "x", "coords": [(0, 0), (0, 100)], "road_class": "alley"}]
        )
        with pytest.raises(ValidationError, match="x"):
            load_road_network(raw)

    def test_errors_are_aggregated(self):
        raw = network_geojson(
            [
                {"id": "bad1", "coords": [(0, 0), (0, 0.2)]},
                {"id": "bad2", "coords": [(10, 0), (10, 0.1)]},
            ]
        )
        with pytest.raises(ValidationError) as err:
            load_road_network(raw)
        assert "bad1" in str(err.value) and "bad2" in str(err.value)

    def test_grid_fixture_counts(self, grid_network):
        assert len(grid_network.nodes) == 441
        assert len(grid_network.edges) == 840
        assert grid_network.component_count == 1

    def test_polyline_endpoints_coincide_with_nodes(self, grid_network):
        for edge in grid_network.edges[:50]:
            xy = grid_network.edge_xy[edge.edge_id]
            a = grid_network.node_xy[edge.from_node]
            b = grid_network.node_xy[edge.to_node]
            assert math.hypot(xy[0][0] - a[0], xy[0][1] - a[1]) < 1.0
            assert math.hypot(xy[-1][0] - b[0], xy[-1][1] - b[1]) < 1.0

    def test_round_trip_is_idempotent(self, grid_network):
        again = load_road_network(network_to_geojson(grid_network))
        assert len(again.nodes) == len(grid_network.nodes)
        assert [e.edge_id for e in again.edges] == [
            e.edge_id for e in grid_network.edges
        ]
        assert network_to_geojson(again) == network_to_geojson(grid_network)


CSV_HEADER = "asset_id,capital,component_type,lon,lat,source\n"


class TestAssetLoading:
    def test_single_row(self):
        raw = CSV_HEADER + "a1,public_health,hospital,-122.3,47.6,osm\n"
        (asset,) = load_assets(raw, fmt="csv")
        assert asset.capital == "public_health"
        assert asset.component_type == "hospital"
        assert asset.point.lon == -122.3
        assert not asset.excluded

    def test_unknown_capital_names_line(self):
        raw = (
            CSV_HEADER
            + "a1,public_health,hospital,-122.3,47.6,osm\n"
            + "a2,spiritual,temple,-122.3,47.6,osm\n"
        )
        with pytest.raises(ValidationError, match="line 3"):
            load_assets(raw, fmt="csv")

    def test_duplicate_id_rejected(self):
        raw = (
            CSV_HEADER
            + "a1,social,school,-122.3,47.6,osm\n"
            + "a1,social,school,-122.31,47.6,osm\n"
        )
        with pytest.raises(ValidationError, match="a1"):
            load_assets(raw, fmt="csv")

    def test_wrong_header_rejected(self):
        raw = "id,capital,type,lon,lat,source\na1,social,school,-122.3,47.6,x\n"
        with pytest.raises(ValidationError, match="header"):
            load_assets(raw, fmt="csv")

    def test_bad_coordinate_names_line(self):
        raw = CSV_HEADER + "a1,social,school,east,47.6,osm\n"
        with pytest.raises(ValidationError, match="line 2"):
            load_assets(raw, fmt="csv")

    def test_geojson_points(self):
        raw = json.dumps(
            {
                "type": "FeatureCollection",
                "features": [
                    {
                        "type": "Feature",
                        "id": "a9",
                        "properties": {
                            "capital": "cultural",
                            "component_type": "museum",
                            "source": "city",
                        },
                        "geometry": {
                            "type": "Point",
                            "coordinates": [-122.31, 47.61],
                        },
                    }
                ],
            }
        )
        (asset,) = load_assets(raw, fmt="geojson")
        assert asset.asset_id == "a9"
        assert asset.capital == "cultural"

    def test_fixture_counts(self, grid_assets):
        assert len(grid_assets) == 300
        assert {a.capital for a in grid_assets} == {
            "social", "cultural", "built", "economic", "public_health",
        }
        assert len({a.asset_id for a in grid_assets}) == 300


class TestBlockGroupLoading:
    def _feature(self, bg_id, ring, income):
        return {
            "type": "Feature",
            "id": bg_id,
            "properties": {"median_income": income},
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        }

    def _collection(self, *features):
        return json.dumps({"type": "FeatureCollection", "features": list(features)})

    def test_single_polygon(self):
        ring = [lonlat(0, 0), lonlat(100, 0), lonlat(100, 100), lonlat(0, 100),
                lonlat(0, 0)]
        raw = self._collection(self._feature("bg1", ring, 50000))
        (group,) = load_block_groups(raw)
        assert group.median_income == 50000
        assert group.cluster_label is None

    def test_unclosed_ring_is_closed(self):
        ring = [lonlat(0, 0), lonlat(100, 0), lonlat(100, 100), lonlat(0, 100)]
        raw = self._collection(self._feature("bg1", ring, 10000))
        (group,) = load_block_groups(raw)
        assert group.polygon[0] == group.polygon[-1]

    def test_null_income_retained(self):
        ring = [lonlat(0, 0), lonlat(100, 0), lonlat(50, 100), lonlat(0, 0)]
        raw = self._collection(self._feature("bg1", ring, None))
        (group,) = load_block_groups(raw)
        assert group.median_income is None

    def test_negative_income_rejected(self):
        ring = [lonlat(0, 0), lonlat(100, 0), lonlat(50, 100), lonlat(0, 0)]
        raw = self._collection(self._feature("bg1", ring, -5))
        with pytest.raises(ValidationError, match="bg1"):
            load_block_groups(raw)

    def test_fixture_counts(self, grid_groups):
        assert len(grid_groups) == 25
        assert all(g.median_income is not None for g in grid_groups)
