"""Geodata ingest: projection, road network, assets, block groups.

Everything downstream works in a local planar frame produced by an
equirectangular projection around a per-dataset origin. City-scale
extents (well under one degree) keep the distortion negligible, and the
projection is trivially invertible, which matters because exports must
round-trip coordinates exactly. We purposely avoid external geospatial
libraries here: the math is a handful of lines and owning it keeps the
planar frame bit-reproducible across platforms.

Node identity is geometric. Endpoints of different LineStrings that land
within the snap tolerance of each other become one node, so the loaded
network is a proper graph rather than a bag of disconnected strokes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import GeometryError, ParseError, RangeError, ValidationError

EARTH_RADIUS_M = 6_371_008.8

# Two projected points closer than this are the same physical node.
SNAP_TOLERANCE_M = 0.5

# Equirectangular distortion grows with distance from the origin; keep
# inputs inside a one-degree window where it stays sub-meter-per-km.
MAX_WINDOW_DEG = 1.0

CAPITAL_CLASSES = ("social", "cultural", "built", "economic", "public_health")


class RoadClass(str, Enum):
    MOTORWAY = "motorway"
    PRIMARY = "primary"
    SECONDARY = "secondary"
    RESIDENTIAL = "residential"
    SERVICE = "service"


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 coordinate, longitude first."""

    lon: float
    lat: float


@dataclass(frozen=True)
class Node:
    node_id: str
    point: GeoPoint


@dataclass(frozen=True)
class Edge:
    edge_id: str
    from_node: str
    to_node: str
    polyline: tuple[GeoPoint, ...]
    length_m: float
    road_class: RoadClass
    oneway: bool


@dataclass(frozen=True)
class Asset:
    asset_id: str
    capital: str
    component_type: str
    point: GeoPoint
    source: str = ""
    excluded: bool = False


@dataclass(frozen=True)
class BlockGroup:
    bg_id: str
    polygon: tuple[GeoPoint, ...]
    median_income: float | None
    cluster_label: int | None = None


def project(point: GeoPoint, origin: GeoPoint) -> tuple[float, float]:
    """Project a WGS84 point to local planar meters around ``origin``.

    x grows east, y grows north. Raises RangeError when the point falls
    outside the supported one-degree window around the origin.
    """
    dlon = point.lon - origin.lon
    dlat = point.lat - origin.lat
    if abs(dlon) > MAX_WINDOW_DEG or abs(dlat) > MAX_WINDOW_DEG:
        raise RangeError(
            f"point ({point.lon}, {point.lat}) is outside the "
            f"{MAX_WINDOW_DEG} degree projection window around "
            f"({origin.lon}, {origin.lat})"
        )
    x = EARTH_RADIUS_M * math.radians(dlon) * math.cos(math.radians(origin.lat))
    y = EARTH_RADIUS_M * math.radians(dlat)
    return (x, y)


def unproject(xy: tuple[float, float], origin: GeoPoint) -> GeoPoint:
    """Inverse of :func:`project` for the same origin."""
    x, y = xy
    lon = origin.lon + math.degrees(x / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat))))
    lat = origin.lat + math.degrees(y / EARTH_RADIUS_M)
    return GeoPoint(lon, lat)


def project_many(points: Iterable[GeoPoint], origin: GeoPoint) -> np.ndarray:
    """Vectorized projection; same window check as :func:`project`."""
    arr = np.asarray([(p.lon, p.lat) for p in points], dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 2)
    dlon = arr[:, 0] - origin.lon
    dlat = arr[:, 1] - origin.lat
    bad = (np.abs(dlon) > MAX_WINDOW_DEG) | (np.abs(dlat) > MAX_WINDOW_DEG)
    if bad.any():
        idx = int(np.argmax(bad))
        raise RangeError(
            f"point ({arr[idx, 0]}, {arr[idx, 1]}) is outside the "
            f"{MAX_WINDOW_DEG} degree projection window"
        )
    x = EARTH_RADIUS_M * np.radians(dlon) * math.cos(math.radians(origin.lat))
    y = EARTH_RADIUS_M * np.radians(dlat)
    return np.column_stack([x, y])


def polyline_length_m(polyline: Sequence[GeoPoint], origin: GeoPoint) -> float:
    xy = project_many(polyline, origin)
    return float(np.sum(np.hypot(np.diff(xy[:, 0]), np.diff(xy[:, 1]))))


@dataclass(frozen=True)
class RoadNetwork:
    """Snapped road geometry plus the planar frame everything shares."""

    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    projection_origin: GeoPoint
    component_count: int

    @cached_property
    def node_by_id(self) -> dict[str, Node]:
        return {n.node_id: n for n in self.nodes}

    @cached_property
    def edge_by_id(self) -> dict[str, Edge]:
        return {e.edge_id: e for e in self.edges}

    @cached_property
    def node_xy(self) -> dict[str, tuple[float, float]]:
        pts = project_many([n.point for n in self.nodes], self.projection_origin)
        return {n.node_id: (float(pts[i, 0]), float(pts[i, 1])) for i, n in enumerate(self.nodes)}

    @cached_property
    def edge_xy(self) -> dict[str, np.ndarray]:
        return {
            e.edge_id: project_many(e.polyline, self.projection_origin)
            for e in self.edges
        }

    @cached_property
    def node_degree(self) -> dict[str, int]:
        """Distinct incident edges per node (a loop edge counts once)."""
        deg: dict[str, int] = {n.node_id: 0 for n in self.nodes}
        for e in self.edges:
            deg[e.from_node] += 1
            if e.to_node != e.from_node:
                deg[e.to_node] += 1
        return deg

    @cached_property
    def bbox_xy(self) -> tuple[float, float, float, float]:
        xs = [xy[0] for xy in self.node_xy.values()]
        ys = [xy[1] for xy in self.node_xy.values()]
        return (min(xs), min(ys), max(xs), max(ys))


class _NodeSnapper:
    """Greedy snap-to-grid dedup: a new endpoint merges into the first
    existing node within SNAP_TOLERANCE_M, so surviving nodes are always
    pairwise at least the tolerance apart."""

    def __init__(self, origin: GeoPoint):
        self.origin = origin
        self.cell = SNAP_TOLERANCE_M
        self.grid: dict[tuple[int, int], list[int]] = {}
        self.points: list[GeoPoint] = []
        self.xy: list[tuple[float, float]] = []

    def snap(self, point: GeoPoint) -> int:
        x, y = project(point, self.origin)
        ci = math.floor(x / self.cell)
        cj = math.floor(y / self.cell)
        best = -1
        best_d = SNAP_TOLERANCE_M
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                for idx in self.grid.get((ci + di, cj + dj), ()):
                    px, py = self.xy[idx]
                    d = math.hypot(x - px, y - py)
                    if d < best_d:
                        best_d = d
                        best = idx
        if best >= 0:
            return best
        idx = len(self.points)
        self.points.append(point)
        self.xy.append((x, y))
        self.grid.setdefault((ci, cj), []).append(idx)
        return idx


def _parse_feature_collection(raw: str | bytes, what: str) -> list[dict[str, Any]]:
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what}: not valid JSON: {exc}")
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError(f"{what}: expected a GeoJSON FeatureCollection")
    feats = doc.get("features")
    if not isinstance(feats, list):
        raise ParseError(f"{what}: FeatureCollection has no feature list")
    return feats


def _feature_id(feature: Mapping[str, Any], default: str) -> str:
    if feature.get("id") is not None:
        return str(feature["id"])
    props = feature.get("properties") or {}
    if props.get("id") is not None:
        return str(props["id"])
    return default


def load_road_network(raw: str | bytes) -> RoadNetwork:
    """Load a GeoJSON FeatureCollection of LineStrings into a RoadNetwork.

    Each feature needs ``road_class`` (one of the RoadClass values) and
    may carry ``oneway`` (boolean, default false). Oneway direction is
    the vertex order. Endpoints within 0.5 m of each other in the planar
    frame merge into one node.

    Raises
    ------
    ParseError
        The bytes are not a GeoJSON FeatureCollection of LineStrings.
    ValidationError
        Contract violations: no edges, zero-length edges, bad road
        classes, duplicate edge ids. Messages name the offending feature.
    """
    feats = _parse_feature_collection(raw, "road network")
    if not feats:
        raise ValidationError("road network: no edges (empty FeatureCollection)")

    coords_per_feature: list[list[GeoPoint]] = []
    lons: list[float] = []
    lats: list[float] = []
    for i, feature in enumerate(feats):
        geom = feature.get("geometry") or {}
        if geom.get("type") != "LineString":
            raise ParseError(
                f"road network feature {_feature_id(feature, f'#{i}')}: "
                f"expected LineString geometry, got {geom.get('type')!r}"
            )
        coords = geom.get("coordinates")
        if not isinstance(coords, list) or len(coords) < 2:
            raise ValidationError(
                f"road network feature {_feature_id(feature, f'#{i}')}: "
                "LineString needs at least 2 coordinates"
            )
        pts = [GeoPoint(float(c[0]), float(c[1])) for c in coords]
        coords_per_feature.append(pts)
        lons.extend(p.lon for p in pts)
        lats.extend(p.lat for p in pts)

    origin = GeoPoint(
        (min(lons) + max(lons)) / 2.0,
        (min(lats) + max(lats)) / 2.0,
    )

    snapper = _NodeSnapper(origin)
    edges: list[Edge] = []
    seen_edge_ids: set[str] = set()
    problems: list[str] = []
    endpoint_pairs: list[tuple[int, int]] = []

    for i, feature in enumerate(feats):
        fid = _feature_id(feature, f"e{i}")
        props = feature.get("properties") or {}
        pts = coords_per_feature[i]

        if fid in seen_edge_ids:
            problems.append(f"duplicate edge id {fid!r}")
            continue
        seen_edge_ids.add(fid)

        raw_class = props.get("road_class")
        try:
            road_class = RoadClass(raw_class)
        except ValueError:
            problems.append(
                f"feature {fid!r}: unknown road_class {raw_class!r} "
                f"(expected one of {[c.value for c in RoadClass]})"
            )
            continue

        oneway = props.get("oneway", False)
        if not isinstance(oneway, bool):
            problems.append(f"feature {fid!r}: oneway must be boolean")
            continue

        a = snapper.snap(pts[0])
        b = snapper.snap(pts[-1])
        length = polyline_length_m(pts, origin)
        if length < SNAP_TOLERANCE_M:
            problems.append(f"feature {fid!r}: zero-length edge ({length:.3f} m)")
            continue

        endpoint_pairs.append((a, b))
        edges.append(
            Edge(
                edge_id=fid,
                from_node="",  # filled below once node ids exist
                to_node="",
                polyline=tuple(pts),
                length_m=length,
                road_class=road_class,
                oneway=oneway,
            )
        )

    if problems:
        raise ValidationError("road network: " + "; ".join(problems))
    if not edges:
        raise ValidationError("road network: no edges survived validation")

    nodes = tuple(
        Node(node_id=f"n{idx}", point=pt) for idx, pt in enumerate(snapper.points)
    )
    edges = [
        Edge(
            edge_id=e.edge_id,
            from_node=f"n{a}",
            to_node=f"n{b}",
            polyline=e.polyline,
            length_m=e.length_m,
            road_class=e.road_class,
            oneway=e.oneway,
        )
        for e, (a, b) in zip(edges, endpoint_pairs)
    ]

    component_count = _count_components(len(nodes), endpoint_pairs)
    return RoadNetwork(
        nodes=nodes,
        edges=tuple(edges),
        projection_origin=origin,
        component_count=component_count,
    )


def _count_components(n_nodes: int, pairs: list[tuple[int, int]]) -> int:
    parent = list(range(n_nodes))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(i) for i in range(n_nodes)})


def network_to_geojson(network: RoadNetwork) -> str:
    """Serialize a RoadNetwork back to the ingest GeoJSON shape.

    Loading the result yields an identical model (ingest is idempotent).
    """
    features = []
    for e in network.edges:
        features.append(
            {
                "type": "Feature",
                "id": e.edge_id,
                "properties": {
                    "road_class": e.road_class.value,
                    "oneway": e.oneway,
                },
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[p.lon, p.lat] for p in e.polyline],
                },
            }
        )
    return json.dumps(
        {"type": "FeatureCollection", "features": features}, separators=(",", ":")
    )


ASSET_CSV_HEADER = ["asset_id", "capital", "component_type", "lon", "lat", "source"]


def load_assets_csv(raw: str | bytes) -> tuple[Asset, ...]:
    """Load assets from CSV with the exact header
    ``asset_id,capital,component_type,lon,lat,source``.

    Rows with unknown capital classes, bad coordinates, or duplicate ids
    are collected and reported together in one ValidationError that
    names the offending line numbers (header is line 1).
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    reader = csv.reader(io.StringIO(raw))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("asset CSV: empty file")
    if [h.strip() for h in header] != ASSET_CSV_HEADER:
        raise ValidationError(
            f"asset CSV: header must be exactly {','.join(ASSET_CSV_HEADER)!r}, "
            f"got {','.join(header)!r}"
        )

    assets: list[Asset] = []
    seen: set[str] = set()
    problems: list[str] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(ASSET_CSV_HEADER):
            problems.append(f"line {lineno}: expected {len(ASSET_CSV_HEADER)} fields")
            continue
        asset_id, capital, component_type, lon_s, lat_s, source = (c.strip() for c in row)
        if capital not in CAPITAL_CLASSES:
            problems.append(f"line {lineno}: unknown capital {capital!r}")
            continue
        try:
            lon, lat = float(lon_s), float(lat_s)
        except ValueError:
            problems.append(f"line {lineno}: lon/lat not numeric")
            continue
        if asset_id in seen:
            problems.append(f"line {lineno}: duplicate asset_id {asset_id!r}")
            continue
        seen.add(asset_id)
        assets.append(
            Asset(
                asset_id=asset_id,
                capital=capital,
                component_type=component_type,
                point=GeoPoint(lon, lat),
                source=source,
            )
        )
    if problems:
        raise ValidationError("asset CSV: " + "; ".join(problems))
    return tuple(assets)


def load_assets_geojson(raw: str | bytes) -> tuple[Asset, ...]:
    """Load assets from a GeoJSON FeatureCollection of Points with
    properties asset_id, capital, component_type, source."""
    feats = _parse_feature_collection(raw, "assets")
    assets: list[Asset] = []
    seen: set[str] = set()
    problems: list[str] = []
    for i, feature in enumerate(feats):
        geom = feature.get("geometry") or {}
        if geom.get("type") != "Point":
            raise ParseError(f"assets feature #{i}: expected Point geometry")
        props = feature.get("properties") or {}
        asset_id = str(props.get("asset_id") or _feature_id(feature, f"a{i}"))
        capital = props.get("capital")
        if capital not in CAPITAL_CLASSES:
            problems.append(f"feature {asset_id!r}: unknown capital {capital!r}")
            continue
        if asset_id in seen:
            problems.append(f"feature {asset_id!r}: duplicate asset_id")
            continue
        seen.add(asset_id)
        lon, lat = geom["coordinates"][:2]
        assets.append(
            Asset(
                asset_id=asset_id,
                capital=capital,
                component_type=str(props.get("component_type", "")),
                point=GeoPoint(float(lon), float(lat)),
                source=str(props.get("source", "")),
            )
        )
    if problems:
        raise ValidationError("assets: " + "; ".join(problems))
    return tuple(assets)


def load_assets(raw: str | bytes, fmt: str = "csv") -> tuple[Asset, ...]:
    if fmt == "csv":
        return load_assets_csv(raw)
    if fmt in ("geojson_points", "geojson"):
        return load_assets_geojson(raw)
    raise ParseError(f"unknown asset format {fmt!r}")


def load_block_groups(raw: str | bytes) -> tuple[BlockGroup, ...]:
    """Load block groups from GeoJSON Polygons with a ``median_income``
    property (null allowed: such groups stay in the model but never get
    a cluster label).

    Only the exterior ring is kept. Rings are closed on load if the
    source left them open; self-intersection is accepted as-is.
    """
    feats = _parse_feature_collection(raw, "block groups")
    groups: list[BlockGroup] = []
    problems: list[str] = []
    seen: set[str] = set()
    for i, feature in enumerate(feats):
        fid = _feature_id(feature, f"bg{i}")
        geom = feature.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise ParseError(
                f"block group {fid!r}: expected Polygon geometry, got {geom.get('type')!r}"
            )
        rings = geom.get("coordinates")
        if not rings or len(rings[0]) < 4:
            raise GeometryError(f"block group {fid!r}: exterior ring needs >= 4 points")
        ring = [GeoPoint(float(c[0]), float(c[1])) for c in rings[0]]
        if ring[0] != ring[-1]:
            ring.append(ring[0])
        props = feature.get("properties") or {}
        income = props.get("median_income")
        if income is not None:
            income = float(income)
            if income < 0:
                problems.append(f"block group {fid!r}: negative median_income")
                continue
        if fid in seen:
            problems.append(f"block group {fid!r}: duplicate id")
            continue
        seen.add(fid)
        groups.append(BlockGroup(bg_id=fid, polygon=tuple(ring), median_income=income))
    if problems:
        raise ValidationError("block groups: " + "; ".join(problems))
    if not groups:
        raise ValidationError("block groups: empty FeatureCollection")
    return tuple(groups)
