"""Planar geometry: buffer association and polygon primitives.

Distances are exact Euclidean point-to-segment computations in the
network's projected frame; there is no spatial index, just vectorized
scans over every segment, which is both exactly equivalent to the brute
force definition and fast enough at city scale (hundreds of thousands of
point-segment pairs per query).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .config import DEFAULT_BUFFER_M
from .errors import GeometryError
from .ingest import RoadNetwork, Asset, project

if TYPE_CHECKING:
    from .graph import RoutableGraph
    from .routes import Route

XY = tuple[float, float]

_BOUNDARY_EPS = 1e-9


def point_to_polyline_distance(
    point: XY, polyline: Sequence[XY]
) -> tuple[float, XY]:
    """Exact minimum distance from a planar point to a polyline.

    Returns (distance, nearest point on the polyline). Ties across
    segments resolve to the earliest segment. Raises GeometryError for
    polylines with fewer than 2 vertices or zero total length.
    """
    if len(polyline) < 2:
        raise GeometryError("polyline needs at least 2 vertices")
    px, py = point
    best_d = math.inf
    best_pt: XY = polyline[0]
    degenerate = True
    for (ax, ay), (bx, by) in zip(polyline, polyline[1:]):
        dx, dy = bx - ax, by - ay
        len2 = dx * dx + dy * dy
        if len2 == 0.0:
            continue
        degenerate = False
        t = ((px - ax) * dx + (py - ay) * dy) / len2
        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
        qx, qy = ax + t * dx, ay + t * dy
        d = math.hypot(px - qx, py - qy)
        if d < best_d:
            best_d = d
            best_pt = (qx, qy)
    if degenerate:
        raise GeometryError("polyline has zero length")
    return best_d, best_pt


@dataclass(frozen=True)
class SegmentTable:
    """Flattened segment arrays for one network, in projected meters."""

    starts: np.ndarray  # (N, 2)
    ends: np.ndarray  # (N, 2)
    edge_ids: tuple[str, ...]  # per segment
    edge_rank: np.ndarray  # (N,) rank of edge_id in sorted id order


_segment_tables: dict[int, tuple[RoadNetwork, SegmentTable]] = {}


def segment_table(network: RoadNetwork) -> SegmentTable:
    cached = _segment_tables.get(id(network))
    if cached is not None and cached[0] is network:
        return cached[1]
    starts: list[XY] = []
    ends: list[XY] = []
    edge_ids: list[str] = []
    rank = {eid: i for i, eid in enumerate(sorted(e.edge_id for e in network.edges))}
    ranks: list[int] = []
    for edge in network.edges:
        xy = network.edge_xy[edge.edge_id]
        for k in range(len(xy) - 1):
            a, b = xy[k], xy[k + 1]
            if a[0] == b[0] and a[1] == b[1]:
                continue
            starts.append((float(a[0]), float(a[1])))
            ends.append((float(b[0]), float(b[1])))
            edge_ids.append(edge.edge_id)
            ranks.append(rank[edge.edge_id])
    table = SegmentTable(
        starts=np.asarray(starts, dtype=float),
        ends=np.asarray(ends, dtype=float),
        edge_ids=tuple(edge_ids),
        edge_rank=np.asarray(ranks, dtype=int),
    )
    _segment_tables[id(network)] = (network, table)
    return table


def _distances_to_segments(
    px: float, py: float, starts: np.ndarray, ends: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized point-to-segment distances plus projection parameters."""
    d = ends - starts
    len2 = np.einsum("ij,ij->i", d, d)
    rel = np.array([px, py]) - starts
    t = np.clip(np.einsum("ij,ij->i", rel, d) / len2, 0.0, 1.0)
    proj = starts + t[:, None] * d
    dx = px - proj[:, 0]
    dy = py - proj[:, 1]
    return np.hypot(dx, dy), t


@dataclass(frozen=True)
class AssetAssociation:
    asset_id: str
    edge_id: str
    distance_m: float
    projected_xy: XY
    snap_node: str
    within_buffer: bool


def associate_assets(
    assets: Iterable[Asset],
    network: RoadNetwork,
    buffer_m: float = DEFAULT_BUFFER_M,
) -> dict[str, AssetAssociation]:
    """Associate every asset with its nearest network edge.

    Distance ties across edges resolve to the smallest edge_id. The snap
    node is the nearer endpoint of the chosen edge (its from-node on a
    tie), which is where solvers route when the asset becomes a waypoint.
    ``within_buffer`` uses an inclusive comparison against ``buffer_m``.
    """
    table = segment_table(network)
    out: dict[str, AssetAssociation] = {}
    for asset in assets:
        x, y = project(asset.point, network.projection_origin)
        dists, _ = _distances_to_segments(x, y, table.starts, table.ends)
        dmin = float(dists.min())
        tied = np.flatnonzero(dists == dmin)
        seg_idx = int(tied[np.argmin(table.edge_rank[tied])])
        edge_id = table.edge_ids[seg_idx]
        edge = network.edge_by_id[edge_id]
        # Recompute the projection on the winning edge's full polyline so
        # the reported point is the true nearest point on that edge.
        d_edge, proj = point_to_polyline_distance(
            (x, y), [tuple(p) for p in network.edge_xy[edge_id]]
        )
        fx, fy = network.node_xy[edge.from_node]
        tx, ty = network.node_xy[edge.to_node]
        d_from = math.hypot(x - fx, y - fy)
        d_to = math.hypot(x - tx, y - ty)
        snap = edge.from_node if d_from <= d_to else edge.to_node
        out[asset.asset_id] = AssetAssociation(
            asset_id=asset.asset_id,
            edge_id=edge_id,
            distance_m=d_edge,
            projected_xy=proj,
            snap_node=snap,
            within_buffer=d_edge <= buffer_m,
        )
    return out


def route_coverage(
    route: "Route",
    graph: "RoutableGraph",
    assets: Iterable[Asset],
    buffer_m: float = DEFAULT_BUFFER_M,
) -> frozenset[str]:
    """Asset ids within ``buffer_m`` of any edge the route traverses.

    Coverage is set-valued over the route's distinct base edges, so it is
    invariant under re-traversal and tour rotation. Excluded assets never
    appear. An empty route covers nothing.
    """
    edge_ids = {graph.arcs[a].base_edge_id for a in route.arcs}
    return edges_coverage(edge_ids, graph.network, assets, buffer_m)


def asset_buffer_edges(
    assets: Iterable[Asset],
    network: RoadNetwork,
    buffer_m: float = DEFAULT_BUFFER_M,
) -> dict[str, frozenset[str]]:
    """For each non-excluded asset, every edge within ``buffer_m``.

    An asset is covered by a route exactly when the route traverses one
    of these edges, so solvers can score coverage deltas with set
    intersections instead of repeated distance scans.
    """
    table = segment_table(network)
    out: dict[str, frozenset[str]] = {}
    for asset in assets:
        if asset.excluded:
            continue
        x, y = project(asset.point, network.projection_origin)
        dists, _ = _distances_to_segments(x, y, table.starts, table.ends)
        near = np.flatnonzero(dists <= buffer_m)
        out[asset.asset_id] = frozenset(table.edge_ids[i] for i in near)
    return out


def edges_coverage(
    edge_ids: set[str],
    network: RoadNetwork,
    assets: Iterable[Asset],
    buffer_m: float = DEFAULT_BUFFER_M,
) -> frozenset[str]:
    if not edge_ids:
        return frozenset()
    table = segment_table(network)
    mask = np.asarray([eid in edge_ids for eid in table.edge_ids], dtype=bool)
    starts = table.starts[mask]
    ends = table.ends[mask]
    covered: set[str] = set()
    for asset in assets:
        if asset.excluded:
            continue
        x, y = project(asset.point, network.projection_origin)
        dists, _ = _distances_to_segments(x, y, starts, ends)
        if float(dists.min()) <= buffer_m:
            covered.add(asset.asset_id)
    return frozenset(covered)


# ---------------------------------------------------------------------------
# Polygon primitives (planar). Rings may be open or closed on input;
# boundary points count as outside for containment queries.


def _closed(ring: Sequence[XY]) -> list[XY]:
    pts = [tuple(p) for p in ring]
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts = pts[:-1]
    if len(pts) < 3:
        raise GeometryError("polygon ring needs at least 3 distinct vertices")
    return pts


def point_on_ring(point: XY, ring: Sequence[XY], eps: float = _BOUNDARY_EPS) -> bool:
    pts = _closed(ring)
    for i in range(len(pts)):
        a, b = pts[i], pts[(i + 1) % len(pts)]
        if a == b:
            continue
        d, _ = point_to_polyline_distance(point, [a, b])
        if d <= eps:
            return True
    return False


def point_in_polygon(point: XY, ring: Sequence[XY]) -> bool:
    """Strict interior test: points on the boundary are outside."""
    if point_on_ring(point, ring):
        return False
    pts = _closed(ring)
    x, y = point
    inside = False
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


def polygon_area(ring: Sequence[XY]) -> float:
    pts = _closed(ring)
    acc = 0.0
    for i in range(len(pts)):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % len(pts)]
        acc += x1 * y2 - x2 * y1
    return abs(acc) / 2.0


def clip_polygon_to_rect(
    ring: Sequence[XY], rect: tuple[float, float, float, float]
) -> list[XY]:
    """Sutherland-Hodgman clip of a simple polygon against an axis-aligned
    rectangle (xmin, ymin, xmax, ymax). Returns the clipped ring (possibly
    empty)."""
    xmin, ymin, xmax, ymax = rect
    pts = _closed(ring)

    def clip_half(points: list[XY], inside, intersect) -> list[XY]:
        out: list[XY] = []
        n = len(points)
        for i in range(n):
            cur, nxt = points[i], points[(i + 1) % n]
            cur_in, nxt_in = inside(cur), inside(nxt)
            if cur_in:
                out.append(cur)
                if not nxt_in:
                    out.append(intersect(cur, nxt))
            elif nxt_in:
                out.append(intersect(cur, nxt))
        return out

    def x_cross(bound: float):
        def f(p: XY, q: XY) -> XY:
            t = (bound - p[0]) / (q[0] - p[0])
            return (bound, p[1] + t * (q[1] - p[1]))

        return f

    def y_cross(bound: float):
        def f(p: XY, q: XY) -> XY:
            t = (bound - p[1]) / (q[1] - p[1])
            return (p[0] + t * (q[0] - p[0]), bound)

        return f

    clipped = clip_half(pts, lambda p: p[0] >= xmin, x_cross(xmin))
    if clipped:
        clipped = clip_half(clipped, lambda p: p[0] <= xmax, x_cross(xmax))
    if clipped:
        clipped = clip_half(clipped, lambda p: p[1] >= ymin, y_cross(ymin))
    if clipped:
        clipped = clip_half(clipped, lambda p: p[1] <= ymax, y_cross(ymax))
    return clipped


def _orient(a: XY, b: XY, c: XY) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segments_intersect(p1: XY, p2: XY, q1: XY, q2: XY) -> bool:
    """Closed-segment intersection, collinear overlaps included."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True

    def on_segment(a: XY, b: XY, c: XY) -> bool:
        return (
            _orient(a, b, c) == 0
            and min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
        )

    return (
        on_segment(q1, q2, p1)
        or on_segment(q1, q2, p2)
        or on_segment(p1, p2, q1)
        or on_segment(p1, p2, q2)
    )


def polyline_intersects_polygon(polyline: Sequence[XY], ring: Sequence[XY]) -> bool:
    """True when any polyline vertex lies strictly inside the ring or any
    polyline segment touches the ring boundary."""
    pts = _closed(ring)
    for p in polyline:
        if point_in_polygon(tuple(p), pts):
            return True
    n = len(pts)
    for k in range(len(polyline) - 1):
        a = tuple(polyline[k])
        b = tuple(polyline[k + 1])
        for i in range(n):
            if segments_intersect(a, b, pts[i], pts[(i + 1) % n]):
                return True
    return False
