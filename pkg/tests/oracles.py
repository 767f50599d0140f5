"""Independent reference implementations the tests compare against.

Each oracle re-solves its problem with a different algorithm than the
engine: Bellman-style bounded-walk relaxation instead of Dijkstra,
exhaustive partition/permutation enumeration instead of DP/local
search, and shapely instead of hand-rolled geometry.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Mapping, Sequence

from shapely.geometry import LineString, Point, Polygon

INF = math.inf


# -- turn-aware shortest path ------------------------------------------------


def oracle_shortest_time(graph, penalty_s: float, src: str, dst: str) -> float:
    """Minimum walk time under the U-turn rule, by Bellman relaxation
    over arrived-via-arc states (covers walks up to 2x the arc count,
    which dominates every optimal walk since arc times are positive)."""
    if src == dst:
        return 0.0
    arcs = {
        a.arc_id: a for a in graph.arcs if a.arc_id not in graph.removed_arcs
    }
    by_tail: dict[str, list[int]] = {}
    for aid, a in arcs.items():
        by_tail.setdefault(a.tail, []).append(aid)
    dist = {aid: INF for aid in arcs}
    for aid, a in arcs.items():
        if a.tail == src:
            dist[aid] = a.travel_time_s
    for _ in range(2 * len(arcs)):
        changed = False
        for aid, a in arcs.items():
            d = dist[aid]
            if d == INF:
                continue
            rev = graph.reverse_arc.get(aid)
            for nxt in by_tail.get(a.head, ()):
                pen = penalty_s if nxt == rev else 0.0
                if math.isinf(pen):
                    continue
                nd = d + pen + arcs[nxt].travel_time_s
                if nd < dist[nxt]:
                    dist[nxt] = nd
                    changed = True
        if not changed:
            break
    return min(
        (dist[aid] for aid, a in arcs.items() if a.head == dst), default=INF
    )


# -- natural breaks ----------------------------------------------------------


def oracle_jenks(values: Sequence[float], k: int):
    """Exhaustive contiguous-partition optimum in exact arithmetic.

    Returns (ssd, breaks, labels) shaped like the engine's JenksResult;
    ties resolve to the lexicographically smallest split-index tuple.
    """
    n = len(values)
    order = sorted(range(n), key=lambda i: float(values[i]))
    x = [Fraction(float(values[i])) for i in order]

    def ssd_of(seg: Sequence[Fraction]) -> Fraction:
        s = sum(seg)
        m = len(seg)
        return sum(v * v for v in seg) - s * s / m

    best_cost = None
    best_splits = None
    for splits in itertools.combinations(range(n - 1), k - 1):
        bounds = [-1, *splits, n - 1]
        cost = sum(
            ssd_of(x[bounds[t] + 1 : bounds[t + 1] + 1])
            for t in range(k)
        )
        key = (cost, splits)
        if best_cost is None or key < (best_cost, best_splits):
            best_cost, best_splits = cost, splits
    assert best_splits is not None
    breaks = tuple(float(x[e]) for e in best_splits)
    labels_sorted = [0] * n
    prev = -1
    for label, end in enumerate(list(best_splits) + [n - 1]):
        for pos in range(prev + 1, end + 1):
            labels_sorted[pos] = label
        prev = end
    labels = [0] * n
    for sorted_pos, orig in enumerate(order):
        labels[orig] = labels_sorted[sorted_pos]
    return float(best_cost), breaks, tuple(labels)


# -- tour enumeration --------------------------------------------------------


def best_tour(
    matrix: Sequence[Sequence[float]],
    stops: Sequence[int],
    closed: bool,
    start: int = 0,
    end: int | None = None,
):
    """Exhaustive optimum over all stop orders. Returns (cost, order)
    where order includes the fixed start (and end, when given)."""
    best_cost = INF
    best_order: tuple[int, ...] | None = None
    tail = [end] if end is not None else []
    for perm in itertools.permutations(stops):
        seq = [start, *perm, *tail]
        cost = 0.0
        for a, b in zip(seq, seq[1:]):
            cost += matrix[a][b]
        if closed:
            cost += matrix[seq[-1]][start]
        if cost < best_cost:
            best_cost = cost
            best_order = tuple(seq)
    return best_cost, best_order


def best_cost_per_subset(
    matrix: Sequence[Sequence[float]], stops: Sequence[int], closed: bool
) -> dict[frozenset[int], float]:
    """Optimal tour cost for every subset of stops (depot = index 0)."""
    out: dict[frozenset[int], float] = {}
    for r in range(len(stops) + 1):
        for subset in itertools.combinations(stops, r):
            cost, _ = best_tour(matrix, subset, closed)
            out[frozenset(subset)] = cost
    return out


# -- geometry via shapely ----------------------------------------------------


def shapely_point_polyline_distance(
    point, polyline: Sequence[tuple[float, float]]
) -> float:
    return LineString(polyline).distance(Point(point))


def shapely_coverage(
    polylines: Sequence[Sequence[tuple[float, float]]],
    assets_xy: Mapping[str, tuple[float, float]],
    buffer_m: float,
) -> frozenset[str]:
    lines = [LineString(p) for p in polylines]
    covered = set()
    for asset_id, xy in assets_xy.items():
        p = Point(xy)
        if any(line.distance(p) <= buffer_m for line in lines):
            covered.add(asset_id)
    return frozenset(covered)


def shapely_clip_area(
    ring: Sequence[tuple[float, float]], rect: tuple[float, float, float, float]
) -> float:
    x0, y0, x1, y1 = rect
    window = Polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    poly = Polygon(ring)
    if not poly.is_valid:
        poly = poly.buffer(0)
    return poly.intersection(window).area


def entropy(shares: Sequence[float]) -> float:
    total = sum(shares)
    out = 0.0
    for s in shares:
        if s > 0:
            p = s / total
            out -= p * math.log(p)
    return out


# -- route scans -------------------------------------------------------------


def count_reversals_by_nodes(route, graph) -> int:
    """Reversal count from base edges and node motion only: arc k+1
    undoes arc k when both lie on the same base edge and the walk
    returns to where arc k started."""
    table = {a.arc_id: a for a in graph.arcs}
    count = 0
    for k in range(len(route.arcs) - 1):
        a = table[route.arcs[k]]
        b = table[route.arcs[k + 1]]
        if a.base_edge_id == b.base_edge_id and b.head == a.tail and a.arc_id != b.arc_id:
            count += 1
    return count


def assert_arc_chain(route, graph) -> None:
    table = {a.arc_id: a for a in graph.arcs}
    node = route.start_node
    for aid in route.arcs:
        arc = table[aid]
        assert arc.tail == node, f"chain break at arc {aid}"
        node = arc.head
    assert node == route.end_node
