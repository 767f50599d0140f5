"""Income stratification and canvass-area scoring.

The break optimizer is the exact O(k*n^2) dynamic program over
contiguous partitions of the sorted values, not the iterative
reallocation heuristic: block-group counts are small enough that
exactness is affordable, and an exact optimum is what makes oracle
testing against full partition enumeration possible at all. All DP
arithmetic runs in rationals so equal-cost partitions tie exactly and
the documented tie-break (lexicographically smallest break sequence) is
decided by value, never by float rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DomainError, EmptyAreaError
from .ingest import BlockGroup, GeoPoint, RoadNetwork, project_many
from .spatial import XY, clip_polygon_to_rect, polygon_area

Rect = tuple[float, float, float, float]  # xmin, ymin, xmax, ymax


@dataclass(frozen=True)
class JenksResult:
    k: int
    breaks: tuple[float, ...]  # k-1 inclusive upper bounds, ascending
    labels: tuple[int, ...]  # class per input value, input order, 0-based
    ssd: float  # within-class sum of squared deviations
    gvf: float  # goodness of variance fit, 1 - ssd/total_ssd


def jenks_breaks(values: Sequence[float], k: int) -> JenksResult:
    """Optimal k-class natural breaks of ``values``.

    Classes are contiguous runs of the sorted values minimizing the total
    within-class sum of squared deviations. Among equal-cost partitions
    the lexicographically smallest break sequence wins. Labels are
    reported in input order.

    Raises DomainError when k < 1, values is empty, or k exceeds the
    number of distinct values.
    """
    vals = [float(v) for v in values]
    n = len(vals)
    if n == 0:
        raise DomainError("jenks: values must be non-empty")
    if k < 1:
        raise DomainError(f"jenks: k must be >= 1, got {k}")
    distinct = len(set(vals))
    if k > distinct:
        raise DomainError(f"jenks: k={k} exceeds {distinct} distinct values")

    order = sorted(range(n), key=lambda i: vals[i])
    x = [Fraction(vals[i]) for i in order]

    # Prefix sums make any class cost O(1):
    # cost(i..j) = sum(x^2) - (sum x)^2 / count, all exact.
    p1 = [Fraction(0)] * (n + 1)
    p2 = [Fraction(0)] * (n + 1)
    for i, v in enumerate(x):
        p1[i + 1] = p1[i] + v
        p2[i + 1] = p2[i] + v * v

    def cost(i: int, j: int) -> Fraction:
        s = p1[j + 1] - p1[i]
        q = p2[j + 1] - p2[i]
        return q - s * s / (j - i + 1)

    # suffix[j][i]: minimal cost of splitting x[i:] into j classes.
    suffix: list[list[Fraction | None]] = [
        [None] * (n + 1) for _ in range(k + 1)
    ]
    for i in range(n):
        suffix[1][i] = cost(i, n - 1)
    for j in range(2, k + 1):
        # Leave room for j-1 more classes after the first one.
        for i in range(n - j + 1):
            best: Fraction | None = None
            for e in range(i, n - j + 1):
                c = cost(i, e) + suffix[j - 1][e + 1]  # type: ignore[operator]
                if best is None or c < best:
                    best = c
            suffix[j][i] = best

    total = suffix[k][0]
    assert total is not None

    # Forward greedy reconstruction: the smallest feasible end index at
    # each step yields the lexicographically smallest split sequence,
    # hence the smallest break-value sequence (x is sorted).
    splits: list[int] = []
    i = 0
    for j in range(k, 1, -1):
        target = suffix[j][i]
        for e in range(i, n - j + 1):
            if cost(i, e) + suffix[j - 1][e + 1] == target:  # type: ignore[operator]
                splits.append(e)
                i = e + 1
                break

    breaks = tuple(float(x[e]) for e in splits)
    labels_sorted = [0] * n
    label = 0
    bounds = splits + [n - 1]
    pos = 0
    for label, end in enumerate(bounds):
        while pos <= end:
            labels_sorted[pos] = label
            pos += 1
    labels = [0] * n
    for sorted_pos, orig_idx in enumerate(order):
        labels[orig_idx] = labels_sorted[sorted_pos]

    total_ssd = cost(0, n - 1)
    gvf = 1.0 if total_ssd == 0 else float(1 - total / total_ssd)
    return JenksResult(
        k=k,
        breaks=breaks,
        labels=tuple(labels),
        ssd=float(total),
        gvf=gvf,
    )


def classify_block_groups(
    block_groups: Iterable[BlockGroup], k: int
) -> tuple[tuple[BlockGroup, ...], JenksResult]:
    """Attach Jenks cluster labels to block groups by median income.

    Groups with null income keep ``cluster_label=None`` and are excluded
    from the optimization; they surface as a coverage gap, not an error.
    """
    groups = list(block_groups)
    with_income = [g for g in groups if g.median_income is not None]
    if not with_income:
        raise DomainError("no block groups with median_income to classify")
    result = jenks_breaks([g.median_income for g in with_income], k)  # type: ignore[misc]
    label_by_id = {
        g.bg_id: result.labels[i] for i, g in enumerate(with_income)
    }
    relabeled = tuple(
        BlockGroup(
            bg_id=g.bg_id,
            polygon=g.polygon,
            median_income=g.median_income,
            cluster_label=label_by_id.get(g.bg_id),
        )
        for g in groups
    )
    return relabeled, result


@dataclass(frozen=True)
class CanvasArea:
    rect: Rect
    spread_score: float
    intersection_count: int
    classes_present: tuple[int, ...]
    road_class_count: int


def score_canvas_area(
    rect: Rect,
    block_groups: Sequence[BlockGroup],
    origin: GeoPoint,
) -> float:
    """Shannon entropy (natural log) of the area-weighted income-class
    distribution inside ``rect``.

    Only classified block groups participate; their polygons are clipped
    to the rectangle and class shares are intersection area over total
    intersected area. Raises EmptyAreaError when nothing classified
    intersects the rectangle.
    """
    shares = _class_areas(rect, _classified_rings(block_groups, origin))
    total = sum(shares.values())
    if total <= 0.0:
        raise EmptyAreaError("window intersects no classified block group")
    return _entropy(shares, total)


def _entropy(shares: dict[int, float], total: float) -> float:
    entropy = 0.0
    for area in shares.values():
        p = area / total
        if p > 0.0:
            entropy -= p * math.log(p)
    return entropy


def _classified_rings(
    block_groups: Sequence[BlockGroup], origin: GeoPoint
) -> list[tuple[int, list[XY]]]:
    rings: list[tuple[int, list[XY]]] = []
    for group in block_groups:
        if group.cluster_label is None:
            continue
        xy = project_many(group.polygon, origin)
        rings.append(
            (group.cluster_label, [(float(p[0]), float(p[1])) for p in xy])
        )
    return rings


def _class_areas(rect: Rect, rings: list[tuple[int, list[XY]]]) -> dict[int, float]:
    areas: dict[int, float] = {}
    for label, ring in rings:
        clipped = clip_polygon_to_rect(ring, rect)
        if len(clipped) < 3:
            continue
        area = polygon_area(clipped)
        if area > 0.0:
            areas[label] = areas.get(label, 0.0) + area
    return areas


def rank_candidate_areas(
    block_groups: Sequence[BlockGroup],
    network: RoadNetwork,
    window_m: float,
    stride_m: float,
    include_degree2: bool = False,
) -> list[CanvasArea]:
    """Slide a square window over the network's bounding box and rank
    windows by income-class spread.

    Windows that intersect no classified block group are dropped. Sort
    order: spread_score desc, intersection_count desc, then window origin
    (x, y) ascending for stability.
    """
    if window_m <= 0 or stride_m <= 0:
        raise DomainError("window_m and stride_m must be > 0")
    xmin, ymin, xmax, ymax = network.bbox_xy
    # Sub-micron slack so projection float dust cannot spawn a phantom
    # window row past the data.
    width = max(0.0, xmax - xmin - 1e-6)
    height = max(0.0, ymax - ymin - 1e-6)
    nx = max(1, math.ceil(width / stride_m))
    ny = max(1, math.ceil(height / stride_m))

    min_degree = 2 if include_degree2 else 3
    node_pts = [
        (xy[0], xy[1])
        for node_id, xy in network.node_xy.items()
        if network.node_degree[node_id] >= min_degree
    ]
    edge_classes = {e.edge_id: e.road_class for e in network.edges}
    rings = _classified_rings(block_groups, network.projection_origin)

    out: list[CanvasArea] = []
    for i in range(nx):
        for j in range(ny):
            x0 = xmin + i * stride_m
            y0 = ymin + j * stride_m
            rect: Rect = (x0, y0, x0 + window_m, y0 + window_m)
            shares = _class_areas(rect, rings)
            total = sum(shares.values())
            if total <= 0.0:
                continue
            entropy = _entropy(shares, total)
            count = sum(
                1
                for (px, py) in node_pts
                if rect[0] < px < rect[2] and rect[1] < py < rect[3]
            )
            road_classes = {
                rc
                for eid, rc in edge_classes.items()
                if _edge_touches_rect(network, eid, rect)
            }
            out.append(
                CanvasArea(
                    rect=rect,
                    spread_score=entropy,
                    intersection_count=count,
                    classes_present=tuple(sorted(shares)),
                    road_class_count=len(road_classes),
                )
            )
    out.sort(
        key=lambda a: (-a.spread_score, -a.intersection_count, a.rect[0], a.rect[1])
    )
    return out


def _edge_touches_rect(network: RoadNetwork, edge_id: str, rect: Rect) -> bool:
    xy = network.edge_xy[edge_id]
    xmin, ymin, xmax, ymax = rect
    exmin, eymin = xy.min(axis=0)
    exmax, eymax = xy.max(axis=0)
    return not (exmax < xmin or exmin > xmax or eymax < ymin or eymin > ymax)


def intersection_nodes_in_rect(
    network: RoadNetwork, rect: Rect, include_degree2: bool = False
) -> list[str]:
    """Intersection nodes strictly inside an axis-aligned window."""
    min_degree = 2 if include_degree2 else 3
    out = []
    for node_id, (x, y) in network.node_xy.items():
        if network.node_degree[node_id] >= min_degree and (
            rect[0] < x < rect[2] and rect[1] < y < rect[3]
        ):
            out.append(node_id)
    return out
