"""Build small synthetic networks for tests.

Geometry is given in planar meters around a base lon/lat and converted
to WGS84 with the same equirectangular math the engine uses, so hand
distances survive the round trip to within float dust.
"""

from __future__ import annotations

import json
import math
import random
from typing import Any, Sequence

R = 6_371_008.8
DEG = math.pi / 180.0

BASE_LON = -122.30
BASE_LAT = 47.60


def lonlat(x_m: float, y_m: float, base=(BASE_LON, BASE_LAT)) -> list[float]:
    lon0, lat0 = base
    lat = lat0 + y_m / (R * DEG)
    lon = lon0 + x_m / (R * DEG * math.cos(lat0 * DEG))
    return [lon, lat]


def network_geojson(
    segments: Sequence[dict[str, Any]], base=(BASE_LON, BASE_LAT)
) -> str:
    """segments: [{"id", "coords": [(x_m, y_m), ...], "road_class", "oneway"}]"""
    features = []
    for k, seg in enumerate(segments):
        features.append(
            {
                "type": "Feature",
                "id": seg.get("id", f"e{k}"),
                "properties": {
                    "road_class": seg.get("road_class", "residential"),
                    "oneway": seg.get("oneway", False),
                },
                "geometry": {
                    "type": "LineString",
                    "coordinates": [lonlat(x, y, base) for x, y in seg["coords"]],
                },
            }
        )
    return json.dumps({"type": "FeatureCollection", "features": features})


def vertical_line(
    ys: Sequence[float], x: float = 0.0, road_class: str = "residential",
    oneway: bool = False, prefix: str = "e",
) -> list[dict[str, Any]]:
    """Chain of edges along a meridian; lengths are exact meters."""
    return [
        {
            "id": f"{prefix}{k}",
            "coords": [(x, ys[k]), (x, ys[k + 1])],
            "road_class": road_class,
            "oneway": oneway,
        }
        for k in range(len(ys) - 1)
    ]


def grid_segments(
    nx: int, ny: int, spacing: float = 100.0, road_class: str = "residential"
) -> list[dict[str, Any]]:
    segments = []
    eid = 0
    for j in range(ny):
        for i in range(nx - 1):
            segments.append(
                {
                    "id": f"e{eid:03d}",
                    "coords": [(i * spacing, j * spacing),
                               ((i + 1) * spacing, j * spacing)],
                    "road_class": road_class,
                }
            )
            eid += 1
    for i in range(nx):
        for j in range(ny - 1):
            segments.append(
                {
                    "id": f"e{eid:03d}",
                    "coords": [(i * spacing, j * spacing),
                               (i * spacing, (j + 1) * spacing)],
                    "road_class": road_class,
                }
            )
            eid += 1
    return segments


def random_graph_geojson(rng: random.Random, max_nodes: int = 8) -> str:
    """Random small road network: jittered nodes, random connections,
    mixed road classes, some oneway edges."""
    n = rng.randint(2, max_nodes)
    pts = []
    while len(pts) < n:
        cand = (rng.uniform(0, 900), rng.uniform(0, 900))
        if all(math.dist(cand, p) > 5.0 for p in pts):
            pts.append(cand)
    classes = ["motorway", "primary", "secondary", "residential", "service"]
    segments = []
    eid = 0
    seen = set()
    # random spanning-ish chain plus extra links
    order = list(range(n))
    rng.shuffle(order)
    pairs = [(order[i], order[i + 1]) for i in range(n - 1)]
    extra = rng.randint(0, n)
    while extra > 0:
        a, b = rng.randrange(n), rng.randrange(n)
        if a != b:
            pairs.append((a, b))
            extra -= 1
    for a, b in pairs:
        key = (min(a, b), max(a, b))
        if key in seen:
            continue
        seen.add(key)
        segments.append(
            {
                "id": f"e{eid}",
                "coords": [pts[a], pts[b]],
                "road_class": rng.choice(classes),
                "oneway": rng.random() < 0.25,
            }
        )
        eid += 1
    return network_geojson(segments)


def polygon_lonlat(rect_m, base=(BASE_LON, BASE_LAT)) -> list[list[float]]:
    x0, y0, x1, y1 = rect_m
    return [
        lonlat(x0, y0, base),
        lonlat(x1, y0, base),
        lonlat(x1, y1, base),
        lonlat(x0, y1, base),
        lonlat(x0, y0, base),
    ]
