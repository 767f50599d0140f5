"""Generate the grid-city test fixtures.

A synthetic 20x20-block city (21x21 nodes, 200 m spacing): road network
GeoJSON, 300 capital assets over the five capital classes, 25 block
groups in five income bands, and a variant network with three seeded
dead-end spurs. Deterministic; run from the repo root to refresh
tests/data/.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "data"

R = 6_371_008.8
DEG = math.pi / 180.0

N = 21  # nodes per side
SPACING_M = 200.0
LON0 = -122.300
LAT0 = 47.600

DLAT = SPACING_M / (R * DEG)
LAT_MID = LAT0 + (N - 1) / 2 * DLAT
DLON = SPACING_M / (R * DEG * math.cos(LAT_MID * DEG))

CAPITALS = {
    "social": ["school", "community_center", "church"],
    "cultural": ["library", "museum", "theater"],
    "built": ["bridge", "fire_station", "substation"],
    "economic": ["grocery", "pharmacy", "bank"],
    "public_health": ["hospital", "clinic", "testing_site"],
}


def node_lonlat(i: int, j: int) -> tuple[float, float]:
    return LON0 + i * DLON, LAT0 + j * DLAT


def road_class(i0: int, j0: int, i1: int, j1: int) -> str:
    horizontal = j0 == j1
    if horizontal:
        if j0 in (0, N - 1):
            return "motorway"
        if j0 % 5 == 0:
            return "primary"
        if j0 % 5 == 2 and max(i0, i1) <= 4:
            return "service"
        return "residential"
    if i0 in (0, N - 1):
        return "motorway"
    if i0 % 5 == 0:
        return "secondary"
    return "residential"


def grid_features() -> list[dict]:
    features = []
    eid = 0

    def add(i0, j0, i1, j1):
        nonlocal eid
        features.append(
            {
                "type": "Feature",
                "id": f"e{eid:04d}",
                "properties": {
                    "road_class": road_class(i0, j0, i1, j1),
                    "oneway": False,
                },
                "geometry": {
                    "type": "LineString",
                    "coordinates": [
                        list(node_lonlat(i0, j0)),
                        list(node_lonlat(i1, j1)),
                    ],
                },
            }
        )
        eid += 1

    for j in range(N):
        for i in range(N - 1):
            add(i, j, i + 1, j)
    for i in range(N):
        for j in range(N - 1):
            add(i, j, i, j + 1)
    return features


def spur_features(start_eid: int) -> list[dict]:
    # three dead-end stubs poking into block interiors
    stubs = [
        ((5, 5), (0.5, 0.3)),
        ((10, 12), (-0.4, 0.45)),
        ((15, 7), (0.35, -0.5)),
    ]
    features = []
    for k, ((i, j), (dx, dy)) in enumerate(stubs):
        lon, lat = node_lonlat(i, j)
        tip = [lon + dx * DLON, lat + dy * DLAT]
        features.append(
            {
                "type": "Feature",
                "id": f"e{start_eid + k:04d}",
                "properties": {"road_class": "service", "oneway": False},
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[lon, lat], tip],
                },
            }
        )
    return features


def write_networks() -> list[dict]:
    grid = grid_features()
    OUT.joinpath("grid_network.geojson").write_text(
        json.dumps({"type": "FeatureCollection", "features": grid}, indent=1)
        + "\n",
        encoding="utf-8",
    )
    spurs = spur_features(len(grid))
    OUT.joinpath("spur_network.geojson").write_text(
        json.dumps(
            {"type": "FeatureCollection", "features": grid + spurs}, indent=1
        )
        + "\n",
        encoding="utf-8",
    )
    return spurs


def write_assets(spurs: list[dict]) -> None:
    rng = random.Random(2020)
    rows = []
    capitals = sorted(CAPITALS)
    meters_lat = 1.0 / (R * DEG)

    def offset(lon: float, lat: float, dx_m: float, dy_m: float):
        return (
            lon + dx_m / (R * DEG * math.cos(lat * DEG)),
            lat + dy_m * meters_lat,
        )

    k = 0
    while k < 297:
        capital = capitals[k % 5]
        ctype = CAPITALS[capital][k % 3]
        horizontal = rng.random() < 0.5
        if horizontal:
            i, j = rng.randrange(N - 1), rng.randrange(N)
            t = rng.random()
            lon, lat = node_lonlat(i, j)
            lon += t * DLON
        else:
            i, j = rng.randrange(N), rng.randrange(N - 1)
            t = rng.random()
            lon, lat = node_lonlat(i, j)
            lat += t * DLAT
        # most assets hug the network; every 15th sits beyond the buffer
        far = k % 15 == 7
        d = rng.uniform(70.0, 95.0) if far else rng.uniform(4.0, 55.0)
        side = 1 if rng.random() < 0.5 else -1
        if horizontal:
            lon2, lat2 = offset(lon, lat, 0.0, side * d)
        else:
            lon2, lat2 = offset(lon, lat, side * d, 0.0)
        rows.append(
            (
                f"a{k:03d}",
                capital,
                ctype,
                f"{lon2:.7f}",
                f"{lat2:.7f}",
                "synthetic_inventory",
            )
        )
        k += 1

    # one asset at each seeded spur tip so the spur earns a waypoint
    for s, feature in enumerate(spurs):
        tip_lon, tip_lat = feature["geometry"]["coordinates"][-1]
        lon2, lat2 = offset(tip_lon, tip_lat, 6.0, 5.0)
        rows.append(
            (
                f"a{297 + s:03d}",
                "public_health",
                "testing_site",
                f"{lon2:.7f}",
                f"{lat2:.7f}",
                "synthetic_inventory",
            )
        )

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["asset_id", "capital", "component_type", "lon", "lat", "source"]
    )
    writer.writerows(rows)
    OUT.joinpath("grid_assets.csv").write_text(buf.getvalue(), encoding="utf-8")


def write_block_groups() -> None:
    rng = random.Random(7)
    features = []
    blocks_per_group = (N - 1) // 5  # 4x4 city blocks per group
    for gj in range(5):
        for gi in range(5):
            lon_a, lat_a = node_lonlat(gi * blocks_per_group, gj * blocks_per_group)
            lon_b, lat_b = node_lonlat(
                (gi + 1) * blocks_per_group, (gj + 1) * blocks_per_group
            )
            band = (gi + 2 * gj) % 5
            income = 20000 * (band + 1) + rng.randrange(-1500, 1500)
            ring = [
                [lon_a, lat_a],
                [lon_b, lat_a],
                [lon_b, lat_b],
                [lon_a, lat_b],
                [lon_a, lat_a],
            ]
            features.append(
                {
                    "type": "Feature",
                    "id": f"bg{gj * 5 + gi:02d}",
                    "properties": {"median_income": income},
                    "geometry": {"type": "Polygon", "coordinates": [ring]},
                }
            )
    OUT.joinpath("grid_blockgroups.geojson").write_text(
        json.dumps({"type": "FeatureCollection", "features": features}, indent=1)
        + "\n",
        encoding="utf-8",
    )


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    spurs = write_networks()
    write_assets(spurs)
    write_block_groups()
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
