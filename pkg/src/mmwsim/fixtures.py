"""Synthetic test fixtures: a Manhattan-grid urban map with a street
trajectory that starts in line of sight and ends behind a building, plus
small random scenes for oracle comparisons.

The urban generator is deterministic for a given seed so runs against it
are reproducible byte for byte.
"""

from __future__ import annotations

import json
import math

import numpy as np

# Manhattan grid: blocks on a 30 m pitch with 18 m footprints leaves
# 12 m streets between facades.
BLOCK_PITCH = 30.0
BLOCK_SIZE = 18.0
BLOCK_MARGIN = (BLOCK_PITCH - BLOCK_SIZE) / 2.0

URBAN_BS_POSITION = (238.0, 300.0, 8.0)
URBAN_WAYPOINTS = ((240.0, 230.0), (240.0, 270.0), (282.5, 270.0))


def urban_map_dict(blocks: int = 20, height_range=(10.0, 25.0),
                   seed: int = 7, trees=True) -> dict:
    """Manhattan-grid urban map: ``blocks x blocks`` rectangular buildings
    (4 walls each), heights drawn per building, street trees by the BS
    street.  Table-style materials: eps 5 walls / 3 ground, sigma_h 0.4 m.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    extent = blocks * BLOCK_PITCH
    surfaces = []
    sid = 1
    for i in range(blocks):
        for j in range(blocks):
            x0 = i * BLOCK_PITCH + BLOCK_MARGIN
            y0 = j * BLOCK_PITCH + BLOCK_MARGIN
            x1, y1 = x0 + BLOCK_SIZE, y0 + BLOCK_SIZE
            h = float(rng.uniform(*height_range))
            for p1, p2 in (((x0, y0), (x1, y0)), ((x1, y0), (x1, y1)),
                           ((x1, y1), (x0, y1)), ((x0, y1), (x0, y0))):
                surfaces.append({"id": sid, "p1": list(p1), "p2": list(p2),
                                 "height": round(h, 3), "material": 1})
                sid += 1
    tree_list = []
    if trees:
        # Canopies along the BS street, >= 6 m lateral offset from the
        # trajectory so scattering stays well below the LoS ray.
        spots = [(234.0, 240.0), (246.0, 252.0), (234.0, 264.0),
                 (246.0, 288.0)]
        for t, (x, y) in enumerate(spots, start=1):
            tree_list.append({"id": t, "center": [x, y], "radius": 4.0,
                              "height": 5.0, "beta_deg": 20.0, "alpha": 0.5,
                              "chi": 0.6})
    return {
        "bounds": [0.0, 0.0, extent, extent],
        "materials": [
            {"id": 1, "eps": 5.0, "sigma_h": 0.4},
            {"id": 2, "eps": 3.0, "sigma_h": 0.4},
        ],
        "surfaces": surfaces,
        "trees": tree_list,
        "ground_material": 2,
    }


def urban_scenario_dict(map_name: str = "map.json",
                        outputs=("paths", "power", "jadpp"),
                        master_seed: int = 0) -> dict:
    """Street-canyon scenario: 16x16 patch panel at the BS, omni UE walking
    at 2 m/s sampled every 0.25 s (0.5 m spacing, 166 positions), ending in
    a side street shadowed from the BS."""
    return {
        "map": map_name,
        "carrier_frequency_hz": 28e9,
        "tx_power_dbm": 30.0,
        "bs": {
            "position": list(URBAN_BS_POSITION),
            "array": {"rows": 16, "cols": 16, "element": "patch",
                      "boresight_azimuth_deg": -90.0, "downtilt_deg": 6.0},
        },
        "ue": {
            "height": 1.5,
            "array": {},
            "speed_mps": 2.0,
            "sample_interval_s": 0.25,
            "waypoints": [list(w) for w in URBAN_WAYPOINTS],
        },
        "tracer": {"max_bounce": 3, "angular_spacing_deg": 0.1},
        "cluster": {"subray_count": 20, "delay_spread_ns": 12.0,
                    "azimuth_spread_deg": 10.0, "elevation_spread_deg": 5.0,
                    "master_seed": master_seed},
        "ofdm": {"subcarrier_count": 2048, "subcarrier_spacing_hz": 120e3,
                 "symbol_count": 14},
        "outputs": list(outputs),
    }


def random_scene_dict(rng: np.random.Generator, surface_count: int,
                      extent: float = 100.0) -> dict:
    """Small random scene of disjoint wall segments for oracle tests.

    Segments are rejection-sampled so no two cross or touch; that keeps
    image-method visibility checks free of degenerate shared endpoints.
    """
    surfaces = []
    guard = 0
    while len(surfaces) < surface_count:
        guard += 1
        if guard > 10000:
            raise RuntimeError("could not place disjoint segments")
        a = rng.uniform(5.0, extent - 5.0, 2)
        ang = rng.uniform(0.0, 2.0 * math.pi)
        length = rng.uniform(6.0, 25.0)
        b = a + length * np.array([math.cos(ang), math.sin(ang)])
        if not (0.0 < b[0] < extent and 0.0 < b[1] < extent):
            continue
        if any(_segments_close(a, b, np.array(s["p1"]), np.array(s["p2"]))
               for s in surfaces):
            continue
        surfaces.append({"id": len(surfaces) + 1,
                         "p1": [float(a[0]), float(a[1])],
                         "p2": [float(b[0]), float(b[1])],
                         "height": float(rng.uniform(6.0, 20.0)),
                         "material": 1})
    return {
        "bounds": [0.0, 0.0, extent, extent],
        "materials": [{"id": 1, "eps": 4.0, "sigma_h": 0.0}],
        "surfaces": surfaces,
        "trees": [],
        "ground_material": 1,
    }


def _segments_close(a1, a2, b1, b2, gap: float = 0.5) -> bool:
    return _seg_distance(a1, a2, b1, b2) < gap


def _seg_distance(a1, a2, b1, b2) -> float:
    if _segments_cross(a1, a2, b1, b2):
        return 0.0
    return min(_point_seg(b1, a1, a2), _point_seg(b2, a1, a2),
               _point_seg(a1, b1, b2), _point_seg(a2, b1, b2))


def _segments_cross(a1, a2, b1, b2) -> bool:
    d1 = _cross(b2 - b1, a1 - b1)
    d2 = _cross(b2 - b1, a2 - b1)
    d3 = _cross(a2 - a1, b1 - a1)
    d4 = _cross(a2 - a1, b2 - a1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _cross(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def _point_seg(p, a, b) -> float:
    e = b - a
    t = float(np.clip((p - a) @ e / (e @ e), 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * e)))


def free_position(data: dict, rng: np.random.Generator, margin: float = 1.0):
    """Uniform point in bounds at least ``margin`` away from all walls."""
    xmin, ymin, xmax, ymax = data["bounds"]
    for _ in range(10000):
        p = np.array([rng.uniform(xmin + 1, xmax - 1),
                      rng.uniform(ymin + 1, ymax - 1)])
        if all(_point_seg(p, np.array(s["p1"]), np.array(s["p2"])) > margin
               for s in data["surfaces"]):
            return p
    raise RuntimeError("no free position found")


def write_json(data: dict, path):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")
