import json
import math

import numpy as np
import pytest

from mmwsim import geometry


def square_room_dict(side=20.0, height=10.0, eps=4.0, sigma_h=0.0):
    """Four walls of a square room centered on the origin."""
    s = side / 2.0
    corners = [(-s, -s), (s, -s), (s, s), (-s, s)]
    surfaces = []
    for i in range(4):
        p1, p2 = corners[i], corners[(i + 1) % 4]
        surfaces.append({"id": i + 1, "p1": list(p1), "p2": list(p2),
                         "height": height, "material": 1})
    return {
        "bounds": [-s - 1, -s - 1, s + 1, s + 1],
        "materials": [{"id": 1, "eps": eps, "sigma_h": sigma_h}],
        "surfaces": surfaces,
        "trees": [],
        "ground_material": 1,
    }


def empty_map_dict(extent=100.0):
    return {
        "bounds": [0.0, 0.0, extent, extent],
        "materials": [{"id": 1, "eps": 3.0, "sigma_h": 0.0}],
        "surfaces": [],
        "trees": [],
        "ground_material": 1,
    }


def single_wall_dict(x=10.0, y0=-50.0, y1=50.0, height=10.0, eps=4.0,
                     sigma_h=0.0):
    return {
        "bounds": [-60.0, -60.0, 60.0, 60.0],
        "materials": [{"id": 1, "eps": eps, "sigma_h": sigma_h}],
        "surfaces": [{"id": 1, "p1": [x, y0], "p2": [x, y1],
                      "height": height, "material": 1}],
        "trees": [],
        "ground_material": 1,
    }


@pytest.fixture
def square_room():
    return geometry.map_from_dict(square_room_dict())


@pytest.fixture
def empty_map():
    return geometry.map_from_dict(empty_map_dict())


@pytest.fixture
def single_wall():
    return geometry.map_from_dict(single_wall_dict())


def write_map(tmp_path, data, name="map.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path
