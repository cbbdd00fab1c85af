import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmwsim import geometry
from mmwsim.geometry import (DigitalMap, MapError, MapValidationError,
                             find_intersection_point,
                             find_intersection_surface, load_map, los_visible,
                             map_from_dict)

from conftest import empty_map_dict, single_wall_dict, square_room_dict, write_map


class TestLoading:
    def test_square_room_loads(self, square_room):
        assert len(square_room.surfaces) == 4
        assert len(square_room.wedges) == 4
        for w in square_room.wedges:
            assert w.n == pytest.approx(1.5)

    def test_empty_surface_list_valid(self, empty_map):
        assert len(empty_map.surfaces) == 0
        assert len(empty_map.wedges) == 0

    def test_zero_height_wall_rejected(self, tmp_path):
        data = single_wall_dict(height=0.0)
        with pytest.raises(MapValidationError, match="1"):
            map_from_dict(data)

    def test_duplicate_surface_id_rejected(self):
        data = single_wall_dict()
        data["surfaces"].append(dict(data["surfaces"][0]))
        with pytest.raises(MapValidationError, match="duplicate"):
            map_from_dict(data)

    def test_unknown_material_rejected(self):
        data = single_wall_dict()
        data["surfaces"][0]["material"] = 99
        with pytest.raises(MapValidationError):
            map_from_dict(data)

    def test_eps_below_one_rejected(self):
        data = single_wall_dict(eps=0.5)
        with pytest.raises(MapValidationError):
            map_from_dict(data)

    def test_malformed_json_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(MapError):
            load_map(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MapError):
            load_map(tmp_path / "absent.json")

    def test_load_roundtrip(self, tmp_path):
        p = write_map(tmp_path, square_room_dict())
        dmap = load_map(p)
        assert len(dmap.surfaces) == 4


class TestIntersection:
    def test_ray_hits_wall(self, single_wall):
        sid = find_intersection_surface((0.0, 0.0), (1.0, 0.0), single_wall)
        assert sid == 1

    def test_nearest_of_two_parallel_walls(self):
        data = single_wall_dict(x=10.0)
        data["surfaces"].append({"id": 2, "p1": [5.0, -50.0], "p2": [5.0, 50.0],
                                 "height": 10.0, "material": 1})
        dmap = map_from_dict(data)
        assert find_intersection_surface((0.0, 0.0), (1.0, 0.0), dmap) == 2

    def test_ray_away_from_geometry(self, single_wall):
        assert find_intersection_surface((0.0, 0.0), (-1.0, 0.0), single_wall) is None

    def test_point_on_segment(self, single_wall):
        pt = find_intersection_point((0.0, 0.0), (1.0, 0.0), single_wall.surface(1))
        assert np.allclose(pt, [10.0, 0.0])

    def test_parallel_ray_misses(self, single_wall):
        assert find_intersection_point((0.0, 0.0), (0.0, 1.0),
                                       single_wall.surface(1)) is None

    def test_departing_ray_no_self_hit(self, single_wall):
        # Origin on the wall, direction away: no intersection.
        assert find_intersection_point((10.0, 0.0), (-1.0, 0.0),
                                       single_wall.surface(1)) is None

    def test_exclude_skips_departure_surface(self, square_room):
        hit = square_room.nearest_hit((10.0, 0.0), (-1.0, 0.0), exclude=2)
        assert hit is not None and hit[0] == 4

    def test_nearest_hit_point_on_ray(self, square_room):
        sid, t, point = square_room.nearest_hit((0.0, 0.0), (0.0, 1.0))
        assert sid == 3
        assert t == pytest.approx(10.0)
        assert np.allclose(point, [0.0, 10.0])


class TestVisibility:
    def test_blocked_by_wall(self, single_wall):
        assert not los_visible((0.0, 0.0), (20.0, 0.0), single_wall)

    def test_open_space(self, single_wall):
        assert los_visible((0.0, 0.0), (0.0, 20.0), single_wall)

    def test_grazing_endpoint_does_not_block(self):
        data = single_wall_dict(x=10.0, y0=0.0, y1=50.0)
        dmap = map_from_dict(data)
        # Segment passes exactly through the wall endpoint at (10, 0).
        assert los_visible((0.0, 0.0), (20.0, 0.0), dmap)

    def test_grazing_rule_consistent_with_offsets(self):
        # Dense sampling around the endpoint: strictly-below offsets pass,
        # strictly-above offsets are blocked.
        data = single_wall_dict(x=10.0, y0=0.0, y1=50.0)
        dmap = map_from_dict(data)
        for dy in np.linspace(1e-6, 1e-2, 25):
            assert los_visible((0.0, -dy), (20.0, -dy), dmap)
            assert not los_visible((0.0, dy), (20.0, dy), dmap)

    def test_segment_own_endpoint_touch_does_not_block(self, single_wall):
        assert los_visible((0.0, 0.0), (10.0, 0.0), single_wall)


class TestWedges:
    def test_square_room_wedge_count_and_n(self, square_room):
        assert len(square_room.wedges) == 4
        for w in square_room.wedges:
            assert w.n == pytest.approx(1.5)
            assert w.height == pytest.approx(10.0)

    def test_collinear_walls_no_wedge(self):
        data = empty_map_dict()
        data["surfaces"] = [
            {"id": 1, "p1": [10, 10], "p2": [20, 10], "height": 5, "material": 1},
            {"id": 2, "p1": [20, 10], "p2": [30, 10], "height": 5, "material": 1},
        ]
        dmap = map_from_dict(data)
        assert len(dmap.wedges) == 0

    def test_right_angle_exterior_angle(self):
        data = empty_map_dict()
        data["surfaces"] = [
            {"id": 1, "p1": [10, 10], "p2": [20, 10], "height": 5, "material": 1},
            {"id": 2, "p1": [10, 10], "p2": [10, 20], "height": 5, "material": 1},
        ]
        dmap = map_from_dict(data)
        assert len(dmap.wedges) == 1
        w = dmap.wedges[0]
        assert w.n == pytest.approx(1.5)
        # Point along the zero face direction has angle 0; the bisector of
        # the exterior region sits at n*pi/2.
        zero_face = dmap.surface(w.zero_face_surface)
        away = np.asarray(zero_face.p2, dtype=float)
        assert w.exterior_angle_from_zero_face(away) == pytest.approx(0.0, abs=1e-9)
        far = np.array([15.0, 5.0])  # outside the corner, between the faces
        ang = w.exterior_angle_from_zero_face(far)
        assert 0.0 < ang < w.n * math.pi

    def test_wedge_height_is_min_of_faces(self):
        data = empty_map_dict()
        data["surfaces"] = [
            {"id": 1, "p1": [10, 10], "p2": [20, 10], "height": 5, "material": 1},
            {"id": 2, "p1": [10, 10], "p2": [10, 20], "height": 9, "material": 1},
        ]
        dmap = map_from_dict(data)
        assert dmap.wedges[0].height == pytest.approx(5.0)


class TestGridEquivalence:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_grid_matches_linear_scan(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        data = empty_map_dict(extent=100.0)
        n = int(rng.integers(35, 60))  # above the grid threshold
        surfaces = []
        for i in range(n):
            a = rng.uniform(5, 95, 2)
            ang = rng.uniform(0, 2 * math.pi)
            b = np.clip(a + rng.uniform(3, 20) * np.array(
                [math.cos(ang), math.sin(ang)]), 0.5, 99.5)
            surfaces.append({"id": i + 1, "p1": a.tolist(), "p2": b.tolist(),
                             "height": 8.0, "material": 1})
        data["surfaces"] = surfaces
        dmap = map_from_dict(data)
        assert dmap.use_grid
        for _ in range(60):
            origin = rng.uniform(0, 100, 2)
            ang = rng.uniform(0, 2 * math.pi)
            direction = np.array([math.cos(ang), math.sin(ang)])
            a = dmap.nearest_hit(origin, direction, force_grid=True)
            b = dmap.nearest_hit(origin, direction, force_linear=True)
            if a is None or b is None:
                assert a is None and b is None
            else:
                assert a[0] == b[0]
                assert a[1] == pytest.approx(b[1], abs=1e-12)

    def test_nearest_hit_param_not_larger_than_any_hit(self):
        rng = np.random.Generator(np.random.PCG64(5))
        data = empty_map_dict()
        data["surfaces"] = [
            {"id": i + 1,
             "p1": rng.uniform(10, 90, 2).tolist(),
             "p2": rng.uniform(10, 90, 2).tolist(),
             "height": 5.0, "material": 1}
            for i in range(20)
        ]
        dmap = map_from_dict(data)
        for _ in range(200):
            origin = rng.uniform(0, 100, 2)
            ang = rng.uniform(0, 2 * math.pi)
            direction = np.array([math.cos(ang), math.sin(ang)])
            hit = dmap.nearest_hit(origin, direction)
            if hit is None:
                continue
            for s in dmap.surfaces:
                pt = find_intersection_point(origin, direction, s)
                if pt is not None:
                    t = float(np.linalg.norm(pt - origin))
                    assert hit[1] <= t + 1e-9
