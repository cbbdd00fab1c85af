"""2.5D digital map: vertical wall segments, diffraction wedges, tree
cylinders, and exact 2D ray/segment queries with a uniform-grid index.

Walls are 2D segments in the map plane carrying a height and a material.
All queries are read-only; a loaded map is immutable and safe to share
across workers.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

# Intersection parameters below this (meters along the ray) count as a
# self-hit of the departing surface and are skipped.
SELF_HIT_EPS = 1e-6

# Corners within 1 degree of flat produce no wedge.
FLAT_WEDGE_TOL = math.radians(1.0)

# Wall endpoints within 1 mm are treated as a shared corner.
APEX_SNAP = 1e-3

DEFAULT_CELL_SIZE = 10.0

# Below this surface count a vectorized linear scan beats the grid.
GRID_MIN_SURFACES = 32


class MapError(ValueError):
    """Base error for digital-map problems."""


class MapValidationError(MapError):
    """An element of the map violates an invariant."""


@dataclass(frozen=True)
class Material:
    """Lossless dielectric wall material."""

    eps: float  # relative permittivity, > 1
    sigma_h: float  # surface height standard deviation, meters


@dataclass(frozen=True, eq=False)
class Surface:
    """Vertical wall segment: 2D endpoints, height, material reference."""

    id: int
    p1: np.ndarray
    p2: np.ndarray
    height: float
    material_id: int


@dataclass(frozen=True)
class RetParams:
    """Radiative-energy-transfer scattering parameters of a tree."""

    beamwidth: float  # forward-lobe 3 dB width, radians
    forward_ratio: float  # forward-scattered fraction of total, [0, 1]
    absorption: float  # absorbed energy fraction, [0, 1]


@dataclass(frozen=True, eq=False)
class Tree:
    """Cylindrical canopy scatterer."""

    id: int
    center: np.ndarray
    radius: float
    height: float
    ret: RetParams


@dataclass(frozen=True, eq=False)
class Wedge:
    """Diffracting corner shared by two walls.

    The exterior (air) region spans ``n * pi`` radians from the zero face
    to the n face.  ``e0`` is the unit direction of the zero face away from
    the apex; ``sense`` is +1 when the exterior opens counterclockwise from
    ``e0`` and -1 when clockwise.
    """

    id: int
    apex: np.ndarray
    zero_face_surface: int
    n_face_surface: int
    n: float
    height: float
    e0: np.ndarray
    sense: int

    def exterior_angle_from_zero_face(self, point: np.ndarray) -> float:
        """Angle of ``point`` about the apex, measured into the exterior
        region from the zero face.  In [0, 2*pi); valid directions for
        diffraction satisfy angle <= n*pi."""
        v = np.asarray(point, dtype=float)[:2] - self.apex
        ang = math.atan2(self.e0[0] * v[1] - self.e0[1] * v[0], self.e0 @ v)
        ccw = ang % (2.0 * math.pi)
        if self.sense < 0:
            ccw = (2.0 * math.pi - ccw) % (2.0 * math.pi)
        return ccw


class _GridIndex:
    """Uniform grid over the map bounds with per-cell segment lists."""

    def __init__(self, bounds, p1, p2, cell_size=DEFAULT_CELL_SIZE):
        self.xmin, self.ymin, self.xmax, self.ymax = bounds
        self.cell = float(cell_size)
        self.nx = max(1, int(math.ceil((self.xmax - self.xmin) / self.cell)))
        self.ny = max(1, int(math.ceil((self.ymax - self.ymin) / self.cell)))
        cells = defaultdict(list)
        for idx in range(len(p1)):
            x0 = min(p1[idx, 0], p2[idx, 0])
            x1 = max(p1[idx, 0], p2[idx, 0])
            y0 = min(p1[idx, 1], p2[idx, 1])
            y1 = max(p1[idx, 1], p2[idx, 1])
            ix0 = self._clampx(int((x0 - self.xmin) / self.cell))
            ix1 = self._clampx(int((x1 - self.xmin) / self.cell))
            iy0 = self._clampy(int((y0 - self.ymin) / self.cell))
            iy1 = self._clampy(int((y1 - self.ymin) / self.cell))
            for ix in range(ix0, ix1 + 1):
                for iy in range(iy0, iy1 + 1):
                    cells[(ix, iy)].append(idx)
        self.cells = {k: np.asarray(v, dtype=np.intp) for k, v in cells.items()}
        self._empty = np.empty(0, dtype=np.intp)

    def _clampx(self, ix):
        return min(max(ix, 0), self.nx - 1)

    def _clampy(self, iy):
        return min(max(iy, 0), self.ny - 1)

    def candidates(self, ix, iy):
        return self.cells.get((ix, iy), self._empty)


class DigitalMap:
    """Validated, immutable 2.5D map with precomputed query arrays."""

    def __init__(self, surfaces, trees, materials, ground_material_id, bounds,
                 cell_size=DEFAULT_CELL_SIZE):
        self.surfaces = tuple(surfaces)
        self.trees = tuple(trees)
        self.materials = dict(materials)
        self.ground_material_id = ground_material_id
        self.bounds = tuple(float(b) for b in bounds)
        _validate(self)

        n = len(self.surfaces)
        self._p1 = np.array([s.p1 for s in self.surfaces], dtype=float).reshape(n, 2)
        self._p2 = np.array([s.p2 for s in self.surfaces], dtype=float).reshape(n, 2)
        self._edge = self._p2 - self._p1
        lengths = np.linalg.norm(self._edge, axis=1) if n else np.empty(0)
        with np.errstate(invalid="ignore", divide="ignore"):
            tang = self._edge / lengths[:, None] if n else self._edge
        # Unit normal: left of p1->p2.
        self._normal = np.stack([-tang[:, 1], tang[:, 0]], axis=1) if n else np.empty((0, 2))
        self._ids = np.array([s.id for s in self.surfaces], dtype=np.intp)
        self._heights = np.array([s.height for s in self.surfaces], dtype=float)
        self._id_to_index = {s.id: i for i, s in enumerate(self.surfaces)}
        self.wedges = _derive_wedges(self.surfaces)
        self._wedge_by_id = {w.id: w for w in self.wedges}
        self._tree_by_id = {t.id: t for t in self.trees}
        self.use_grid = n >= GRID_MIN_SURFACES
        self._grid = _GridIndex(self.bounds, self._p1, self._p2, cell_size) if n else None

    # -- lookups ---------------------------------------------------------

    def surface(self, sid: int) -> Surface:
        return self.surfaces[self._id_to_index[sid]]

    def wedge(self, wid: int) -> Wedge:
        return self._wedge_by_id[wid]

    def tree(self, tid: int) -> Tree:
        return self._tree_by_id[tid]

    def material_of(self, sid: int) -> Material:
        return self.materials[self.surface(sid).material_id]

    @property
    def ground_material(self) -> Material:
        return self.materials[self.ground_material_id]

    @property
    def surface_endpoints(self) -> np.ndarray:
        """All segment endpoints, (2n, 2), interleaved p1/p2 per surface."""
        out = np.empty((2 * len(self.surfaces), 2))
        out[0::2] = self._p1
        out[1::2] = self._p2
        return out

    def surface_normal(self, sid: int) -> np.ndarray:
        return self._normal[self._id_to_index[sid]]

    def surface_height(self, sid: int) -> float:
        return self._heights[self._id_to_index[sid]]

    # -- ray queries -----------------------------------------------------

    def _hit_params(self, origin, direction, idx):
        """Ray/segment intersection params (t, u) for segment indices
        ``idx``; invalid entries get t = +inf."""
        p1 = self._p1[idx]
        e = self._edge[idx]
        w = p1 - origin
        denom = direction[0] * e[:, 1] - direction[1] * e[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]) / denom
            u = (w[:, 0] * direction[1] - w[:, 1] * direction[0]) / denom
        bad = (denom == 0.0) | ~(t > SELF_HIT_EPS) | ~(u >= 0.0) | ~(u < 1.0)
        t = np.where(bad, np.inf, t)
        return t, u

    def _nearest_linear(self, origin, direction, exclude_idx, best_t, best_idx):
        idx = np.arange(len(self.surfaces), dtype=np.intp)
        t, _ = self._hit_params(origin, direction, idx)
        if exclude_idx is not None:
            t[exclude_idx] = np.inf
        return _lex_best(t, idx, self._ids, best_t, best_idx)

    def _nearest_grid(self, origin, direction, exclude_idx, best_t, best_idx):
        g = self._grid
        ox, oy = float(origin[0]), float(origin[1])
        dx, dy = float(direction[0]), float(direction[1])
        # Clip the ray to the map bounds (slab method).
        t0, t1 = 0.0, np.inf
        for o, d, lo, hi in ((ox, dx, g.xmin, g.xmax), (oy, dy, g.ymin, g.ymax)):
            if d == 0.0:
                if o < lo or o > hi:
                    return best_t, best_idx
            else:
                ta = (lo - o) / d
                tb = (hi - o) / d
                if ta > tb:
                    ta, tb = tb, ta
                t0 = max(t0, ta)
                t1 = min(t1, tb)
        if t1 < t0:
            return best_t, best_idx
        t_enter = t0
        px = ox + (t_enter + 1e-12) * dx
        py = oy + (t_enter + 1e-12) * dy
        ix = g._clampx(int((px - g.xmin) / g.cell))
        iy = g._clampy(int((py - g.ymin) / g.cell))
        step_x = 1 if dx > 0 else (-1 if dx < 0 else 0)
        step_y = 1 if dy > 0 else (-1 if dy < 0 else 0)
        if dx != 0.0:
            nxt = g.xmin + (ix + (1 if step_x > 0 else 0)) * g.cell
            tmax_x = (nxt - ox) / dx
            tdel_x = g.cell / abs(dx)
        else:
            tmax_x, tdel_x = np.inf, np.inf
        if dy != 0.0:
            nxt = g.ymin + (iy + (1 if step_y > 0 else 0)) * g.cell
            tmax_y = (nxt - oy) / dy
            tdel_y = g.cell / abs(dy)
        else:
            tmax_y, tdel_y = np.inf, np.inf
        while True:
            t_exit = min(tmax_x, tmax_y, t1)
            cand = g.candidates(ix, iy)
            if len(cand):
                t, _ = self._hit_params(origin, direction, cand)
                if exclude_idx is not None:
                    t = np.where(cand == exclude_idx, np.inf, t)
                best_t, best_idx = _lex_best(t, cand, self._ids, best_t, best_idx)
            if best_t <= t_exit or t_exit >= t1:
                return best_t, best_idx
            if tmax_x < tmax_y:
                ix += step_x
                if ix < 0 or ix >= g.nx:
                    return best_t, best_idx
                tmax_x += tdel_x
            else:
                iy += step_y
                if iy < 0 or iy >= g.ny:
                    return best_t, best_idx
                tmax_y += tdel_y

    def nearest_hit(self, origin, direction, exclude=None, seed_surface=None,
                    force_linear=False, force_grid=False):
        """Nearest surface hit along a ray.

        ``exclude`` skips the surface id the ray departs from.
        ``seed_surface`` is a surface id expected to be hit (warm start);
        its intersection is used as an upper bound to prune the search and
        never changes the result.

        Returns ``(surface_id, t, point)`` or ``None``.
        """
        if not self.surfaces:
            return None
        origin = np.asarray(origin, dtype=float)
        direction = np.asarray(direction, dtype=float)
        exclude_idx = self._id_to_index[exclude] if exclude is not None else None
        best_t, best_idx = np.inf, -1
        if seed_surface is not None:
            seed_idx = self._id_to_index[seed_surface]
            if seed_idx != exclude_idx:
                idx = np.array([seed_idx], dtype=np.intp)
                t, _ = self._hit_params(origin, direction, idx)
                if np.isfinite(t[0]):
                    best_t, best_idx = float(t[0]), seed_idx
        use_grid = force_grid or (self.use_grid and not force_linear)
        if use_grid and self._grid is not None:
            best_t, best_idx = self._nearest_grid(origin, direction, exclude_idx,
                                                  best_t, best_idx)
        else:
            best_t, best_idx = self._nearest_linear(origin, direction, exclude_idx,
                                                    best_t, best_idx)
        if best_idx < 0 or not np.isfinite(best_t):
            return None
        return int(self._ids[best_idx]), float(best_t), origin + best_t * direction

    def segment_blocked(self, a, b, exclude_ids=()) -> bool:
        """True iff the open segment (a, b) strictly crosses any surface.

        Strict crossing: both the segment parameter and the wall parameter
        lie in the open interval (0, 1), so grazing a wall endpoint or
        touching a wall with the segment's own endpoint does not block.
        """
        if not self.surfaces:
            return False
        a = np.asarray(a, dtype=float)[:2]
        b = np.asarray(b, dtype=float)[:2]
        d = b - a
        w = self._p1 - a
        e = self._edge
        denom = d[0] * e[:, 1] - d[1] * e[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]) / denom
            u = (w[:, 0] * d[1] - w[:, 1] * d[0]) / denom
        hit = (denom != 0.0) & (t > 0.0) & (t < 1.0) & (u > 0.0) & (u < 1.0)
        if exclude_ids:
            for sid in exclude_ids:
                hit[self._id_to_index[sid]] = False
        return bool(hit.any())


def _lex_best(t, idx, ids, best_t, best_idx):
    """Update (best_t, best_idx) with candidates, lexicographic on (t, id)."""
    finite = np.isfinite(t)
    if not finite.any():
        return best_t, best_idx
    tmin = t[finite].min()
    if tmin > best_t:
        return best_t, best_idx
    tie = idx[t == tmin]
    cand = tie[np.argmin(ids[tie])]
    if tmin < best_t or (tmin == best_t and (best_idx < 0 or ids[cand] < ids[best_idx])):
        return tmin, int(cand)
    return best_t, best_idx


# -- module-level operations ------------------------------------------------

def find_intersection_surface(origin, direction, dmap: DigitalMap, exclude=None):
    """Id of the first surface hit by the ray, or None."""
    hit = dmap.nearest_hit(origin, direction, exclude=exclude)
    return hit[0] if hit is not None else None


def find_intersection_point(origin, direction, surface: Surface):
    """Exact ray/segment intersection point, or None on a miss.

    Departing rays do not self-hit: intersection parameters below
    ``SELF_HIT_EPS`` are rejected.
    """
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    e = surface.p2 - surface.p1
    w = surface.p1 - origin
    denom = direction[0] * e[1] - direction[1] * e[0]
    if denom == 0.0:
        return None
    t = (w[0] * e[1] - w[1] * e[0]) / denom
    u = (w[0] * direction[1] - w[1] * direction[0]) / denom
    if t <= SELF_HIT_EPS or u < 0.0 or u >= 1.0:
        return None
    return origin + t * direction


def los_visible(a, b, dmap: DigitalMap) -> bool:
    """True iff no wall strictly crosses the open segment (a, b).

    Trees never block; vegetation attenuates only through the scattering
    path coefficient.
    """
    return not dmap.segment_blocked(a, b)


# -- wedge derivation -------------------------------------------------------

def _derive_wedges(surfaces):
    corners = defaultdict(list)
    for s in surfaces:
        for end in (s.p1, s.p2):
            key = (round(end[0] / APEX_SNAP), round(end[1] / APEX_SNAP))
            corners[key].append((s, np.asarray(end, dtype=float)))
    raw = []
    for group in corners.values():
        if len(group) < 2:
            continue
        group = sorted(group, key=lambda it: it[0].id)
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                s0, apex = group[i]
                sn, _ = group[j]
                if s0.id == sn.id:
                    continue
                e0 = _away_dir(s0, apex)
                en = _away_dir(sn, apex)
                theta = math.acos(min(1.0, max(-1.0, float(e0 @ en))))
                if theta > math.pi - FLAT_WEDGE_TOL:
                    continue
                n = (2.0 * math.pi - theta) / math.pi
                ccw = math.atan2(e0[0] * en[1] - e0[1] * en[0], e0 @ en) % (2.0 * math.pi)
                sense = 1 if ccw > math.pi else -1
                raw.append((apex, s0.id, sn.id, n, min(s0.height, sn.height), e0, sense))
    raw.sort(key=lambda w: (round(w[0][0] / APEX_SNAP), round(w[0][1] / APEX_SNAP),
                            w[1], w[2]))
    return tuple(
        Wedge(id=i, apex=apex, zero_face_surface=z, n_face_surface=nf, n=n,
              height=h, e0=e0, sense=sense)
        for i, (apex, z, nf, n, h, e0, sense) in enumerate(raw)
    )


def _away_dir(surface, apex):
    other = surface.p2 if np.allclose(surface.p1, apex, atol=APEX_SNAP) else surface.p1
    v = np.asarray(other, dtype=float) - apex
    return v / np.linalg.norm(v)


# -- loading & validation ---------------------------------------------------

def _validate(dmap: DigitalMap):
    xmin, ymin, xmax, ymax = dmap.bounds
    if not (xmax > xmin and ymax > ymin):
        raise MapValidationError("degenerate map bounds")
    for mid, m in dmap.materials.items():
        if not m.eps > 1.0:
            raise MapValidationError(f"material {mid}: relative permittivity must be > 1")
        if m.sigma_h < 0.0:
            raise MapValidationError(f"material {mid}: roughness sigma_h must be >= 0")
    if dmap.ground_material_id not in dmap.materials:
        raise MapValidationError(f"unknown ground material {dmap.ground_material_id}")
    seen = set()
    tol = 1e-6
    for s in dmap.surfaces:
        if s.id in seen:
            raise MapValidationError(f"surface {s.id}: duplicate id")
        seen.add(s.id)
        if np.linalg.norm(s.p2 - s.p1) < APEX_SNAP:
            raise MapValidationError(f"surface {s.id}: endpoints coincide")
        if not s.height > 0.0:
            raise MapValidationError(f"surface {s.id}: height must be > 0")
        if s.material_id not in dmap.materials:
            raise MapValidationError(f"surface {s.id}: unknown material {s.material_id}")
        for p in (s.p1, s.p2):
            if not (xmin - tol <= p[0] <= xmax + tol and ymin - tol <= p[1] <= ymax + tol):
                raise MapValidationError(f"surface {s.id}: endpoint outside bounds")
    seen_t = set()
    for t in dmap.trees:
        if t.id in seen_t:
            raise MapValidationError(f"tree {t.id}: duplicate id")
        seen_t.add(t.id)
        if not (t.radius > 0.0 and t.height > 0.0):
            raise MapValidationError(f"tree {t.id}: radius and height must be > 0")
        r = t.ret
        if not (0.0 <= r.forward_ratio <= 1.0 and 0.0 <= r.absorption <= 1.0 and r.beamwidth > 0.0):
            raise MapValidationError(f"tree {t.id}: invalid scattering parameters")
        if not (xmin - tol <= t.center[0] <= xmax + tol and ymin - tol <= t.center[1] <= ymax + tol):
            raise MapValidationError(f"tree {t.id}: center outside bounds")


def map_from_dict(data: dict, cell_size=DEFAULT_CELL_SIZE) -> DigitalMap:
    """Build a DigitalMap from the documented JSON object."""
    try:
        bounds = tuple(data["bounds"])
        materials = {
            int(m["id"]): Material(eps=float(m["eps"]), sigma_h=float(m["sigma_h"]))
            for m in data["materials"]
        }
        surfaces = [
            Surface(
                id=int(s["id"]),
                p1=np.asarray(s["p1"], dtype=float),
                p2=np.asarray(s["p2"], dtype=float),
                height=float(s["height"]),
                material_id=int(s["material"]),
            )
            for s in data.get("surfaces", [])
        ]
        trees = [
            Tree(
                id=int(t["id"]),
                center=np.asarray(t["center"], dtype=float),
                radius=float(t["radius"]),
                height=float(t["height"]),
                ret=RetParams(
                    beamwidth=math.radians(float(t["beta_deg"])),
                    forward_ratio=float(t["alpha"]),
                    absorption=float(t["chi"]),
                ),
            )
            for t in data.get("trees", [])
        ]
        ground = int(data["ground_material"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MapError(f"malformed map object: {exc}") from exc
    return DigitalMap(surfaces, trees, materials, ground, bounds, cell_size)


def load_map(path, cell_size=DEFAULT_CELL_SIZE) -> DigitalMap:
    """Load and validate a map JSON file.

    Angles are degrees in the file and radians internally; lengths are
    meters throughout.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise MapError(f"cannot read map: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MapError(f"{path}: invalid JSON: {exc}") from exc
    return map_from_dict(data, cell_size)
