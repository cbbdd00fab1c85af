"""Shooting-bouncing-rays tracer with intersection reuse, plus path
association, diffraction/scattering candidate collection, and the
vertical-plane lift from 2D traced paths to 3D propagation paths.

The tracer launches rays on a uniform azimuth grid from the BS, bounces
them specularly off wall segments, and later matches user positions to
the recorded free segments by a distance-dependent capture radius.
Captured surface sequences are re-solved exactly by the method of images
so emitted paths carry grid-free vertices and lengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import DigitalMap, Material, los_visible

# Escaping free segments are clipped to this multiple of the map diagonal
# for the capture test; beyond it no user position can exist.
_ESCAPE_MARGIN = 2.0


class PathKind(Enum):
    LOS = "los"
    REFLECTION = "reflection"
    DIFFRACTION = "diffraction"
    SCATTERING = "scattering"


@dataclass(frozen=True)
class TracerConfig:
    """Ray-launch parameters for one BS."""

    bs_position: tuple  # (x, y, h_bs) meters
    max_bounce: int = 3
    angular_spacing: float = math.radians(0.1)
    capture_slack: float = 2.0
    angle_offset: float = 0.0  # rotates the launch grid; east is 0
    refine_depth: int = 12  # adaptive bisection depth at sequence boundaries

    def __post_init__(self):
        if self.max_bounce < 1:
            raise ValueError("max_bounce must be >= 1")
        if not (0.0 < self.angular_spacing <= math.radians(1.0)):
            raise ValueError("angular_spacing must be in (0, 1 deg]")
        if self.capture_slack < 1.0:
            raise ValueError("capture_slack must be >= 1")
        if self.refine_depth < 0:
            raise ValueError("refine_depth must be >= 0")

    @property
    def bs_xy(self):
        return np.asarray(self.bs_position[:2], dtype=float)

    @property
    def bs_height(self):
        return float(self.bs_position[2])


@dataclass(eq=False)
class RayRecord:
    """One launched ray: bounce vertices and the surfaces hit, in order.

    ``final_direction`` continues the ray past the last vertex; the free
    segment in that direction extends ``final_limit`` meters (inf when the
    ray escapes the geometry).
    """

    launch_angle: float
    vertices: np.ndarray  # (k+1, 2), row 0 is the BS
    surface_ids: tuple
    final_direction: np.ndarray
    final_limit: float

    @property
    def escaped(self) -> bool:
        return math.isinf(self.final_limit)


@dataclass(eq=False)
class PropagationPath:
    """A typed multipath component from BS to UE.

    2D-stage reflection/LoS paths carry ``vertices2d``; the lift fills
    ``vertices3d`` and ``d_total``.  Diffraction and scattering paths are
    built directly in 3D.
    """

    kind: PathKind
    surface_ids: tuple = ()
    wedge_id: int | None = None
    tree_id: int | None = None
    vertices2d: np.ndarray | None = None
    vertices3d: np.ndarray | None = None
    d_total: float = 0.0
    ground_bounce: bool = False
    ground_angle: float | None = None
    wall_vertex_indices: tuple = ()
    r1: float | None = None
    r2: float | None = None

    @property
    def order(self) -> int:
        return len(self.surface_ids)

    @property
    def signature(self) -> tuple:
        return (self.kind.value, self.surface_ids, self.wedge_id, self.tree_id,
                self.ground_bounce)


# -- FSBR trace -------------------------------------------------------------

def _trace_one(dmap: DigitalMap, cfg: TracerConfig, psi: float,
               seed_surface=None) -> RayRecord:
    """Trace a single ray at launch angle ``psi``."""
    b = cfg.bs_xy
    direction = np.array([math.cos(psi), math.sin(psi)])
    origin = b
    exclude = None
    vertices = [b.copy()]
    seq = []
    final_limit = np.inf
    for bounce in range(cfg.max_bounce + 1):
        seed = seed_surface if bounce == 0 else None
        hit = dmap.nearest_hit(origin, direction, exclude=exclude,
                               seed_surface=seed)
        if hit is None:
            break
        sid, t, point = hit
        if bounce == cfg.max_bounce:
            # Only bounds the last free segment; no further reflection.
            final_limit = t
            break
        vertices.append(point)
        seq.append(sid)
        n = dmap.surface_normal(sid)
        direction = direction - 2.0 * float(direction @ n) * n
        origin = point
        exclude = sid
    return RayRecord(
        launch_angle=psi,
        vertices=np.asarray(vertices),
        surface_ids=tuple(seq),
        final_direction=direction,
        final_limit=final_limit,
    )


def _first_sid(rec: RayRecord):
    return rec.surface_ids[0] if rec.surface_ids else None


def fsbr_trace(dmap: DigitalMap, cfg: TracerConfig, warm_start: bool = True):
    """Trace the full azimuth grid from the BS, up to ``max_bounce`` hits.

    With ``warm_start`` the previous ray's first surface is retried and its
    hit used as an upper bound when searching for the nearest surface; the
    output is identical to the exhaustive variant by construction.

    Where adjacent grid rays disagree on their bounce sequence, the
    interval is bisected recursively (down to ``angular_spacing /
    2**refine_depth``) so narrow reflection tubes between grid rays still
    receive a ray; without this, sequences whose angular window is
    thinner than the grid would never be captured.
    """
    g_count = int(math.ceil(2.0 * math.pi / cfg.angular_spacing))
    records = []
    prev_first = None
    for g in range(g_count):
        psi = cfg.angle_offset + g * cfg.angular_spacing
        rec = _trace_one(dmap, cfg, psi,
                         seed_surface=prev_first if warm_start else None)
        records.append(rec)
        prev_first = _first_sid(rec)

    min_width = cfg.angular_spacing / (2.0 ** cfg.refine_depth)
    refined = []
    for g in range(g_count):
        lo = records[g]
        hi = records[(g + 1) % g_count]
        hi_psi = cfg.angle_offset + (g + 1) * cfg.angular_spacing
        _refine_interval(dmap, cfg, warm_start, lo, lo.launch_angle,
                         hi, hi_psi, min_width, refined)
    if refined:
        records.extend(refined)
        records.sort(key=lambda r: r.launch_angle)
    return records


def _refine_interval(dmap, cfg, warm_start, lo, lo_psi, hi, hi_psi,
                     min_width, out):
    """Bisect [lo_psi, hi_psi] while the endpoint sequences differ."""
    if lo.surface_ids == hi.surface_ids or hi_psi - lo_psi <= min_width:
        return
    mid_psi = 0.5 * (lo_psi + hi_psi)
    mid = _trace_one(dmap, cfg, mid_psi,
                     seed_surface=_first_sid(lo) if warm_start else None)
    out.append(mid)
    _refine_interval(dmap, cfg, warm_start, lo, lo_psi, mid, mid_psi,
                     min_width, out)
    _refine_interval(dmap, cfg, warm_start, mid, mid_psi, hi, hi_psi,
                     min_width, out)


# -- capture / association --------------------------------------------------

class CaptureIndex:
    """Flattened free segments of a traced ray set, for vectorized capture
    tests against many UE positions."""

    def __init__(self, records, dmap: DigitalMap):
        diag = math.hypot(dmap.bounds[2] - dmap.bounds[0],
                          dmap.bounds[3] - dmap.bounds[1])
        cap = _ESCAPE_MARGIN * diag
        starts, dirs, lens, cums, seqs = [], [], [], [], []
        for rec in records:
            k = len(rec.surface_ids)
            if k == 0:
                continue
            cum = 0.0
            verts = rec.vertices
            for j in range(k):
                seg = verts[j + 1] - verts[j]
                seg_len = float(np.linalg.norm(seg))
                if j >= 1:
                    starts.append(verts[j])
                    dirs.append(seg / seg_len)
                    lens.append(seg_len)
                    cums.append(cum)
                    seqs.append(rec.surface_ids[:j])
                cum += seg_len
            starts.append(verts[k])
            dirs.append(rec.final_direction)
            lens.append(min(rec.final_limit, cap))
            cums.append(cum)
            seqs.append(rec.surface_ids)
        m = len(starts)
        self.start = np.asarray(starts).reshape(m, 2)
        self.direction = np.asarray(dirs).reshape(m, 2)
        self.length = np.asarray(lens, dtype=float)
        self.cum = np.asarray(cums, dtype=float)
        self.seqs = seqs

    def captured_sequences(self, ue_xy, angular_spacing, slack):
        """Unique surface sequences whose free segment passes within the
        capture radius of the UE."""
        if not self.seqs:
            return []
        w = ue_xy[None, :] - self.start
        proj = np.einsum("ij,ij->i", w, self.direction)
        perp = np.abs(self.direction[:, 0] * w[:, 1] - self.direction[:, 1] * w[:, 0])
        d_path = self.cum + proj
        r_c = slack * d_path * angular_spacing / 2.0
        mask = (d_path > 0.0) & (proj >= -r_c) & (proj <= self.length + r_c) & (perp < r_c)
        unique = []
        seen = set()
        for i in np.flatnonzero(mask):
            s = self.seqs[i]
            if s not in seen:
                seen.add(s)
                unique.append(s)
        return unique


def _mirror(point, p1, normal):
    return point - 2.0 * float((point - p1) @ normal) * normal


def image_solve(dmap: DigitalMap, bs_xy, ue_xy, seq):
    """Exact specular path BS -> walls in ``seq`` -> UE by the method of
    images, or None when the sequence is not geometrically valid.

    Validity: every unfolded reflection point lies on its segment, the
    chain runs source-side throughout, and every free sub-segment is
    unobstructed.
    """
    k = len(seq)
    images = [np.asarray(bs_xy, dtype=float)]
    for sid in seq:
        s = dmap.surface(sid)
        images.append(_mirror(images[-1], s.p1, dmap.surface_normal(sid)))
    q = np.asarray(ue_xy, dtype=float)
    pts = []
    for j in range(k, 0, -1):
        sid = seq[j - 1]
        s = dmap.surface(sid)
        d = images[j] - q
        e = s.p2 - s.p1
        w = s.p1 - q
        denom = d[0] * e[1] - d[1] * e[0]
        if denom == 0.0:
            return None
        t = (w[0] * e[1] - w[1] * e[0]) / denom
        u = (w[0] * d[1] - w[1] * d[0]) / denom
        if not (0.0 < t < 1.0 and 0.0 <= u <= 1.0):
            return None
        q = q + t * d
        pts.append(q)
    verts = [np.asarray(bs_xy, dtype=float)] + pts[::-1] + [np.asarray(ue_xy, dtype=float)]
    # Visibility along every free sub-segment, walls at the endpoints excluded.
    for i in range(k + 1):
        excl = []
        if i > 0:
            excl.append(seq[i - 1])
        if i < k:
            excl.append(seq[i])
        if dmap.segment_blocked(verts[i], verts[i + 1], exclude_ids=excl):
            return None
    return np.asarray(verts)


def _grazing_surfaces(dmap: DigitalMap, a, b, delta: float):
    """Surface ids with an endpoint within ``delta`` of segment (a, b)."""
    ends = dmap.surface_endpoints  # (2m, 2), interleaved p1/p2
    e = b - a
    ee = float(e @ e)
    if ee < 1e-24:
        return []
    w = ends - a[None, :]
    t = np.clip((w @ e) / ee, 0.0, 1.0)
    d2 = np.einsum("ij,ij->i", w - t[:, None] * e[None, :],
                   w - t[:, None] * e[None, :])
    near = np.flatnonzero(d2 < delta * delta)
    return sorted({dmap.surfaces[i // 2].id for i in near})


def associate_paths(records, ue, dmap: DigitalMap, cfg: TracerConfig,
                    index: CaptureIndex | None = None):
    """Reflection paths (2D stage) reaching the UE position.

    Captured candidates are deduplicated by surface sequence and re-solved
    exactly; candidates whose image solution fails the on-segment or
    visibility checks are dropped.

    Captured sequences are then repaired: every one-bounce deletion is
    retried, and for each valid path every surface whose endpoint grazes
    a free sub-segment is retried as an inserted bounce.  This recovers
    reflection tubes narrower than the launch grid that sit between rays
    of an identical, shorter sequence (grid refinement cannot see those).
    """
    if index is None:
        index = CaptureIndex(records, dmap)
    ue_xy = np.asarray(ue, dtype=float)[:2]
    queue = list(index.captured_sequences(ue_xy, cfg.angular_spacing,
                                          cfg.capture_slack))
    seen = set(queue)
    paths = []
    while queue:
        seq = queue.pop()
        for i in range(len(seq)):  # deletions, tried even when seq fails
            cand = seq[:i] + seq[i + 1:]
            if cand and cand not in seen and _no_repeats(cand):
                seen.add(cand)
                queue.append(cand)
        verts = image_solve(dmap, cfg.bs_xy, ue_xy, seq)
        if verts is None:
            continue
        paths.append(PropagationPath(kind=PathKind.REFLECTION, surface_ids=seq,
                                     vertices2d=verts))
        if len(seq) >= cfg.max_bounce:
            continue
        cum = 0.0
        for i in range(len(verts) - 1):
            a, b = verts[i], verts[i + 1]
            cum += float(np.linalg.norm(b - a))
            delta = cfg.capture_slack * cfg.angular_spacing * cum
            for sid in _grazing_surfaces(dmap, a, b, delta):
                cand = seq[:i] + (sid,) + seq[i:]
                if cand not in seen and _no_repeats(cand):
                    seen.add(cand)
                    queue.append(cand)
    paths.sort(key=lambda p: p.surface_ids)
    return paths


def _no_repeats(seq) -> bool:
    return all(a != b for a, b in zip(seq, seq[1:]))


# -- diffraction & scattering candidates ------------------------------------

def bs_visible_wedges(dmap: DigitalMap, bs):
    """Wedge ids whose apex has line of sight to the BS (cacheable per BS)."""
    bs_xy = np.asarray(bs, dtype=float)[:2]
    return tuple(w.id for w in dmap.wedges if los_visible(bs_xy, w.apex, dmap))


def bs_visible_trees(dmap: DigitalMap, bs):
    bs_xy = np.asarray(bs, dtype=float)[:2]
    return tuple(t.id for t in dmap.trees if los_visible(bs_xy, t.center, dmap))


def collect_diffraction_candidates(dmap: DigitalMap, bs, ue, visible_wedges=None):
    """Single-bounce wedge diffraction paths for one UE position.

    A wedge contributes only when its apex sees both ends and the UE sits
    beyond the incident shadow boundary of the direct BS-to-apex ray (deep
    line-of-sight users get no diffraction ray).
    """
    bs = np.asarray(bs, dtype=float)
    ue = np.asarray(ue, dtype=float)
    bs_xy, ue_xy = bs[:2], ue[:2]
    if visible_wedges is None:
        visible_wedges = bs_visible_wedges(dmap, bs)
    paths = []
    for wid in visible_wedges:
        w = dmap.wedge(wid)
        phi_p = w.exterior_angle_from_zero_face(bs_xy)
        phi = w.exterior_angle_from_zero_face(ue_xy)
        npi = w.n * math.pi
        tol = 1e-9
        if phi_p > npi + tol or phi > npi + tol:
            continue
        if abs(phi - phi_p) <= math.pi:
            continue  # UE within the LoS region of the source about this wedge
        if not los_visible(ue_xy, w.apex, dmap):
            continue
        d1 = float(np.linalg.norm(w.apex - bs_xy))
        d2 = float(np.linalg.norm(ue_xy - w.apex))
        if d1 < 1e-9 or d2 < 1e-9:
            continue
        frac = d1 / (d1 + d2)
        apex_h = min(bs[2] + (ue[2] - bs[2]) * frac, w.height)
        verts = np.array([bs, [w.apex[0], w.apex[1], apex_h], ue])
        d_total = float(np.linalg.norm(verts[1] - verts[0]) +
                        np.linalg.norm(verts[2] - verts[1]))
        paths.append(PropagationPath(kind=PathKind.DIFFRACTION, wedge_id=wid,
                                     vertices3d=verts, d_total=d_total))
    return paths


def collect_scattering_candidates(dmap: DigitalMap, bs, ue, visible_trees=None):
    """First-order tree scattering paths: one per tree seeing both ends."""
    bs = np.asarray(bs, dtype=float)
    ue = np.asarray(ue, dtype=float)
    bs_xy, ue_xy = bs[:2], ue[:2]
    if visible_trees is None:
        visible_trees = bs_visible_trees(dmap, bs)
    paths = []
    for tid in visible_trees:
        t = dmap.tree(tid)
        if not los_visible(ue_xy, t.center, dmap):
            continue
        d1 = float(np.linalg.norm(t.center - bs_xy))
        d2 = float(np.linalg.norm(ue_xy - t.center))
        if d1 < 1e-9 or d2 < 1e-9:
            continue
        frac = d1 / (d1 + d2)
        ray_h = bs[2] + (ue[2] - bs[2]) * frac
        center_h = min(t.height / 2.0, ray_h)
        verts = np.array([bs, [t.center[0], t.center[1], center_h], ue])
        r1 = float(np.linalg.norm(verts[1] - verts[0]))
        r2 = float(np.linalg.norm(verts[2] - verts[1]))
        paths.append(PropagationPath(kind=PathKind.SCATTERING, tree_id=tid,
                                     vertices3d=verts, d_total=r1 + r2,
                                     r1=r1, r2=r2))
    return paths


# -- vertical lift ----------------------------------------------------------

def lift_to_3d(path2d: PropagationPath, bs_height: float, ue_height: float,
               ground: Material, dmap: DigitalMap):
    """Lift a 2D LoS/reflection path into 3D.

    Emits the direct lift (straight vertical profile BS -> UE) and, when
    the single ground-touch point falls strictly inside a free segment, a
    ground-bounce variant with the UE imaged below ground.  Either lift is
    dropped when a wall interaction point would sit above its wall.
    """
    pts = np.asarray(path2d.vertices2d, dtype=float)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    big_d = float(cum[-1])
    out = []
    wall_count = len(path2d.surface_ids)

    if big_d < 1e-9:
        return out

    # Direct lift.
    z = bs_height + (ue_height - bs_height) * cum / big_d
    if _walls_clear(path2d, z, dmap, wall_count):
        verts3 = np.column_stack([pts, z])
        out.append(PropagationPath(
            kind=path2d.kind, surface_ids=path2d.surface_ids,
            vertices2d=pts, vertices3d=verts3,
            d_total=math.hypot(big_d, bs_height - ue_height),
            wall_vertex_indices=tuple(range(1, 1 + wall_count)),
        ))

    # Ground-bounce variant: image the UE below ground.
    drop = bs_height + ue_height
    s_g = big_d * bs_height / drop
    seg_idx = None
    for j in range(len(seg)):
        if cum[j] + 1e-9 < s_g < cum[j + 1] - 1e-9:
            seg_idx = j
            break
    if seg_idx is not None:
        z_im = bs_height - drop * cum / big_d
        z_abs = np.abs(z_im)
        if _walls_clear(path2d, z_abs, dmap, wall_count):
            frac = (s_g - cum[seg_idx]) / seg[seg_idx]
            gpt = pts[seg_idx] + frac * (pts[seg_idx + 1] - pts[seg_idx])
            verts2 = np.vstack([pts[:seg_idx + 1], gpt, pts[seg_idx + 1:]])
            z3 = np.concatenate([z_abs[:seg_idx + 1], [0.0], z_abs[seg_idx + 1:]])
            wall_idx = tuple(i + 1 if i + 1 <= seg_idx else i + 2
                             for i in range(wall_count))
            out.append(PropagationPath(
                kind=path2d.kind, surface_ids=path2d.surface_ids,
                vertices2d=pts, vertices3d=np.column_stack([verts2, z3]),
                d_total=math.hypot(big_d, drop),
                ground_bounce=True,
                ground_angle=math.atan2(drop, big_d),
                wall_vertex_indices=wall_idx,
            ))
    return out


def _walls_clear(path2d, z, dmap, wall_count):
    for i in range(wall_count):
        sid = path2d.surface_ids[i]
        if z[i + 1] > dmap.surface_height(sid) + 1e-9:
            return False
    return True
