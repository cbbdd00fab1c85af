"""Brute-force reference implementations for validation: exhaustive
image-method path enumeration and defining-integral quadrature for the
diffraction transition function.

These stay independent of the production tracer and EM code paths; they
are shipped (size-guarded) so custom maps can be validated too.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .geometry import DigitalMap

SEQUENCE_GUARD = 10_000_000


class OracleSizeError(ValueError):
    """The exhaustive enumeration would exceed the size guard."""


@dataclass(frozen=True, eq=False)
class ImageSolution:
    """One valid specular path found by successive source imaging."""

    surface_sequence: tuple
    vertices: np.ndarray  # (order + 2, 2) including BS and UE
    valid: bool

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1).sum())


def _mirror_rows(points: np.ndarray, p1, normal) -> np.ndarray:
    return points - 2.0 * ((points - p1) @ normal)[:, None] * normal[None, :]


def enumerate_image_paths(dmap: DigitalMap, bs, ue, max_order: int):
    """All valid reflection paths up to ``max_order`` over every ordered
    surface sequence (consecutive repeats excluded).

    Each sequence is solved by reflecting the source image across the
    sequence and intersecting backward from the UE; a solution is valid
    when every unfold point lies on its segment, sits between the previous
    point and the image, and every free sub-segment is unobstructed.
    """
    b = len(dmap.surfaces)
    if b == 0 or max_order < 1:
        return []
    total = sum(b * (b - 1) ** (o - 1) for o in range(1, max_order + 1))
    if total > SEQUENCE_GUARD:
        raise OracleSizeError(
            f"{total} candidate sequences exceed the guard of {SEQUENCE_GUARD}")
    bs = np.asarray(bs, dtype=float)[:2]
    ue = np.asarray(ue, dtype=float)[:2]
    p1 = np.array([s.p1 for s in dmap.surfaces], dtype=float)
    p2 = np.array([s.p2 for s in dmap.surfaces], dtype=float)
    edges = p2 - p1
    lengths = np.linalg.norm(edges, axis=1)
    normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1) / lengths[:, None]
    ids = [s.id for s in dmap.surfaces]

    solutions = []
    # Image tree level by level: seqs holds segment-index tuples, images the
    # corresponding source images.
    seqs = [()]
    images = bs[None, :].copy()
    for order in range(1, max_order + 1):
        new_seqs = []
        rows = []
        for si, img in zip(seqs, images):
            for j in range(b):
                if si and si[-1] == j:
                    continue
                new_seqs.append(si + (j,))
                rows.append(img)
        if not new_seqs:
            break
        rows = np.asarray(rows)
        last = np.array([s[-1] for s in new_seqs])
        images = rows - 2.0 * np.einsum(
            "ij,ij->i", rows - p1[last], normals[last])[:, None] * normals[last]
        seqs = new_seqs
        solutions.extend(_solve_level(dmap, bs, ue, seqs, p1, edges, normals, ids))
    return solutions


def _solve_level(dmap, bs, ue, seqs, p1, edges, normals, ids):
    """Vectorized backward pass for all sequences of one order."""
    order = len(seqs[0])
    m = len(seqs)
    seq_arr = np.asarray(seqs)  # (m, order)
    # Recompute the image chain per backward step (images after j bounces).
    image_chain = [np.broadcast_to(bs, (m, 2)).copy()]
    for j in range(order):
        idx = seq_arr[:, j]
        prev = image_chain[-1]
        image_chain.append(_mirror_level(prev, p1[idx], normals[idx]))
    q = np.broadcast_to(ue, (m, 2)).copy()
    alive = np.ones(m, dtype=bool)
    points = np.zeros((m, order, 2))
    for j in range(order, 0, -1):
        idx = seq_arr[:, j - 1]
        img = image_chain[j]
        d = img - q
        e = edges[idx]
        w = p1[idx] - q
        denom = d[:, 0] * e[:, 1] - d[:, 1] * e[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]) / denom
            u = (w[:, 0] * d[:, 1] - w[:, 1] * d[:, 0]) / denom
        ok = (denom != 0.0) & (t > 0.0) & (t < 1.0) & (u >= 0.0) & (u <= 1.0)
        alive &= ok
        t = np.where(ok, t, 0.0)  # dead rows carry NaN t
        q = np.where(ok[:, None], q + t[:, None] * d, q)
        points[:, j - 1, :] = q
    out = []
    for i in np.flatnonzero(alive):
        seq_idx = seqs[i]
        verts = np.vstack([bs[None, :], points[i], ue[None, :]])
        if _chain_clear(dmap, verts, [ids[j] for j in seq_idx]):
            out.append(ImageSolution(
                surface_sequence=tuple(ids[j] for j in seq_idx),
                vertices=verts, valid=True))
    return out


def _mirror_level(points, p1_rows, normal_rows):
    return points - 2.0 * np.einsum(
        "ij,ij->i", points - p1_rows, normal_rows)[:, None] * normal_rows


def _chain_clear(dmap, verts, seq_ids):
    k = len(seq_ids)
    for i in range(k + 1):
        excl = []
        if i > 0:
            excl.append(seq_ids[i - 1])
        if i < k:
            excl.append(seq_ids[i])
        if dmap.segment_blocked(verts[i], verts[i + 1], exclude_ids=excl):
            return False
    return True


def transition_integral_quadrature(x: float, abs_tol: float = 1e-10) -> complex:
    """Transition function by adaptive quadrature of the defining Fresnel
    tail integral (independent of the production evaluation route)."""
    if x <= 0.0:
        raise ValueError("argument must be > 0")
    sx = math.sqrt(x)
    re, re_err = quad(lambda t: math.cos(t * t), 0.0, sx,
                      epsabs=abs_tol, limit=500)
    im, im_err = quad(lambda t: -math.sin(t * t), 0.0, sx,
                      epsabs=abs_tol, limit=500)
    if re_err > 1e-8 or im_err > 1e-8:
        raise RuntimeError("quadrature failed to converge")
    head = complex(re, im)
    tail = math.sqrt(math.pi) / 2.0 * cmath.exp(-1j * math.pi / 4.0) - head
    return 2j * sx * cmath.exp(1j * x) * tail
