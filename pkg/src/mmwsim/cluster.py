"""Stochastic intra-cluster expansion of deterministic paths.

Each reflection or scattering path becomes n_S sub-rays: the specular one
keeps zero offsets and the deterministic geometric phase, the diffuse ones
draw exponential delay offsets, Laplacian angular offsets and uniform
phases.  LoS and diffraction paths stay single rays.  Streams are seeded
from the path signature (never the UE position) so nearby users sharing a
physical cluster draw identical offsets.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .em import SPEED_OF_LIGHT, WaveContext
from .tracer import PathKind, PropagationPath


@dataclass(frozen=True)
class ClusterConfig:
    """Intra-cluster spread parameters and the master RNG seed."""

    subray_count: int = 20
    delay_spread: float = 12e-9  # seconds
    azimuth_spread: float = math.radians(10.0)
    elevation_spread: float = math.radians(5.0)
    master_seed: int = 0

    def __post_init__(self):
        if self.subray_count < 1:
            raise ValueError("subray_count must be >= 1")
        if self.delay_spread <= 0.0 or self.azimuth_spread <= 0.0 \
                or self.elevation_spread <= 0.0:
            raise ValueError("spreads must be > 0")


@dataclass(frozen=True)
class SubRay:
    """One resolved multipath component feeding the channel synthesis."""

    gain: complex
    delay: float  # seconds, absolute
    doa: tuple  # (azimuth, elevation) at the BS end, radians
    dod: tuple  # (azimuth, elevation) at the UE end, radians
    doppler: float  # Hz
    parent: tuple  # parent path signature


def seed_for(path: PropagationPath, cfg: ClusterConfig) -> int:
    """Deterministic stream seed from the master seed and path signature."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(cfg.master_seed).encode())
    h.update(repr(path.signature).encode())
    return int.from_bytes(h.digest(), "little")


def _angles_of(vec) -> tuple:
    v = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(v)
    return (math.atan2(v[1], v[0]), math.asin(max(-1.0, min(1.0, v[2] / norm))))


def _unit(az: float, el: float) -> np.ndarray:
    ce = math.cos(el)
    return np.array([ce * math.cos(az), ce * math.sin(az), math.sin(el)])


def _doppler(dod: tuple, velocity, ctx: WaveContext) -> float:
    v = np.asarray(velocity, dtype=float)
    return ctx.carrier_frequency / SPEED_OF_LIGHT * float(_unit(*dod) @ v)


def expand_cluster(path: PropagationPath, base_gain: complex, cfg: ClusterConfig,
                   ue_velocity, ctx: WaveContext):
    """Expand one path into its sub-rays.

    ``base_gain`` is phase-free for reflection/scattering paths (the
    geometric phase is applied here) and fully phased for LoS/diffraction
    paths, which bypass the expansion.
    """
    verts = path.vertices3d
    doa = _angles_of(verts[1] - verts[0])  # BS looks toward its first vertex
    dod = _angles_of(verts[-2] - verts[-1])  # UE looks toward its last vertex
    delay = path.d_total / SPEED_OF_LIGHT
    sig = path.signature

    if path.kind in (PathKind.LOS, PathKind.DIFFRACTION):
        return [SubRay(gain=complex(base_gain), delay=delay, doa=doa, dod=dod,
                       doppler=_doppler(dod, ue_velocity, ctx), parent=sig)]

    n_s = cfg.subray_count
    split = complex(base_gain) / math.sqrt(n_s)
    spec_phase = np.exp(-1j * ctx.wavenumber * path.d_total)
    rays = [SubRay(gain=split * complex(spec_phase), delay=delay, doa=doa, dod=dod,
                   doppler=_doppler(dod, ue_velocity, ctx), parent=sig)]
    if n_s == 1:
        return rays

    rng = np.random.Generator(np.random.PCG64(seed_for(path, cfg)))
    delays = rng.exponential(cfg.delay_spread, n_s - 1)
    laplace_scale_az = cfg.azimuth_spread / math.sqrt(2.0)
    laplace_scale_el = cfg.elevation_spread / math.sqrt(2.0)
    doa_az = rng.laplace(0.0, laplace_scale_az, n_s - 1)
    doa_el = rng.laplace(0.0, laplace_scale_el, n_s - 1)
    dod_az = rng.laplace(0.0, laplace_scale_az, n_s - 1)
    dod_el = rng.laplace(0.0, laplace_scale_el, n_s - 1)
    phases = rng.uniform(0.0, 2.0 * math.pi, n_s - 1)

    amp = abs(split)
    for i in range(n_s - 1):
        sub_dod = (dod[0] + dod_az[i], dod[1] + dod_el[i])
        rays.append(SubRay(
            gain=amp * complex(np.exp(1j * phases[i])),
            delay=delay + delays[i],
            doa=(doa[0] + doa_az[i], doa[1] + doa_el[i]),
            dod=sub_dod,
            doppler=_doppler(sub_dod, ue_velocity, ctx),
            parent=sig,
        ))
    return rays
