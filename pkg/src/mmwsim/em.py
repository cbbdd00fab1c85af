"""Complex path-gain coefficients: Friis line of sight, Fresnel reflection
with a roughness loss factor, multi-bounce products, uniform-theory wedge
diffraction, and radiative-energy-transfer tree scattering.

Sign convention: propagation phase is e^{-jkd} throughout.  All functions
are pure.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import modfresnelm

from .geometry import DigitalMap, Material, Wedge
from .tracer import PathKind, PropagationPath

SPEED_OF_LIGHT = 2.99792458e8

# Cotangent terms within this of a pole are replaced by the finite
# Kouyoumjian-Pathak boundary limit.
BOUNDARY_TOL = 1e-4


class DomainError(ValueError):
    """An argument is outside the physical domain of the operation."""


@dataclass(frozen=True)
class WaveContext:
    """Carrier frequency with derived wavelength and wavenumber."""

    carrier_frequency: float

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength


@dataclass(frozen=True)
class DiffractionGeometry:
    """Wedge diffraction geometry: leg lengths and face-referenced angles."""

    d_prime: float  # source -> apex, meters
    d: float  # apex -> observer, meters
    phi_prime: float  # incidence angle from the zero face, radians
    phi: float  # diffraction angle from the zero face, radians
    n: float  # exterior angle factor (exterior angle = n*pi)

    @property
    def distance_parameter(self) -> float:
        return self.d_prime * self.d / (self.d_prime + self.d)

    @property
    def total_distance(self) -> float:
        return self.d_prime + self.d

    def gammas(self):
        diff = self.phi - self.phi_prime
        summ = self.phi + self.phi_prime
        return (
            (math.pi - diff) / (2.0 * self.n),
            (math.pi + diff) / (2.0 * self.n),
            (math.pi - summ) / (2.0 * self.n),
            (math.pi + summ) / (2.0 * self.n),
        )


def fresnel_coefficients(theta: float, eps: float):
    """Smooth-surface Fresnel reflection coefficients at grazing angle
    ``theta`` for a lossless dielectric: (parallel/vertical,
    perpendicular/horizontal) polarization."""
    if theta <= 0.0:
        raise DomainError("grazing angle must be > 0")
    if eps <= 1.0:
        raise DomainError("relative permittivity must be > 1")
    s = math.sin(theta)
    root = math.sqrt(eps - math.cos(theta) ** 2)
    par = (eps * s - root) / (eps * s + root)
    perp = (s - root) / (s + root)
    return complex(par), complex(perp)


def roughness_factor(theta: float, sigma_h: float, wavelength: float) -> float:
    """Specular scattering loss due to surface roughness, in (0, 1]."""
    x = math.pi * sigma_h * math.sin(theta) / wavelength
    return math.exp(-8.0 * x * x)


def los_gain(d: float, ctx: WaveContext) -> complex:
    """Friis free-space path coefficient with e^{-jkd} phase."""
    if d <= 0.0:
        raise DomainError("distance must be > 0")
    return ctx.wavelength / (4.0 * math.pi * d) * cmath.exp(-1j * ctx.wavenumber * d)


def grazing_angle_to_wall(direction3, normal2) -> float:
    """Grazing angle between a 3D ray direction and a vertical wall plane."""
    u = np.asarray(direction3, dtype=float)
    u = u / np.linalg.norm(u)
    n = np.array([normal2[0], normal2[1], 0.0])
    return math.asin(min(1.0, abs(float(u @ n))))


def reflection_gain(path: PropagationPath, dmap: DigitalMap, ctx: WaveContext,
                    polarization: str = "vertical") -> complex:
    """Base gain of a multi-bounce reflection path: the per-bounce product
    of roughness and Fresnel factors times the Friis magnitude.

    Phase-free apart from Fresnel signs; the geometric phase, the random
    sub-ray phases and the 1/sqrt(n_S) split are applied by the cluster
    expansion.  Vertical polarization uses the parallel coefficient on
    walls and the perpendicular one on the ground bounce.
    """
    verts = path.vertices3d
    if verts is None:
        raise ValueError("path has no 3D vertices; lift it first")
    if path.order == 0 and not path.ground_bounce:
        raise ValueError("reflection gain needs at least one bounce")
    vertical = polarization.lower().startswith("v")
    factor = 1.0 + 0.0j
    for i, vidx in enumerate(path.wall_vertex_indices):
        a, p = verts[vidx - 1], verts[vidx]
        seg = p - a
        if np.linalg.norm(seg) < 1e-12:
            raise ValueError(f"degenerate segment at bounce {i} of path {path.signature}")
        sid = path.surface_ids[i]
        theta = grazing_angle_to_wall(seg, dmap.surface_normal(sid))
        mat = dmap.material_of(sid)
        par, perp = fresnel_coefficients(max(theta, 1e-12), mat.eps)
        gamma = par if vertical else perp
        factor *= gamma * roughness_factor(theta, mat.sigma_h, ctx.wavelength)
    if path.ground_bounce:
        theta = path.ground_angle
        gm = dmap.ground_material
        par, perp = fresnel_coefficients(max(theta, 1e-12), gm.eps)
        gamma = perp if vertical else par
        factor *= gamma * roughness_factor(theta, gm.sigma_h, ctx.wavelength)
    return factor * ctx.wavelength / (4.0 * math.pi * path.d_total)


def utd_transition_F(x: float) -> complex:
    """Kouyoumjian-Pathak transition function
    F(x) = 2j sqrt(x) e^{jx} int_{sqrt(x)}^inf e^{-ju^2} du."""
    if x <= 0.0:
        raise DomainError("transition function argument must be > 0")
    sx = math.sqrt(x)
    tail = modfresnelm(sx)[0]
    return 2j * sx * cmath.exp(1j * x) * complex(tail)


def _diffraction_component(gamma: float, k: float, L: float, n: float) -> complex:
    m = round(gamma / math.pi)
    u = gamma - m * math.pi
    if abs(u) < BOUNDARY_TOL:
        # Finite boundary limit of cot(gamma) * F(2kL n^2 sin^2 gamma).
        # u == 0 takes the lit-side limit; the direct ray is counted on
        # the boundary, so the half-field compensation must fire there.
        sgn = 1.0 if u == 0.0 else math.copysign(1.0, u)
        return (-0.5 * math.sqrt(L) * sgn
                + 2.0 * n * u * L * math.sqrt(k / (2.0 * math.pi))
                * cmath.exp(1j * math.pi / 4.0))
    a = 2.0 * k * L * n * n * math.sin(gamma) ** 2
    pref = -cmath.exp(-1j * math.pi / 4.0) / (2.0 * n * math.sqrt(2.0 * math.pi * k))
    return pref * (math.cos(gamma) / math.sin(gamma)) * utd_transition_F(a)


def diffraction_coefficient(geom: DiffractionGeometry, gamma0: complex,
                            gamma_n: complex, ctx: WaveContext) -> complex:
    """Wedge diffraction coefficient D = D1 + D2 + G0*D3 + Gn*D4 with the
    shadow/reflection-boundary poles regularized."""
    k = ctx.wavenumber
    L = geom.distance_parameter
    g1, g2, g3, g4 = geom.gammas()
    d1 = _diffraction_component(g1, k, L, geom.n)
    d2 = _diffraction_component(g2, k, L, geom.n)
    d3 = _diffraction_component(g3, k, L, geom.n)
    d4 = _diffraction_component(g4, k, L, geom.n)
    return d1 + d2 + gamma0 * d3 + gamma_n * d4


def diffraction_gain(geom: DiffractionGeometry, gamma0: complex,
                     gamma_n: complex, ctx: WaveContext) -> complex:
    """Path coefficient of a diffracted ray, on the same antenna-gain scale
    as the Friis LoS coefficient (the lambda/4pi aperture factor is
    included so LoS and diffracted terms superpose consistently)."""
    if geom.d_prime <= 0.0 or geom.d <= 0.0:
        raise DomainError("leg lengths must be > 0")
    d_t = geom.total_distance
    coeff = diffraction_coefficient(geom, gamma0, gamma_n, ctx)
    spread = math.sqrt(d_t / (geom.d_prime * geom.d))
    return (ctx.wavelength / (4.0 * math.pi)
            * cmath.exp(-1j * ctx.wavenumber * d_t) / d_t * coeff * spread)


def _face_grazing(angle: float) -> float:
    """Fold a face-referenced angle into a (0, pi/2] grazing angle."""
    a = abs(angle) % math.pi
    a = min(a, math.pi - a)
    return max(a, 1e-6)


def diffraction_gain_for_path(path: PropagationPath, dmap: DigitalMap,
                              ctx: WaveContext) -> complex:
    """Diffraction gain of a traced wedge path, with face reflection
    coefficients from the face materials at the actual angles."""
    w = dmap.wedge(path.wedge_id)
    verts = path.vertices3d
    d_prime = float(np.linalg.norm(verts[1] - verts[0]))
    d = float(np.linalg.norm(verts[2] - verts[1]))
    phi_prime = w.exterior_angle_from_zero_face(verts[0][:2])
    phi = w.exterior_angle_from_zero_face(verts[2][:2])
    geom = DiffractionGeometry(d_prime=d_prime, d=d, phi_prime=phi_prime,
                               phi=phi, n=w.n)
    eps0 = dmap.material_of(w.zero_face_surface).eps
    eps_n = dmap.material_of(w.n_face_surface).eps
    gamma0 = fresnel_coefficients(_face_grazing(phi_prime), eps0)[0]
    gamma_n = fresnel_coefficients(_face_grazing(w.n * math.pi - phi), eps_n)[0]
    return diffraction_gain(geom, gamma0, gamma_n, ctx)


def ret_reradiation(phi: float, beamwidth: float, forward_ratio: float) -> float:
    """Tree re-radiation pattern: Gaussian forward lobe over an isotropic
    backscatter floor."""
    a = forward_ratio
    b = beamwidth
    return a * (2.0 / b) ** 2 * math.exp(-((phi / b) ** 2)) + (1.0 - a)


def scattering_gain(path: PropagationPath, dmap: DigitalMap, ctx: WaveContext) -> float:
    """Base gain magnitude of a first-order tree-scattering path, before
    the sub-ray split and random phases."""
    tree = dmap.tree(path.tree_id)
    verts = path.vertices3d
    r1, r2 = path.r1, path.r2
    if not (r1 and r2 and r1 > 0.0 and r2 > 0.0):
        raise ValueError("scattering path lacks positive leg distances")
    u_in = (verts[1] - verts[0]) / r1
    u_out = (verts[2] - verts[1]) / r2
    phi = math.acos(min(1.0, max(-1.0, float(u_in @ u_out))))
    rho = ret_reradiation(phi, tree.ret.beamwidth, tree.ret.forward_ratio)
    num = (1.0 - tree.ret.absorption) * tree.radius * tree.height * rho
    return math.sqrt(num / (32.0 * math.pi ** 3)) * ctx.wavelength / (r1 * r2)
