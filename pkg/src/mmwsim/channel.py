"""Frequency-domain MIMO-OFDM channel synthesis from sub-rays, array
responses with a parametric element pattern, and derived observables
(joint angle-delay power profile, per-symbol channel power).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cluster import SubRay
from .em import WaveContext

DB_FLOOR = -250.0


@dataclass(frozen=True)
class OfdmGrid:
    """Plain OFDM grid; the symbol duration is the subcarrier-spacing
    reciprocal (no cyclic prefix modeling)."""

    subcarrier_count: int = 2048
    subcarrier_spacing: float = 120e3
    symbol_count: int = 14

    def __post_init__(self):
        if self.subcarrier_count < 1 or self.symbol_count < 1:
            raise ValueError("subcarrier and symbol counts must be >= 1")
        if self.subcarrier_spacing <= 0.0:
            raise ValueError("subcarrier spacing must be > 0")

    @property
    def symbol_duration(self) -> float:
        return 1.0 / self.subcarrier_spacing

    @property
    def bandwidth(self) -> float:
        return self.subcarrier_count * self.subcarrier_spacing


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform planar array (rows x cols) or a single omni element.

    The panel lies in the plane normal to its boresight; element spacing is
    in wavelengths.  The parametric patch pattern is a cosine-power rolloff
    around boresight with a front-to-back floor.
    """

    rows: int = 1
    cols: int = 1
    spacing: float = 0.5  # wavelengths
    boresight_azimuth: float = 0.0
    downtilt: float = 0.0  # positive tilts the boresight below horizontal
    element: str = "omni"  # "omni" or "patch"
    element_gain_dbi: float = 6.0
    rolloff_exponent: float = 1.0
    front_back_db: float = 30.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.spacing <= 0.0:
            raise ValueError("invalid array geometry")

    @property
    def size(self) -> int:
        return self.rows * self.cols


@dataclass(eq=False)
class ChannelTensor:
    """Frequency-domain channel H[symbol][subcarrier][rx][tx] plus the grid
    and bookkeeping metadata."""

    values: np.ndarray
    grid: OfdmGrid
    metadata: dict = field(default_factory=dict)


def _direction_unit(azimuth: float, elevation: float) -> np.ndarray:
    ce = math.cos(elevation)
    return np.array([ce * math.cos(azimuth), ce * math.sin(azimuth),
                     math.sin(elevation)])


def _element_amplitude(cfg: ArrayConfig, cos_off: float) -> float:
    if cfg.element == "omni":
        return 1.0
    g_max = 10.0 ** (cfg.element_gain_dbi / 10.0)
    floor = g_max * 10.0 ** (-cfg.front_back_db / 10.0)
    gain = g_max * max(cos_off, 0.0) ** (2.0 * cfg.rolloff_exponent)
    return math.sqrt(max(gain, floor))


def element_positions(cfg: ArrayConfig, ctx: WaveContext) -> np.ndarray:
    """Element centers in meters, map frame."""
    el0 = -cfg.downtilt
    bore = _direction_unit(cfg.boresight_azimuth, el0)
    y_l = np.array([-math.sin(cfg.boresight_azimuth),
                    math.cos(cfg.boresight_azimuth), 0.0])
    z_l = np.cross(bore, y_l)
    d = cfg.spacing * ctx.wavelength
    pos = np.zeros((cfg.size, 3))
    i = 0
    for r in range(cfg.rows):
        for c in range(cfg.cols):
            pos[i] = ((c - (cfg.cols - 1) / 2.0) * d * y_l
                      + (r - (cfg.rows - 1) / 2.0) * d * z_l)
            i += 1
    return pos


def array_response(cfg: ArrayConfig, azimuth: float, elevation: float,
                   ctx: WaveContext) -> np.ndarray:
    """Steering vector toward (azimuth, elevation), element pattern applied.

    Element m at position p gets phase e^{-jk <p, u>}; a single omni
    element returns [1.0].
    """
    u = _direction_unit(azimuth, elevation)
    if cfg.size == 1 and cfg.element == "omni":
        return np.ones(1, dtype=complex)
    pos = element_positions(cfg, ctx)
    phases = np.exp(-1j * ctx.wavenumber * pos @ u)
    bore = _direction_unit(cfg.boresight_azimuth, -cfg.downtilt)
    amp = _element_amplitude(cfg, float(bore @ u))
    return amp * phases


def _pulse(tau_over_t: np.ndarray) -> np.ndarray:
    """Pulse-shaping filter p(tau) = sin(pi tau/T)/(pi tau/T), p(0) = 1."""
    return np.sinc(tau_over_t)


def synthesize(subrays, rx: ArrayConfig, tx: ArrayConfig, grid: OfdmGrid,
               ctx: WaveContext) -> ChannelTensor:
    """Sum the per-sub-ray rank-1 contributions over symbols/subcarriers.

    Delays in the phase ramps are referenced to the earliest sub-ray delay
    (kept in metadata) so subcarrier phases stay numerically small.
    """
    s_cnt, n_cnt = grid.symbol_count, grid.subcarrier_count
    h = np.zeros((s_cnt, n_cnt, rx.size, tx.size), dtype=complex)
    meta = {"delay_reference": 0.0}
    if not subrays:
        return ChannelTensor(values=h, grid=grid, metadata=meta)
    tau0 = min(sr.delay for sr in subrays)
    meta["delay_reference"] = tau0
    t_sym = grid.symbol_duration
    n_idx = np.arange(n_cnt)
    s_idx = np.arange(s_cnt)
    for sr in subrays:
        tau = sr.delay - tau0
        a_r = array_response(rx, sr.doa[0], sr.doa[1], ctx)
        a_t = array_response(tx, sr.dod[0], sr.dod[1], ctx)
        f_n = np.exp(-2j * math.pi * n_idx * grid.subcarrier_spacing * tau)
        g_s = (sr.gain * _pulse((s_idx * t_sym - tau) / t_sym)
               * np.exp(2j * math.pi * s_idx * t_sym * sr.doppler))
        h += np.einsum("s,n,r,t->snrt", g_s, f_n, a_r, a_t.conj())
    return ChannelTensor(values=h, grid=grid, metadata=meta)


def channel_power(tensor: ChannelTensor) -> np.ndarray:
    """Per-symbol channel power: subcarrier mean of the squared Frobenius
    norm, in dB (floored)."""
    p = np.mean(np.abs(tensor.values) ** 2, axis=1).sum(axis=(1, 2))
    return _to_db(p)


def mean_subcarrier_power(subrays, rx: ArrayConfig, tx: ArrayConfig,
                          grid: OfdmGrid, ctx: WaveContext) -> np.ndarray:
    """Per-symbol channel power via the exact pairwise closed form of the
    subcarrier mean; equals ``channel_power(synthesize(...))`` without
    materializing the tensor."""
    s_cnt = grid.symbol_count
    if not subrays:
        return np.full(s_cnt, DB_FLOOR)
    tau0 = min(sr.delay for sr in subrays)
    taus = np.array([sr.delay - tau0 for sr in subrays])
    l_cnt = len(subrays)
    a_r = np.stack([array_response(rx, sr.doa[0], sr.doa[1], ctx) for sr in subrays])
    a_t = np.stack([array_response(tx, sr.dod[0], sr.dod[1], ctx) for sr in subrays])
    gram_r = a_r @ a_r.conj().T  # (L, L)
    gram_t = a_t @ a_t.conj().T
    # Subcarrier mean of e^{-j 2 pi n spacing (tau_l - tau_m)}.
    dtau = taus[:, None] - taus[None, :]
    x = grid.subcarrier_spacing * dtau
    n = grid.subcarrier_count
    num = np.exp(-1j * math.pi * (n - 1) * x) * _dirichlet(x, n)
    kernel = gram_r * gram_t.conj() * num
    t_sym = grid.symbol_duration
    s_idx = np.arange(s_cnt)
    gains = np.array([sr.gain for sr in subrays])
    dopplers = np.array([sr.doppler for sr in subrays])
    b = (gains[:, None] * _pulse((s_idx[None, :] * t_sym - taus[:, None]) / t_sym)
         * np.exp(2j * math.pi * s_idx[None, :] * t_sym * dopplers[:, None]))
    p = np.real(np.einsum("ls,lm,ms->s", b.conj(), kernel.T, b))
    return _to_db(np.maximum(p, 0.0))


def _dirichlet(x: np.ndarray, n: int) -> np.ndarray:
    """sin(pi n x) / (n sin(pi x)) with the removable singularity filled."""
    s = np.sin(math.pi * x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sin(math.pi * n * x) / (n * s)
    return np.where(np.abs(s) < 1e-300, 1.0, out)


def _to_db(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(p)
    return np.maximum(db, DB_FLOOR)


@dataclass(eq=False)
class Jadpp:
    """Joint angle-delay power profile over (DoA azimuth, delay) bins."""

    power_db: np.ndarray  # (azimuth_bins, delay_bins)
    azimuth_edges: np.ndarray  # radians
    delay_edges: np.ndarray  # seconds


def jadpp(subrays, azimuth_bins: int, delay_bins: int) -> Jadpp:
    """Accumulate linear sub-ray power per (azimuth, delay) bin."""
    if azimuth_bins < 1 or delay_bins < 1:
        raise ValueError("bin counts must be >= 1")
    az_edges = np.linspace(-math.pi, math.pi, azimuth_bins + 1)
    if subrays:
        delays = np.array([sr.delay for sr in subrays])
        lo, hi = delays.min(), delays.max()
        if hi - lo < 1e-12:
            hi = lo + 1e-9
        delay_edges = np.linspace(lo, hi, delay_bins + 1)
        az = np.array([_wrap_pi(sr.doa[0]) for sr in subrays])
        power = np.array([abs(sr.gain) ** 2 for sr in subrays])
        hist, _, _ = np.histogram2d(az, np.clip(delays, lo, hi),
                                    bins=[az_edges, delay_edges], weights=power)
    else:
        delay_edges = np.linspace(0.0, 1e-9, delay_bins + 1)
        hist = np.zeros((azimuth_bins, delay_bins))
    return Jadpp(power_db=_to_db(hist), azimuth_edges=az_edges,
                 delay_edges=delay_edges)


def _wrap_pi(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


# -- tensor file format -----------------------------------------------------

def write_tensor(tensor: ChannelTensor, bin_path, sidecar_path):
    """Raw little-endian complex64, order [s][n][rx][tx], plus a JSON
    header with the dimensions and metadata."""
    tensor.values.astype("<c8").tofile(bin_path)
    header = {
        "dims": list(tensor.values.shape),
        "dtype": "complex64-le-interleaved",
        "order": ["symbol", "subcarrier", "rx", "tx"],
        "subcarrier_count": tensor.grid.subcarrier_count,
        "subcarrier_spacing_hz": tensor.grid.subcarrier_spacing,
        "symbol_count": tensor.grid.symbol_count,
        "metadata": tensor.metadata,
    }
    with open(sidecar_path, "w") as fh:
        json.dump(header, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_tensor(bin_path, sidecar_path) -> ChannelTensor:
    with open(sidecar_path) as fh:
        header = json.load(fh)
    dims = tuple(header["dims"])
    values = np.fromfile(bin_path, dtype="<c8").reshape(dims).astype(complex)
    grid = OfdmGrid(subcarrier_count=header["subcarrier_count"],
                    subcarrier_spacing=header["subcarrier_spacing_hz"],
                    symbol_count=header["symbol_count"])
    return ChannelTensor(values=values, grid=grid, metadata=header["metadata"])
