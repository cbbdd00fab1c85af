"""Render figures from a simulator run directory.

Consumes only the documented file formats: ``map.json``,
``trajectory.csv``, ``paths/ue_*.jsonl``, ``jadpp/ue_*.csv`` and
``power.csv``.  Rendering is read-only and deterministic: identical
inputs and style options yield identical image bytes.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("paths", "jadpp", "power")

PATH_COLORS = {
    "los": "#d62728",
    "reflection": "#1f77b4",
    "diffraction": "#9467bd",
    "scattering": "#2ca02c",
}

FIGSIZE = (7.0, 6.0)
DPI = 120


class ArtifactError(RuntimeError):
    """A required run artifact is missing or malformed."""


@dataclass(frozen=True)
class PlotSpec:
    """One figure request against a run directory."""

    run_dir: str
    kind: str
    out_path: str
    vmin: float | None = None
    vmax: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")


# -- artifact loading ---------------------------------------------------------

def _require(path: str) -> str:
    if not os.path.exists(path):
        raise ArtifactError(f"missing run artifact: {path}")
    return path


def load_map(run_dir: str) -> dict:
    path = _require(os.path.join(run_dir, "map.json"))
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: invalid JSON: {exc}") from exc


def load_scenario(run_dir: str) -> dict:
    path = _require(os.path.join(run_dir, "scenario.json"))
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: invalid JSON: {exc}") from exc


def load_trajectory(run_dir: str) -> np.ndarray:
    """Positions as an (P, 3) array ordered by ue_index."""
    path = _require(os.path.join(run_dir, "trajectory.csv"))
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append((int(row["ue_index"]),
                         float(row["x"]), float(row["y"]), float(row["z"])))
    if not rows:
        raise ArtifactError(f"{path}: no positions")
    rows.sort()
    return np.array([[x, y, z] for _, x, y, z in rows])


def load_paths(run_dir: str, ue_index: int) -> list:
    path = _require(os.path.join(run_dir, "paths",
                                 f"ue_{ue_index:05d}.jsonl"))
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def list_path_indices(run_dir: str) -> list:
    pdir = _require(os.path.join(run_dir, "paths"))
    idx = []
    for name in sorted(os.listdir(pdir)):
        if name.startswith("ue_") and name.endswith(".jsonl"):
            idx.append(int(name[3:-6]))
    if not idx:
        raise ArtifactError(f"{pdir}: no path dumps")
    return idx


def load_jadpp(run_dir: str, ue_index: int):
    """JADPP grid: (azimuth centers deg, delay centers ns, power dB)."""
    path = _require(os.path.join(run_dir, "jadpp", f"ue_{ue_index:05d}.csv"))
    az_idx, de_idx, az_c, de_c, p = [], [], [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            az_idx.append(int(row["az_idx"]))
            de_idx.append(int(row["delay_idx"]))
            az_c.append(float(row["az_center_deg"]))
            de_c.append(float(row["delay_center_ns"]))
            p.append(float(row["power_db"]))
    if not p:
        raise ArtifactError(f"{path}: empty profile")
    na, nd = max(az_idx) + 1, max(de_idx) + 1
    grid = np.full((na, nd), np.nan)
    az_centers, de_centers = np.zeros(na), np.zeros(nd)
    for a, d, ac, dc, val in zip(az_idx, de_idx, az_c, de_c, p):
        grid[a, d] = val
        az_centers[a] = ac
        de_centers[d] = dc
    if np.isnan(grid).any():
        raise ArtifactError(f"{path}: incomplete bin grid")
    return az_centers, de_centers, grid


def list_jadpp_indices(run_dir: str) -> list:
    jdir = _require(os.path.join(run_dir, "jadpp"))
    idx = []
    for name in sorted(os.listdir(jdir)):
        if name.startswith("ue_") and name.endswith(".csv"):
            idx.append(int(name[3:-4]))
    if not idx:
        raise ArtifactError(f"{jdir}: no profiles")
    return idx


def load_power(run_dir: str):
    path = _require(os.path.join(run_dir, "power.csv"))
    t, p = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t.append(float(row["time_s"]))
            p.append(float(row["power_db"]))
    if not t:
        raise ArtifactError(f"{path}: no samples")
    return np.asarray(t), np.asarray(p)


# -- figure rendering ---------------------------------------------------------

def _draw_map(ax, map_data: dict):
    for s in map_data.get("surfaces", []):
        (x1, y1), (x2, y2) = s["p1"], s["p2"]
        ax.plot([x1, x2], [y1, y2], color="0.35", linewidth=0.7, zorder=1)
    for t in map_data.get("trees", []):
        ax.add_patch(plt.Circle(t["center"], t["radius"], facecolor="#98df8a",
                                edgecolor="#2ca02c", alpha=0.8, zorder=2))


def render_paths(spec: PlotSpec):
    map_data = load_map(spec.run_dir)
    scen = load_scenario(spec.run_dir)
    traj = load_trajectory(spec.run_dir)
    indices = list_path_indices(spec.run_dir)
    picks = [indices[0]] if len(indices) == 1 else [indices[0], indices[-1]]

    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    _draw_map(ax, map_data)
    bs = scen.get("bs_position", [0.0, 0.0, 0.0])
    ax.plot(bs[0], bs[1], marker="^", color="k", markersize=10, zorder=5,
            linestyle="none", label="BS")
    ax.plot(traj[:, 0], traj[:, 1], color="0.7", linewidth=1.0,
            linestyle="--", zorder=3, label="trajectory")

    seen_kinds = set()
    any_paths = False
    for i, idx in enumerate(picks):
        paths = load_paths(spec.run_dir, idx)
        ue = traj[idx] if idx < len(traj) else None
        if ue is not None:
            ax.plot(ue[0], ue[1], marker="o", color="k", markersize=6,
                    zorder=5, linestyle="none",
                    label="UE" if i == 0 else None)
        for p in paths:
            any_paths = True
            verts = np.asarray(p["vertices3d"], dtype=float)
            color = PATH_COLORS.get(p["kind"], "0.5")
            label = p["kind"] if p["kind"] not in seen_kinds else None
            seen_kinds.add(p["kind"])
            ax.plot(verts[:, 0], verts[:, 1], color=color, linewidth=0.9,
                    alpha=0.8, zorder=4, label=label)
    if not any_paths:
        warnings.warn("no propagation paths in run; rendering map only")

    xmin, ymin, xmax, ymax = map_data.get("bounds", [None] * 4)
    if xmin is not None:
        pad = 0.02 * max(xmax - xmin, ymax - ymin)
        ax.set_xlim(xmin - pad, xmax + pad)
        ax.set_ylim(ymin - pad, ymax + pad)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("Propagation paths")
    ax.legend(loc="upper right", fontsize=8)
    return fig


def render_jadpp(spec: PlotSpec):
    idx = list_jadpp_indices(spec.run_dir)[0]
    az, delay, grid = load_jadpp(spec.run_dir, idx)
    finite = grid[np.isfinite(grid) & (grid > -200.0)]
    vmax = spec.vmax if spec.vmax is not None else \
        (float(finite.max()) if finite.size else 0.0)
    vmin = spec.vmin if spec.vmin is not None else vmax - 60.0

    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    mesh = ax.pcolormesh(delay, az, np.clip(grid, vmin, vmax),
                         shading="nearest", cmap="viridis",
                         vmin=vmin, vmax=vmax)
    fig.colorbar(mesh, ax=ax, label="power [dB]")
    ax.set_xlabel("delay [ns]")
    ax.set_ylabel("azimuth of arrival [deg]")
    ax.set_title(f"Joint angle-delay power profile (UE {idx})")
    return fig


def render_power(spec: PlotSpec):
    t, p = load_power(spec.run_dir)
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    ax.plot(t, p, color="#1f77b4", linewidth=1.2)
    if spec.vmin is not None or spec.vmax is not None:
        ax.set_ylim(spec.vmin, spec.vmax)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("channel power [dB]")
    ax.set_title("Channel power along the trajectory")
    ax.grid(True, linewidth=0.3, alpha=0.5)
    return fig


_RENDERERS = {
    "paths": render_paths,
    "jadpp": render_jadpp,
    "power": render_power,
}


def render(spec: PlotSpec) -> str:
    """Render one figure and write it to ``spec.out_path``."""
    fig = _RENDERERS[spec.kind](spec)
    try:
        fig.savefig(spec.out_path, dpi=DPI)
    finally:
        plt.close(fig)
    return spec.out_path
