"""Scenario binding: configuration files, trajectories, the per-user
pipeline (trace -> associate -> lift -> gains -> clusters -> synthesis),
and run-directory persistence.

The FSBR trace runs once per BS and is reused for every user position;
per-position work is pure and parallelizes across a process pool with
deterministic, index-ordered output.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import math
import multiprocessing
import os
import shutil
import time
from dataclasses import dataclass, field

import numpy as np

from . import channel, cluster, em, geometry, tracer

VALID_OUTPUTS = ("paths", "tensor", "jadpp", "power")

JADPP_AZIMUTH_BINS = 72
JADPP_DELAY_BINS = 64


class ScenarioError(ValueError):
    """Invalid scenario configuration."""


@dataclass(frozen=True)
class UeSpec:
    height: float
    array: channel.ArrayConfig
    speed: float  # m/s along the waypoint polyline
    sample_interval: float  # seconds between emitted positions
    waypoints: tuple  # ((x, y), ...)


@dataclass(frozen=True)
class ScenarioConfig:
    map_path: str
    ctx: em.WaveContext
    bs_array: channel.ArrayConfig
    ue: UeSpec
    tracer_cfg: tracer.TracerConfig
    cluster_cfg: cluster.ClusterConfig
    grid: channel.OfdmGrid
    tx_power_dbm: float = 30.0
    outputs: tuple = ("paths", "power")


@dataclass(eq=False)
class Trajectory:
    positions: np.ndarray  # (P, 3)
    velocities: np.ndarray  # (P, 3)
    timestamps: np.ndarray  # (P,)

    def __len__(self):
        return len(self.positions)


def trajectory_from_waypoints(points, speed: float, sample_interval: float,
                              height: float = 0.0) -> Trajectory:
    """Resample a 2D waypoint polyline at ``speed * sample_interval``
    spacing; the heading follows the active segment."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ScenarioError("trajectory needs at least one waypoint")
    if len(pts) == 1 or speed <= 0.0:
        pos = np.array([[pts[0, 0], pts[0, 1], height]])
        return Trajectory(positions=pos, velocities=np.zeros((1, 3)),
                          timestamps=np.zeros(1))
    seg = np.diff(pts, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    if seg_len.sum() < 1e-12:
        raise ScenarioError("degenerate zero-length trajectory polyline")
    keep = seg_len > 1e-12
    seg, seg_len = seg[keep], seg_len[keep]
    starts = pts[:-1][keep]
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    step = speed * sample_interval
    total = cum[-1]
    distances = np.arange(0.0, total + step / 2.0, step)
    distances = distances[distances <= total + 1e-9]
    positions, velocities = [], []
    for s in distances:
        j = min(np.searchsorted(cum, s, side="right") - 1, len(seg) - 1)
        frac = (s - cum[j]) / seg_len[j]
        xy = starts[j] + frac * seg[j]
        heading = seg[j] / seg_len[j]
        positions.append([xy[0], xy[1], height])
        velocities.append([speed * heading[0], speed * heading[1], 0.0])
    return Trajectory(positions=np.asarray(positions),
                      velocities=np.asarray(velocities),
                      timestamps=distances / speed)


# -- configuration loading ----------------------------------------------------

def _array_from_dict(d: dict) -> channel.ArrayConfig:
    return channel.ArrayConfig(
        rows=int(d.get("rows", 1)),
        cols=int(d.get("cols", 1)),
        spacing=float(d.get("spacing_wavelengths", 0.5)),
        boresight_azimuth=math.radians(float(d.get("boresight_azimuth_deg", 0.0))),
        downtilt=math.radians(float(d.get("downtilt_deg", 0.0))),
        element=str(d.get("element", "omni")),
        element_gain_dbi=float(d.get("element_gain_dbi", 6.0)),
        rolloff_exponent=float(d.get("rolloff_exponent", 1.0)),
        front_back_db=float(d.get("front_back_db", 30.0)),
    )


def scenario_from_dict(data: dict, base_dir: str = ".") -> ScenarioConfig:
    try:
        map_path = data["map"]
        if not os.path.isabs(map_path):
            map_path = os.path.join(base_dir, map_path)
        bs = data["bs"]
        ue = data["ue"]
        trc = data.get("tracer", {})
        clu = data.get("cluster", {})
        ofdm = data.get("ofdm", {})
        cfg = ScenarioConfig(
            map_path=map_path,
            ctx=em.WaveContext(carrier_frequency=float(data["carrier_frequency_hz"])),
            bs_array=_array_from_dict(bs.get("array", {})),
            ue=UeSpec(
                height=float(ue.get("height", 1.5)),
                array=_array_from_dict(ue.get("array", {})),
                speed=float(ue.get("speed_mps", 0.0)),
                sample_interval=float(ue.get("sample_interval_s", 1.0)),
                waypoints=tuple(tuple(map(float, p)) for p in ue["waypoints"]),
            ),
            tracer_cfg=tracer.TracerConfig(
                bs_position=tuple(map(float, bs["position"])),
                max_bounce=int(trc.get("max_bounce", 3)),
                angular_spacing=math.radians(float(trc.get("angular_spacing_deg", 0.1))),
                capture_slack=float(trc.get("capture_slack", 2.0)),
            ),
            cluster_cfg=cluster.ClusterConfig(
                subray_count=int(clu.get("subray_count", 20)),
                delay_spread=float(clu.get("delay_spread_ns", 12.0)) * 1e-9,
                azimuth_spread=math.radians(float(clu.get("azimuth_spread_deg", 10.0))),
                elevation_spread=math.radians(float(clu.get("elevation_spread_deg", 5.0))),
                master_seed=int(clu.get("master_seed", 0)),
            ),
            grid=channel.OfdmGrid(
                subcarrier_count=int(ofdm.get("subcarrier_count", 2048)),
                subcarrier_spacing=float(ofdm.get("subcarrier_spacing_hz", 120e3)),
                symbol_count=int(ofdm.get("symbol_count", 14)),
            ),
            tx_power_dbm=float(data.get("tx_power_dbm", 30.0)),
            outputs=tuple(data.get("outputs", ["paths", "power"])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc
    for o in cfg.outputs:
        if o not in VALID_OUTPUTS:
            raise ScenarioError(f"unknown output kind {o!r}")
    if not os.path.exists(cfg.map_path):
        raise ScenarioError(f"map file not found: {cfg.map_path}")
    return cfg


def load_scenario(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON: {exc}") from exc
    return scenario_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


# -- per-position pipeline ----------------------------------------------------

@dataclass(eq=False)
class World:
    """Immutable shared state for one BS: map, traced rays, caches."""

    cfg: ScenarioConfig
    dmap: geometry.DigitalMap
    records: list
    capture_index: tracer.CaptureIndex
    visible_wedges: tuple
    visible_trees: tuple


def build_world(cfg: ScenarioConfig) -> World:
    dmap = geometry.load_map(cfg.map_path)
    records = tracer.fsbr_trace(dmap, cfg.tracer_cfg)
    return World(
        cfg=cfg,
        dmap=dmap,
        records=records,
        capture_index=tracer.CaptureIndex(records, dmap),
        visible_wedges=tracer.bs_visible_wedges(dmap, cfg.tracer_cfg.bs_position),
        visible_trees=tracer.bs_visible_trees(dmap, cfg.tracer_cfg.bs_position),
    )


def collect_paths(world: World, ue_pos) -> list:
    """All 3D propagation paths from the BS to one UE position."""
    cfg = world.cfg
    dmap = world.dmap
    bs3 = np.asarray(cfg.tracer_cfg.bs_position, dtype=float)
    ue3 = np.asarray(ue_pos, dtype=float)
    ground = dmap.ground_material

    lifted = []
    if geometry.los_visible(bs3[:2], ue3[:2], dmap):
        los2d = tracer.PropagationPath(
            kind=tracer.PathKind.LOS,
            vertices2d=np.array([bs3[:2], ue3[:2]]))
        lifted.extend(tracer.lift_to_3d(los2d, bs3[2], ue3[2], ground, dmap))
    for p2d in tracer.associate_paths(world.records, ue3, dmap, cfg.tracer_cfg,
                                      index=world.capture_index):
        lifted.extend(tracer.lift_to_3d(p2d, bs3[2], ue3[2], ground, dmap))
    lifted.extend(tracer.collect_diffraction_candidates(
        dmap, bs3, ue3, visible_wedges=world.visible_wedges))
    lifted.extend(tracer.collect_scattering_candidates(
        dmap, bs3, ue3, visible_trees=world.visible_trees))

    merged, seen = [], set()
    for p in lifted:
        if p.signature in seen:
            continue
        seen.add(p.signature)
        merged.append(p)
    return merged


def path_base_gain(path: tracer.PropagationPath, world: World) -> complex:
    """Route a path to its EM gain model.

    LoS/diffraction gains carry their full phase (single rays); reflection
    and scattering gains are phase-free bases for the cluster expansion.
    The ground-bounce variant of LoS is a pure ground reflection.
    """
    cfg = world.cfg
    kind = path.kind
    if kind == tracer.PathKind.LOS and not path.ground_bounce:
        return em.los_gain(path.d_total, cfg.ctx)
    if kind in (tracer.PathKind.LOS, tracer.PathKind.REFLECTION):
        return em.reflection_gain(path, world.dmap, cfg.ctx)
    if kind == tracer.PathKind.DIFFRACTION:
        return em.diffraction_gain_for_path(path, world.dmap, cfg.ctx)
    if kind == tracer.PathKind.SCATTERING:
        return complex(em.scattering_gain(path, world.dmap, cfg.ctx))
    raise ValueError(f"unhandled path kind {kind}")


def _cluster_kind(path: tracer.PathKind, ground: bool):
    # LoS ground bounces behave like reflections (expanded clusters).
    if path == tracer.PathKind.LOS and ground:
        return tracer.PathKind.REFLECTION
    return path


def subrays_for_position(world: World, ue_pos, velocity):
    paths = collect_paths(world, ue_pos)
    rays = []
    for p in paths:
        base = path_base_gain(p, world)
        effective = p
        if p.kind == tracer.PathKind.LOS and p.ground_bounce:
            effective = tracer.PropagationPath(
                kind=tracer.PathKind.REFLECTION, surface_ids=(),
                vertices3d=p.vertices3d, d_total=p.d_total,
                ground_bounce=True, ground_angle=p.ground_angle)
        rays.extend(cluster.expand_cluster(effective, base, world.cfg.cluster_cfg,
                                           velocity, world.cfg.ctx))
    return paths, rays


@dataclass(eq=False)
class PositionResult:
    index: int
    position: np.ndarray
    velocity: np.ndarray
    timestamp: float
    paths: list
    subrays: list
    power_db: np.ndarray | None = None
    jadpp: channel.Jadpp | None = None
    tensor: channel.ChannelTensor | None = None
    error: str | None = None


def simulate_position(world: World, index: int, position, velocity, timestamp,
                      outputs) -> PositionResult:
    try:
        paths, rays = subrays_for_position(world, position, velocity)
        res = PositionResult(index=index, position=np.asarray(position),
                             velocity=np.asarray(velocity), timestamp=timestamp,
                             paths=paths, subrays=rays)
        cfg = world.cfg
        if "tensor" in outputs:
            res.tensor = channel.synthesize(rays, cfg.bs_array, cfg.ue.array,
                                            cfg.grid, cfg.ctx)
            res.tensor.metadata.update({
                "ue_position": [float(v) for v in np.asarray(position)],
                "bs_position": [float(v) for v in cfg.tracer_cfg.bs_position],
                "seed": cfg.cluster_cfg.master_seed,
            })
        if "power" in outputs:
            if res.tensor is not None:
                res.power_db = channel.channel_power(res.tensor)
            else:
                res.power_db = channel.mean_subcarrier_power(
                    rays, cfg.bs_array, cfg.ue.array, cfg.grid, cfg.ctx)
        if "jadpp" in outputs:
            res.jadpp = channel.jadpp(rays, JADPP_AZIMUTH_BINS, JADPP_DELAY_BINS)
        return res
    except Exception as exc:  # diagnostics per position; the run continues
        return PositionResult(index=index, position=np.asarray(position),
                              velocity=np.asarray(velocity), timestamp=timestamp,
                              paths=[], subrays=[], error=f"{type(exc).__name__}: {exc}")


# -- persistence --------------------------------------------------------------

def path_record(path: tracer.PropagationPath) -> dict:
    return {
        "kind": path.kind.value,
        "surface_ids": list(path.surface_ids),
        "wedge_id": path.wedge_id,
        "tree_id": path.tree_id,
        "ground_bounce": path.ground_bounce,
        "vertices3d": [[float(c) for c in v] for v in path.vertices3d],
        "d_total": float(path.d_total),
    }


def write_subrays_csv(path, subrays):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["gain_re", "gain_im", "delay_s", "doa_az_rad", "doa_el_rad",
                     "dod_az_rad", "dod_el_rad", "doppler_hz", "parent"])
        for sr in subrays:
            wr.writerow([repr(float(sr.gain.real)), repr(float(sr.gain.imag)),
                         repr(float(sr.delay)),
                         repr(float(sr.doa[0])), repr(float(sr.doa[1])),
                         repr(float(sr.dod[0])), repr(float(sr.dod[1])),
                         repr(float(sr.doppler)), json.dumps(sr.parent)])


def read_subrays_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(cluster.SubRay(
                gain=complex(float(row["gain_re"]), float(row["gain_im"])),
                delay=float(row["delay_s"]),
                doa=(float(row["doa_az_rad"]), float(row["doa_el_rad"])),
                dod=(float(row["dod_az_rad"]), float(row["dod_el_rad"])),
                doppler=float(row["doppler_hz"]),
                parent=tuple(json.loads(row["parent"])),
            ))
    return out


def write_jadpp_csv(path, j: channel.Jadpp):
    az_centers = np.degrees((j.azimuth_edges[:-1] + j.azimuth_edges[1:]) / 2.0)
    de_centers = (j.delay_edges[:-1] + j.delay_edges[1:]) / 2.0 * 1e9
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["az_idx", "delay_idx", "az_center_deg", "delay_center_ns",
                     "power_db"])
        for a in range(j.power_db.shape[0]):
            for d in range(j.power_db.shape[1]):
                wr.writerow([a, d, repr(float(az_centers[a])),
                             repr(float(de_centers[d])),
                             repr(float(j.power_db[a, d]))])


_WORLD = None
_OUTPUTS = None


def _pool_init(world, outputs):
    global _WORLD, _OUTPUTS
    _WORLD = world
    _OUTPUTS = outputs


def _pool_task(args):
    index, position, velocity, timestamp = args
    return simulate_position(_WORLD, index, position, velocity, timestamp, _OUTPUTS)


def run(cfg: ScenarioConfig, out_dir, threads: int | None = None,
        force: bool = False, tensor_format: str = "bin") -> dict:
    """Execute the full pipeline and persist the requested outputs.

    Returns a run report (also written as ``run_report.json``): per-stage
    timings, per-position path counts, and any per-position diagnostics.
    """
    t_start = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    marker = os.path.join(out_dir, "run_report.json")
    if os.path.exists(marker) and not force:
        raise FileExistsError(f"{marker} exists; pass force to overwrite")

    world = build_world(cfg)
    t_traced = time.perf_counter()
    traj = trajectory_from_waypoints(cfg.ue.waypoints, cfg.ue.speed,
                                     cfg.ue.sample_interval, height=cfg.ue.height)
    outputs = cfg.outputs
    tasks = [(i, traj.positions[i], traj.velocities[i], float(traj.timestamps[i]))
             for i in range(len(traj))]
    if threads is None:
        threads = os.cpu_count() or 1
    if threads > 1 and len(tasks) > 1:
        mp_ctx = multiprocessing.get_context("fork")
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=threads, mp_context=mp_ctx,
                initializer=_pool_init, initargs=(world, outputs)) as ex:
            results = list(ex.map(_pool_task, tasks, chunksize=4))
    else:
        results = [simulate_position(world, *t, outputs) for t in tasks]
    results.sort(key=lambda r: r.index)
    t_simulated = time.perf_counter()

    shutil.copyfile(cfg.map_path, os.path.join(out_dir, "map.json"))
    _write_scenario_copy(cfg, os.path.join(out_dir, "scenario.json"))
    _write_trajectory(traj, os.path.join(out_dir, "trajectory.csv"))

    subray_dir = os.path.join(out_dir, "subrays")
    os.makedirs(subray_dir, exist_ok=True)
    for r in results:
        write_subrays_csv(os.path.join(subray_dir, f"ue_{r.index:05d}.csv"), r.subrays)

    if "paths" in outputs:
        pdir = os.path.join(out_dir, "paths")
        os.makedirs(pdir, exist_ok=True)
        for r in results:
            with open(os.path.join(pdir, f"ue_{r.index:05d}.jsonl"), "w") as fh:
                for p in r.paths:
                    fh.write(json.dumps(path_record(p), sort_keys=True) + "\n")
    if "tensor" in outputs:
        tdir = os.path.join(out_dir, "tensor")
        os.makedirs(tdir, exist_ok=True)
        for r in results:
            if r.tensor is None:
                continue
            base = os.path.join(tdir, f"ue_{r.index:05d}")
            if tensor_format == "csv":
                _write_tensor_csv(base + ".csv", r.tensor)
            else:
                channel.write_tensor(r.tensor, base + ".bin", base + ".json")
    if "jadpp" in outputs:
        jdir = os.path.join(out_dir, "jadpp")
        os.makedirs(jdir, exist_ok=True)
        for r in results:
            if r.jadpp is not None:
                write_jadpp_csv(os.path.join(jdir, f"ue_{r.index:05d}.csv"), r.jadpp)
    if "power" in outputs:
        with open(os.path.join(out_dir, "power.csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["ue_index", "time_s", "x", "y", "z", "power_db"])
            for r in results:
                if r.power_db is None:
                    continue
                mean_db = channel._to_db(
                    np.mean(10.0 ** (np.asarray(r.power_db) / 10.0), keepdims=True))[0]
                wr.writerow([r.index, repr(r.timestamp),
                             repr(float(r.position[0])), repr(float(r.position[1])),
                             repr(float(r.position[2])), repr(float(mean_db))])
    t_written = time.perf_counter()

    report = {
        "positions": len(results),
        "surfaces": len(world.dmap.surfaces),
        "wedges": len(world.dmap.wedges),
        "trees": len(world.dmap.trees),
        "rays_launched": len(world.records),
        "path_counts": [len(r.paths) for r in results],
        "errors": {r.index: r.error for r in results if r.error},
        "timings_s": {
            "trace": t_traced - t_start,
            "simulate": t_simulated - t_traced,
            "write": t_written - t_simulated,
            "total": t_written - t_start,
        },
        "outputs": list(outputs),
        "seed": cfg.cluster_cfg.master_seed,
    }
    with open(marker, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return report


def _write_scenario_copy(cfg: ScenarioConfig, path):
    data = {
        "map": "map.json",
        "carrier_frequency_hz": cfg.ctx.carrier_frequency,
        "bs_position": list(cfg.tracer_cfg.bs_position),
        "ue_height": cfg.ue.height,
        "outputs": list(cfg.outputs),
        "seed": cfg.cluster_cfg.master_seed,
        "tx_power_dbm": cfg.tx_power_dbm,
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_trajectory(traj: Trajectory, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["ue_index", "time_s", "x", "y", "z", "vx", "vy", "vz"])
        for i in range(len(traj)):
            p, v = traj.positions[i], traj.velocities[i]
            wr.writerow([i, repr(float(traj.timestamps[i]))]
                        + [repr(float(c)) for c in p] + [repr(float(c)) for c in v])


def _write_tensor_csv(path, tensor: channel.ChannelTensor):
    vals = tensor.values
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["symbol", "subcarrier", "rx", "tx", "re", "im"])
        s_c, n_c, r_c, t_c = vals.shape
        for s in range(s_c):
            for n in range(n_c):
                for r in range(r_c):
                    for t in range(t_c):
                        v = vals[s, n, r, t]
                        wr.writerow([s, n, r, t, repr(v.real), repr(v.imag)])
