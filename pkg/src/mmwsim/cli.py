"""Command-line front end: validate inputs, trace paths, run the full
pipeline, and post-process existing run directories.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime
error.  The OMNISIM_LOG environment variable (error, info, debug)
controls verbosity on standard error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

from . import channel, geometry, scenario

log = logging.getLogger("mmwsim")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO,
               "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage failures raise instead of exiting."""

    def error(self, message):
        raise UsageError(message)


def _configure_logging():
    raw = os.environ.get("OMNISIM_LOG", "error").strip().lower()
    level = _LOG_LEVELS.get(raw)
    if level is None:
        print(f"warning: unknown OMNISIM_LOG value {raw!r}; using 'error'",
              file=sys.stderr)
        level = logging.ERROR
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(level)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mmwsim",
                     description="Site-specific mmWave channel simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="validate a map and optional scenario")
    p_val.add_argument("--map", required=True, help="map JSON file")
    p_val.add_argument("--scenario", help="scenario JSON file")

    def add_run_flags(p, outputs_help):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", required=True, help="output run directory")
        p.add_argument("--seed", type=int, help="override the cluster master seed")
        p.add_argument("--threads", type=int, help="worker pool size")
        p.add_argument("--format", choices=("csv", "bin"), default="bin",
                       help="channel tensor file format")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing outputs")
        p.description = outputs_help

    p_trace = sub.add_parser("trace", help="trace paths only, write the path dump")
    add_run_flags(p_trace, "Run the tracer and write per-position path dumps.")

    p_run = sub.add_parser("run", help="execute the full simulation pipeline")
    add_run_flags(p_run, "Run the full pipeline with the scenario's outputs.")

    for kind in ("jadpp", "power"):
        p_post = sub.add_parser(kind, help=f"recompute {kind} from a run directory")
        p_post.add_argument("--out", required=True,
                            help="existing run directory to post-process")
        p_post.add_argument("--force", action="store_true",
                            help="overwrite existing outputs")
    return parser


def _load_scenario_with_overrides(args) -> scenario.ScenarioConfig:
    cfg = scenario.load_scenario(args.scenario)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(
            cfg, cluster_cfg=dataclasses.replace(cfg.cluster_cfg,
                                                 master_seed=args.seed))
    return cfg


def cmd_validate(args) -> int:
    dmap = geometry.load_map(args.map)
    print(f"{len(dmap.surfaces)} surfaces, {len(dmap.wedges)} wedges, "
          f"{len(dmap.trees)} trees")
    if args.scenario:
        cfg = scenario.load_scenario(args.scenario)
        traj = scenario.trajectory_from_waypoints(
            cfg.ue.waypoints, cfg.ue.speed, cfg.ue.sample_interval,
            height=cfg.ue.height)
        print(f"scenario ok: {len(traj)} positions, "
              f"outputs {', '.join(cfg.outputs)}")
    return EXIT_OK


def cmd_trace(args) -> int:
    cfg = _load_scenario_with_overrides(args)
    cfg = dataclasses.replace(cfg, outputs=("paths",))
    report = scenario.run(cfg, args.out, threads=args.threads,
                          force=args.force, tensor_format=args.format)
    log.info("traced %d positions in %.2f s", report["positions"],
             report["timings_s"]["total"])
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_scenario_with_overrides(args)
    report = scenario.run(cfg, args.out, threads=args.threads,
                          force=args.force, tensor_format=args.format)
    log.info("simulated %d positions in %.2f s", report["positions"],
             report["timings_s"]["total"])
    if report["errors"]:
        print(f"warning: {len(report['errors'])} positions failed; "
              f"see run_report.json", file=sys.stderr)
    return EXIT_OK


def _postprocess_subrays(run_dir):
    sub_dir = os.path.join(run_dir, "subrays")
    if not os.path.isdir(sub_dir):
        raise FileNotFoundError(f"{sub_dir} missing; not a run directory?")
    for name in sorted(os.listdir(sub_dir)):
        if name.endswith(".csv"):
            idx = int(name[len("ue_"):-len(".csv")])
            yield idx, scenario.read_subrays_csv(os.path.join(sub_dir, name))


def cmd_jadpp(args) -> int:
    jdir = os.path.join(args.out, "jadpp")
    os.makedirs(jdir, exist_ok=True)
    for idx, rays in _postprocess_subrays(args.out):
        target = os.path.join(jdir, f"ue_{idx:05d}.csv")
        if os.path.exists(target) and not args.force:
            raise FileExistsError(f"{target} exists; pass --force to overwrite")
        j = channel.jadpp(rays, scenario.JADPP_AZIMUTH_BINS,
                          scenario.JADPP_DELAY_BINS)
        scenario.write_jadpp_csv(target, j)
    return EXIT_OK


def cmd_power(args) -> int:
    import csv as _csv

    import numpy as np

    target = os.path.join(args.out, "power.csv")
    if os.path.exists(target) and not args.force:
        raise FileExistsError(f"{target} exists; pass --force to overwrite")
    with open(os.path.join(args.out, "scenario.json")) as fh:
        scen = json.load(fh)
    traj = {}
    with open(os.path.join(args.out, "trajectory.csv"), newline="") as fh:
        for row in _csv.DictReader(fh):
            traj[int(row["ue_index"])] = row
    from .channel import DB_FLOOR
    with open(target, "w", newline="") as fh:
        wr = _csv.writer(fh)
        wr.writerow(["ue_index", "time_s", "x", "y", "z", "power_db"])
        for idx, rays in _postprocess_subrays(args.out):
            p = sum(abs(sr.gain) ** 2 for sr in rays)
            db = 10.0 * np.log10(p) if p > 0.0 else DB_FLOOR
            db = max(float(db), DB_FLOOR)
            t = traj.get(idx, {})
            wr.writerow([idx, t.get("time_s", ""), t.get("x", ""),
                         t.get("y", ""), t.get("z", ""), repr(db)])
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "trace": cmd_trace,
    "run": cmd_run,
    "jadpp": cmd_jadpp,
    "power": cmd_power,
}


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (geometry.MapError, scenario.ScenarioError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        log.debug("unhandled failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
