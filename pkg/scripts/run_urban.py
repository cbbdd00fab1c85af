#!/usr/bin/env python3
"""Run the full pipeline on the urban fixture and render the figures.

Generates the fixture if needed, simulates the 166-position street
trajectory, and (if the plotkit console script is installed) renders the
path overlay, JADPP heatmap and power trace from the run directory.
"""

import argparse
import os
import shutil
import subprocess
import sys
import time

from mmwsim import scenario
from mmwsim.fixtures import urban_map_dict, urban_scenario_dict, write_json


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="urban_run", help="run directory")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0,
                        help="cluster master seed")
    parser.add_argument("--force", action="store_true")
    args = parser.parse_args()

    fixture = os.path.join(args.out, "fixture")
    os.makedirs(fixture, exist_ok=True)
    map_path = os.path.join(fixture, "map.json")
    scen_path = os.path.join(fixture, "scenario.json")
    if not os.path.exists(map_path):
        write_json(urban_map_dict(), map_path)
    write_json(urban_scenario_dict(master_seed=args.seed), scen_path)

    cfg = scenario.load_scenario(scen_path)
    t0 = time.perf_counter()
    report = scenario.run(cfg, args.out, threads=args.threads,
                          force=args.force)
    wall = time.perf_counter() - t0
    print(f"simulated {report['positions']} positions over "
          f"{report['surfaces']} surfaces in {wall:.1f} s")
    if report["errors"]:
        print(f"warning: {len(report['errors'])} positions failed",
              file=sys.stderr)

    if shutil.which("plotkit") is None:
        print("plotkit not installed; skipping figures")
        return
    for kind in ("paths", "jadpp", "power"):
        out_img = os.path.join(args.out, f"{kind}.png")
        rc = subprocess.run(["plotkit", kind, "--run", args.out,
                             "--out", out_img]).returncode
        print(f"{kind}: {'wrote ' + out_img if rc == 0 else f'failed ({rc})'}")


if __name__ == "__main__":
    main()
