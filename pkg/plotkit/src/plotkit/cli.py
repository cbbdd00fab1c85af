"""Command-line front end: ``plotkit <kind> --run DIR --out FILE
[--vmin DB --vmax DB]``.

Exit codes: 0 success, 1 usage error, 2 missing or malformed artifact.
"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, ArtifactError, PlotSpec, render

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ARTIFACT = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="plotkit",
                     description="Render figures from a simulator run directory.")
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument("--run", required=True, help="run directory")
    parser.add_argument("--out", required=True, help="output image file")
    parser.add_argument("--vmin", type=float, help="color/axis floor in dB")
    parser.add_argument("--vmax", type=float, help="color/axis ceiling in dB")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    spec = PlotSpec(run_dir=args.run, kind=args.kind, out_path=args.out,
                    vmin=args.vmin, vmax=args.vmax)
    try:
        render(spec)
    except (ArtifactError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
