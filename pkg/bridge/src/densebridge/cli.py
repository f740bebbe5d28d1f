"""Bridge executable.

Usage: ``densebridge export --kind {density,features,motion} --model ID
--frames DIR --out DIR [--points DIR] [--patch-size 20]``

The verb lives under the ``densebridge`` entry point because a script
literally named ``export`` would be shadowed by the shell builtin.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .exporter import KINDS, ExtractorSpec, run_export
from .models import ModelError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="densebridge",
        description="serialize model outputs into tracking interchange files",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="run one model kind over a frame directory")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--model", required=True, help="model identifier")
    p.add_argument("--frames", required=True, help="directory of .ppm frames")
    p.add_argument("--out", required=True, help="output bundle directory")
    p.add_argument("--points", default=None,
                   help="points directory (feature export only)")
    p.add_argument("--patch-size", type=int, default=20)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    spec = ExtractorSpec(
        kind=args.kind,
        model=args.model,
        frames_dir=args.frames,
        out_dir=args.out,
        points_dir=args.points,
        patch_size=args.patch_size,
    )
    try:
        written = run_export(spec)
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"kind={spec.kind}")
    print(f"model={spec.model}")
    print(f"files={len(written)}")
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
