"""vista-plot: render figures from simulator output files."""

from __future__ import annotations

import argparse
import logging
import sys

from .plots import KINDS, METRICS, PlotSpec, SchemaError, render

logger = logging.getLogger("vistaplots")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vista-plot",
                                     description="Render simulator results")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="PATH")
    parser.add_argument("--out", required=True)
    parser.add_argument("--window", type=int, default=None,
                        help="trailing moving-average window")
    parser.add_argument("--logy", action="store_true")
    parser.add_argument("--metric", choices=METRICS, default="loss")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    spec = PlotSpec(kind=args.kind, inputs=args.inputs, out=args.out,
                    window=args.window, logy=args.logy, metric=args.metric)
    try:
        out = render(spec)
    except (SchemaError, OSError) as exc:
        logger.error("%s", exc)
        return 2
    logger.info("wrote %s", out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
