"""Command-line front end.

Subcommands: tabulate-curve, run, compare, check.  Exit codes: 0 on success,
2 on configuration problems, 3 when --strict finds an invariant violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, harness
from .config import load_config
from .equilibrium import save_curve, tabulate_curve
from .errors import ConfigurationError, InvariantViolation, ParseError
from .harness import RunRecord
from .objectives import get_objective

logger = logging.getLogger("vistasim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


def _cmd_tabulate(args) -> int:
    cfg = load_config(args.config)
    spec = cfg.curve
    if spec.eta_max is None:
        raise ConfigurationError("config has no inline curve spec (eta_max missing)")
    seed = args.seed if args.seed is not None else spec.seed
    curve = tabulate_curve(spec.eta_grid(), cfg.utility, cfg.network, cfg.estimator,
                           len(cfg.w_init), spec.solver_config(), seed=seed,
                           workers=args.threads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_curve(curve, out)
    logger.info("wrote %s (%d points, sigma2 in [%g, %g])", out, len(curve.etas),
                curve.sigma2_min, curve.sigma2_max)
    return EXIT_OK


def _apply_overrides(cfg, args):
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["master_seed"] = args.seed
    if getattr(args, "runs", None) is not None:
        updates["runs"] = args.runs
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _strict_gate(batches, strict: bool) -> int:
    if not strict:
        return EXIT_OK
    for batch in batches:
        verdicts = diagnostics.run_pathwise_checks(batch.runs, batch.config.policy.b0)
        bad = {k: v for k, v in verdicts.items() if not v["ok"]}
        if bad:
            logger.error("invariant violations in policy %s: %s", batch.label,
                         json.dumps(bad, sort_keys=True))
            return EXIT_INVARIANT
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out_dir = Path(args.out) if args.out else cfg.output
    if out_dir is None:
        raise ConfigurationError("no output directory (config [run].output or --out)")
    batch = harness.run_batch(cfg, threads=args.threads)
    written = harness.write_batch(batch, out_dir, rounds=args.rounds)
    for p in written:
        logger.info("wrote %s", p)
    return _strict_gate([batch], args.strict)


def _cmd_compare(args) -> int:
    configs = [_apply_overrides(load_config(p), args) for p in args.configs]
    result = harness.compare(configs, threads=args.threads)
    written = harness.write_comparison(result, args.out, rounds=args.rounds)
    for p in written:
        logger.info("wrote %s", p)
    print(json.dumps({"ranking": result["ranking"]}, sort_keys=True, indent=2))
    return _strict_gate(result["batches"], args.strict)


def _load_rounds(path: Path) -> list[RunRecord]:
    text = path.read_text(encoding="ascii").splitlines()
    if not text or text[0] != harness.ROUNDS_HEADER:
        raise ParseError(f"missing rounds header '{harness.ROUNDS_HEADER}'",
                         line=1, column=1)
    by_run: dict[int, list[list[float]]] = {}
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 10:
            raise ParseError(f"expected 10 fields, got {len(fields)}",
                             line=lineno, column=len(fields))
        try:
            row = [float(x) for x in fields]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        by_run.setdefault(int(row[0]), []).append(row[1:])
    records = []
    for run_index in sorted(by_run):
        arr = np.array(by_run[run_index])
        records.append(RunRecord(
            run_index=run_index, eta=arr[:, 1], b=arr[:, 2],
            accepted=arr[:, 3].astype(bool), saturated=arr[:, 4].astype(bool),
            loss=arr[:, 5], gradsq=arr[:, 6], est_err_sq=arr[:, 7],
            r_star=arr[:, 8], final_w=np.array([]), left_region=False, summary={}))
    return records


def _cmd_check(args) -> int:
    rounds_path = Path(args.run)
    runs = _load_rounds(rounds_path)
    if args.b0 is not None:
        b0 = args.b0
    else:
        # rounds files sit next to <label>_summary.json written by `run`
        label = rounds_path.name.removesuffix("_rounds.csv")
        summary_path = rounds_path.parent / f"{label}_summary.json"
        try:
            summary = json.loads(summary_path.read_text())
            b0 = float(summary["config"]["policy"]["b0"])
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigurationError(
                f"cannot recover b0 from {summary_path} ({exc}); pass --b0") from exc
    verdicts = diagnostics.run_pathwise_checks(runs, b0)
    print(json.dumps(verdicts, sort_keys=True, indent=2))
    if args.strict and any(not v["ok"] for v in verdicts.values()):
        return EXIT_INVARIANT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vistasim",
        description="Adaptive acceptance-threshold SGD simulator",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tabulate-curve", help="tabulate the equilibrium curve")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(fn=_cmd_tabulate)

    p = sub.add_parser("run", help="run one experiment batch")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--rounds", action="store_true",
                   help="also write the per-round table")
    p.add_argument("--strict", action="store_true",
                   help="exit 3 if a pathwise invariant fails")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("compare", help="run several policies on one scenario")
    p.add_argument("--configs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--rounds", action="store_true")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("check", help="verify proof invariants on recorded rounds")
    p.add_argument("--run", required=True, help="path to a *_rounds.csv file")
    p.add_argument("--b0", type=float, default=None)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(fn=_cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ConfigurationError, ParseError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        logger.error("invariant violation: %s", exc)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
