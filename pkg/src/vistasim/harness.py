"""Experiment orchestration: the announce/best-respond/report/accept loop.

Each round the policy announces a threshold, the adversary plays the
tabulated best-response magnitude for that threshold (piecewise-linear in
eta, so the controller and the simulated adversary share one source of
truth), workers report, and the estimate feeds the controller on acceptance.

Randomness is counter-based: every (master_seed, run, round, purpose) tuple
owns an independent Philox stream, so adding telemetry or reordering
bookkeeping can never perturb trajectories.  Batches aggregate run records in
run-index order regardless of execution order, and results files are written
with fixed formatting, so a (config, master_seed) pair fully determines every
emitted byte.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .config import ExperimentConfig
from .controller import (MODE_EMA, MODE_ORACLE, ConstantController, VistaConfig,
                         VistaController, check_rate_condition)
from .equilibrium import EquilibriumCurve, load_curve, tabulate_curve
from .errors import ConfigurationError
from .estimator import estimate
from .objectives import Objective, get_objective
from .workers import AdversaryStrategy, check_acceptance, make_reports

logger = logging.getLogger(__name__)

Array = np.ndarray

AGGREGATE_HEADER = ("t,mean_loss,std_loss,mean_gradsq,std_gradsq,mean_eta,"
                    "accept_rate,saturate_rate,mean_b")
ROUNDS_HEADER = "run,t,eta,b,accepted,saturated,loss,gradsq,est_err_sq,r_star"

PURPOSE_REPORTS = 0
PURPOSE_PROBE = 7  # reserved for diagnostics probes, never used by runs


def _run_key(master_seed: int, run_index: int) -> Array:
    return SeedSequence((int(master_seed), int(run_index))).generate_state(2, np.uint64)


def round_rng(key: Array, t: int, purpose: int) -> Generator:
    counter = np.array([0, 0, purpose, t], dtype=np.uint64)
    return Generator(Philox(counter=counter, key=key))


@dataclass
class RunRecord:
    run_index: int
    eta: Array
    b: Array
    accepted: Array        # bool
    saturated: Array       # bool
    loss: Array
    gradsq: Array
    est_err_sq: Array      # NaN on rejected rounds
    r_star: Array
    final_w: Array
    left_region: bool
    summary: dict

    def __len__(self) -> int:
        return len(self.loss)


@dataclass
class BatchResult:
    config: ExperimentConfig
    runs: list[RunRecord]
    aggregate: dict[str, Array]
    curve_stats: dict | None = None

    @property
    def label(self) -> str:
        return self.config.policy.label()


def resolve_curve(cfg: ExperimentConfig, cache: dict | None = None) -> EquilibriumCurve:
    """Load the curve file if the config names one, else tabulate inline."""
    spec = cfg.curve
    if spec.path is not None:
        return load_curve(spec.path)
    key = (spec.eta_min, spec.eta_max, spec.points, spec.samples, spec.seed,
           cfg.network, cfg.utility, len(cfg.w_init))
    if cache is not None and key in cache:
        return cache[key]
    logger.info("tabulating curve inline: eta in [%g, %g], %d points",
                spec.eta_min, spec.eta_max, spec.points)
    curve = tabulate_curve(spec.eta_grid(), cfg.utility, cfg.network, cfg.estimator,
                           len(cfg.w_init), spec.solver_config(), seed=spec.seed)
    if cache is not None:
        cache[key] = curve
    return curve


def build_policy(cfg: ExperimentConfig, curve: EquilibriumCurve):
    p = cfg.policy
    if p.kind == "constant":
        return ConstantController(float(p.eta_fixed), p.b0, curve, cfg.w_init)
    mode = MODE_ORACLE if p.kind == "vista-oracle" else MODE_EMA
    vcfg = VistaConfig(b0=p.b0, c=p.c, beta=p.beta, curve=curve, eta0=p.eta0, mode=mode)
    return VistaController(vcfg, cfg.w_init)


def run_single(cfg: ExperimentConfig, run_index: int, *,
               curve: EquilibriumCurve | None = None,
               objective: Objective | None = None) -> RunRecord:
    """One seeded trajectory of T rounds; deterministic given (config, run)."""
    obj = objective if objective is not None else get_objective(cfg.objective_name)
    if obj.dim != len(cfg.w_init):
        raise ConfigurationError(
            f"w_init has dim {len(cfg.w_init)}, objective '{obj.name}' wants {obj.dim}")
    crv = curve if curve is not None else resolve_curve(cfg)
    pol = build_policy(cfg, crv)
    oracle_mode = cfg.policy.kind == "vista-oracle"
    net = cfg.network
    est_spec = cfg.estimator
    T = cfg.T
    key = _run_key(cfg.master_seed, run_index)

    eta_a = np.empty(T)
    b_a = np.empty(T)
    acc_a = np.zeros(T, dtype=bool)
    sat_a = np.zeros(T, dtype=bool)
    loss_a = np.empty(T)
    gsq_a = np.empty(T)
    err_a = np.full(T, math.nan)
    rst_a = np.empty(T)
    left_region = False
    sat_entry = -1

    for t in range(T):
        w = pol.w
        g = obj.grad(w)
        eta_t = pol.eta
        r_t = crv.r_star_of_eta(eta_t)
        b_t = pol.current_learning_rate()
        rng = round_rng(key, t, PURPOSE_REPORTS)
        reports = make_reports(g, net, AdversaryStrategy(magnitude=r_t), rng)
        accepted = check_acceptance(reports, eta_t, net.delta, net.coupling)
        saturated = False
        if accepted:
            g_hat = estimate(est_spec, reports)
            if oracle_mode:
                w_next = w - b_t * g_hat
                g_next = obj.grad(w_next)
                saturated = pol.on_accepted(g_hat, float(np.dot(g_next, g_next)))
            else:
                saturated = pol.on_accepted(g_hat)
            diff = g_hat - g
            err_a[t] = float(np.dot(diff, diff))
        else:
            pol.on_rejected()
        eta_a[t] = eta_t
        b_a[t] = b_t
        acc_a[t] = accepted
        sat_a[t] = saturated
        gsq_a[t] = float(np.dot(g, g))
        rst_a[t] = r_t
        w_now = pol.w
        loss_a[t] = obj.value(w_now)
        if saturated and sat_entry < 0:
            sat_entry = t
        if not left_region and np.abs(w_now).max() > obj.region_radius:
            left_region = True
            logger.warning("run %d left the certified region at round %d", run_index, t)

    summary = {
        "final_loss": float(loss_a[-1]),
        "min_gradsq": float(gsq_a.min()),
        "acceptance_rate": float(acc_a.mean()),
        "saturation_entry_round": sat_entry,
        "left_region": left_region,
    }
    return RunRecord(run_index=run_index, eta=eta_a, b=b_a, accepted=acc_a,
                     saturated=sat_a, loss=loss_a, gradsq=gsq_a, est_err_sq=err_a,
                     r_star=rst_a, final_w=pol.w.copy(), left_region=left_region,
                     summary=summary)


def _column_stats(runs: list[RunRecord], attr: str) -> tuple[Array, Array]:
    mat = np.stack([getattr(r, attr) for r in runs])
    mean = mat.mean(axis=0)
    std = mat.std(axis=0, ddof=1) if len(runs) > 1 else np.zeros(mat.shape[1])
    return mean, std


def aggregate_runs(runs: list[RunRecord]) -> dict[str, Array]:
    mean_loss, std_loss = _column_stats(runs, "loss")
    mean_gsq, std_gsq = _column_stats(runs, "gradsq")
    return {
        "t": np.arange(len(runs[0])),
        "mean_loss": mean_loss,
        "std_loss": std_loss,
        "mean_gradsq": mean_gsq,
        "std_gradsq": std_gsq,
        "mean_eta": np.stack([r.eta for r in runs]).mean(axis=0),
        "accept_rate": np.stack([r.accepted for r in runs]).mean(axis=0),
        "saturate_rate": np.stack([r.saturated for r in runs]).mean(axis=0),
        "mean_b": np.stack([r.b for r in runs]).mean(axis=0),
    }


def run_batch(cfg: ExperimentConfig, *, curve: EquilibriumCurve | None = None,
              threads: int = 1) -> BatchResult:
    """All runs of one config; per-run seeds derive from (master_seed, index)."""
    obj = get_objective(cfg.objective_name)
    crv = curve if curve is not None else resolve_curve(cfg)
    if cfg.policy.kind == "vista-oracle" and not check_rate_condition(
            cfg.policy.b0, cfg.policy.c, obj.smoothness):
        logger.warning(
            "oracle mode with b0=%g > 1/(ell(1+c))=%g: the proved rate does "
            "not apply", cfg.policy.b0,
            1.0 / (obj.smoothness * (1.0 + cfg.policy.c)))

    def one(i: int) -> RunRecord:
        return run_single(cfg, i, curve=crv, objective=obj)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(one, range(cfg.runs)))
    else:
        runs = [one(i) for i in range(cfg.runs)]
    # diagnostic-only view of the equilibrium the runs were played against
    curve_stats = {
        "eta_min": crv.eta_min, "eta_max": crv.eta_max,
        "p_min": crv.p_min, "p_max": crv.p_max,
        "sigma2_min": crv.sigma2_min, "sigma2_max": crv.sigma2_max,
    }
    return BatchResult(config=cfg, runs=runs, aggregate=aggregate_runs(runs),
                       curve_stats=curve_stats)


def moving_average(x: Array, window: int) -> Array:
    """Trailing moving average with a growing head window."""
    c = np.cumsum(np.concatenate(([0.0], x)))
    t = np.arange(1, len(x) + 1)
    lo = np.maximum(t - window, 0)
    return (c[t] - c[lo]) / (t - lo)


def _fmt(v) -> str:
    return f"{v:.17g}"


def _aggregate_lines(agg: dict[str, Array]) -> list[str]:
    lines = [AGGREGATE_HEADER]
    T = len(agg["t"])
    for t in range(T):
        lines.append(",".join([
            str(int(agg["t"][t])),
            _fmt(agg["mean_loss"][t]), _fmt(agg["std_loss"][t]),
            _fmt(agg["mean_gradsq"][t]), _fmt(agg["std_gradsq"][t]),
            _fmt(agg["mean_eta"][t]), _fmt(agg["accept_rate"][t]),
            _fmt(agg["saturate_rate"][t]), _fmt(agg["mean_b"][t]),
        ]))
    return lines


def write_batch(batch: BatchResult, out_dir, *, rounds: bool = False) -> list[Path]:
    """Aggregate CSV + JSON summary per policy; optionally the raw per-round
    table (thinned by record_stride) and a moving-averaged twin of the
    aggregate when a window is configured."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    label = batch.label
    written = []

    csv_path = out_dir / f"{label}.csv"
    csv_path.write_text("\n".join(_aggregate_lines(batch.aggregate)) + "\n",
                        encoding="ascii")
    written.append(csv_path)

    cfg = batch.config
    if cfg.window is not None:
        runs = batch.runs
        ma_loss = np.stack([moving_average(r.loss, cfg.window) for r in runs])
        ma_gsq = np.stack([moving_average(r.gradsq, cfg.window) for r in runs])
        agg = dict(batch.aggregate)
        agg["mean_loss"] = ma_loss.mean(axis=0)
        agg["std_loss"] = ma_loss.std(axis=0, ddof=1) if len(runs) > 1 else \
            np.zeros(ma_loss.shape[1])
        agg["mean_gradsq"] = ma_gsq.mean(axis=0)
        agg["std_gradsq"] = ma_gsq.std(axis=0, ddof=1) if len(runs) > 1 else \
            np.zeros(ma_gsq.shape[1])
        ma_path = out_dir / f"{label}_ma.csv"
        ma_path.write_text("\n".join(_aggregate_lines(agg)) + "\n", encoding="ascii")
        written.append(ma_path)

    if rounds:
        stride = cfg.record_stride
        lines = [ROUNDS_HEADER]
        for r in batch.runs:
            for t in range(0, len(r), stride):
                lines.append(",".join([
                    str(r.run_index), str(t), _fmt(r.eta[t]), _fmt(r.b[t]),
                    str(int(r.accepted[t])), str(int(r.saturated[t])),
                    _fmt(r.loss[t]), _fmt(r.gradsq[t]),
                    _fmt(r.est_err_sq[t]), _fmt(r.r_star[t]),
                ]))
        rounds_path = out_dir / f"{label}_rounds.csv"
        rounds_path.write_text("\n".join(lines) + "\n", encoding="ascii")
        written.append(rounds_path)

    summary = {
        "policy": label,
        "master_seed": cfg.master_seed,
        "runs": cfg.runs,
        "T": cfg.T,
        "final": {
            "mean_loss": float(batch.aggregate["mean_loss"][-1]),
            "std_loss": float(batch.aggregate["std_loss"][-1]),
            "mean_gradsq": float(batch.aggregate["mean_gradsq"][-1]),
            "std_gradsq": float(batch.aggregate["std_gradsq"][-1]),
            "mean_eta": float(batch.aggregate["mean_eta"][-1]),
            "accept_rate_overall": float(np.mean([r.summary["acceptance_rate"]
                                                  for r in batch.runs])),
        },
        "left_region_runs": int(sum(r.left_region for r in batch.runs)),
        "equilibrium": batch.curve_stats,
        "config": cfg.echo(),
    }
    json_path = out_dir / f"{label}_summary.json"
    json_path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n",
                         encoding="ascii")
    written.append(json_path)
    return written


_SHARED_FIELDS = ("objective_name", "network", "utility", "T")


def compare(configs: list[ExperimentConfig], *, curves: list[EquilibriumCurve] | None = None,
            threads: int = 1) -> dict:
    """Run several policies on one shared scenario and rank the endpoints."""
    if not configs:
        raise ConfigurationError("compare needs at least one config")
    ref = configs[0]
    for c in configs[1:]:
        for f in _SHARED_FIELDS:
            if getattr(c, f) != getattr(ref, f):
                raise ConfigurationError(f"configs disagree on shared field '{f}'")
        if not np.array_equal(c.w_init, ref.w_init):
            raise ConfigurationError("configs disagree on shared field 'w_init'")
    labels = [c.policy.label() for c in configs]
    if len(set(labels)) != len(labels):
        raise ConfigurationError(f"duplicate policy labels: {labels}")
    cache: dict = {}
    batches = []
    for i, c in enumerate(configs):
        crv = curves[i] if curves is not None else resolve_curve(c, cache=cache)
        batches.append(run_batch(c, curve=crv, threads=threads))
    ranking = sorted(
        ((b.label, float(b.aggregate["mean_gradsq"][-1]),
          float(b.aggregate["mean_loss"][-1])) for b in batches),
        key=lambda row: row[1],
    )
    return {
        "batches": batches,
        "ranking": [
            {"policy": lbl, "final_mean_gradsq": g, "final_mean_loss": l}
            for lbl, g, l in ranking
        ],
    }


def write_comparison(result: dict, out_dir, *, rounds: bool = False) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for batch in result["batches"]:
        written.extend(write_batch(batch, out_dir, rounds=rounds))

    batches = result["batches"]
    header = ["t"]
    for b in batches:
        for col in ("mean_loss", "std_loss", "mean_gradsq", "std_gradsq"):
            header.append(f"{b.label}.{col}")
    lines = [",".join(header)]
    T = len(batches[0].aggregate["t"])
    for t in range(T):
        row = [str(t)]
        for b in batches:
            agg = b.aggregate
            row.extend(_fmt(agg[col][t]) for col in
                       ("mean_loss", "std_loss", "mean_gradsq", "std_gradsq"))
        lines.append(",".join(row))
    cmp_path = out_dir / "comparison.csv"
    cmp_path.write_text("\n".join(lines) + "\n", encoding="ascii")
    written.append(cmp_path)

    rank_path = out_dir / "comparison.json"
    rank_path.write_text(json.dumps({"ranking": result["ranking"]},
                                    sort_keys=True, indent=2) + "\n", encoding="ascii")
    written.append(rank_path)
    return written
