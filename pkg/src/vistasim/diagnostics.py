"""Executable checks derived from the convergence analysis.

Pathwise checks (harmonic bound on the decayed squared rates, learning-rate
floor, counter coupling, frozen-on-reject) must hold with zero tolerance on
every recorded run.  The expected-descent probe and the rate-envelope check
are statistical: they compare Monte Carlo estimates against the one-step
descent bound and the ln(T)/sqrt(T) envelope at explicit stderr tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator

from .equilibrium import EquilibriumCurve
from .errors import InvariantViolation
from .estimator import EstimatorSpec, estimate
from .harness import RunRecord
from .objectives import Objective
from .workers import AdversaryStrategy, NetworkSpec, check_acceptance, make_reports

Array = np.ndarray


@dataclass
class SlackReport:
    ok: bool
    value: float          # the quantity being bounded
    bound: float
    slack: float          # bound - value
    first_violation_t: int | None = None
    detail: str = ""

    def raise_on_failure(self) -> None:
        if not self.ok:
            raise InvariantViolation(self.detail or "invariant check failed")


def check_harmonic_bound(run: RunRecord, b0: float) -> SlackReport:
    """sum_{t<=T'} sat_t * B_t^2 <= b0^2 (1 + ln(T'+1)) for every prefix."""
    contrib = np.where(run.saturated, run.b ** 2, 0.0)
    sums = np.cumsum(contrib)
    T = len(run)
    bounds = b0 ** 2 * (1.0 + np.log(np.arange(1, T + 1) + 1.0))
    bad = np.nonzero(sums > bounds)[0]
    if bad.size:
        t = int(bad[0])
        return SlackReport(
            ok=False, value=float(sums[t]), bound=float(bounds[t]),
            slack=float(bounds[t] - sums[t]), first_violation_t=t,
            detail=f"harmonic bound violated first at t={t}: "
                   f"{sums[t]:.6g} > {bounds[t]:.6g}")
    return SlackReport(ok=True, value=float(sums[-1]), bound=float(bounds[-1]),
                       slack=float(bounds[-1] - sums[-1]))


def check_lr_floor(run: RunRecord, b0: float) -> SlackReport:
    """B_t >= b0/sqrt(t+1) at every round (the decay counter can only have
    incremented t times by round t)."""
    T = len(run)
    floor = b0 / np.sqrt(np.arange(T) + 1.0)
    bad = np.nonzero(run.b < floor)[0]
    if bad.size:
        t = int(bad[0])
        return SlackReport(ok=False, value=float(run.b[t]), bound=float(floor[t]),
                           slack=float(run.b[t] - floor[t]), first_violation_t=t,
                           detail=f"learning-rate floor violated at t={t}: "
                                  f"{run.b[t]:.6g} < {floor[t]:.6g}")
    slack = float((run.b - floor).min())
    return SlackReport(ok=True, value=float(run.b.min()), bound=float(floor.min()),
                       slack=slack)


def check_counter_coupling(run: RunRecord) -> SlackReport:
    """Saturation implies acceptance, and the implied counters are sane."""
    bad = np.nonzero(run.saturated & ~run.accepted)[0]
    if bad.size:
        t = int(bad[0])
        return SlackReport(ok=False, value=1.0, bound=0.0, slack=-1.0,
                           first_violation_t=t,
                           detail=f"saturated round t={t} was not accepted")
    return SlackReport(ok=True, value=0.0, bound=0.0, slack=0.0)


def check_frozen_on_reject(run: RunRecord) -> SlackReport:
    """Rejected rounds leave the loss (hence the iterate) exactly unchanged."""
    rej = np.nonzero(~run.accepted)[0]
    rej = rej[rej > 0]
    bad = rej[run.loss[rej] != run.loss[rej - 1]]
    if bad.size:
        t = int(bad[0])
        return SlackReport(ok=False, value=float(run.loss[t]),
                           bound=float(run.loss[t - 1]), slack=0.0,
                           first_violation_t=t,
                           detail=f"loss changed on rejected round t={t}")
    return SlackReport(ok=True, value=0.0, bound=0.0, slack=0.0)


PATHWISE_CHECKS = {
    "harmonic_bound": check_harmonic_bound,
    "lr_floor": check_lr_floor,
    "counter_coupling": lambda run, b0: check_counter_coupling(run),
    "frozen_on_reject": lambda run, b0: check_frozen_on_reject(run),
}


def run_pathwise_checks(runs: list[RunRecord], b0: float) -> dict[str, dict]:
    """All pathwise checks over a batch; verdict per check, worst run first."""
    out = {}
    for name, fn in PATHWISE_CHECKS.items():
        failures = []
        min_slack = math.inf
        for r in runs:
            rep = fn(r, b0)
            min_slack = min(min_slack, rep.slack)
            if not rep.ok:
                failures.append({"run": r.run_index, "t": rep.first_violation_t,
                                 "detail": rep.detail})
        out[name] = {"ok": not failures, "min_slack": min_slack,
                     "violations": failures}
    return out


@dataclass
class DescentReport:
    ok: bool
    inconclusive: bool
    estimate: float        # Monte Carlo E[L(W_t)] at the probed state
    bound: float           # one-step expected-descent bound from curve values
    stderr: float
    accepted: int
    samples: int


def check_descent_inequality(objective: Objective, w: Array, eta: float, b: float,
                             curve: EquilibriumCurve, net: NetworkSpec,
                             est: EstimatorSpec, samples: int,
                             rng: Generator) -> DescentReport:
    """Probe the one-step bound
    E[L(W_t)] <= L(w) - b p (1 - ell b / 2) ||grad||^2 + (ell b^2 / 2) p sigma^2
    at a fixed state, with fresh per-probe randomness and the adversary playing
    the tabulated best response.  Fails only beyond 4 combined stderr."""
    w = np.asarray(w, dtype=float)
    g = objective.grad(w)
    gsq = float(np.dot(g, g))
    r = curve.r_star_of_eta(eta)
    strategy = AdversaryStrategy(magnitude=r)
    losses = np.empty(samples)
    n_acc = 0
    for i in range(samples):
        reports = make_reports(g, net, strategy, rng)
        if check_acceptance(reports, eta, net.delta, net.coupling):
            g_hat = estimate(est, reports)
            losses[i] = objective.value(w - b * g_hat)
            n_acc += 1
        else:
            losses[i] = objective.value(w)
    mean = float(losses.mean())
    se = float(losses.std(ddof=1) / math.sqrt(samples))

    p = curve.pa_of_eta(eta)
    s2 = curve.mse_of_eta(eta)
    ell = objective.smoothness
    bound = (objective.value(w)
             - b * p * (1.0 - ell * b / 2.0) * gsq
             + (ell * b * b / 2.0) * p * s2)
    # fold in the curve's own Monte Carlo uncertainty where it is known
    i = int(np.searchsorted(curve.etas, eta))
    i = min(max(i, 0), len(curve.etas) - 1)
    se_curve = (b * (1.0 - ell * b / 2.0) * gsq * curve.pa_stderr[i]
                + (ell * b * b / 2.0) * (p * curve.mse_stderr[i]
                                         + s2 * curve.pa_stderr[i]))
    tol = 4.0 * math.hypot(se, abs(float(se_curve)))
    inconclusive = n_acc < max(10, samples // 1000)
    ok = inconclusive or (mean <= bound + tol)
    return DescentReport(ok=ok, inconclusive=inconclusive, estimate=mean,
                         bound=bound, stderr=se, accepted=n_acc, samples=samples)


def check_descent_inequality_fast(objective: Objective, w: Array, eta: float,
                                  b: float, curve: EquilibriumCurve,
                                  net: NetworkSpec, est: EstimatorSpec,
                                  samples: int, rng: Generator) -> DescentReport:
    """Vectorized variant of the descent probe for quadratic-style objectives.

    Draws all rounds at once through the same samplers as the equilibrium
    module; only valid for the mean estimator.
    """
    from .equilibrium import _StrategyBatch

    w = np.asarray(w, dtype=float)
    d = len(w)
    g = objective.grad(w)
    gsq = float(np.dot(g, g))
    r = curve.r_star_of_eta(eta)
    batch = _StrategyBatch(net, d, samples, rng)
    adv = r * batch.adv_dir
    tol_acc = eta * net.delta
    if net.n_adversarial > 0:
        diff = batch.honest - adv[:, None, :]
        if net.coupling == "per-coordinate":
            ha = np.abs(diff).max(axis=(1, 2))
        else:
            ha = np.linalg.norm(diff, axis=2).max(axis=1)
        acc = (batch.hh_max <= tol_acc) & (ha <= tol_acc)
        noise = (batch.honest_sum + net.n_adversarial * adv) / net.n
    else:
        acc = batch.hh_max <= tol_acc
        noise = batch.honest_sum / net.n
    g_hat = g[None, :] + noise
    w_next = np.where(acc[:, None], w[None, :] - b * g_hat, w[None, :])
    losses = 0.5 * np.einsum("ij,ij->i", w_next, w_next) if objective.name.startswith(
        "quadratic") else np.array([objective.value(x) for x in w_next])
    mean = float(losses.mean())
    se = float(losses.std(ddof=1) / math.sqrt(samples))
    p = curve.pa_of_eta(eta)
    s2 = curve.mse_of_eta(eta)
    ell = objective.smoothness
    bound = (objective.value(w)
             - b * p * (1.0 - ell * b / 2.0) * gsq
             + (ell * b * b / 2.0) * p * s2)
    i = int(np.searchsorted(curve.etas, eta))
    i = min(max(i, 0), len(curve.etas) - 1)
    se_curve = (b * (1.0 - ell * b / 2.0) * gsq * curve.pa_stderr[i]
                + (ell * b * b / 2.0) * (p * curve.mse_stderr[i]
                                         + s2 * curve.pa_stderr[i]))
    tol = 4.0 * math.hypot(se, abs(float(se_curve)))
    n_acc = int(acc.sum())
    inconclusive = n_acc < max(10, samples // 1000)
    ok = inconclusive or (mean <= bound + tol)
    return DescentReport(ok=ok, inconclusive=inconclusive, estimate=mean,
                         bound=bound, stderr=se, accepted=n_acc, samples=samples)


@dataclass
class RateReport:
    ok: bool
    checkpoints: list[int]
    running_min: list[float]
    statistic: list[float]     # m(T') * sqrt(T') / ln(T')
    worst_ratio: float
    fitted_constant: float     # max of the statistic over checkpoints


def rate_fit(mean_gradsq: Array, checkpoints=None, ratio_tol: float = 1.25) -> RateReport:
    """Envelope check for the ln(T)/sqrt(T) rate on an oracle-mode batch.

    m(T') is the running minimum of the mean squared gradient norm; the
    statistic m(T') sqrt(T') / ln(T') must not grow by more than ratio_tol
    between consecutive checkpoints.
    """
    mean_gradsq = np.asarray(mean_gradsq, dtype=float)
    T = len(mean_gradsq)
    if checkpoints is None:
        checkpoints = [T // 8, T // 4, T // 2, T]
    checkpoints = [int(c) for c in checkpoints]
    if any(c < 2 or c > T for c in checkpoints):
        raise ValueError(f"checkpoints {checkpoints} out of range for T={T}")
    running = np.minimum.accumulate(mean_gradsq)
    m = [float(running[c - 1]) for c in checkpoints]
    stat = [mi * math.sqrt(c) / math.log(c) for mi, c in zip(m, checkpoints)]
    ratios = [stat[i + 1] / stat[i] for i in range(len(stat) - 1)]
    worst = max(ratios) if ratios else 1.0
    return RateReport(ok=worst <= ratio_tol, checkpoints=checkpoints,
                      running_min=m, statistic=stat, worst_ratio=worst,
                      fitted_constant=max(stat))
