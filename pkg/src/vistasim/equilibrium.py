"""Adversary best response and the induced acceptance/error curve.

For each announced threshold eta the adversary (follower) picks the noise
magnitude r maximizing ``log(MSE) + lambda * log(PA)`` within the radial
point-mass family.  Both PA and MSE are estimated by Monte Carlo at the true
gradient fixed to zero, which is lossless for translation-equivariant
estimators.  Tabulating the best response over an eta grid and projecting the
PA / MSE columns to monotone nondecreasing sequences yields the curve the
controller inverts and the harness replays.

Monte Carlo evaluations inside one best-response solve share a common random
batch across magnitudes, so the objective seen by the grid search and the
golden-section refinement is a smooth deterministic function of r.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .errors import ConfigurationError, ParseError, SolverError
from .estimator import EstimatorSpec
from .workers import COUPLING_PER_COORD, ETA_MIN, NetworkSpec, _adversarial_batch, _honest_batch

logger = logging.getLogger(__name__)

Array = np.ndarray

CURVE_HEADER = "eta,pa,mse,r_star,pa_stderr,mse_stderr"
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AdversaryUtility:
    lam: float
    kind: str = "log-log"

    def __post_init__(self):
        if self.kind != "log-log":
            raise ConfigurationError(f"unsupported utility kind '{self.kind}'")
        if not (self.lam > 0):
            raise ConfigurationError("utility weight lambda must be > 0")


@dataclass(frozen=True)
class SolverConfig:
    samples: int = 100_000        # Monte Carlo rounds per (eta, r) evaluation
    coarse_points: int = 128      # grid points over r in [0, (eta+1)*delta]
    golden_iters: int = 48        # golden-section refinement steps


@dataclass
class EquilibriumPoint:
    eta: float
    pa: float
    mse: float
    r_star: float
    mc_samples: int
    pa_stderr: float
    mse_stderr: float


@dataclass
class StrategyEval:
    pa: float
    mse: float
    pa_stderr: float
    mse_stderr: float
    n_accepted: int

    @property
    def mse_defined(self) -> bool:
        return self.n_accepted > 0


def pav(values) -> Array:
    """Pool-adjacent-violators projection to a nondecreasing sequence
    (unweighted least squares)."""
    y = np.asarray(values, dtype=float)
    vals: list[float] = []
    counts: list[int] = []
    for v in y:
        vals.append(float(v))
        counts.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            v2, c2 = vals.pop(), counts.pop()
            v1, c1 = vals.pop(), counts.pop()
            vals.append((v1 * c1 + v2 * c2) / (c1 + c2))
            counts.append(c1 + c2)
    out = np.empty(len(y))
    i = 0
    for v, c in zip(vals, counts):
        out[i : i + c] = v
        i += c
    return out


class _StrategyBatch:
    """One fixed batch of round randomness, evaluable at any (eta, r).

    Honest noises and the adversary's direction are drawn once; only the
    magnitude r is swept.  The honest-honest acceptance distances and the
    honest-noise sum are r-independent and precomputed.
    """

    def __init__(self, net: NetworkSpec, d: int, samples: int, rng: Generator):
        if samples < 1:
            raise ConfigurationError("need at least one Monte Carlo sample")
        self.net = net
        self.d = d
        self.samples = samples
        k = net.n_honest
        self.honest = _honest_batch(d, net.delta, samples * k, rng, net.coupling)
        self.honest = self.honest.reshape(samples, k, d)
        # unit-magnitude adversarial draws; scaled by r at evaluation time
        self.adv_dir = _adversarial_batch(1.0, d, samples, rng, net.coupling)
        self.honest_sum = self.honest.sum(axis=1)
        per_coord = net.coupling == COUPLING_PER_COORD
        if k > 1:
            diff = self.honest[:, :, None, :] - self.honest[:, None, :, :]
            dist = np.abs(diff).max(axis=3) if per_coord else np.linalg.norm(diff, axis=3)
            self.hh_max = dist.max(axis=(1, 2))
        else:
            self.hh_max = np.zeros(samples)
        self._per_coord = per_coord

    def evaluate(self, eta: float, r: float, est: EstimatorSpec) -> StrategyEval:
        net = self.net
        tol = eta * net.delta
        if net.n_adversarial > 0:
            adv = r * self.adv_dir
            diff = self.honest - adv[:, None, :]
            ha = np.abs(diff).max(axis=(1, 2)) if self._per_coord else \
                np.linalg.norm(diff, axis=2).max(axis=1)
            acc = (self.hh_max <= tol) & (ha <= tol)
            err = (self.honest_sum + net.n_adversarial * adv) / net.n
        else:
            acc = self.hh_max <= tol
            err = self.honest_sum / net.n
        if est.kind != "mean":
            raise ConfigurationError(f"unsupported estimator kind '{est.kind}'")
        n_acc = int(acc.sum())
        pa = n_acc / self.samples
        pa_se = math.sqrt(max(pa * (1.0 - pa), 0.0) / self.samples)
        if n_acc == 0:
            return StrategyEval(pa=0.0, mse=math.nan, pa_stderr=pa_se,
                                mse_stderr=math.nan, n_accepted=0)
        err2 = np.einsum("ij,ij->i", err, err)[acc]
        mse = float(err2.mean())
        mse_se = float(err2.std(ddof=1) / math.sqrt(n_acc)) if n_acc > 1 else math.inf
        return StrategyEval(pa=pa, mse=mse, pa_stderr=pa_se, mse_stderr=mse_se,
                            n_accepted=n_acc)


def evaluate_strategy(eta: float, r: float, net: NetworkSpec, est: EstimatorSpec,
                      d: int, samples: int, rng: Generator) -> StrategyEval:
    """Monte Carlo acceptance probability and conditional MSE at a fixed
    (eta, r).  MSE is undefined (NaN) when no sampled round is accepted."""
    if samples < 10_000:
        raise ConfigurationError("evaluate_strategy needs >= 1e4 samples")
    batch = _StrategyBatch(net, d, samples, rng)
    return batch.evaluate(eta, r, est)


def _utility(lam: float, ev: StrategyEval) -> float:
    if ev.pa <= 0.0 or not ev.mse_defined or ev.mse <= 0.0:
        return -math.inf
    return math.log(ev.mse) + lam * math.log(ev.pa)


def best_response(eta: float, utility: AdversaryUtility, net: NetworkSpec,
                  est: EstimatorSpec, d: int, solver_cfg: SolverConfig,
                  rng: Generator) -> EquilibriumPoint:
    """Follower's best magnitude for the announced eta.

    Coarse grid over r in [0, (eta+1)*delta], then golden-section refinement
    around the grid argmax, all on one common-random-numbers batch.
    """
    if eta < ETA_MIN:
        raise ConfigurationError(f"eta={eta} below the admissible minimum {ETA_MIN}")
    batch = _StrategyBatch(net, d, solver_cfg.samples, rng)
    r_hi = (eta + 1.0) * net.delta
    grid = np.linspace(0.0, r_hi, solver_cfg.coarse_points)

    def f(r: float) -> float:
        return _utility(utility.lam, batch.evaluate(eta, r, est))

    utils = np.array([f(r) for r in grid])
    if not np.isfinite(utils).any():
        raise SolverError(f"no feasible adversary magnitude at eta={eta}")
    i = int(np.nanargmax(utils))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]

    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    e = a + _GOLDEN * (b - a)
    fc, fe = f(c), f(e)
    for _ in range(solver_cfg.golden_iters):
        if fc >= fe:
            b, e, fe = e, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + _GOLDEN * (b - a)
            fe = f(e)
    r_star = 0.5 * (a + b)
    if f(r_star) < utils[i]:
        r_star = float(grid[i])  # refinement never worsens the grid answer
    ev = batch.evaluate(eta, r_star, est)
    return EquilibriumPoint(eta=float(eta), pa=ev.pa, mse=ev.mse, r_star=float(r_star),
                            mc_samples=solver_cfg.samples, pa_stderr=ev.pa_stderr,
                            mse_stderr=ev.mse_stderr)


@dataclass
class EquilibriumCurve:
    etas: Array
    pa: Array
    mse: Array
    r_star: Array
    pa_stderr: Array
    mse_stderr: Array
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.etas)
        for name in ("pa", "mse", "r_star", "pa_stderr", "mse_stderr"):
            if len(getattr(self, name)) != n:
                raise ConfigurationError(f"curve column '{name}' has wrong length")
        if n == 0:
            raise ConfigurationError("curve needs at least one grid point")
        if np.any(np.diff(self.etas) <= 0):
            raise ConfigurationError("curve eta grid must be strictly increasing")

    @property
    def eta_min(self) -> float:
        return float(self.etas[0])

    @property
    def eta_max(self) -> float:
        return float(self.etas[-1])

    @property
    def sigma2_min(self) -> float:
        return float(self.mse[0])

    @property
    def sigma2_max(self) -> float:
        return float(self.mse[-1])

    @property
    def p_min(self) -> float:
        return float(self.pa[0])

    @property
    def p_max(self) -> float:
        return float(self.pa[-1])

    def monotonicity_violations(self) -> list[str]:
        out = []
        if np.any(np.diff(self.pa) < 0):
            out.append("pa column is not nondecreasing")
        if np.any(np.diff(self.mse) < 0):
            out.append("mse column is not nondecreasing")
        return out

    def _interp(self, column: Array, eta: float) -> float:
        if eta < self.eta_min or eta > self.eta_max:
            logger.warning("eta=%g outside tabulated range [%g, %g]; clamping",
                           eta, self.eta_min, self.eta_max)
        return float(np.interp(eta, self.etas, column))

    def mse_of_eta(self, eta: float) -> float:
        return self._interp(self.mse, eta)

    def pa_of_eta(self, eta: float) -> float:
        return self._interp(self.pa, eta)

    def r_star_of_eta(self, eta: float) -> float:
        return self._interp(self.r_star, eta)

    def eta_for_target_mse(self, target: float, tol: float = 1e-6) -> float:
        """Smallest eta whose interpolated MSE reaches the (clamped) target.

        Infimum semantics: on flat segments the left endpoint wins.  Located
        by bisection to absolute tolerance ``tol`` in eta.
        """
        t = min(self.sigma2_max, max(self.sigma2_min, target))
        lo, hi = self.eta_min, self.eta_max
        if self.mse_of_eta(lo) >= t:
            return lo
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if self.mse_of_eta(mid) >= t:
                hi = mid
            else:
                lo = mid
        return hi


def mse_of_eta(curve: EquilibriumCurve, eta: float) -> float:
    return curve.mse_of_eta(eta)


def pa_of_eta(curve: EquilibriumCurve, eta: float) -> float:
    return curve.pa_of_eta(eta)


def eta_for_target_mse(curve: EquilibriumCurve, target: float) -> float:
    return curve.eta_for_target_mse(target)


def tabulate_curve(eta_grid, utility: AdversaryUtility, net: NetworkSpec,
                   est: EstimatorSpec, d: int, solver_cfg: SolverConfig,
                   seed: int, workers: int = 1) -> EquilibriumCurve:
    """Best response per grid point, then isotonic projection of the pa and
    mse columns (Monte Carlo wiggle would otherwise break the threshold
    inversion).  The r_star column is projected too so the replayed adversary
    is monotone in eta.

    Each grid point gets an independent generator keyed on (seed, index), so
    the result does not depend on scheduling order.
    """
    etas = np.asarray(eta_grid, dtype=float)
    if len(etas) < 1:
        raise ConfigurationError("eta grid is empty")

    def solve(i: int) -> EquilibriumPoint:
        rng = Generator(Philox(SeedSequence((int(seed), int(i)))))
        try:
            return best_response(float(etas[i]), utility, net, est, d, solver_cfg, rng)
        except SolverError as exc:
            raise SolverError(f"at eta={etas[i]}: {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(solve, range(len(etas))))
    else:
        points = [solve(i) for i in range(len(etas))]

    return EquilibriumCurve(
        etas=etas,
        pa=pav([p.pa for p in points]),
        mse=pav([p.mse for p in points]),
        r_star=pav([p.r_star for p in points]),
        pa_stderr=np.array([p.pa_stderr for p in points]),
        mse_stderr=np.array([p.mse_stderr for p in points]),
    )


def save_curve(curve: EquilibriumCurve, path) -> None:
    """Text table, one row per grid point, 17 significant digits."""
    lines = [CURVE_HEADER]
    for i in range(len(curve.etas)):
        row = (curve.etas[i], curve.pa[i], curve.mse[i], curve.r_star[i],
               curve.pa_stderr[i], curve.mse_stderr[i])
        lines.append(",".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_curve(path) -> EquilibriumCurve:
    """Parse a saved curve; malformed input raises ParseError with the
    offending line and column.  Monotonicity problems are flagged on the
    returned curve, not raised."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read curve file {path}: {exc}") from exc
    if not lines or lines[0].strip() != CURVE_HEADER:
        raise ParseError(f"missing curve header '{CURVE_HEADER}'", line=1, column=1)
    ncol = len(CURVE_HEADER.split(","))
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != ncol:
            raise ParseError(f"expected {ncol} fields, got {len(fields)}",
                             line=lineno, column=len(fields))
        row = []
        for col, text in enumerate(fields, start=1):
            try:
                row.append(float(text))
            except ValueError:
                raise ParseError(f"bad float {text!r}", line=lineno, column=col) from None
        rows.append(row)
    if not rows:
        raise ParseError("curve table has no rows", line=2, column=1)
    arr = np.array(rows)
    curve = EquilibriumCurve(etas=arr[:, 0], pa=arr[:, 1], mse=arr[:, 2],
                             r_star=arr[:, 3], pa_stderr=arr[:, 4], mse_stderr=arr[:, 5])
    curve.warnings = curve.monotonicity_violations()
    for w in curve.warnings:
        logger.warning("loaded curve %s: %s", path, w)
    return curve
