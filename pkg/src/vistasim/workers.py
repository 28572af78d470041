"""Per-round report generation for honest and adversarial workers.

Honest nodes report the true gradient plus bounded noise; adversarial nodes
collude and all submit one shared strategic noise realization per round
(identical copies).  The adversary family is radially symmetric with a point
mass on the magnitude: a single scalar r, direction uniform on the sphere.
Symmetry of both noise sources makes the mean estimate conditionally unbiased
given acceptance, which the descent analysis relies on.

Two coupling modes are supported:

* ``joint``: honest noise uniform on the Euclidean d-ball of radius delta,
  adversarial noise r times a uniform unit vector, acceptance tested with
  pairwise L2 distances.
* ``per-coordinate``: every coordinate runs an independent scalar game
  (honest uniform on [-delta, delta], adversarial +/- r per coordinate),
  acceptance tested per coordinate, i.e. pairwise L-infinity distances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, PolicyError

Array = np.ndarray

COUPLING_JOINT = "joint"
COUPLING_PER_COORD = "per-coordinate"
_COUPLINGS = (COUPLING_JOINT, COUPLING_PER_COORD)

ETA_MIN = 2.0  # honest reports can disagree by up to 2*delta


@dataclass(frozen=True)
class NetworkSpec:
    n: int
    n_honest: int
    delta: float
    coupling: str = COUPLING_JOINT

    def __post_init__(self):
        if self.n_honest < 1:
            raise ConfigurationError("need at least one honest node")
        if self.n_honest > self.n:
            raise ConfigurationError("n_honest exceeds n")
        if not (self.delta > 0):
            raise ConfigurationError("delta must be positive")
        if self.coupling not in _COUPLINGS:
            raise ConfigurationError(f"unknown coupling '{self.coupling}'")

    @property
    def n_adversarial(self) -> int:
        return self.n - self.n_honest


@dataclass(frozen=True)
class AdversaryStrategy:
    magnitude: float                      # radial noise magnitude r >= 0
    coordination: str = "identical-copies"

    def __post_init__(self):
        if not np.isfinite(self.magnitude) or self.magnitude < 0:
            raise ConfigurationError("adversary magnitude must be finite and >= 0")


@dataclass
class RoundReports:
    reports: Array                 # (n, d), honest rows first
    true_grad: Array               # (d,), telemetry only
    n_honest: int = field(default=0)

    @property
    def n(self) -> int:
        return self.reports.shape[0]

    @property
    def dim(self) -> int:
        return self.reports.shape[1]


def _honest_batch(d: int, delta: float, size: int, rng: np.random.Generator,
                  coupling: str = COUPLING_JOINT) -> Array:
    """(size, d) honest noise draws."""
    if d < 1:
        raise ConfigurationError("dimension must be >= 1")
    if coupling == COUPLING_PER_COORD or d == 1:
        return rng.uniform(-delta, delta, size=(size, d))
    x = rng.standard_normal((size, d))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    radii = delta * rng.random(size) ** (1.0 / d)
    return x / norms * radii[:, None]


def _adversarial_batch(magnitude: float, d: int, size: int, rng: np.random.Generator,
                       coupling: str = COUPLING_JOINT) -> Array:
    """(size, d) adversarial noise draws at a fixed magnitude."""
    if coupling == COUPLING_PER_COORD or d == 1:
        signs = rng.integers(0, 2, size=(size, d)) * 2 - 1
        return magnitude * signs.astype(float)
    x = rng.standard_normal((size, d))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return magnitude * x / norms


def sample_honest_noise(d: int, delta: float, rng: np.random.Generator,
                        coupling: str = COUPLING_JOINT) -> Array:
    """One honest noise vector: uniform on the delta-ball (joint mode)."""
    if not (delta > 0):
        raise ConfigurationError("delta must be positive")
    return _honest_batch(d, delta, 1, rng, coupling)[0]


def sample_adversarial_noise(strategy: AdversaryStrategy, d: int, rng: np.random.Generator,
                             coupling: str = COUPLING_JOINT) -> Array:
    """One adversarial noise vector: magnitude r, isotropic direction."""
    return _adversarial_batch(strategy.magnitude, d, 1, rng, coupling)[0]


def make_reports(grad: Array, net: NetworkSpec, strategy: AdversaryStrategy,
                 rng: np.random.Generator) -> RoundReports:
    """Reports for one round: fresh honest noise per honest node, one shared
    adversarial realization replicated over all adversarial nodes."""
    grad = np.asarray(grad, dtype=float)
    d = grad.shape[0]
    reports = np.empty((net.n, d))
    honest = _honest_batch(d, net.delta, net.n_honest, rng, net.coupling)
    reports[: net.n_honest] = grad + honest
    if net.n_adversarial > 0:
        adv = sample_adversarial_noise(strategy, d, rng, net.coupling)
        reports[net.n_honest:] = grad + adv
    return RoundReports(reports=reports, true_grad=grad, n_honest=net.n_honest)


def check_acceptance(reports: RoundReports, eta: float, delta: float,
                     coupling: str = COUPLING_JOINT) -> bool:
    """True iff every pairwise report distance is <= eta*delta.

    Ties are accepted (non-strict comparison).  Joint mode uses L2 distances;
    per-coordinate mode requires every coordinate pair to pass the scalar
    test, which is the pairwise L-infinity distance.
    """
    if eta < ETA_MIN:
        raise PolicyError(f"acceptance threshold eta={eta} below {ETA_MIN}")
    if not (delta > 0):
        raise ConfigurationError("delta must be positive")
    y = reports.reports
    diff = y[:, None, :] - y[None, :, :]
    if coupling == COUPLING_PER_COORD:
        dists = np.abs(diff).max(axis=2)
    else:
        dists = np.linalg.norm(diff, axis=2)
    return bool(dists.max() <= eta * delta)
