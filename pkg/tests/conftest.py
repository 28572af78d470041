"""Shared fixtures: tabulated equilibrium curves are expensive, so they are
built once per setting, cached under artifacts/curves/, and reloaded on later
test runs (tabulation is deterministic given the seed, so the cache is sound).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from vistasim import (AdversaryUtility, EstimatorSpec, NetworkSpec, SolverConfig,
                      load_curve, save_curve, tabulate_curve)

REPO_ROOT = Path(__file__).resolve().parent.parent
ARTIFACTS = REPO_ROOT / "artifacts"
CURVE_DIR = ARTIFACTS / "curves"

# the four tabulated settings used by the acceptance suite and the heavier
# property tests; keyed by file stem
CURVE_SETTINGS = {
    # 1D suite: adversary-dominated 4-node network, two honest nodes
    "a1_1d": dict(net=NetworkSpec(n=4, n_honest=2, delta=1.0),
                  lam=0.1, d=1, eta_max=60.0, points=33,
                  samples=200_000, seed=1001),
    # 3D batch: canonical two-node instance
    "a2_3d": dict(net=NetworkSpec(n=2, n_honest=1, delta=1.0),
                  lam=0.03, d=3, eta_max=240.0, points=49,
                  samples=100_000, seed=1003),
    # per-coordinate scalar games embedded in 3 dimensions (oracle-mode suite)
    "a3_embedded3": dict(net=NetworkSpec(n=2, n_honest=1, delta=1.0,
                                         coupling="per-coordinate"),
                         lam=0.1, d=3, eta_max=60.0, points=33,
                         samples=100_000, seed=1005),
    # per-coordinate scalar games embedded in 2 dimensions (descent probes)
    "a5_embedded2": dict(net=NetworkSpec(n=2, n_honest=1, delta=1.0,
                                         coupling="per-coordinate"),
                         lam=0.1, d=2, eta_max=60.0, points=33,
                         samples=100_000, seed=1007),
}


def curve_path(name: str) -> Path:
    return CURVE_DIR / f"{name}.csv"


def ensure_curve(name: str):
    s = CURVE_SETTINGS[name]
    path = curve_path(name)
    if path.exists():
        return load_curve(path)
    grid = np.linspace(2.0, s["eta_max"], s["points"])
    curve = tabulate_curve(grid, AdversaryUtility(lam=s["lam"]), s["net"],
                           EstimatorSpec(), s["d"],
                           SolverConfig(samples=s["samples"]), seed=s["seed"])
    CURVE_DIR.mkdir(parents=True, exist_ok=True)
    save_curve(curve, path)
    return load_curve(path)  # hand back the file view so cached == fresh


@pytest.fixture(scope="session")
def curve_1d():
    return ensure_curve("a1_1d")


@pytest.fixture(scope="session")
def curve_3d():
    return ensure_curve("a2_3d")


@pytest.fixture(scope="session")
def curve_embedded3():
    return ensure_curve("a3_embedded3")


@pytest.fixture(scope="session")
def curve_embedded2():
    return ensure_curve("a5_embedded2")
