"""Experiment configuration: TOML schema and validation.

Sections: objective, network, utility, policy, curve, run.  Unknown keys and
unknown sections are configuration errors so typos fail loudly.  The curve
section either names a tabulated curve file (``path``, resolved relative to
the config file) or gives an inline tabulation spec.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .errors import ConfigurationError
from .estimator import EstimatorSpec
from .equilibrium import AdversaryUtility, SolverConfig
from .workers import NetworkSpec

POLICY_KINDS = ("vista", "vista-oracle", "constant")


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    b0: float
    c: float = 1.0
    beta: float = 0.9
    eta0: float | None = None
    eta_fixed: float | None = None
    name: str = ""

    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == "constant":
            return f"constant{self.eta_fixed:g}"
        return self.kind


@dataclass(frozen=True)
class CurveSpec:
    path: Path | None = None
    eta_min: float = 2.0
    eta_max: float | None = None
    points: int = 33
    samples: int = 100_000
    coarse_points: int = 128
    seed: int = 0

    def solver_config(self) -> SolverConfig:
        return SolverConfig(samples=self.samples, coarse_points=self.coarse_points)

    def eta_grid(self) -> np.ndarray:
        if self.eta_max is None:
            raise ConfigurationError("inline curve spec needs eta_max")
        return np.linspace(self.eta_min, self.eta_max, self.points)


@dataclass(frozen=True)
class ExperimentConfig:
    objective_name: str
    w_init: np.ndarray
    network: NetworkSpec
    utility: AdversaryUtility
    estimator: EstimatorSpec
    policy: PolicySpec
    curve: CurveSpec
    T: int
    runs: int
    master_seed: int
    output: Path | None = None
    window: int | None = None
    record_stride: int = 1
    source: Path | None = field(default=None, compare=False)

    def echo(self) -> dict:
        """Plain-dict view of the config for result summaries."""
        return {
            "objective": {"name": self.objective_name,
                          "w_init": [float(x) for x in self.w_init]},
            "network": {"n": self.network.n, "n_honest": self.network.n_honest,
                        "delta": self.network.delta, "coupling": self.network.coupling},
            "utility": {"kind": self.utility.kind, "lambda": self.utility.lam},
            "policy": {"kind": self.policy.kind, "name": self.policy.label(),
                       "b0": self.policy.b0, "c": self.policy.c,
                       "beta": self.policy.beta, "eta0": self.policy.eta0,
                       "eta_fixed": self.policy.eta_fixed,
                       "estimator": self.estimator.kind},
            "curve": {"path": str(self.curve.path) if self.curve.path else None,
                      "eta_min": self.curve.eta_min, "eta_max": self.curve.eta_max,
                      "points": self.curve.points, "samples": self.curve.samples},
            "run": {"T": self.T, "runs": self.runs, "master_seed": self.master_seed,
                    "window": self.window, "record_stride": self.record_stride},
        }


_SECTIONS = {
    "objective": {"name", "w_init"},
    "network": {"n", "n_honest", "delta", "coupling"},
    "utility": {"kind", "lambda"},
    "policy": {"kind", "b0", "c", "beta", "eta0", "eta_fixed", "name", "estimator"},
    "curve": {"path", "eta_min", "eta_max", "points", "samples", "coarse_points", "seed"},
    "run": {"T", "runs", "master_seed", "output", "window", "record_stride"},
}
_REQUIRED = {
    "objective": {"name", "w_init"},
    "network": {"n", "n_honest", "delta"},
    "utility": {"lambda"},
    "policy": {"kind", "b0"},
    "curve": set(),
    "run": {"T", "runs", "master_seed"},
}


def _check_keys(data: dict) -> None:
    unknown_sections = set(data) - set(_SECTIONS)
    if unknown_sections:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown_sections)}")
    for name, keys in _SECTIONS.items():
        if name not in data:
            raise ConfigurationError(f"missing config section [{name}]")
        section = data[name]
        if not isinstance(section, dict):
            raise ConfigurationError(f"section [{name}] must be a table")
        bad = set(section) - keys
        if bad:
            raise ConfigurationError(f"unknown keys in [{name}]: {sorted(bad)}")
        missing = _REQUIRED[name] - set(section)
        if missing:
            raise ConfigurationError(f"missing keys in [{name}]: {sorted(missing)}")


def _num(section: dict, key: str, default=None):
    v = section.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigurationError(f"key '{key}' must be a number, got {v!r}")
    return v


def from_dict(data: dict, base_dir: Path | None = None,
              source: Path | None = None) -> ExperimentConfig:
    _check_keys(data)
    obj = data["objective"]
    w_init = np.asarray(obj["w_init"], dtype=float)
    if w_init.ndim != 1 or w_init.size == 0:
        raise ConfigurationError("w_init must be a non-empty flat array")

    net_d = data["network"]
    network = NetworkSpec(
        n=int(net_d["n"]),
        n_honest=int(net_d["n_honest"]),
        delta=float(_num(net_d, "delta")),
        coupling=net_d.get("coupling", "joint"),
    )

    util_d = data["utility"]
    utility = AdversaryUtility(lam=float(_num(util_d, "lambda")),
                               kind=util_d.get("kind", "log-log"))

    pol_d = data["policy"]
    kind = pol_d["kind"]
    if kind not in POLICY_KINDS:
        raise ConfigurationError(f"unknown policy kind '{kind}'")
    if kind == "constant" and _num(pol_d, "eta_fixed") is None:
        raise ConfigurationError("constant policy needs eta_fixed")
    policy = PolicySpec(
        kind=kind,
        b0=float(_num(pol_d, "b0")),
        c=float(_num(pol_d, "c", 1.0)),
        beta=float(_num(pol_d, "beta", 0.9)),
        eta0=_num(pol_d, "eta0"),
        eta_fixed=_num(pol_d, "eta_fixed"),
        name=pol_d.get("name", ""),
    )
    estimator = EstimatorSpec(kind=pol_d.get("estimator", "mean"))

    cur_d = data["curve"]
    path = cur_d.get("path")
    if path is not None:
        path = Path(path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
    elif cur_d.get("eta_max") is None:
        raise ConfigurationError("curve section needs either path or eta_max")
    curve = CurveSpec(
        path=path,
        eta_min=float(_num(cur_d, "eta_min", 2.0)),
        eta_max=_num(cur_d, "eta_max"),
        points=int(_num(cur_d, "points", 33)),
        samples=int(_num(cur_d, "samples", 100_000)),
        coarse_points=int(_num(cur_d, "coarse_points", 128)),
        seed=int(_num(cur_d, "seed", 0)),
    )

    run_d = data["run"]
    T = int(_num(run_d, "T"))
    runs = int(_num(run_d, "runs"))
    if T < 1:
        raise ConfigurationError("T must be >= 1")
    if runs < 1:
        raise ConfigurationError("runs must be >= 1")
    output = run_d.get("output")
    if output is not None:
        output = Path(output)
        if base_dir is not None and not output.is_absolute():
            output = base_dir / output
    window = run_d.get("window")
    if window is not None:
        window = int(window)
        if window < 1:
            raise ConfigurationError("window must be >= 1")
    record_stride = int(run_d.get("record_stride", 1))
    if record_stride < 1:
        raise ConfigurationError("record_stride must be >= 1")

    return ExperimentConfig(
        objective_name=obj["name"],
        w_init=w_init,
        network=network,
        utility=utility,
        estimator=estimator,
        policy=policy,
        curve=curve,
        T=T,
        runs=runs,
        master_seed=int(_num(run_d, "master_seed")),
        output=output,
        window=window,
        record_stride=record_stride,
        source=source,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    return from_dict(data, base_dir=path.parent, source=path)
