"""Figure rendering over the simulator's CSV output contract.

This package is a pure consumer of the files the simulation harness emits
(aggregate CSVs with the ``t,mean_loss,...`` header and curve tables with the
``eta,pa,...`` header); it never imports the simulator.  Four figure kinds
are supported:

* ``trajectory``: per-policy mean loss (or squared gradient norm) over
  rounds, shaded with +/- one standard deviation across runs.
* ``eta-trace``: the mean announced threshold over rounds.
* ``curve``: acceptance probability and conditional error of the tabulated
  equilibrium, side by side.
* ``sensitivity``: metric trajectories and threshold traces side by side,
  one series per input (hyperparameter sweeps).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("trajectory", "eta-trace", "curve", "sensitivity")
METRICS = ("loss", "gradsq")

AGGREGATE_COLUMNS = ("t", "mean_loss", "std_loss", "mean_gradsq", "std_gradsq",
                     "mean_eta", "accept_rate", "saturate_rate", "mean_b")
CURVE_COLUMNS = ("eta", "pa", "mse", "r_star", "pa_stderr", "mse_stderr")


class SchemaError(Exception):
    """An input file does not match the expected column contract."""


@dataclass
class PlotSpec:
    kind: str
    inputs: list[Path]
    out: Path
    window: int | None = None
    logy: bool = False
    metric: str = "loss"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown plot kind '{self.kind}'")
        if self.metric not in METRICS:
            raise SchemaError(f"unknown metric '{self.metric}'")
        if not self.inputs:
            raise SchemaError("no input files")
        self.inputs = [Path(p) for p in self.inputs]
        self.out = Path(self.out)
        if self.window is not None and self.window < 1:
            raise SchemaError("window must be >= 1")


def _read_table(path: Path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise SchemaError(f"{path}: empty file")
    header = lines[0].split(",")
    for col in required:
        if col not in header:
            raise SchemaError(f"{path}: missing column '{col}'")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    if data.size == 0:
        raise SchemaError(f"{path}: no data rows")
    return {name: data[:, i] for i, name in enumerate(header)}


def read_aggregate(path: Path) -> dict[str, np.ndarray]:
    return _read_table(path, AGGREGATE_COLUMNS)


def read_curve(path: Path) -> dict[str, np.ndarray]:
    return _read_table(path, CURVE_COLUMNS)


def _label(path: Path) -> str:
    name = path.stem
    return name[:-3] if name.endswith("_ma") else name


def _smooth(x: np.ndarray, window: int | None) -> np.ndarray:
    if window is None or window <= 1:
        return x
    c = np.cumsum(np.concatenate(([0.0], x)))
    t = np.arange(1, len(x) + 1)
    lo = np.maximum(t - window, 0)
    return (c[t] - c[lo]) / (t - lo)


def _band_series(ax, table, mean_col, std_col, label, window):
    t = table["t"]
    mean = _smooth(table[mean_col], window)
    std = _smooth(table[std_col], window)
    line, = ax.plot(t, mean, label=label, linewidth=1.4)
    ax.fill_between(t, mean - std, mean + std, alpha=0.25,
                    color=line.get_color(), linewidth=0)


def _metric_cols(metric: str) -> tuple[str, str, str]:
    if metric == "gradsq":
        return "mean_gradsq", "std_gradsq", "mean squared gradient norm"
    return "mean_loss", "std_loss", "loss"


def build_figure(spec: PlotSpec) -> plt.Figure:
    """Assemble the figure without touching the filesystem output."""
    if spec.kind == "trajectory":
        mean_col, std_col, ylabel = _metric_cols(spec.metric)
        fig, ax = plt.subplots(figsize=(7.0, 4.4))
        for path in spec.inputs:
            _band_series(ax, read_aggregate(path), mean_col, std_col,
                         _label(path), spec.window)
        ax.set_xlabel("round")
        ax.set_ylabel(ylabel)
        if spec.logy:
            ax.set_yscale("log")
        ax.legend()
        ax.grid(alpha=0.3)
    elif spec.kind == "eta-trace":
        fig, ax = plt.subplots(figsize=(7.0, 4.4))
        for path in spec.inputs:
            table = read_aggregate(path)
            ax.plot(table["t"], _smooth(table["mean_eta"], spec.window),
                    label=_label(path), linewidth=1.4)
        ax.set_xlabel("round")
        ax.set_ylabel("acceptance threshold")
        if spec.logy:
            ax.set_yscale("log")
        ax.legend()
        ax.grid(alpha=0.3)
    elif spec.kind == "curve":
        fig, (ax_p, ax_m) = plt.subplots(1, 2, figsize=(10.0, 4.2))
        for path in spec.inputs:
            table = read_curve(path)
            style = dict(marker="o", markersize=3, linewidth=1.2,
                         label=_label(path))
            ax_p.plot(table["eta"], table["pa"], **style)
            ax_m.plot(table["eta"], table["mse"], **style)
        ax_p.set_xlabel("threshold")
        ax_p.set_ylabel("acceptance probability")
        ax_m.set_xlabel("threshold")
        ax_m.set_ylabel("conditional squared error")
        if spec.logy:
            ax_m.set_yscale("log")
        for ax in (ax_p, ax_m):
            ax.legend()
            ax.grid(alpha=0.3)
    else:  # sensitivity
        mean_col, std_col, ylabel = _metric_cols(spec.metric)
        fig, (ax_l, ax_e) = plt.subplots(1, 2, figsize=(10.0, 4.2))
        for path in spec.inputs:
            table = read_aggregate(path)
            _band_series(ax_l, table, mean_col, std_col, _label(path),
                         spec.window)
            ax_e.plot(table["t"], _smooth(table["mean_eta"], spec.window),
                      label=_label(path), linewidth=1.4)
        ax_l.set_xlabel("round")
        ax_l.set_ylabel(ylabel)
        if spec.logy:
            ax_l.set_yscale("log")
        ax_e.set_xlabel("round")
        ax_e.set_ylabel("acceptance threshold")
        for ax in (ax_l, ax_e):
            ax.legend()
            ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def render(spec: PlotSpec) -> Path:
    """Write the figure; deterministic bytes for identical inputs."""
    fig = build_figure(spec)
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(spec.out, dpi=120)
    finally:
        plt.close(fig)
    return spec.out
