"""Rendering of simulator results: trajectories with deviation bands,
threshold traces, equilibrium curves, and hyperparameter-sweep panels."""

from .plots import (AGGREGATE_COLUMNS, CURVE_COLUMNS, KINDS, METRICS, PlotSpec,
                    SchemaError, build_figure, read_aggregate, read_curve, render)

__version__ = "0.1.0"

__all__ = ["AGGREGATE_COLUMNS", "CURVE_COLUMNS", "KINDS", "METRICS", "PlotSpec",
           "SchemaError", "build_figure", "read_aggregate", "read_curve",
           "render"]
